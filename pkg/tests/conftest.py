import pytest

ACCEPTANCE = []


@pytest.fixture
def acceptance():
    def record(number, name, ok, detail=""):
        ACCEPTANCE.append((number, name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] AC{number} {name}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  AC{number:<3} {name}  {detail}")
