"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed with ``-s`` and summarized at the
end of the run) and then asserts the same condition.
"""
import json
import math
import time

import numpy as np
import scipy.linalg as la

from ddstress.cli import main
from ddstress.core import SolverConfig, StressDataset, SymTensorField, VectorField, build_mesh, inner_tensor
from ddstress.inequality import korn_constant, korn_forms, korn_ratio_explorer, korn_ratio_sweep, nested_levels, sweep
from ddstress.operators import build_operators, check_balanced, pi, subspace_diagnostics, sym_grad, weak_div
from ddstress.solver import (
    manufactured_sine_load,
    minimal_norm_probe,
    nearest_select,
    solve_ddspn0,
    solve_equilibrium,
)

from oracles import dense_mass, dense_rigid, dense_saddle, dense_sym_grad, dense_weights

FW = np.array([1.0, 1.0, 2.0])


def test_ac1_green_identity(acceptance):
    t0 = time.perf_counter()
    b = build_operators(build_mesh(64, 64))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        s = SymTensorField(b.mesh, rng.standard_normal((b.mesh.n_triangles, 3)))
        v = VectorField(b.mesh, rng.standard_normal((b.mesh.n_nodes, 2)))
        gv = sym_grad(b, v)
        d = weak_div(b, s)
        res = abs(d.flat @ (b.M @ v.flat) + inner_tensor(s, gv))
        worst = max(worst, res / (b.tensor_norm2(s.flat) * b.tensor_norm2(gv.flat)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt <= 10.0
    acceptance(1, "discrete Green identity", ok, f"max rel residual {worst:.2e} (<= 1e-12), {dt:.1f}s (<= 10s)")
    assert ok


def test_ac2_helmholtz_weyl(acceptance):
    t0 = time.perf_counter()
    lines, ok = [], True
    rng = np.random.default_rng(7)
    for n in (1, 2, 3, 4):
        b = build_operators(build_mesh(n, n))
        rep = subspace_diagnostics(b)
        s = SymTensorField(b.mesh, rng.standard_normal((b.mesh.n_triangles, 3)))
        p1 = pi(b, s)
        idem = b.tensor_norm2((pi(b, p1) - p1).flat) / b.tensor_norm2(p1.flat)
        good = (rep["dim_M"] == 2 * b.mesh.n_nodes - 3
                and rep["dim_M"] + rep["dim_N"] == 3 * b.mesh.n_triangles
                and idem <= 1e-10 and rep["min_sv_concat"] > 1e-8)
        ok &= good
        lines.append(f"{n}x{n}: dims ({rep['dim_M']},{rep['dim_N']}) idem {idem:.1e} "
                     f"min sv {rep['min_sv_concat']:.2e}")
    dt = time.perf_counter() - t0
    ok &= dt <= 30.0
    acceptance(2, "Helmholtz-Weyl decomposition", ok, "; ".join(lines) + f"; {dt:.1f}s (<= 30s)")
    assert ok


def test_ac3_equilibrium(acceptance):
    t0 = time.perf_counter()
    b = build_operators(build_mesh(16, 16))
    f = manufactured_sine_load(b)
    a = solve_equilibrium(b, f, SolverConfig(method="direct"))
    c = solve_equilibrium(b, f, SolverConfig(method="cg"))
    # recompute the residuals independently of the solver's own report
    f_norm = b.vector_norm2(f.flat)
    res_div = b.vector_norm2((weak_div(b, a.s_f) + f).flat) / f_norm
    res_pi = b.tensor_norm2(pi(b, a.s_f).flat) / b.tensor_norm2(a.s_f.flat)
    path = b.tensor_norm2((a.s_f - c.s_f).flat) / b.tensor_norm2(a.s_f.flat)

    m2 = build_mesh(2, 2)
    b2 = build_operators(m2)
    f2 = manufactured_sine_load(b2)
    G, w, M = dense_sym_grad(m2), dense_weights(m2), dense_mass(m2)
    s_ref = G @ dense_saddle(G, w, M, dense_rigid(m2, M), M @ f2.flat)
    dense_err = np.abs(solve_equilibrium(b2, f2).s_f.flat - s_ref).max()
    dt = time.perf_counter() - t0
    ok = res_div <= 1e-10 and res_pi <= 1e-10 and path <= 1e-8 and dense_err <= 1e-10 and dt <= 30.0
    acceptance(3, "equilibrium existence/uniqueness", ok,
               f"div {res_div:.1e}, pi {res_pi:.1e}, direct-vs-cg {path:.1e}, 2x2 dense {dense_err:.1e}, {dt:.1f}s")
    assert ok


def test_ac4_balance_gate(acceptance):
    b = build_operators(build_mesh(1, 1))
    ok1, d = check_balanced(b, VectorField.from_function(b.mesh, lambda x, y: (1.0, 0.0)))
    err = abs(abs(d[0]) - 1.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    passed = True
    for n in (1, 2, 5, 16):
        bn = build_operators(build_mesh(n, n, 1.3, 0.7))
        for _ in range(10):
            f = -weak_div(bn, SymTensorField(bn.mesh, rng.standard_normal((bn.mesh.n_triangles, 3))))
            good, dd = check_balanced(bn, f, 1e-12)
            passed &= good
            worst = max(worst, np.abs(dd).max())
    ok = (not ok1) and err <= 1e-12 and passed
    acceptance(4, "balance gate", ok, f"constant load rejected, |defect|-1 = {err:.1e}; "
                                      f"-weak_div loads max defect {worst:.1e} (<= 1e-12)")
    assert ok


def test_ac5_minimal_norm(acceptance):
    b = build_operators(build_mesh(8, 8))
    s_f = solve_equilibrium(b, manufactured_sine_load(b)).s_f
    rep = minimal_norm_probe(b, s_f, 2.0, trials=1000, seed=0, line_search=False)
    others = {p: minimal_norm_probe(b, s_f, p, trials=1000, seed=0) for p in (1.5, 3.0)}
    note = ", ".join(f"p={p:g} signed min {r['signed_min']:.2e} line min {r['line_min']:.2e}"
                     for p, r in others.items())
    ok = rep["violations"] == 0 and rep["signed_min"] >= -1e-12
    acceptance(5, "minimal norm p=2", ok, f"{rep['violations']} violations in 1000, signed min "
                                          f"{rep['signed_min']:.2e}; reported only: {note}")
    assert ok


def test_ac6_voronoi(acceptance):
    t0 = time.perf_counter()
    mesh = build_mesh(32, 32)
    rng = np.random.default_rng(11)
    all_match, generic_zero = True, True
    for _ in range(10):
        k = int(rng.integers(1, 9))
        ds = StressDataset(rng.standard_normal((k, 3)))
        s = SymTensorField(mesh, rng.standard_normal((mesh.n_triangles, 3)))
        _, lab = nearest_select(s, ds)
        d2 = np.stack([((s.values - st) ** 2) @ FW for st in ds.states], axis=1)
        brute = np.array([min(range(k), key=lambda m: (row[m], m)) for row in d2])
        all_match &= bool(np.array_equal(lab.labels, brute))
        generic_zero &= lab.tie_measure == 0.0
    ds = StressDataset([[1.0, 0.0, 0.5], [-1.0, 2.0, 0.0]])
    vals = rng.standard_normal((mesh.n_triangles, 3)) * 4
    vals[5] = 0.5 * (ds.states[0] + ds.states[1])
    _, lab = nearest_select(SymTensorField(mesh, vals), ds)
    tie_ok = lab.labels[5] == 0 and bool(lab.ties[5])
    dt = time.perf_counter() - t0
    ok = all_match and tie_ok and generic_zero and dt <= 10.0
    acceptance(6, "Voronoi selection", ok, f"brute force match {all_match}, midpoint tie -> label "
                                          f"{lab.labels[5]} flagged {bool(lab.ties[5])}, generic tie "
                                          f"measure 0 {generic_zero}, {dt:.1f}s (<= 10s)")
    assert ok


def test_ac7_partition(acceptance):
    worst = 0.0
    rng = np.random.default_rng(5)
    cases = 0
    for n, lx, ly in ((1, 1.0, 1.0), (4, 2.0, 0.5), (16, 1.0, 1.0), (7, 0.3, 1.9)):
        b = build_operators(build_mesh(n, n, lx, ly))
        loads = [VectorField.zeros(b.mesh), manufactured_sine_load(b)]
        for f in loads:
            for k in (1, 3, 8):
                sol = solve_ddspn0(b, f, StressDataset(rng.standard_normal((k, 3))))
                worst = max(worst, abs(sol.labeling.label_measures.sum() - b.mesh.area))
                cases += 1
    # all-tied instance
    b = build_operators(build_mesh(4, 4))
    sol = solve_ddspn0(b, VectorField.zeros(b.mesh), StressDataset([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    worst = max(worst, abs(sol.labeling.label_measures.sum() - b.mesh.area))
    ok = worst <= 1e-12
    acceptance(7, "partition property", ok, f"max |sum |Omega_i| - |Omega|| = {worst:.1e} over {cases + 1} solves")
    assert ok


def test_ac8_poincare(acceptance):
    t0 = time.perf_counter()
    rep = sweep("poincare", 64, 64, levels=4)
    dt = time.perf_counter() - t0
    final = rep.history[-1][1]
    rel = abs(final - 1 / math.pi) * math.pi
    ok = rel <= 0.02 and dt <= 60.0
    hist = ", ".join(f"{v:.5f}" for _, v in rep.history)
    acceptance(8, "Poincare constant", ok, f"8..64: {hist}; rel err {rel:.2%} (<= 2%), {dt:.1f}s (<= 60s)")
    assert ok


def test_ac9_korn_p2(acceptance):
    t0 = time.perf_counter()
    values, oracle_err = [], 0.0
    for n, _ in nested_levels(16, 16, 4):
        b = build_operators(build_mesh(n, n))
        rep = korn_constant(b)
        values.append(rep.value)
        # dense generalized eigensolve on an independent complement basis
        num, K = korn_forms(b)
        Q = la.null_space(b.R.T)
        ref = math.sqrt(la.eigh(Q.T @ num @ Q, Q.T @ K @ Q, eigvals_only=True).max())
        oracle_err = max(oracle_err, abs(ref - rep.value) / ref)
    dt = time.perf_counter() - t0
    change = abs(values[-2] - values[-1]) / values[-1]
    ok = min(values) >= 1.0 and change <= 0.05 and oracle_err <= 1e-8 and dt <= 120.0
    hist = ", ".join(f"{v:.4f}" for v in values)
    acceptance(9, "Korn p=2 constant", ok, f"2..16: {hist}; min >= 1 {min(values) >= 1.0}; "
                                           f"finest-pair change {change:.2%} (<= 5%); oracle {oracle_err:.1e}, {dt:.1f}s")
    assert ok


def test_ac10_korn_failure_probe(acceptance):
    b = build_operators(build_mesh(8, 8))
    C = korn_constant(b).value
    ex = korn_ratio_explorer(b, 2, iterations=500, starts=8, seed=0).value
    rel = abs(ex - C) / C
    rep = korn_ratio_sweep(32, 32, 1, levels=4, iterations=500, starts=8, seed=0)
    vals = [v for _, v in rep.history]
    monotone = all(b_ >= a_ for a_, b_ in zip(vals, vals[1:]))
    hist = ", ".join(f"{v:.3f}" for v in vals)
    ok = rel <= 0.05
    acceptance(10, "Korn failure probe", ok, f"p=2 explorer {ex:.5f} vs eigen {C:.5f} ({rel:.1e}, <= 5%); "
                                             f"observational p=1 4..32: {hist} nondecreasing {monotone}")
    assert ok


def test_ac11_cli(acceptance, tmp_path, capsys):
    base = {"domain": {"lx": 1.0, "ly": 1.0, "nx": 8, "ny": 8}, "p": 3.0, "load": "manufactured-sine",
            "dataset": [[a, c, 0.0] for a in (-1.0, 0.0, 1.0) for c in (-1.0, 0.0, 1.0)],
            "seed": 9, "probe_trials": 100, "output": "out"}

    def cfg(name, **over):
        d = dict(base, **over)
        (tmp_path / name).write_text(json.dumps(d))
        return str(tmp_path / name)

    path = cfg("a.json")
    codes = [main(["solve", "--config", path, "--out", str(tmp_path / f"r{k}")]) for k in range(2)]
    texts = []
    for k in range(2):
        d = json.loads((tmp_path / f"r{k}" / "summary.json").read_text())
        d.pop("timestamp")
        texts.append(json.dumps(d, indent=2, sort_keys=True))
    identical = codes == [0, 0] and texts[0] == texts[1]

    (tmp_path / "const.csv").write_text("x,y,fx,fy\n" + "".join(
        f"{x!r},{y!r},1.0,0.0\n" for x, y in build_mesh(8, 8).nodes.tolist()))
    exits = {
        1: main(["solve", "--config", cfg("bad.json", unknown=1)]),
        2: main(["solve", "--config", cfg("bal.json", load={"csv": "const.csv"}), "--out", str(tmp_path / "b")]),
        3: main(["solve", "--config", cfg("num.json", tolerances={"tol_solve": 1e-30}), "--out", str(tmp_path / "n")]),
        4: main(["diagnose", "--config", cfg("big.json", domain={"nx": 30, "ny": 30}), "--out", str(tmp_path / "g")]),
    }
    contract = all(k == v for k, v in exits.items())
    ok = identical and contract
    acceptance(11, "CLI determinism and exit codes", ok,
               f"summary.json identical {identical}; exit codes {exits} (expected key == value)")
    assert ok
