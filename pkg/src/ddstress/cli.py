"""Batch front end.

Exit codes: 0 ok, 1 bad config or arguments, 2 unbalanced load, 3 numeric
failure, 4 dense size guard exceeded.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import io
from .core import InvalidArgument, SolverConfig, StressDataset, VectorField, build_mesh
from .inequality import korn_ratio_sweep, sweep
from .operators import (
    NumericFailure,
    SizeGuardExceeded,
    build_operators,
    check_balanced,
    format_report,
    green_statistics,
    project_balanced,
    subspace_diagnostics,
)
from .solver import BalanceViolation, manufactured_sine_load, minimal_norm_probe, solve_ddspn0

EXIT_OK, EXIT_CONFIG, EXIT_BALANCE, EXIT_NUMERIC, EXIT_GUARD = 0, 1, 2, 3, 4

LOAD_PRESETS = ("zero", "manufactured-sine")
_TOP_KEYS = {"domain", "p", "load", "dataset", "tolerances", "solver", "seed", "output", "levels", "probe_trials"}
_DOMAIN_KEYS = {"lx", "ly", "nx", "ny"}
_TOL_KEYS = {"tol_balance", "tol_solve", "tie_tol"}


class ConfigError(InvalidArgument):
    pass


def _num(d, key, where, kind=float, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return kind(v)


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


@dataclass
class ProblemConfig:
    lx: float
    ly: float
    nx: int
    ny: int
    p: float = 2.0
    load: object = "zero"
    dataset: object = None
    tol_balance: float = 1e-10
    tol_solve: float = 1e-10
    tie_tol: float = 1e-12
    solver: str = "direct"
    seed: int = 0
    output: str = "out"
    levels: int = 4
    probe_trials: int = 0
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @classmethod
    def from_dict(cls, d, base_dir=Path(".")):
        _reject_unknown(d, _TOP_KEYS, "config")
        dom = d.get("domain")
        if dom is None:
            raise ConfigError("config.domain: missing")
        _reject_unknown(dom, _DOMAIN_KEYS, "domain")
        tol = d.get("tolerances", {})
        _reject_unknown(tol, _TOL_KEYS, "tolerances")

        load = d.get("load", "zero")
        if isinstance(load, str):
            if load not in LOAD_PRESETS:
                raise ConfigError(f"config.load: unknown preset {load!r} (known: {', '.join(LOAD_PRESETS)})")
        else:
            _reject_unknown(load, {"csv"}, "load")
            if not isinstance(load.get("csv"), str):
                raise ConfigError("load.csv: expected a path string")
            load = {"csv": load["csv"]}

        data = d.get("dataset")
        if isinstance(data, list):
            try:
                data = [[float(x) for x in row] for row in data]
            except (TypeError, ValueError):
                raise ConfigError("config.dataset: expected a list of [sxx, syy, sxy] triples") from None
            if any(len(row) != 3 for row in data):
                raise ConfigError("config.dataset: every entry needs exactly 3 components")
        elif data is not None and not isinstance(data, str):
            raise ConfigError("config.dataset: expected a list of triples or a CSV path")

        solver = d.get("solver", "direct")
        if solver not in ("direct", "cg"):
            raise ConfigError(f"config.solver: expected 'direct' or 'cg', got {solver!r}")
        output = d.get("output", "out")
        if not isinstance(output, str):
            raise ConfigError("config.output: expected a path string")

        cfg = cls(
            lx=_num(dom, "lx", "domain", default=1.0),
            ly=_num(dom, "ly", "domain", default=1.0),
            nx=_num(dom, "nx", "domain", int),
            ny=_num(dom, "ny", "domain", int),
            p=_num(d, "p", "config", default=2.0),
            load=load,
            dataset=data,
            tol_balance=_num(tol, "tol_balance", "tolerances", default=1e-10),
            tol_solve=_num(tol, "tol_solve", "tolerances", default=1e-10),
            tie_tol=_num(tol, "tie_tol", "tolerances", default=1e-12),
            solver=solver,
            seed=_num(d, "seed", "config", int, default=0),
            output=output,
            levels=_num(d, "levels", "config", int, default=4),
            probe_trials=_num(d, "probe_trials", "config", int, default=0),
            base_dir=Path(base_dir),
        )
        try:
            build_mesh(cfg.nx, cfg.ny, cfg.lx, cfg.ly)
            cfg.solver_config()
        except InvalidArgument as exc:
            raise ConfigError(f"config: {exc}") from None
        if cfg.levels < 1 or cfg.probe_trials < 0:
            raise ConfigError("config: levels must be >= 1 and probe_trials >= 0")
        return cfg

    @classmethod
    def load_file(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(d, path.parent)

    def to_dict(self):
        return {
            "domain": {"lx": self.lx, "ly": self.ly, "nx": self.nx, "ny": self.ny},
            "p": self.p,
            "load": self.load,
            "dataset": self.dataset,
            "tolerances": {"tol_balance": self.tol_balance, "tol_solve": self.tol_solve, "tie_tol": self.tie_tol},
            "solver": self.solver,
            "seed": self.seed,
            "output": self.output,
            "levels": self.levels,
            "probe_trials": self.probe_trials,
        }

    def solver_config(self):
        return SolverConfig(p=self.p, tol_balance=self.tol_balance, tol_solve=self.tol_solve,
                            tie_tol=self.tie_tol, method=self.solver)

    def resolve(self, rel):
        rel = Path(rel)
        return rel if rel.is_absolute() else self.base_dir / rel

    def mesh(self):
        return build_mesh(self.nx, self.ny, self.lx, self.ly)

    def build_load(self, bundle) -> VectorField:
        if self.load == "zero":
            return VectorField.zeros(bundle.mesh)
        if self.load == "manufactured-sine":
            return manufactured_sine_load(bundle)
        return io.read_vector_csv(self.resolve(self.load["csv"]), bundle.mesh)

    def build_dataset(self) -> StressDataset:
        if self.dataset is None:
            raise ConfigError("config.dataset: required for this command")
        if isinstance(self.dataset, str):
            return io.read_dataset_csv(self.resolve(self.dataset))
        return StressDataset(self.dataset)


def _timestamp():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _outdir(cfg, args):
    out = Path(args.out) if args.out else cfg.resolve(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(cfg, args):
    out = _outdir(cfg, args)
    bundle = build_operators(cfg.mesh())
    f = cfg.build_load(bundle)
    dataset = cfg.build_dataset()
    summary = {"command": "solve", "config": cfg.to_dict(), "timestamp": _timestamp(),
               "n_nodes": bundle.mesh.n_nodes, "n_triangles": bundle.mesh.n_triangles}
    try:
        sol = solve_ddspn0(bundle, f, dataset, cfg.solver_config())
    except BalanceViolation as exc:
        summary.update(status="balance-violation", message=str(exc), defects=exc.defects.tolist())
        io.dump_json(out / "summary.json", summary)
        print(exc, file=sys.stderr)
        return EXIT_BALANCE
    except NumericFailure as exc:
        summary.update(status="numeric-failure", message=str(exc), residual=exc.residual)
        io.dump_json(out / "summary.json", summary)
        print(exc, file=sys.stderr)
        return EXIT_NUMERIC
    eq = sol.equilibrium
    summary.update(
        status="ok",
        p=sol.p,
        J=sol.J,
        residual_div=eq.residual_div,
        residual_pi=eq.residual_pi,
        defects=eq.stats["defects"],
        solver={k: v for k, v in eq.stats.items() if k != "defects"},
        tie_set_measure=sol.labeling.tie_measure,
        label_measures=sol.labeling.label_measures.tolist(),
        domain_measure=float(bundle.mesh.areas.sum()),
        p_dependence="s_f and the data selection are p-independent; only J depends on p",
    )
    if cfg.probe_trials:
        summary["minimal_norm_probe"] = minimal_norm_probe(bundle, sol.s_f, cfg.p, cfg.probe_trials, cfg.seed)
    io.dump_json(out / "summary.json", summary)
    io.write_solution_csv(out / "fields.csv", sol)
    io.write_vtk(out / "solution.vtk", bundle.mesh, io.solution_cell_data(sol))
    print(f"J = {float(sol.J)!r}  residual_div = {eq.residual_div:.3e}  residual_pi = {eq.residual_pi:.3e}")
    return EXIT_OK


def cmd_diagnose(cfg, args):
    bundle = build_operators(cfg.mesh())
    report = subspace_diagnostics(bundle)
    report.update(green_statistics(bundle, seed=cfg.seed))
    out = _outdir(cfg, args)
    text = format_report(report)
    (out / "diagnostics.txt").write_text(text)
    io.dump_json(out / "diagnostics.json", {"command": "diagnose", "config": cfg.to_dict(),
                                             "timestamp": _timestamp(), "diagnostics": report})
    sys.stdout.write(text)
    return EXIT_OK


def _parse_p(text):
    if text is None:
        return 2.0
    t = str(text).strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"--p: cannot parse {text!r}") from None


def cmd_inequality(cfg, args):
    which = args.which
    p = _parse_p(args.p)
    if which == "korn-ratio":
        if p not in (1.0, 2.0, math.inf):
            raise ConfigError(f"--p: korn-ratio supports 1, 2 or inf, got {args.p}")
        report = korn_ratio_sweep(cfg.nx, cfg.ny, p, cfg.lx, cfg.ly, cfg.levels, seed=cfg.seed)
        residuals = None
    elif which in ("poincare", "korn", "infsup"):
        if p != 2.0:
            raise ConfigError(f"--p: {which} is only estimated at p = 2")
        report = sweep(which, cfg.nx, cfg.ny, cfg.lx, cfg.ly, cfg.levels)
        residuals = report.extra["residuals"]
    else:
        raise ConfigError(f"--which: expected poincare, korn, infsup or korn-ratio, got {which!r}")
    out = _outdir(cfg, args)
    io.write_sweep_csv(out / "sweep.csv", report.history, residuals)
    payload = {"command": "inequality", "which": which, "p": "inf" if p == math.inf else p,
               "config": cfg.to_dict(), "timestamp": _timestamp(), "report": report.as_dict()}
    io.dump_json(out / "inequality.json", payload)
    for h, v in report.history:
        print(f"h = {h:.6g}  value = {float(v)!r}")
    return EXIT_OK


def cmd_balance(cfg, args):
    bundle = build_operators(cfg.mesh())
    f = cfg.build_load(bundle)
    ok, defects = check_balanced(bundle, f, cfg.tol_balance)
    for name, d in zip(("translation_x", "translation_y", "rotation"), defects):
        print(f"{name} {float(d)!r}")
    print(f"balanced {str(ok).lower()}")
    if args.write_balanced:
        out = _outdir(cfg, args)
        io.write_vector_csv(out / "balanced_load.csv", project_balanced(bundle, f))
    return EXIT_OK if ok else EXIT_BALANCE


COMMANDS = {"solve": cmd_solve, "diagnose": cmd_diagnose, "inequality": cmd_inequality, "balance": cmd_balance}


def build_parser():
    ap = argparse.ArgumentParser(prog="ddstress", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON problem configuration")
    ap.add_argument("--out", help="output directory (overrides config.output)")
    ap.add_argument("--which", help="inequality: poincare, korn, infsup or korn-ratio")
    ap.add_argument("--p", help="inequality: exponent (1, 2 or inf)")
    ap.add_argument("--seed", type=int, help="overrides config.seed")
    ap.add_argument("--write-balanced", action="store_true", help="balance: write the projected load")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = ProblemConfig.load_file(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "inequality" and not args.which:
            raise ConfigError("--which: required for the inequality command")
        return COMMANDS[args.command](cfg, args)
    except SizeGuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
