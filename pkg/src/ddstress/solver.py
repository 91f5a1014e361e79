"""Equilibrium solve, Frobenius-Voronoi data projection and the L^p objective.

The two constraints (balance and vanishing divergence-free part) pin down the
stress uniquely, so the data-driven problem splits into one linear solve and an
independent pointwise nearest-neighbour search over the data set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    FROB_WEIGHTS,
    InvalidArgument,
    SolverConfig,
    StressDataset,
    SymTensorField,
    VectorField,
    lp_norm_tensor,
)
from .operators import (
    NumericFailure,
    OperatorBundle,
    check_balanced,
    pi,
    pi_many,
    solve_rigid_free,
    weak_div,
)


class BalanceViolation(ValueError):
    """The load pairs nontrivially with some rigid motion."""

    def __init__(self, defects, tol):
        self.defects = np.asarray(defects, dtype=float)
        super().__init__(
            "load is not balanced: rigid defects "
            + ", ".join(f"{d:.6e}" for d in self.defects)
            + f" exceed tolerance {tol:g}"
        )


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    v: VectorField
    s_f: SymTensorField
    residual_div: float
    residual_pi: float
    stats: dict = field(default_factory=dict)


def solve_equilibrium(bundle: OperatorBundle, f: VectorField, config: SolverConfig = SolverConfig()) -> EquilibriumResult:
    """Equilibrated stress ``s_f = sym_grad v`` with ``K v = M f`` on the rigid complement."""
    ok, defects = check_balanced(bundle, f, config.tol_balance)
    if not ok:
        raise BalanceViolation(defects, config.tol_balance)
    mesh = bundle.mesh
    # drop the admissible (below tolerance) rigid part so K u = M f is consistent
    fb = bundle.remove_rigid(f.flat)
    u, stats = solve_rigid_free(bundle, bundle.M @ fb, config.method, config.tol_solve)
    s_f = SymTensorField(mesh, (bundle.G @ u).reshape(-1, 3))

    # weak_div(s_f) = -M^{-1} K u
    d = -bundle.mass_lu.solve(bundle.K @ u)
    f_norm = bundle.vector_norm2(fb)
    res_div = bundle.vector_norm2(d + fb) / (f_norm if f_norm > 0 else 1.0)
    s_norm = bundle.tensor_norm2(s_f.flat)
    res_pi = bundle.tensor_norm2(pi(bundle, s_f).flat) / (s_norm if s_norm > 0 else 1.0)
    stats = dict(stats, defects=[float(x) for x in defects])
    if not (res_div <= config.tol_solve and res_pi <= config.tol_solve):
        raise NumericFailure("equilibrium residuals above tolerance", max(res_div, res_pi))
    return EquilibriumResult(VectorField(mesh, u.reshape(-1, 2)), s_f, float(res_div), float(res_pi), stats)


def minimal_norm_probe(bundle: OperatorBundle, s_f: SymTensorField, p, trials=1000, seed=0, line_search=True) -> dict:
    """Probe ``||s_f + n||_p - ||s_f||_p`` over random divergence-free ``n``.

    Directions are projector images of Gaussian tensor fields, rescaled to a
    log-uniform amplitude in ``[1e-3, 1] * ||s_f||_2``. With ``line_search`` the
    minimum over ``t in [-1, 1]`` of ``||s_f + t n||_p - ||s_f||_p`` is also
    recorded per direction.
    """
    rng = np.random.default_rng(seed)
    mesh = bundle.mesh
    base = lp_norm_tensor(s_f, p)
    scale = bundle.tensor_norm2(s_f.flat) or 1.0
    areas = mesh.areas

    def norm_of(vals):
        pw = np.sqrt((vals.reshape(-1, 3) ** 2) @ FROB_WEIGHTS)
        if p == math.inf:
            return pw.max()
        return np.dot(areas, pw**p) ** (1.0 / p)

    increases, line_mins = [], []
    chunk = 100
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        N = pi_many(bundle, rng.standard_normal((bundle.n_tensor, k)))
        amps = scale * 10.0 ** rng.uniform(-3.0, 0.0, k)
        for j in range(k):
            n = N[:, j]
            n *= amps[j] / bundle.tensor_norm2(n)
            increases.append(norm_of(s_f.flat + n) - base)
            if line_search:
                r = minimize_scalar(lambda t: norm_of(s_f.flat + t * n), bounds=(-1.0, 1.0),
                                    method="bounded", options={"xatol": 1e-10})
                line_mins.append(min(r.fun, norm_of(s_f.flat + n), base) - base)
        done += k
    increases = np.array(increases)
    tol = 1e-12 * (1.0 + base)
    report = {
        "p": float(p),
        "trials": int(trials),
        "seed": int(seed),
        "norm_s_f": float(base),
        "signed_min": float(increases.min()),
        "violations": int((increases < -tol).sum()),
    }
    if line_search:
        report["line_min"] = float(min(line_mins))
    return report


@dataclass(frozen=True, eq=False)
class VoronoiLabeling:
    labels: np.ndarray
    ties: np.ndarray
    label_measures: np.ndarray
    tie_measure: float


def _dist2(s: SymTensorField, dataset: StressDataset) -> np.ndarray:
    d2 = np.empty((s.mesh.n_triangles, len(dataset)))
    for m, state in enumerate(dataset.states):
        d2[:, m] = ((s.values - state) ** 2) @ FROB_WEIGHTS
    return d2


def nearest_select(s: SymTensorField, dataset: StressDataset, tie_tol=1e-12):
    """Pointwise nearest data state, smallest index among (near-)minimizers.

    Returns ``(s_tilde, labeling)``.
    """
    if dataset is None or len(dataset) == 0:
        raise InvalidArgument("dataset is empty")
    d2 = _dist2(s, dataset)
    dmin = d2.min(axis=1)
    near = d2 - dmin[:, None] <= tie_tol * (1.0 + dmin[:, None])
    labels = np.argmax(near, axis=1)
    dl = d2[np.arange(d2.shape[0]), labels]
    close = np.abs(d2 - dl[:, None]) <= tie_tol * (1.0 + dl[:, None])
    ties = close.sum(axis=1) > 1
    areas = s.mesh.areas
    measures = np.bincount(labels, weights=areas, minlength=len(dataset))
    labeling = VoronoiLabeling(labels, ties, measures, float(areas[ties].sum()))
    return SymTensorField(s.mesh, dataset.states[labels]), labeling


def tie_set_measure(labeling: VoronoiLabeling) -> float:
    return labeling.tie_measure


def objective(s: SymTensorField, s_tilde: SymTensorField, p) -> float:
    """``(1/p) * sum_T area_T |s_T - s_tilde_T|_F^p``."""
    if s.mesh is not s_tilde.mesh:
        raise InvalidArgument("fields live on different meshes")
    p = float(p)
    if not (1.0 < p < math.inf):
        raise InvalidArgument(f"p must lie in (1, inf), got {p}")
    return lp_norm_tensor(s - s_tilde, p) ** p / p


@dataclass(frozen=True, eq=False)
class DDSolution:
    equilibrium: EquilibriumResult
    s_tilde: SymTensorField
    labeling: VoronoiLabeling
    J: float
    p: float

    @property
    def s_f(self):
        return self.equilibrium.s_f


def solve_ddspn0(bundle: OperatorBundle, f: VectorField, dataset: StressDataset,
                 config: SolverConfig = SolverConfig()) -> DDSolution:
    """Equilibrium solve, then nearest data state per triangle, then the objective."""
    eq = solve_equilibrium(bundle, f, config)
    s_tilde, labeling = nearest_select(eq.s_f, dataset, config.tie_tol)
    return DDSolution(eq, s_tilde, labeling, objective(eq.s_f, s_tilde, config.p), config.p)


def manufactured_sine_stress(mesh) -> SymTensorField:
    """Traction-free smooth stress ``(sin(pi x/lx), sin(pi y/ly), sin(pi x/lx) sin(pi y/ly))``
    sampled at triangle centroids."""
    def fun(x, y):
        sx, sy = np.sin(np.pi * x / mesh.lx), np.sin(np.pi * y / mesh.ly)
        return sx, sy, sx * sy
    return SymTensorField.from_function(mesh, fun)


def manufactured_sine_load(bundle: OperatorBundle) -> VectorField:
    """Balanced load ``f = -weak_div(s*)`` for the sampled manufactured stress."""
    return -weak_div(bundle, manufactured_sine_stress(bundle.mesh))
