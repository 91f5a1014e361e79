"""Estimates of the Poincare, Korn (second) and inf-sup constants.

The p = 2 constants come from dense generalized eigen/singular value problems.
For p in {1, inf}, where Korn's inequality is known to fail, a multi-start
ascent on the gradient ratio gives observational evidence of growth under
refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.optimize import minimize, minimize_scalar

from .core import FROB_WEIGHTS, InvalidArgument, Mesh, VectorField, build_mesh, scalar_mass_matrix
from .operators import (
    DENSE_GUARD,
    OperatorBundle,
    build_operators,
    check_guard,
    infsup_value,
    scalar_stiffness_matrix,
    skew_grad_matrix,
)


@dataclass
class ConstantReport:
    name: str
    h: float
    value: float
    residual: float
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name,
            "h": self.h,
            "value": self.value,
            "residual": self.residual,
            "history": [[float(h), float(v)] for h, v in self.history],
        }


def nested_levels(nx, ny, levels):
    """Mesh sizes ``(nx / 2^k, ny / 2^k)`` from coarsest to finest."""
    out = []
    for k in reversed(range(levels)):
        d = 2**k
        if nx % d or ny % d:
            raise InvalidArgument(f"{nx}x{ny} cannot be halved {levels - 1} times")
        out.append((nx // d, ny // d))
    return out


def poincare_constant(mesh: Mesh, guard=DENSE_GUARD) -> ConstantReport:
    """``1 / sqrt(lambda_1)`` for the smallest nonzero discrete Neumann eigenvalue."""
    check_guard(mesh.n_nodes, guard)
    S = scalar_stiffness_matrix(mesh).toarray()
    Mm = scalar_mass_matrix(mesh).toarray()
    lam, vec = la.eigh(S, Mm, subset_by_index=[0, 1])
    lam1, x = lam[1], vec[:, 1]
    res = np.linalg.norm(S @ x - lam1 * (Mm @ x)) / (lam1 * np.linalg.norm(Mm @ x))
    return ConstantReport("poincare", mesh.h, float(1.0 / math.sqrt(lam1)), float(res),
                          [(mesh.h, 1.0 / math.sqrt(lam1))], {"lambda1": float(lam1)})


def korn_forms(bundle: OperatorBundle):
    """Dense ``(numerator, denominator)`` quadratic forms of the Korn ratio.

    The numerator is ``min_A ||grad u - A||^2`` over constant skew ``A``, which
    equals ``inf_w ||grad u - grad w||^2`` over rigid ``w``.
    """
    areas = bundle.mesh.areas
    Om = skew_grad_matrix(bundle.mesh)
    K = bundle.K.toarray()
    c = Om.T @ areas
    num = K + 2.0 * (Om.T @ sp.diags(areas) @ Om).toarray() - 2.0 * np.outer(c, c) / areas.sum()
    return num, K


def korn_constant(bundle: OperatorBundle, guard=DENSE_GUARD) -> ConstantReport:
    """Best discrete constant in ``inf_w ||grad u - grad w||_2 <= C ||sym_grad u||_2``."""
    check_guard(bundle.n_vector, guard)
    num, K = korn_forms(bundle)
    Q = la.null_space(bundle.MR.T)
    A, B = Q.T @ num @ Q, Q.T @ K @ Q
    n = A.shape[0]
    lam, vec = la.eigh(A, B, subset_by_index=[n - 1, n - 1])
    x = vec[:, 0]
    res = np.linalg.norm(A @ x - lam[0] * (B @ x)) / (lam[0] * np.linalg.norm(B @ x))
    C = math.sqrt(lam[0])
    return ConstantReport("korn", bundle.mesh.h, C, float(res), [(bundle.mesh.h, C)],
                          {"mode": VectorField(bundle.mesh, (Q @ x).reshape(-1, 2))})


def infsup_constant(bundle: OperatorBundle, test_space="dirichlet", guard=DENSE_GUARD) -> ConstantReport:
    """Discrete inf-sup constant of the symmetric-gradient pairing at p = q = 2.

    With the default ``test_space="dirichlet"`` the test fields vanish on the
    boundary and the trial fields range over nodal fields modulo rigid motions.
    """
    beta = infsup_value(bundle, test_space, guard)
    if beta is None:
        raise InvalidArgument(f"{bundle.mesh.nx}x{bundle.mesh.ny} mesh has no interior nodes")
    return ConstantReport(f"infsup_{test_space}", bundle.mesh.h, beta, 0.0, [(bundle.mesh.h, beta)])


def sweep(which, nx, ny, lx=1.0, ly=1.0, levels=4, guard=DENSE_GUARD, **kwargs) -> ConstantReport:
    """Run a constant estimator on nested halving meshes; the last level is reported."""
    history, report = [], None
    for n, m in nested_levels(nx, ny, levels):
        mesh = build_mesh(n, m, lx, ly)
        if which == "poincare":
            report = poincare_constant(mesh, guard)
        elif which == "korn":
            report = korn_constant(build_operators(mesh), guard)
        elif which == "infsup":
            report = infsup_constant(build_operators(mesh), guard=guard, **kwargs)
        else:
            raise InvalidArgument(f"unknown constant {which!r}")
        history.append((report.h, report.value, report.residual))
    report.history = [(h, v) for h, v, _ in history]
    report.extra["residuals"] = [r for _, _, r in history]
    report.residual = max(report.extra["residuals"])
    return report


# -- ratio explorer ----------------------------------------------------------

_SURROGATE_P = 32.0


class _KornRatio:
    """``inf_A ||grad u - A||_p / ||sym_grad u||_p`` and the gradient of its log."""

    def __init__(self, bundle, p):
        self.G = bundle.G
        self.Om = skew_grad_matrix(bundle.mesh)
        self.areas = bundle.mesh.areas
        self.p = p

    def parts(self, u):
        s = (self.G @ u).reshape(-1, 3)
        return s, self.Om @ u, (s**2) @ FROB_WEIGHTS

    def _num_norm(self, c, om, a, p):
        g = np.sqrt(c + 2.0 * (om - a) ** 2)
        gm = g.max()
        if p == math.inf or gm == 0.0:
            return gm
        return gm * np.dot(self.areas, (g / gm) ** p) ** (1.0 / p)

    def best_shift(self, c, om, p):
        if p == 2.0:
            return np.dot(self.areas, om) / self.areas.sum()
        lo, hi = om.min(), om.max()
        if hi - lo <= 0.0:
            return lo
        r = minimize_scalar(lambda a: self._num_norm(c, om, a, p), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12 * max(1.0, abs(lo), abs(hi))})
        return r.x

    def value(self, u, p=None):
        p = self.p if p is None else p
        s, om, c = self.parts(u)
        a = self.best_shift(c, om, p)
        den = np.sqrt(c).max() if p == math.inf else np.dot(self.areas, c ** (p / 2.0)) ** (1.0 / p)
        if den == 0.0:
            return math.inf
        return self._num_norm(c, om, a, p) / den

    def neg_log_and_grad(self, u, p):
        s, om, c = self.parts(u)
        eps2 = 1e-24 * max(c.max(), 1e-300)
        a = self.best_shift(c, om, p)
        g2 = c + 2.0 * (om - a) ** 2 + eps2
        h2 = c + eps2
        # weights rescaled by the max entry to keep g^p finite
        gm2, hm2 = g2.max(), h2.max()
        wg = self.areas * (g2 / gm2) ** (p / 2.0 - 1.0)
        wh = self.areas * (h2 / hm2) ** (p / 2.0 - 1.0)
        Np = np.dot(wg, g2)
        Dp = np.dot(wh, h2)
        # d(log N)/du and d(log D)/du, envelope theorem for the shift a
        dN = self.G.T @ ((wg[:, None] * s * FROB_WEIGHTS).ravel()) + self.Om.T @ (2.0 * wg * (om - a))
        dD = self.G.T @ ((wh[:, None] * s * FROB_WEIGHTS).ravel())
        log_n = math.log(Np) + (p / 2.0 - 1.0) * math.log(gm2)
        log_d = math.log(Dp) + (p / 2.0 - 1.0) * math.log(hm2)
        val = -(log_n - log_d) / p
        grad = -(dN / Np - dD / Dp)
        return val, grad


def korn_ratio_explorer(bundle: OperatorBundle, p, iterations=500, starts=8, seed=0, initial=None) -> ConstantReport:
    """Locally maximized Korn ratio for ``p in {1, 2, inf}``.

    Seeded random starts (plus ``initial`` when given) are deflated against the
    rigid motions and improved by L-BFGS on the log-ratio (``iterations=0``
    only scores the starts). For ``p = inf`` the
    search runs on an ``L^32`` surrogate and each candidate is scored exactly.
    The best candidate wins; ties go to the lowest start index.
    """
    p = float(p)
    if p not in (1.0, 2.0, math.inf):
        raise InvalidArgument(f"explorer supports p in {{1, 2, inf}}, got {p}")
    rng = np.random.default_rng(seed)
    ratio = _KornRatio(bundle, p)
    p_search = _SURROGATE_P if p == math.inf else p

    candidates = []
    if initial is not None:
        candidates.append(np.asarray(initial.flat if isinstance(initial, VectorField) else initial, float))
    candidates += [rng.standard_normal(bundle.n_vector) for _ in range(starts)]

    best, best_u, values = -math.inf, None, []
    for u0 in candidates:
        u0 = bundle.remove_rigid(u0.copy())
        scale = np.linalg.norm(u0)
        if scale <= 1e-12 or not math.isfinite(ratio.value(u0)):
            # rigid (or zero) start: zero denominator, move off the rigid span
            u0 = bundle.remove_rigid(u0 + 1e-3 * max(scale, 1.0) * rng.standard_normal(bundle.n_vector))
        u0 /= np.linalg.norm(u0)
        pick_u, pick = u0, ratio.value(u0)
        if iterations > 0:
            res = minimize(ratio.neg_log_and_grad, u0, args=(p_search,), jac=True, method="L-BFGS-B",
                           options={"maxiter": iterations, "gtol": 1e-12, "ftol": 1e-15})
            v = ratio.value(res.x)
            if math.isfinite(v) and v > pick:
                pick_u, pick = res.x, v
        values.append(pick)
        if pick > best:
            best, best_u = pick, pick_u
    best_u = bundle.remove_rigid(best_u)
    best_u /= np.linalg.norm(best_u)
    return ConstantReport(
        f"korn_ratio_p{p:g}", bundle.mesh.h, float(best), 0.0, [(bundle.mesh.h, float(best))],
        {"field": VectorField(bundle.mesh, best_u.reshape(-1, 2)), "start_values": values},
    )


def interpolate_nodal(field: VectorField, fine: Mesh) -> VectorField:
    """Evaluate the piecewise-linear ``field`` at the nodes of another mesh of the same rectangle."""
    coarse = field.mesh
    hx, hy = coarse.lx / coarse.nx, coarse.ly / coarse.ny
    x, y = fine.nodes[:, 0], fine.nodes[:, 1]
    i = np.clip(np.floor(x / hx).astype(int), 0, coarse.nx - 1)
    j = np.clip(np.floor(y / hy).astype(int), 0, coarse.ny - 1)
    xi, eta = x / hx - i, y / hy - j
    n00 = j * (coarse.nx + 1) + i
    n10, n01, n11 = n00 + 1, n00 + coarse.nx + 1, n00 + coarse.nx + 2
    v = field.values
    lower = eta <= xi
    # lower triangle (n00, n10, n11), upper triangle (n00, n11, n01)
    out = np.where(
        lower[:, None],
        (1 - xi)[:, None] * v[n00] + (xi - eta)[:, None] * v[n10] + eta[:, None] * v[n11],
        (1 - eta)[:, None] * v[n00] + (eta - xi)[:, None] * v[n01] + xi[:, None] * v[n11],
    )
    return VectorField(fine, out)


def korn_ratio_sweep(nx, ny, p, lx=1.0, ly=1.0, levels=4, iterations=500, starts=8, seed=0) -> ConstantReport:
    """Explorer on nested meshes; each level is warm-started from the previous best field.

    The discrete spaces are nested, so the warm start makes the recorded sequence
    nondecreasing.
    """
    history, prev, report = [], None, None
    for n, m in nested_levels(nx, ny, levels):
        mesh = build_mesh(n, m, lx, ly)
        init = None if prev is None else interpolate_nodal(prev, mesh)
        report = korn_ratio_explorer(build_operators(mesh), p, iterations, starts, seed, init)
        prev = report.extra["field"]
        history.append((mesh.h, report.value))
    report.history = history
    return report
