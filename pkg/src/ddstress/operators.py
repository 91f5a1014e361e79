"""Discrete symmetric gradient, its adjoint divergence and the Helmholtz-Weyl split.

The weak divergence is *defined* as the negative mass-adjoint of the symmetric
gradient, ``M d = -G^T W s``. The traction-free boundary condition is therefore
built in and the discrete Green identity holds to round-off for every pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    FROB_WEIGHTS,
    InvalidArgument,
    Mesh,
    SymTensorField,
    VectorField,
    inner_tensor,
    inner_vector,
    lp_norm_vector,
    rigid_basis,
    vector_mass_matrix,
)

DENSE_GUARD = 5000


class NumericFailure(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class SizeGuardExceeded(ValueError):
    pass


def check_guard(n, guard=DENSE_GUARD, what="unknowns"):
    if n > guard:
        raise SizeGuardExceeded(f"dense computation needs {n} {what}, guard is {guard}")


def barycentric_gradients(mesh: Mesh):
    """Per-triangle gradients of the three hat functions, shape ``(nt, 3, 2)``."""
    p = mesh.nodes[mesh.triangles]
    grads = np.empty((mesh.n_triangles, 3, 2))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        grads[:, k, 0] = a[:, 1] - b[:, 1]
        grads[:, k, 1] = b[:, 0] - a[:, 0]
    return grads / (2.0 * mesh.areas[:, None, None])


def sym_grad_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Sparse map from interleaved nodal dofs to per-triangle ``(sxx, syy, sxy)``."""
    g = barycentric_gradients(mesh)
    nt = mesh.n_triangles
    t = np.arange(nt)[:, None]
    ux, uy = 2 * mesh.triangles, 2 * mesh.triangles + 1
    gx, gy = g[:, :, 0], g[:, :, 1]
    rows = np.concatenate([np.repeat(3 * t, 3, 1), np.repeat(3 * t + 1, 3, 1),
                           np.repeat(3 * t + 2, 3, 1), np.repeat(3 * t + 2, 3, 1)], axis=1)
    cols = np.concatenate([ux, uy, ux, uy], axis=1)
    data = np.concatenate([gx, gy, 0.5 * gy, 0.5 * gx], axis=1)
    return sp.csr_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(3 * nt, 2 * mesh.n_nodes))


def skew_grad_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Per-triangle rotation rate ``(d_x u_y - d_y u_x) / 2``."""
    g = barycentric_gradients(mesh)
    nt = mesh.n_triangles
    rows = np.repeat(np.arange(nt)[:, None], 6, 1)
    cols = np.concatenate([2 * mesh.triangles + 1, 2 * mesh.triangles], axis=1)
    data = np.concatenate([0.5 * g[:, :, 0], -0.5 * g[:, :, 1]], axis=1)
    return sp.csr_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(nt, 2 * mesh.n_nodes))


def scalar_stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """P1 Neumann Laplacian for one scalar component."""
    g = barycentric_gradients(mesh)
    local = np.einsum("tid,tjd->tij", g, g) * mesh.areas[:, None, None]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)


class OperatorBundle:
    """Assembled operators on one mesh.

    ``G`` symmetric gradient, ``w`` diagonal tensor weights (area times Frobenius
    weights), ``K = G^T W G``, ``M`` consistent vector mass matrix, and the
    orthonormal rigid basis ``R`` (dof matrix, shape ``(2 n_nodes, 3)``).
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.G = sym_grad_matrix(mesh)
        self.w = np.repeat(mesh.areas, 3) * np.tile(FROB_WEIGHTS, mesh.n_triangles)
        self.K = (self.G.T @ sp.diags(self.w) @ self.G).tocsr()
        self.M = vector_mass_matrix(mesh)
        self.rigid = rigid_basis(mesh, self.M)
        self.R = self.rigid.matrix
        self.MR = self.M @ self.R

    @property
    def n_vector(self):
        return 2 * self.mesh.n_nodes

    @property
    def n_tensor(self):
        return 3 * self.mesh.n_triangles

    @cached_property
    def mass_lu(self):
        return spla.splu(self.M.tocsc())

    @cached_property
    def saddle_lu(self):
        # scale the constraint block to the stiffness magnitude
        c = abs(self.K).max() / max(np.abs(self.MR).max(), 1e-300)
        C = sp.csr_matrix(self.MR * c)
        A = sp.bmat([[self.K, C], [C.T, None]], format="csc")
        return spla.splu(A), A

    @cached_property
    def kernel_basis(self):
        """Euclidean-orthonormal basis of ker K."""
        q, _ = np.linalg.qr(self.R)
        return q

    @cached_property
    def k_norm_bound(self):
        """Upper bound on the spectral norm of ``W^1/2 G`` (row-sum bound on K)."""
        return float(np.sqrt(abs(self.K).sum(axis=1).max()))

    def remove_rigid(self, u):
        """M-orthogonal removal of the rigid component from dof vector(s) ``u``."""
        return u - self.R @ (self.MR.T @ u)

    def tensor_norm2(self, s_flat):
        return math.sqrt(max(float(np.dot(self.w, s_flat**2)), 0.0))

    def vector_norm2(self, u_flat):
        return math.sqrt(max(float(u_flat @ (self.M @ u_flat)), 0.0))


def build_operators(mesh: Mesh) -> OperatorBundle:
    return OperatorBundle(mesh)


def _check_mesh(bundle, field):
    if field.mesh is not bundle.mesh:
        raise InvalidArgument("field does not live on the bundle's mesh")


def sym_grad(bundle: OperatorBundle, v: VectorField) -> SymTensorField:
    _check_mesh(bundle, v)
    return SymTensorField(bundle.mesh, (bundle.G @ v.flat).reshape(-1, 3))


def weak_div(bundle: OperatorBundle, s: SymTensorField) -> VectorField:
    _check_mesh(bundle, s)
    rhs = -(bundle.G.T @ (bundle.w * s.flat))
    return VectorField(bundle.mesh, bundle.mass_lu.solve(rhs).reshape(-1, 2))


def green_residual(bundle: OperatorBundle, s: SymTensorField, v: VectorField) -> float:
    """``|<weak_div s, v> + <s, sym_grad v>|``."""
    d = weak_div(bundle, s)
    return abs(inner_vector(d, v, bundle.M) + inner_tensor(s, sym_grad(bundle, v)))


def rigid_defects(bundle: OperatorBundle, f: VectorField) -> np.ndarray:
    _check_mesh(bundle, f)
    return bundle.MR.T @ f.flat


def check_balanced(bundle: OperatorBundle, f: VectorField, tol_balance=1e-10):
    """Return ``(balanced, defects)`` with ``defects[i] = <f, r_i>``."""
    defects = rigid_defects(bundle, f)
    scale = 1.0 + lp_norm_vector(f, 2)
    return bool(np.max(np.abs(defects)) <= tol_balance * scale), defects


def project_balanced(bundle: OperatorBundle, f: VectorField) -> VectorField:
    _check_mesh(bundle, f)
    return VectorField(bundle.mesh, bundle.remove_rigid(f.flat).reshape(-1, 2))


# -- rigid-complement solves ------------------------------------------------

def _solve_direct(bundle, b):
    """Saddle solve ``K u = b``, ``R^T M u = 0`` with one refinement step."""
    lu, A = bundle.saddle_lu
    b = np.asarray(b, dtype=float)
    rhs = np.concatenate([b, np.zeros((3,) + b.shape[1:])])
    x = lu.solve(rhs)
    x += lu.solve(rhs - A @ x)
    return x[: bundle.n_vector], {"method": "direct", "iterations": 1}


def deflated_cg(K, b, Z, rtol=1e-12, maxiter=None):
    """Jacobi-preconditioned CG on the complement of ``span(Z)``.

    ``Z`` must be a Euclidean-orthonormal basis of ker K and ``b`` orthogonal to it.
    Returns ``(x, iterations, relative_residual)``.
    """
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter

    def proj(v):
        return v - Z @ (Z.T @ v)

    dinv = 1.0 / K.diagonal()
    x = np.zeros(n)
    r = proj(b)
    bnorm = np.linalg.norm(r)
    if bnorm == 0.0:
        return x, 0, 0.0
    z = proj(dinv * r)
    p = z.copy()
    rz = r @ z
    it = 0
    for it in range(1, maxiter + 1):
        Kp = proj(K @ p)
        alpha = rz / (p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        if np.linalg.norm(r) <= rtol * bnorm:
            break
        z = proj(dinv * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    true_res = np.linalg.norm(proj(b - K @ x)) / bnorm
    return x, it, float(true_res)


def _solve_cg(bundle, b, rtol=1e-12):
    x, it, res = deflated_cg(bundle.K, b, bundle.kernel_basis, rtol=rtol)
    return bundle.remove_rigid(x), {"method": "cg", "iterations": it, "cg_residual": res}


def solve_rigid_free(bundle: OperatorBundle, b, method="direct", tol_solve=1e-10, cg_rtol=1e-12, scale=0.0):
    """Solve ``K u = b`` for the representative with ``<u, r_i> = 0``.

    ``b`` must be orthogonal to the rigid motions (Euclidean). Raises
    ``NumericFailure`` if the residual relative to ``max(|b|, scale)``
    exceeds ``tol_solve``.
    """
    if method == "direct":
        u, stats = _solve_direct(bundle, b)
    elif method == "cg":
        u, stats = _solve_cg(bundle, b, cg_rtol)
    else:
        raise InvalidArgument(f"unknown solver method {method!r}")
    bn = max(np.linalg.norm(b), scale)
    res = np.linalg.norm(bundle.K @ u - b) / bn if bn > 0 else 0.0
    stats["residual"] = float(res)
    if not res <= tol_solve:
        raise NumericFailure(f"{method} solve did not reach tolerance {tol_solve:g}", res)
    return u, stats


# -- Helmholtz-Weyl decomposition -------------------------------------------

@dataclass(frozen=True, eq=False)
class Decomposition:
    s: SymTensorField
    sM: SymTensorField
    sN: SymTensorField
    u: VectorField
    stats: dict


def project_M(bundle: OperatorBundle, s: SymTensorField, method="direct", tol_solve=1e-10) -> Decomposition:
    """Split ``s = G u + sN`` with ``sN`` W-orthogonal to the range of G."""
    _check_mesh(bundle, s)
    b = bundle.G.T @ (bundle.w * s.flat)
    # |b| <= |G^T W^1/2| |s|_W; measuring against this bound keeps inputs already in N from failing
    scale = bundle.k_norm_bound * np.sqrt(bundle.tensor_norm2(s.flat))
    u, stats = solve_rigid_free(bundle, b, method, tol_solve, scale=scale)
    sM = bundle.G @ u
    mesh = bundle.mesh
    return Decomposition(
        s=s,
        sM=SymTensorField(mesh, sM.reshape(-1, 3)),
        sN=SymTensorField(mesh, (s.flat - sM).reshape(-1, 3)),
        u=VectorField(mesh, u.reshape(-1, 2)),
        stats=stats,
    )


def pi(bundle: OperatorBundle, s: SymTensorField, method="direct", tol_solve=1e-10) -> SymTensorField:
    """Divergence-free, traction-free component of ``s``."""
    return project_M(bundle, s, method, tol_solve).sN


def pi_many(bundle: OperatorBundle, S: np.ndarray) -> np.ndarray:
    """Apply the projector to the columns of ``S`` (shape ``(3 nt, k)``)."""
    B = bundle.G.T @ (bundle.w[:, None] * S)
    U, _ = _solve_direct(bundle, B)
    return S - bundle.G @ U


# -- dense diagnostics -------------------------------------------------------

def full_grad_gram(bundle: OperatorBundle) -> sp.csr_matrix:
    """Gram matrix of the full gradient: ``K + 2 Omega^T A Omega``."""
    Om = skew_grad_matrix(bundle.mesh)
    return (bundle.K + 2.0 * Om.T @ sp.diags(bundle.mesh.areas) @ Om).tocsr()


def _h1_gram(bundle):
    return (bundle.M + full_grad_gram(bundle)).toarray()


def infsup_value(bundle: OperatorBundle, test_space="quotient", guard=DENSE_GUARD):
    """Discrete inf-sup constant of ``<sym_grad phi, sym_grad u>`` in H^1 norms.

    ``u`` ranges over nodal fields modulo rigid motions (quotient H^1 norm).
    ``phi`` ranges over the same quotient (``test_space="quotient"``) or over
    fields vanishing on the boundary (``"dirichlet"``). Returns ``None`` when the
    test space is empty.
    """
    check_guard(bundle.n_vector, guard)
    H = _h1_gram(bundle)
    K = bundle.K.toarray()
    # H-orthogonal complement of the rigid motions realizes the quotient norm
    Q = la.null_space((H @ bundle.R).T)
    Lu = la.cholesky(Q.T @ H @ Q, lower=True)
    if test_space == "quotient":
        P, Lp = Q, Lu
    elif test_space == "dirichlet":
        idx = np.sort(np.concatenate([2 * bundle.mesh.interior_nodes, 2 * bundle.mesh.interior_nodes + 1]))
        if idx.size == 0:
            return None
        P = np.eye(bundle.n_vector)[:, idx]
        Lp = la.cholesky(H[np.ix_(idx, idx)], lower=True)
    else:
        raise InvalidArgument(f"unknown test space {test_space!r}")
    B = P.T @ K @ Q
    A = la.solve_triangular(Lp, la.solve_triangular(Lu, B.T, lower=True).T, lower=True)
    sv = la.svdvals(A)
    return float(sv.min())


def subspace_diagnostics(bundle: OperatorBundle, guard=DENSE_GUARD) -> dict:
    """Dense rank and angle checks for ``L^2(sym) = M (+) N``."""
    mesh = bundle.mesh
    check_guard(bundle.n_tensor, guard, "tensor unknowns")
    G = bundle.G.toarray()
    sv = la.svdvals(G)
    tol = sv.max() * max(G.shape) * np.finfo(float).eps
    dim_M = int((sv > tol).sum())
    basis_M = la.orth(G)
    basis_N = la.null_space(G.T * bundle.w[None, :])
    dim_N = basis_N.shape[1]
    both = np.hstack([basis_M, basis_N])
    sv_both = la.svdvals(both)
    return {
        "n_nodes": mesh.n_nodes,
        "n_triangles": mesh.n_triangles,
        "tensor_dim": bundle.n_tensor,
        "dim_M": dim_M,
        "dim_M_expected": bundle.n_vector - 3,
        "dim_N": dim_N,
        "dim_N_expected": bundle.n_tensor - (bundle.n_vector - 3),
        "dim_sum_ok": bool(dim_M + dim_N == bundle.n_tensor),
        "rank_concat": int((sv_both > 1e-10).sum()),
        "min_sv_concat": float(sv_both.min()),
        "min_nonzero_sv_G": float(sv[sv > tol].min()),
        "infsup_quotient": infsup_value(bundle, "quotient", guard),
        "infsup_dirichlet": infsup_value(bundle, "dirichlet", guard),
    }


def green_statistics(bundle: OperatorBundle, samples=20, seed=0) -> dict:
    rng = np.random.default_rng(seed)
    rel = []
    for _ in range(samples):
        s = SymTensorField(bundle.mesh, rng.standard_normal((bundle.mesh.n_triangles, 3)))
        v = VectorField(bundle.mesh, rng.standard_normal((bundle.mesh.n_nodes, 2)))
        ref = abs(inner_tensor(s, sym_grad(bundle, v)))
        rel.append(green_residual(bundle, s, v) / (1.0 + ref))
    return {"green_samples": samples, "green_rel_max": float(max(rel)), "green_rel_mean": float(np.mean(rel))}


def format_report(report: dict) -> str:
    """Flat ``term value`` text block, one pair per line."""
    lines = []
    for k, v in report.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} {v}")
    return "\n".join(lines) + "\n"
