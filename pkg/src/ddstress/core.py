"""Mesh, discrete field types, L^p norms, rigid-motion basis and stress data sets.

Vector fields are continuous piecewise-linear (one 2-vector per node); symmetric
tensor fields are piecewise-constant (one ``(sxx, syy, sxy)`` triple per triangle).
The pointwise tensor norm is Frobenius, so the shear component counts twice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Frobenius weights for the reduced (sxx, syy, sxy) storage.
FROB_WEIGHTS = np.array([1.0, 1.0, 2.0])


class InvalidArgument(ValueError):
    """Bad input to a library call (dimensions, exponents, mesh mismatch, ...)."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Structured triangulation of the rectangle ``[0, lx] x [0, ly]``.

    Node ``(i, j)`` has index ``j * (nx + 1) + i``. Every cell is split along its
    lower-left to upper-right diagonal into two counter-clockwise triangles.
    """

    nx: int
    ny: int
    lx: float
    ly: float
    nodes: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def h(self) -> float:
        """Largest cell side."""
        return max(self.lx / self.nx, self.ly / self.ny)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def boundary_nodes(self) -> np.ndarray:
        i = np.arange(self.n_nodes) % (self.nx + 1)
        j = np.arange(self.n_nodes) // (self.nx + 1)
        return np.flatnonzero((i == 0) | (i == self.nx) | (j == 0) | (j == self.ny))

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)


def build_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> Mesh:
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgument(f"cell counts must be integers >= 1, got nx={nx}, ny={ny}")
    if not (lx > 0 and ly > 0 and math.isfinite(lx) and math.isfinite(ly)):
        raise InvalidArgument(f"side lengths must be finite and positive, got lx={lx}, ly={ly}")
    nx, ny, lx, ly = int(nx), int(ny), float(lx), float(ly)

    xs = np.arange(nx + 1) * (lx / nx)
    ys = np.arange(ny + 1) * (ly / ny)
    xs[-1], ys[-1] = lx, ly
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (j * (nx + 1) + i).ravel()
    n10, n01 = n00 + 1, n00 + nx + 1
    n11 = n01 + 1
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    # interleave so the two triangles of a cell are adjacent
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2], triangles[1::2] = lower, upper

    p = nodes[triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return Mesh(nx, ny, lx, ly, _frozen(nodes), _frozen(triangles, np.int64), _frozen(areas))


def _check_same_mesh(a, b):
    if a.mesh is not b.mesh:
        raise InvalidArgument("fields live on different meshes")


@dataclass(frozen=True, eq=False)
class VectorField:
    """Nodal 2-vector field; ``values`` has shape ``(n_nodes, 2)``."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1, 2) if np.size(self.values) else np.zeros((0, 2))
        if v.shape[0] != self.mesh.n_nodes:
            raise InvalidArgument(f"expected {self.mesh.n_nodes} nodal values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("vector field has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_nodes, 2)))

    @classmethod
    def from_function(cls, mesh, fun):
        """Nodal interpolant of ``fun(x, y) -> (fx, fy)``."""
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        fx, fy = fun(x, y)
        return cls(mesh, np.column_stack([np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape)]))

    @property
    def flat(self) -> np.ndarray:
        """Interleaved dof vector ``[u0x, u0y, u1x, ...]``."""
        return self.values.ravel()

    def __add__(self, other):
        _check_same_mesh(self, other)
        return VectorField(self.mesh, self.values + other.values)

    def __sub__(self, other):
        _check_same_mesh(self, other)
        return VectorField(self.mesh, self.values - other.values)

    def __neg__(self):
        return VectorField(self.mesh, -self.values)

    def __mul__(self, alpha):
        return VectorField(self.mesh, float(alpha) * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SymTensorField:
    """Per-triangle symmetric tensor field; ``values`` has shape ``(n_triangles, 3)``
    holding ``(sxx, syy, sxy)``."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1, 3) if np.size(self.values) else np.zeros((0, 3))
        if v.shape[0] != self.mesh.n_triangles:
            raise InvalidArgument(f"expected {self.mesh.n_triangles} triangle values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("tensor field has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_triangles, 3)))

    @classmethod
    def constant(cls, mesh, sxx, syy, sxy):
        return cls(mesh, np.tile([sxx, syy, sxy], (mesh.n_triangles, 1)))

    @classmethod
    def from_function(cls, mesh, fun):
        """Evaluate ``fun(x, y) -> (sxx, syy, sxy)`` at triangle centroids."""
        c = mesh.centroids
        comps = fun(c[:, 0], c[:, 1])
        return cls(mesh, np.column_stack([np.broadcast_to(a, c[:, 0].shape) for a in comps]))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def pointwise_norm(self) -> np.ndarray:
        """Frobenius norm per triangle."""
        v = self.values
        return np.hypot(np.hypot(v[:, 0], v[:, 1]), math.sqrt(2.0) * v[:, 2])

    def __add__(self, other):
        _check_same_mesh(self, other)
        return SymTensorField(self.mesh, self.values + other.values)

    def __sub__(self, other):
        _check_same_mesh(self, other)
        return SymTensorField(self.mesh, self.values - other.values)

    def __neg__(self):
        return SymTensorField(self.mesh, -self.values)

    def __mul__(self, alpha):
        return SymTensorField(self.mesh, float(alpha) * self.values)

    __rmul__ = __mul__


def _check_p(p, lo=1.0):
    p = float(p)
    if not (p >= lo or p == math.inf) or math.isnan(p):
        raise InvalidArgument(f"exponent p must lie in [{lo}, inf], got {p}")
    return p


def lp_norm_tensor(s: SymTensorField, p) -> float:
    """``(sum_T area_T |s_T|_F^p)^(1/p)``; the max of ``|s_T|_F`` for ``p = inf``."""
    p = _check_p(p)
    return _weighted_lp(s.mesh.areas, s.pointwise_norm(), p)


def _weighted_lp(weights, pw, p):
    # factor out the max so pw**p neither under- nor overflows
    top = float(pw.max()) if pw.size else 0.0
    if p == math.inf or top == 0.0:
        return top
    return top * float(np.dot(weights, (pw / top) ** p) ** (1.0 / p))


def inner_tensor(s: SymTensorField, t: SymTensorField) -> float:
    _check_same_mesh(s, t)
    return float(np.dot(s.mesh.areas, (s.values * t.values) @ FROB_WEIGHTS))


def scalar_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix for scalar fields."""
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    data = (mesh.areas[:, None, None] * local).ravel()
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_nodes,) * 2)


def vector_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent mass matrix on interleaved 2-vector dofs."""
    return sp.kron(scalar_mass_matrix(mesh), sp.identity(2), format="csr")


def inner_vector(f: VectorField, w: VectorField, mass=None) -> float:
    """L^2 pairing of two nodal fields through the consistent mass matrix."""
    _check_same_mesh(f, w)
    m = vector_mass_matrix(f.mesh) if mass is None else mass
    return float(f.flat @ (m @ w.flat))


# Edge-midpoint rule: exact for quadratics, hence exact for |f|^2 of P1 fields.
_MIDPOINT_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def lp_norm_vector(f: VectorField, p) -> float:
    """L^p norm of a nodal field with Euclidean pointwise norm.

    Exact for ``p = 2`` and ``p = inf``; other exponents use the edge-midpoint rule.
    """
    p = _check_p(p)
    if p == math.inf:
        return float(np.hypot(f.values[:, 0], f.values[:, 1]).max())
    vals = np.einsum("qk,tkd->tqd", _MIDPOINT_BARY, f.values[f.mesh.triangles])
    pw = np.hypot(vals[..., 0], vals[..., 1])
    return _weighted_lp(np.repeat(f.mesh.areas / 3.0, 3), pw.ravel(), p)


@dataclass(frozen=True, eq=False)
class RigidBasis:
    """Discrete-L^2 orthonormal basis of the infinitesimal rigid motions."""

    fields: tuple

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]

    @property
    def matrix(self) -> np.ndarray:
        """Dof matrix of shape ``(2 * n_nodes, 3)``."""
        return np.column_stack([r.flat for r in self.fields])


def rigid_basis(mesh: Mesh, mass=None) -> RigidBasis:
    """Orthonormalized nodal interpolants of ``(1, 0)``, ``(0, 1)`` and ``(-y, x)``."""
    m = vector_mass_matrix(mesh) if mass is None else mass
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    raw = [
        np.column_stack([np.ones_like(x), np.zeros_like(x)]),
        np.column_stack([np.zeros_like(x), np.ones_like(x)]),
        # rotation about the centre keeps the Gram matrix well conditioned
        np.column_stack([-(y - 0.5 * mesh.ly), x - 0.5 * mesh.lx]),
    ]
    basis = []
    # modified Gram-Schmidt, two passes
    for v in raw:
        v = v.ravel().copy()
        for _ in range(2):
            for b in basis:
                v -= (b @ (m @ v)) * b
        v /= math.sqrt(v @ (m @ v))
        basis.append(v)
    return RigidBasis(tuple(VectorField(mesh, b.reshape(-1, 2)) for b in basis))


@dataclass(frozen=True, eq=False)
class StressDataset:
    """Ordered finite set of symmetric 2x2 stress states, stored as ``(M, 3)``."""

    states: np.ndarray

    def __post_init__(self):
        s = np.array(self.states, dtype=float)
        if s.ndim == 1 and s.size == 3:
            s = s[None, :]
        if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 1:
            raise InvalidArgument("dataset must be a non-empty list of (sxx, syy, sxy) triples")
        if not np.all(np.isfinite(s)):
            raise InvalidArgument("dataset has non-finite entries")
        d2 = ((s[:, None, :] - s[None, :, :]) ** 2) @ FROB_WEIGHTS
        np.fill_diagonal(d2, np.inf)
        if np.any(d2 <= 0.0):
            i, j = np.argwhere(d2 <= 0.0)[0]
            raise InvalidArgument(f"dataset entries {i} and {j} coincide")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self):
        return self.states.shape[0]

    def matrices(self) -> np.ndarray:
        """Full ``(M, 2, 2)`` matrices."""
        s = self.states
        return np.stack([np.stack([s[:, 0], s[:, 2]], -1), np.stack([s[:, 2], s[:, 1]], -1)], -2)


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    tol_balance: float = 1e-10
    tol_solve: float = 1e-10
    tie_tol: float = 1e-12
    method: str = "direct"

    def __post_init__(self):
        if not (1.0 < float(self.p) < math.inf):
            raise InvalidArgument(f"p must lie in (1, inf), got {self.p}")
        for name in ("tol_balance", "tol_solve", "tie_tol"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise InvalidArgument(f"{name} must be finite and nonnegative, got {v}")
        if self.method not in ("direct", "cg"):
            raise InvalidArgument(f"unknown solver method {self.method!r}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)
