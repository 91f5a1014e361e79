"""Meshes, fields and the discrete Green identity.

Builds a small rectangle, evaluates a displacement and a stress field, and
checks that the weak divergence is exactly the negative adjoint of the
symmetric gradient.
"""
import numpy as np

from ddstress import (
    SymTensorField,
    VectorField,
    build_mesh,
    build_operators,
    check_balanced,
    green_residual,
    inner_tensor,
    lp_norm_tensor,
    sym_grad,
    weak_div,
)

mesh = build_mesh(8, 4, lx=2.0, ly=1.0)
print(f"{mesh.n_nodes} nodes, {mesh.n_triangles} triangles, area {mesh.area}")

ops = build_operators(mesh)
u = VectorField.from_function(mesh, lambda x, y: (0.1 * x * y, -0.05 * x**2))
eps = sym_grad(ops, u)
print("max |sym_grad u|_F:", eps.pointwise_norm().max())

# a rotation has zero symmetric gradient
rot = VectorField.from_function(mesh, lambda x, y: (-y, x))
print("rotation strain:", np.abs(sym_grad(ops, rot).values).max())

s = SymTensorField.from_function(mesh, lambda x, y: (np.cos(x), y**2, x * y))
print("||s||_2 =", lp_norm_tensor(s, 2), " ||s||_4 =", lp_norm_tensor(s, 4))

r = green_residual(ops, s, u)
print(f"Green residual {r:.2e} against <s, sym_grad u> = {inner_tensor(s, eps):.6f}")

# -weak_div(s) is always a balanced load
ok, defects = check_balanced(ops, -weak_div(ops, s))
print("balanced:", ok, "defects:", defects)
