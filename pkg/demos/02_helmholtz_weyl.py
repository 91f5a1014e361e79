"""Splitting a stress field into a symmetric gradient and a self-equilibrated part.

sM = sym_grad u lies in the range of the symmetric gradient, sN has zero weak
divergence and zero traction. The two parts are orthogonal in the weighted
L2 inner product, which is what makes the split unique.
"""
import numpy as np

from ddstress import SymTensorField, build_mesh, build_operators, inner_tensor, pi, project_M, subspace_diagnostics, weak_div

rng = np.random.default_rng(0)
ops = build_operators(build_mesh(6, 6))
s = SymTensorField(ops.mesh, rng.standard_normal((ops.mesh.n_triangles, 3)))

dec = project_M(ops, s)
print("<sM, sN>       =", inner_tensor(dec.sM, dec.sN))
print("|div sN|_max   =", np.abs(weak_div(ops, dec.sN).values).max())
print("pi(pi s) - pi s:", np.abs((pi(ops, dec.sN) - dec.sN).values).max())

# counting check: dim M = 2 #nodes - 3, dim N = 3 #triangles - dim M
for n in (1, 2, 4):
    rep = subspace_diagnostics(build_operators(build_mesh(n, n)))
    print(f"{n}x{n}: dim M {rep['dim_M']}, dim N {rep['dim_N']}, "
          f"inf-sup (quotient) {rep['infsup_quotient']:.4f}")
