"""Poincare, Korn and inf-sup constants on nested meshes of the unit square."""
import math

from ddstress import build_mesh, build_operators, infsup_constant, sweep

rep = sweep("poincare", 32, 32, levels=4)
for h, v in rep.history:
    print(f"poincare h={h:.4f}  C={v:.5f}")
print(f"  limit 1/pi = {1 / math.pi:.5f}")

rep = sweep("korn", 16, 16, levels=4)
for h, v in rep.history:
    print(f"korn     h={h:.4f}  C={v:.4f}")

rep = sweep("infsup", 8, 8, levels=3)
for h, v in rep.history:
    print(f"inf-sup  h={h:.4f}  beta={v:.4f}")
# the 1x1 mesh has no interior nodes; use the rigid-quotient test space
print("inf-sup 1x1 (quotient):", infsup_constant(build_operators(build_mesh(1, 1)), "quotient").value)
