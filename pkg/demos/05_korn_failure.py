"""Korn ratio under refinement for p = 2, 1 and infinity.

At p = 2 the best ratio settles (slowly), while at p = 1 and p = inf the
best-found ratio keeps growing as the mesh is refined.
"""
import math

from ddstress import build_mesh, build_operators, korn_constant, korn_ratio_explorer, korn_ratio_sweep

ops = build_operators(build_mesh(8, 8))
print("p=2, 8x8: eigen", korn_constant(ops).value, "explorer", korn_ratio_explorer(ops, 2).value)

for p in (1, math.inf):
    rep = korn_ratio_sweep(32, 32, p, levels=4, iterations=300, starts=4)
    print(f"p={p}: " + ", ".join(f"{v:.3f}" for _, v in rep.history))
