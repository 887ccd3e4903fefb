"""Walk through the three-ball example: (1,2), (1,3), (2,3) in the plane.

Realizes the sequence, prints how the neutral space shrinks collision by
collision, recovers the relation tying the third advance to the first two,
and then crosses the parallelity locus where the neutral space stays
two-dimensional.
"""
import numpy as np

from hardballs.core import SystemParams
from hardballs.neutral import build_neutrality_system, cpf_eliminate, neutral_space
from hardballs.probe import WORKED_EXAMPLE, determinant_root, plant_j_curve, realize_sequence, scan_J

params = SystemParams(N=3, nu=2, r=0.1)
rng = np.random.default_rng(1)

x, segment, mode = realize_sequence(params, WORKED_EXAMPLE, rng)
system = build_neutrality_system(segment)
print(f"sequence {WORKED_EXAMPLE.to_literal()} realized by {mode} sampling")
for m in range(4):
    print(f"  after {m} collisions: neutral space of dimension {neutral_space(system.prefix(m)).dimension}")

rel = cpf_eliminate(system, 2)
(g0_pre, g0_post), (g1_pre, g1_post) = np.round(rel.coefficients, 12) + 0.0
print("third advance in terms of the first two:")
print(f"  alpha_3 dv_3 = alpha_1 ({g0_pre:+.3f} dv_1^- {g0_post:+.3f} dv_1^+)"
      f" + alpha_2 ({g1_pre:+.3f} dv_2^- {g1_post:+.3f} dv_2^+)")

curve = plant_j_curve(params, seed=2)
crossing = next(r for r in scan_J(params, curve, 3) if r.accepted)
print("crossing the parallelity locus:")
print(f"  sigma_min dip at u = {crossing.u_star:+.3e}, determinant zero at u = "
      f"{determinant_root(params, curve):+.3e}")
print(f"  dimensions left / at / right: {crossing.dim_left} / {crossing.dim_at} / {crossing.dim_right}")
