"""Find points whose last collision was a graze and test their future.

Random curves in phase space are scanned for parameter values where the first
collision in the past becomes tangential. From each such point the system is
flowed forward six collisions; if the neutral space of that segment is
one-dimensional the point is sufficient, so grazing points are not all
non-hyperbolic.
"""
from hardballs.core import SystemParams
from hardballs.probe import noncoincidence_experiment

params = SystemParams(N=3, nu=2, r=0.1)
report = noncoincidence_experiment(params, curves=60, n=6, seed=11, required=20)
print(f"{report.accepted} grazing points with a connected forward collision graph")
print(f"  sufficient: {report.sufficient}, not sufficient: {report.non_sufficient}")
print(f"  crossings set aside as ambiguous: {report.excluded_crossings}")
w = next(o for o in report.witnesses if o.sufficient)
print(f"witness: curve {w.curve_index}, u* = {w.u_star:.12f}, grazing pair "
      f"({w.pair[0] + 1},{w.pair[1] + 1}), forward sequence {w.to_dict()['forward_sequence']}")
