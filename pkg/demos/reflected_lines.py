"""Lines tangent to a conic, reflected off a circle.

For a family of lines through a point or tangent to an ellipse, the incoming
and reflected directions (v, v+) of the lines entering the unit circle span
all of R^4. Only the pencil through the circle's centre, where every line
bounces straight back, collapses to a plane.
"""
import numpy as np

from hardballs.geometry import ELLIPSE, POINT, concentric_family, random_family, span_test

rng = np.random.default_rng(4)
for kind in (POINT, ELLIPSE):
    for spatial in (False, True):
        family = random_family(rng, kind, spatial=spatial)
        dim, sigma = span_test(family)
        where = "plane section of the sphere" if spatial else "unit circle"
        print(f"{kind:8s} {where:28s} span dimension {dim} (smallest singular value {sigma:.2e})")
dim, _ = span_test(concentric_family())
print(f"lines through the centre: span dimension {dim}")
