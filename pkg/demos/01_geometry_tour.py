"""
A tour of the manifold primitives
=================================

Complex lines through the origin, the chordal distance between them, and
the four operations everything else is built from: the log map (unwrap a
geodesic arc into the tangent space), the exp map (wrap it back), parallel
transport (move a tangent vector to a new base point), and one-step
geodesic prediction (extrapolate through two points by one more step).
"""

import numpy as np

from grasspc import (
    GrassmannPoint,
    chordal_distance,
    exp_map,
    log_map,
    parallel_transport,
    predict_one_step,
    random_point,
    rng_stream,
)

rng = rng_stream(2024, 0x6E0)

# Two random lines in C^4.  A point is a unit vector whose overall phase
# carries no information: x and e^{i*phi} x are the same line.
x = random_point(4, rng)
y = random_point(4, rng)
print(f"d(x, y)              = {chordal_distance(x, y):.6f}")
x_rot = GrassmannPoint(x.coords * np.exp(0.7j))
print(f"d(x, e^i0.7 x)       = {chordal_distance(x, x_rot):.2e}")

# The log map unwraps y into the tangent space at x; its magnitude is the
# arc length of the geodesic, which matches arccos|<x, y>|.
e = log_map(x, y)
rho = abs(np.vdot(x.coords, y.coords))
print(f"\ntangent magnitude    = {e.magnitude:.6f}")
print(f"arccos|rho|          = {np.arccos(rho):.6f}")

# The exp map inverts it exactly.
back = exp_map(x, e)
print(f"exp(log) round trip  = {chordal_distance(back, y):.2e}")

# Parallel transport carries the connecting tangent along the geodesic to
# its far endpoint: the result is based at y, keeps the magnitude of the
# log map, and stays orthogonal to its new base point.
moved = parallel_transport(x, y)
print(f"\ntransported magnitude = {moved.magnitude:.6f} (same as the log map)")
print(f"orthogonality at new base = {abs(np.vdot(y.coords, moved.as_ambient())):.2e}")

# Prediction extrapolates the geodesic through (prev, curr) one step
# forward: the predicted point is as far from curr as curr is from prev.
prev, curr = x, y
pred = predict_one_step(prev, curr)
print(f"\nd(prev, curr)        = {chordal_distance(prev, curr):.6f}")
print(f"d(curr, predicted)   = {chordal_distance(curr, pred):.6f} (equal by construction)")
