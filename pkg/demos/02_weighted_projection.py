"""Projecting onto a box or ball in a P^{-1}-weighted norm."""
import numpy as np

from tswlad import Ball, Box, project, regressor_bound, weighted_norm
from tswlad.projection import kkt_residual

spacer = "_" * 60

D = Box(np.zeros(2), 1.0)
x = np.array([2.0, 0.0])

print("\nWith Q = I the projection onto a box is a coordinate clamp:")
print("  project(x, I) =", project(x, np.eye(2), D))

Q = np.array([[2.0, 1.0], [1.0, 2.0]])
y = project(x, Q, D)
print("\nA coupled Q tilts the answer: the second coordinate moves to cut the cross term.")
print("  project(x, Q) =", y)
print("  ||x - y||_Q   =", weighted_norm(x - y, Q))
print("  clamp distance =", weighted_norm(x - np.clip(x, -1, 1), Q))
print("  KKT residual  =", kkt_residual(x, y, Q, D))

print(spacer)
B = Ball(np.zeros(2), 1.0)
print("\nBalls use a scalar root-find on the multiplier:")
for Qb in (np.eye(2), np.diag([1.0, 100.0])):
    yb = project(np.array([2.0, 2.0]), Qb, B)
    print(f"  Q = diag{np.diag(Qb).tolist()}: y = {np.round(yb, 6)}, |y| = {np.linalg.norm(yb):.12f}")

print("\nThe regressor bound C = sup |phi' x| over D is exact:")
print("  box r = 10, phi = ones(6) ->", regressor_bound(Box(np.zeros(6), 10.0), np.ones(6)))
print("  ball r = 10, phi = (3, 4, 0...) ->", regressor_bound(Ball(np.zeros(6), 10.0), [3, 4, 0, 0, 0, 0]))
