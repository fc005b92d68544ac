"""Projection onto the admissible parameter set under a weighted norm.

The projection of ``x`` is the minimizer of ``(x - y)' Q (x - y)`` over ``y``
in the set.  Boxes are handled by a primal active-set method (a plain clamp
when ``Q`` is diagonal), balls by a scalar root-find on the multiplier.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        r = np.broadcast_to(np.asarray(self.radii, dtype=float), c.shape).copy()
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise ConfigError("box radii must be positive and finite (admissible-set assumption)")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "lower", c - r)
        object.__setattr__(self, "upper", c + r)

    @property
    def dim(self):
        return self.center.size

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool((abs(x - self.center) <= self.radii + tol).all())

    def interior_contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def centroid(self):
        return self.center.copy()

    def to_dict(self):
        return {"kind": "box", "center": self.center.tolist(), "radii": self.radii.tolist()}


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ConfigError("ball radius must be positive and finite (admissible-set assumption)")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def contains(self, x, tol=0.0):
        return bool(np.linalg.norm(np.asarray(x, dtype=float) - self.center) <= self.radius + tol)

    def interior_contains(self, x):
        return bool(np.linalg.norm(np.asarray(x, dtype=float) - self.center) < self.radius)

    def centroid(self):
        return self.center.copy()

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


AdmissibleSet = Box | Ball


def admissible_set_from_dict(d: dict, dim: int) -> AdmissibleSet:
    kind = d.get("kind")
    center = d.get("center", [0.0] * dim)
    if kind == "box":
        return Box(center, d["radii"])
    if kind == "ball":
        return Ball(center, d["radius"])
    raise ConfigError(f"unsupported admissible set {kind!r}")


def regressor_bound(D: AdmissibleSet, phi) -> float:
    """Exact ``sup_{x in D} |phi' x|``."""
    phi = np.asarray(phi, dtype=float)
    if isinstance(D, Box):
        return float(abs(phi @ D.center) + abs(phi) @ D.radii)
    if isinstance(D, Ball):
        return float(abs(phi @ D.center) + D.radius * np.linalg.norm(phi))
    raise ConfigError(f"unsupported admissible set {type(D).__name__}")


def check_weight_matrix(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ConfigError(f"weight matrix must be square, got shape {Q.shape}")
    scale = max(np.max(np.abs(Q)), np.finfo(float).tiny)
    if np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
        raise ConfigError("weight matrix is not symmetric")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise ConfigError("weight matrix is not positive definite") from None
    return Q


def weighted_norm(x, Q) -> float:
    x = np.asarray(x, dtype=float)
    Q = check_weight_matrix(Q)
    return float(np.sqrt(max(x @ Q @ x, 0.0)))


def project(x, Q, D: AdmissibleSet, *, check=True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if check:
        Q = check_weight_matrix(Q)
    if x.shape != (D.dim,) or Q.shape != (D.dim, D.dim):
        raise ConfigError(f"dimension mismatch in projection: x {x.shape}, Q {Q.shape}, D d={D.dim}")
    if isinstance(D, Box):
        return _project_box(x, Q, D.lower, D.upper)
    if isinstance(D, Ball):
        return _project_ball(x, Q, D.center, D.radius)
    raise ConfigError(f"unsupported admissible set {type(D).__name__}")


def _project_box(x, Q, lo, hi, max_iter=None):
    if np.all(x >= lo) and np.all(x <= hi):
        return x.copy()
    offdiag = Q - np.diag(np.diagonal(Q))
    if not np.any(offdiag):
        return np.clip(x, lo, hi)
    return box_qp(Q, x, lo, hi, max_iter=max_iter)


def box_qp(Q, x, lo, hi, max_iter=None):
    """Minimize ``(y - x)' Q (y - x)`` subject to ``lo <= y <= hi``.

    Primal active-set iteration started from the clamped point.  Each
    iteration either moves to the minimizer over the current free set
    (stopping at the first blocking bound) or releases the bound with the
    most negative multiplier.
    """
    n = x.size
    if max_iter is None:
        max_iter = 50 * n + 50
    y = np.clip(x, lo, hi)
    at_lo = y <= lo
    at_hi = y >= hi
    trace = []
    for it in range(max_iter):
        fixed = at_lo | at_hi
        free = ~fixed
        target = y.copy()
        if free.any():
            Qf = Q[free]
            rhs = Qf[:, fixed] @ (y[fixed] - x[fixed])
            target[free] = x[free] - np.linalg.solve(Qf[:, free], rhs)
        step = target - y
        scale = 1.0 + np.max(np.abs(y))
        if np.max(np.abs(step)) <= 1e-14 * scale:
            grad = Q @ (y - x)
            # bound multipliers: grad >= 0 at lower bounds, grad <= 0 at upper bounds
            mult = np.where(at_lo, grad, np.where(at_hi, -grad, np.inf))
            i = int(np.argmin(mult))
            trace.append((it, int(fixed.sum()), float(mult[i])))
            gscale = 1e-12 * (1.0 + np.max(np.abs(Q)) * scale)
            if mult[i] >= -gscale:
                return y
            at_lo[i] = at_hi[i] = False
            continue
        # longest feasible fraction of the step
        alpha = 1.0
        block = -1
        for j in np.flatnonzero(free):
            if step[j] < 0 and y[j] + step[j] < lo[j]:
                t = (lo[j] - y[j]) / step[j]
                if t < alpha:
                    alpha, block = t, j
            elif step[j] > 0 and y[j] + step[j] > hi[j]:
                t = (hi[j] - y[j]) / step[j]
                if t < alpha:
                    alpha, block = t, j
        y = y + alpha * step
        trace.append((it, int(fixed.sum()), alpha))
        if block >= 0:
            if step[block] < 0:
                y[block] = lo[block]
                at_lo[block] = True
            else:
                y[block] = hi[block]
                at_hi[block] = True
        y = np.clip(y, lo, hi)
    raise NumericalError(f"box projection did not converge in {max_iter} iterations", trace)


def _project_ball(x, Q, c, r):
    z = x - c
    if np.linalg.norm(z) <= r:
        return x.copy()
    lam, V = np.linalg.eigh(Q)
    w = V.T @ z

    def excess(nu):
        return np.linalg.norm(lam * w / (lam + nu)) - r

    # excess(0) > 0 and excess decreases to -r; bracket then solve
    hi = float(np.max(lam))
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError("ball projection could not bracket the multiplier")
    try:
        nu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except RuntimeError as exc:
        raise NumericalError(f"ball projection root-find failed: {exc}") from exc
    y = c + V @ (lam * w / (lam + nu))
    # pull any rounding excess back onto the sphere
    dist = np.linalg.norm(y - c)
    if dist > r:
        y = c + (y - c) * (r / dist)
    return y


def kkt_residual(x, y, Q, D: AdmissibleSet) -> float:
    """Largest violation of the first-order optimality conditions at ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grad = Q @ (y - x)
    if isinstance(D, Box):
        res = np.where(y <= D.lower, np.minimum(grad, 0.0),
                       np.where(y >= D.upper, np.maximum(grad, 0.0), grad))
        infeas = np.maximum(D.lower - y, 0.0) + np.maximum(y - D.upper, 0.0)
        return float(max(np.max(np.abs(res)), np.max(infeas)))
    z = y - D.center
    dist = np.linalg.norm(z)
    infeas = max(dist - D.radius, 0.0)
    if dist < D.radius * (1 - 1e-12):
        return float(max(np.max(np.abs(grad)), infeas))
    # grad must be a non-positive multiple of the outward normal
    nu = -(grad @ z) / (z @ z)
    return float(max(np.max(np.abs(grad + nu * z)), max(-nu, 0.0), infeas))
