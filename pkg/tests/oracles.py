"""Independent reference implementations used to freeze expected values.

Apart from the saturation map itself, nothing here is shared with the package: the normal CDF is a raw power
series, eigenvalues come from inertia counting and bisection, projections
from grid search, and integrals from composite Simpson rules.
"""
import math

import numpy as np

from tswlad.model import saturate


def erf_series(x, terms=200):
    """Maclaurin series of erf; accurate to ~1e-15 for |x| <= 6."""
    total = 0.0
    term = x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
    return 2.0 / math.sqrt(math.pi) * total


def norm_cdf(x, sigma=1.0):
    z = x / sigma
    if abs(z) > 6:
        # series cancels badly out here; the tail is below 1e-9 anyway
        return 0.0 if z < 0 else 1.0
    return 0.5 * (1.0 + erf_series(z / math.sqrt(2.0)))


def norm_pdf(x, sigma=1.0):
    z = x / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def simpson(f, a, b, n=20000):
    if n % 2:
        n += 1
    h = (b - a) / n
    s = f(a) + f(b)
    for i in range(1, n):
        s += (4 if i % 2 else 2) * f(a + i * h)
    return s * h / 3.0


def count_eigs_below(A, t):
    """Number of eigenvalues of symmetric ``A`` below ``t`` (Sylvester inertia)."""
    M = np.array(A, dtype=float) - t * np.eye(len(A))
    n = len(M)
    count = 0
    # symmetric Gaussian elimination without pivoting, perturbing exact zeros
    for k in range(n):
        p = M[k, k]
        if p == 0.0:
            p = 1e-300
        if p < 0:
            count += 1
        if k + 1 < n:
            r = M[k + 1:, k] / p
            M[k + 1:, k + 1:] -= np.outer(r, M[k, k + 1:])
    return count


def eig_bisect(A, index, tol=1e-12):
    """``index``-th smallest eigenvalue by bisection on the inertia count."""
    A = np.asarray(A, dtype=float)
    radius = np.max(np.sum(np.abs(A), axis=1))
    lo, hi = -radius - 1.0, radius + 1.0
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if count_eigs_below(A, mid) > index:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def grid_projection_2d(x, Q, lo, hi, step=1e-3, refine=1e-6):
    """Minimize (x-y)'Q(x-y) over a 2-D box by grid search then local refinement."""
    x = np.asarray(x, dtype=float)

    def obj(Y1, Y2):
        d1, d2 = x[0] - Y1, x[1] - Y2
        return Q[0][0] * d1 * d1 + 2 * Q[0][1] * d1 * d2 + Q[1][1] * d2 * d2

    g1 = np.arange(lo[0], hi[0] + step / 2, step)
    g2 = np.arange(lo[1], hi[1] + step / 2, step)
    Y1, Y2 = np.meshgrid(g1, g2, indexing="ij")
    V = obj(Y1, Y2)
    i, j = np.unravel_index(np.argmin(V), V.shape)
    best = np.array([g1[i], g2[j]])
    h = step
    while h > refine:
        h /= 10.0
        c1 = np.clip(best[0] + h * np.arange(-15, 16), lo[0], hi[0])
        c2 = np.clip(best[1] + h * np.arange(-15, 16), lo[1], hi[1])
        Y1, Y2 = np.meshgrid(c1, c2, indexing="ij")
        V = obj(Y1, Y2)
        i, j = np.unravel_index(np.argmin(V), V.shape)
        best = np.array([c1[i], c2[j]])
    return best


def sign_term_sd(x_hat, x, spec, noise):
    """Exact standard deviation of sgn[y - S(x_hat)] when y = S(x + eps)."""
    s_hat = saturate(x_hat, spec)
    p_plus = 0.0 if s_hat >= spec.upper_clip else 1.0 - noise.cdf(s_hat - x)
    p_minus = 0.0 if s_hat <= spec.lower_clip else noise.cdf(s_hat - x)
    mean = p_plus - p_minus
    return math.sqrt(max(p_plus + p_minus - mean * mean, 0.0))
