import math

import numpy as np
import pytest

from oracles import grid_projection_2d
from tswlad.errors import ConfigError, NumericalError
from tswlad.projection import (
    Ball,
    Box,
    admissible_set_from_dict,
    box_qp,
    kkt_residual,
    project,
    regressor_bound,
    weighted_norm,
)


def random_spd(rng, d, cond=1e3):
    M = rng.normal(size=(d, d))
    V, _ = np.linalg.qr(M)
    w = np.exp(rng.uniform(0, math.log(cond), d))
    Q = (V * w) @ V.T
    return 0.5 * (Q + Q.T)


def random_set(rng, d):
    c = rng.uniform(-2, 2, d)
    if rng.random() < 0.5:
        return Box(c, rng.uniform(0.2, 3, d))
    return Ball(c, rng.uniform(0.2, 3))


def test_weighted_norm_examples():
    x = np.array([3.0, 4.0])
    assert weighted_norm(x, np.eye(2)) == 5.0
    assert weighted_norm(np.zeros(2), [[2, 1], [1, 2]]) == 0.0
    assert weighted_norm([1, 1], [[2, 1], [1, 2]]) == pytest.approx(math.sqrt(6), abs=1e-15)


def test_weighted_norm_rejects_bad_q():
    with pytest.raises(ConfigError, match="positive definite"):
        weighted_norm([1, 1], [[1, 2], [2, 1]])
    with pytest.raises(ConfigError, match="symmetric"):
        weighted_norm([1, 1], [[2, 1], [0, 2]])


def test_identity_inside():
    D = Box(np.zeros(3), 1.0)
    x = np.array([0.2, -0.5, 0.9])
    y = project(x, [[2, 1, 0], [1, 2, 0], [0, 0, 1]], D)
    assert np.array_equal(x, y)


def test_diagonal_clamp():
    D = Box(np.zeros(6), 10.0)
    x = np.zeros(6)
    x[0] = 12.0
    np.testing.assert_array_equal(project(x, np.eye(6), D), [10, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(project(x, np.diag([1, 2, 3, 4, 5, 6.0]), D), [10, 0, 0, 0, 0, 0])


def test_coupled_example_against_grid():
    Q = np.array([[2.0, 1.0], [1.0, 2.0]])
    D = Box(np.zeros(2), 1.0)
    y = project([2.0, 0.0], Q, D)
    ref = grid_projection_2d([2.0, 0.0], Q, D.lower, D.upper)
    np.testing.assert_allclose(y, ref, atol=2e-6)
    np.testing.assert_allclose(y, [1.0, 0.5], atol=1e-14)


def test_grid_oracle_random_2d():
    rng = np.random.default_rng(11)
    for _ in range(10):
        Q = random_spd(rng, 2, cond=50)
        D = Box(rng.uniform(-1, 1, 2), rng.uniform(0.3, 1.5, 2))
        x = D.center + rng.normal(scale=3, size=2)
        y = project(x, Q, D)
        ref = grid_projection_2d(x, Q, D.lower, D.upper)
        np.testing.assert_allclose(y, ref, atol=1e-5)


def test_nonexpansive():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = int(rng.integers(1, 7))
        Q = random_spd(rng, d)
        D = random_set(rng, d)
        x, z = (D.center + rng.normal(scale=4, size=d) for _ in range(2))
        px, pz = project(x, Q, D), project(z, Q, D)
        assert weighted_norm(px - pz, Q) <= weighted_norm(x - z, Q) + 1e-8


def test_idempotent_and_certificate():
    rng = np.random.default_rng(1)
    for _ in range(300):
        d = int(rng.integers(1, 7))
        Q = random_spd(rng, d)
        D = random_set(rng, d)
        x = D.center + rng.normal(scale=4, size=d)
        y = project(x, Q, D)
        assert D.contains(y, tol=1e-12)
        np.testing.assert_allclose(project(y, Q, D), y, atol=1e-10, rtol=0)
        assert kkt_residual(x, y, Q, D) <= 1e-10 * max(1.0, np.max(np.abs(Q)) * np.max(np.abs(x - y)))
        dist = weighted_norm(x - y, Q)
        for _ in range(20):
            z = project(D.center + rng.normal(scale=3, size=d), np.eye(d), D)
            assert dist <= weighted_norm(x - z, Q) + 1e-8


def test_ill_conditioned_box():
    rng = np.random.default_rng(5)
    for _ in range(50):
        Q = random_spd(rng, 6, cond=1e10)
        D = Box(np.zeros(6), 10.0)
        x = rng.normal(scale=30, size=6)
        y = project(x, Q, D)
        assert D.contains(y)
        assert kkt_residual(x, y, Q, D) <= 1e-8 * np.max(np.abs(Q)) * (1 + np.max(np.abs(x)))


def test_box_qp_reports_trace():
    Q = np.array([[2.0, 1.0], [1.0, 2.0]])
    with pytest.raises(NumericalError) as exc:
        box_qp(Q, np.array([5.0, -5.0]), np.array([-1.0, -1.0]), np.array([1.0, 1.0]), max_iter=0)
    assert exc.value.trace == []


def test_ball_projection():
    D = Ball(np.zeros(2), 1.0)
    np.testing.assert_allclose(project([3.0, 4.0], np.eye(2), D), [0.6, 0.8], atol=1e-14)
    Q = np.diag([1.0, 100.0])
    y = project([2.0, 2.0], Q, D)
    assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-12)
    assert kkt_residual([2.0, 2.0], y, Q, D) <= 1e-9


@pytest.mark.parametrize("D, phi, expected", [
    (Box(np.zeros(6), 10.0), np.ones(6), 60.0),
    (Box(np.zeros(6), 10.0), np.zeros(6), 0.0),
    (Ball(np.zeros(6), 10.0), np.array([3.0, 4.0, 0, 0, 0, 0]), 50.0),
    (Ball(np.ones(6), 10.0), np.zeros(6), 0.0),
])
def test_regressor_bound_examples(D, phi, expected):
    assert regressor_bound(D, phi) == expected


def test_regressor_bound_is_supremum():
    rng = np.random.default_rng(2)
    D = Box(rng.uniform(-1, 1, 4), rng.uniform(0.5, 2, 4))
    phi = rng.normal(size=4)
    corners = np.array(np.meshgrid(*[[lo, hi] for lo, hi in zip(D.lower, D.upper)])).reshape(4, -1).T
    assert regressor_bound(D, phi) == pytest.approx(np.max(np.abs(corners @ phi)), rel=1e-14)


def test_set_validation():
    with pytest.raises(ConfigError, match="admissible-set assumption"):
        Box(np.zeros(2), [1.0, 0.0])
    with pytest.raises(ConfigError, match="admissible-set assumption"):
        Ball(np.zeros(2), -1.0)
    with pytest.raises(ConfigError):
        admissible_set_from_dict({"kind": "simplex"}, 2)
    with pytest.raises(ConfigError, match="dimension"):
        project(np.zeros(3), np.eye(2), Box(np.zeros(2), 1.0))
