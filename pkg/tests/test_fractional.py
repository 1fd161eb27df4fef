"""Quadrature and half-order operator tests.

Oracle values used below:
- int_0^1 s / sqrt(1 - s) ds = 4/3 (substitute u = 1 - s).
- int_0^1 sqrt(s) / sqrt(1 - s) ds = pi/2 (Beta(3/2, 1/2)).
- Left half-derivative of sqrt(t) at t = 1 equals sqrt(pi)/2
  (Gamma(3/2) / Gamma(1) * t^0).
- For a piecewise-linear path, each cell integral has the closed form
  obtained from the substitution u = t - s:
  int (a + b s) / sqrt(t - s) ds = 2 (a + b t) sqrt(u) - (2 b / 3) u^{3/2}.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrbasset import (
    SampledPath,
    TimeGrid,
    basset_integral,
    basset_weights,
    caputo_half_derivative,
    right_rl_half_derivative,
    rl_half_derivative,
    wallis,
    wallis_sequence,
)


def _pl_exact(points, values, n):
    """Closed-form Abel integral of the piecewise-linear interpolant.

    Written in the local form f(s) = v0 + slope (s - s0) with u = t - s:
    int_cell f(s) / sqrt(t - s) ds = 2 v0 d + slope (2 u0 d - 2 (u0^{3/2}
    - u1^{3/2}) / 3) where d = sqrt(u0) - sqrt(u1), computed in factored
    form to avoid cancellation on small cells.
    """
    t = points[n]
    total = np.zeros_like(np.atleast_1d(values[0]), dtype=float)
    for j in range(n):
        s0, s1 = points[j], points[j + 1]
        v0 = values[j]
        slope = (values[j + 1] - values[j]) / (s1 - s0)
        u0, u1 = t - s0, t - s1
        r0, r1 = math.sqrt(u0), math.sqrt(u1)
        d = (u0 - u1) / (r0 + r1)
        cubes = d * (u0 + r0 * r1 + u1)  # u0^{3/2} - u1^{3/2}
        total += 2.0 * v0 * d + slope * (2.0 * u0 * d - 2.0 * cubes / 3.0)
    return total


def test_linear_kernel_oracle_four_thirds():
    grid = TimeGrid.uniform(0.0, 1.0, 257)
    path = SampledPath(grid, grid.points.copy())
    val = basset_integral(path, 257)
    assert abs(val - 4.0 / 3.0) <= 8 * np.finfo(float).eps * (4.0 / 3.0)


def test_sqrt_kernel_converges_to_half_pi():
    errs = []
    for k in range(6, 13):
        n = 2**k
        grid = TimeGrid.uniform(0.0, 1.0, n)
        path = SampledPath(grid, np.sqrt(grid.points))
        errs.append(abs(float(basset_integral(path, n)) - math.pi / 2.0))
    errs = np.array(errs)
    assert errs[-1] <= 1e-6
    assert np.all(np.diff(errs) < 0.0)  # monotone under refinement
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.0)


@given(
    n=st.integers(min_value=1, max_value=20),
    seed=st.integers(min_value=0, max_value=2**31),
    uniform=st.booleans(),
)
@settings(max_examples=60, deadline=None)
def test_piecewise_linear_exactness(n, seed, uniform):
    rng = np.random.default_rng(seed)
    if uniform:
        pts = np.linspace(0.0, 1.0, n + 1)
    else:
        pts = np.sort(rng.uniform(0.0, 1.0, n + 1))
        pts[0], pts[-1] = 0.0, 1.0
        if np.any(np.diff(pts) <= 1e-6):
            pts = np.linspace(0.0, 1.0, n + 1)
    vals = rng.standard_normal(n + 1)
    path = SampledPath(TimeGrid(pts), vals)
    got = float(basset_integral(path, n))
    want = float(_pl_exact(pts, vals, n)[0])
    scale = max(1.0, abs(want))
    assert abs(got - want) <= 8 * np.finfo(float).eps * scale * (n + 1)


@given(
    n=st.integers(min_value=1, max_value=64),
    seed=st.integers(min_value=0, max_value=2**31),
)
@settings(max_examples=40, deadline=None)
def test_weights_nonnegative_and_sum_to_kernel_mass(n, seed):
    rng = np.random.default_rng(seed)
    pts = np.cumsum(np.concatenate([[0.0], rng.uniform(0.01, 1.0, n)]))
    grid = TimeGrid(pts)
    w = basset_weights(grid, n).weights
    assert np.all(w >= 0.0)
    # Constant path: the integral is 2 sqrt(t_n - t_0).
    mass = 2.0 * math.sqrt(pts[n] - pts[0])
    assert abs(w.sum() - mass) <= 1e-12 * max(1.0, mass)


def test_rl_caputo_boundary_identity_exact():
    grid = TimeGrid.uniform(0.0, 2.0, 128)
    vals = np.cos(grid.points) + 3.0
    path = SampledPath(grid, vals)
    for n in (1, 17, 64, 128):
        dt = grid.points[n] - grid.points[0]
        boundary = vals[0] / math.sqrt(math.pi * dt)
        lhs = rl_half_derivative(path, n) - caputo_half_derivative(path, n)
        assert lhs == pytest.approx(boundary, abs=0.0)  # exact by construction


def test_rl_half_derivative_of_sqrt():
    n = 2**12
    grid = TimeGrid.uniform(0.0, 1.0, n)
    path = SampledPath(grid, np.sqrt(grid.points))
    val = float(rl_half_derivative(path, n))
    assert abs(val - math.sqrt(math.pi) / 2.0) <= 1e-6


def test_caputo_semigroup_on_identity_path():
    # Half-derivative applied twice to f(s) = s recovers f'(t) = 1.
    n = 2**11
    grid = TimeGrid.uniform(0.0, 1.0, n)
    first = np.zeros(n + 1)
    path = SampledPath(grid, grid.points.copy())
    for k in range(1, n + 1):
        first[k] = float(caputo_half_derivative(path, k))
    second = float(caputo_half_derivative(SampledPath(grid, first), n))
    assert abs(second - 1.0) <= 5e-3


def test_right_rl_matches_reflected_left_rl():
    grid = TimeGrid.uniform(0.0, 1.0, 64)
    vals = np.sin(grid.points)
    path = SampledPath(grid, vals)
    got = right_rl_half_derivative(path, 16, 1.0)
    # Independent reflection: evaluate the left operator on s -> f(1 - s).
    ref = SampledPath(TimeGrid(grid.points.copy()), vals[::-1].copy())
    want = rl_half_derivative(ref, 64 - 16)
    assert got == pytest.approx(want, rel=1e-12)


def test_right_rl_rejects_terminal_before_node():
    grid = TimeGrid.uniform(0.0, 1.0, 8)
    path = SampledPath(grid, grid.points.copy())
    with pytest.raises(ValueError):
        right_rl_half_derivative(path, 4, grid.points[4])


def test_wallis_seeds_and_closed_forms():
    assert wallis(0) == 2.0
    assert wallis(1) == math.pi / 2.0
    assert wallis(2) == pytest.approx(4.0 / 3.0, rel=1e-15)
    assert wallis(3) == pytest.approx(3.0 * math.pi / 8.0, rel=1e-15)
    with pytest.raises(ValueError):
        wallis(-1)


def test_wallis_sequence_matches_pointwise():
    seq = wallis_sequence(300)
    for k in (0, 1, 2, 17, 128, 300):
        assert seq[k] == wallis(k)
    with pytest.raises(ValueError):
        wallis_sequence(-1)


def test_wallis_decay_rate():
    k_max = 10_000
    seq = wallis_sequence(k_max)
    ks = np.arange(k_max + 1)
    scaled = np.sqrt(ks[1:]) * seq[1:]
    assert np.max(scaled) <= 2.6
    # Monotone in k beyond k = 2 (decay matches 1/sqrt(k)).
    assert np.all(np.diff(seq[2:]) < 0.0)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 1.0, 0.5]))
    grid = TimeGrid.uniform(0.0, 1.0, 4)
    assert grid.n_steps == 4
    assert grid.step == pytest.approx(0.25)
    assert grid.index_of(0.5) == 2
    with pytest.raises(ValueError):
        grid.index_of(0.3)


def test_sampled_path_shape_validation():
    grid = TimeGrid.uniform(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        SampledPath(grid, np.zeros(3))
