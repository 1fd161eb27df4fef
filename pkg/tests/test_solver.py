"""Marching/Picard solver tests.

Frozen oracle: for the one-dimensional relaxation problem in still fluid
with mu = 1, basset coefficient 1, w(0) = 1 (no buoyancy), the Laplace
transform of w is 1 / (s + 1 + sqrt(pi s)); numerical inversion of that
transform at t = 1 (extended precision, Talbot and de Hoog methods agree)
gives w(1) = 0.165022352958563.  An order-1.5 Richardson extrapolation of
the marching scheme agrees with it to 4e-9.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from mrbasset import (
    LinearField,
    SolverError,
    State,
    TaylorGreenField,
    ZeroField,
    coefficient_constants,
    derive_params,
    params_from_rates,
    picard_local,
    picard_radius,
    scheme_agreement,
    solve,
)

RELAXATION_W1 = 0.165022352958563  # Laplace-transform oracle, see module docstring


def _relaxation_params():
    return params_from_rates(mu=1.0, kappa=1.0, gamma=0.0, dim=1)


def test_relaxation_oracle():
    field = ZeroField(dim=1)
    p = _relaxation_params()
    ic = State(y=[0.0], w=[1.0])
    errs = []
    for k in (9, 10, 11):
        traj = solve(field, p, ic, 0.0, 1.0, 2**k)
        errs.append(abs(float(traj.ws[-1][0]) - RELAXATION_W1))
    assert errs[0] <= 1e-4
    assert errs[-1] <= 1e-5
    assert errs[0] > errs[1] > errs[2]  # converges toward the oracle


def test_initial_condition_fidelity(tg_field, bench_params):
    ic = State(y=[0.3, -0.2], w=[0.05, 0.01])
    traj = solve(tg_field, bench_params, ic, 0.0, 0.5, 64)
    assert np.array_equal(traj.ys[0], np.asarray(ic.y, dtype=float))
    assert np.array_equal(traj.ws[0], np.asarray(ic.w, dtype=float))


def test_determinism_bitwise(tg_field, bench_params):
    ic = State(y=[0.3, -0.2], w=[0.05, 0.01])
    a = solve(tg_field, bench_params, ic, 0.0, 1.0, 256)
    b = solve(tg_field, bench_params, ic, 0.0, 1.0, 256)
    assert np.array_equal(a.ys, b.ys)
    assert np.array_equal(a.ws, b.ws)


def test_marching_vs_picard_agreement(tg_field, bench_params):
    ic = State(y=[0.3, 0.1], w=[0.1, -0.05])
    m = solve(tg_field, bench_params, ic, 0.0, 1.0, 2**10, scheme="marching")
    p = solve(tg_field, bench_params, ic, 0.0, 1.0, 2**10, scheme="picard")
    assert scheme_agreement(m, p) <= 1e-6


def test_agreement_at_every_resolution(tg_field, bench_params):
    # Both schemes solve the same discrete system, so their distance is set
    # by the iteration tolerance, far below the acceptance threshold, at
    # every grid resolution (the uniqueness surrogate).
    ic = State(y=[0.3, 0.1], w=[0.1, -0.05])
    for k in (8, 9, 10):
        m = solve(tg_field, bench_params, ic, 0.0, 1.0, 2**k, scheme="marching")
        p = solve(tg_field, bench_params, ic, 0.0, 1.0, 2**k, scheme="picard")
        assert scheme_agreement(m, p) <= 1e-10


def test_restart_invariance(tg_field, bench_params):
    ic = State(y=[0.3, 0.1], w=[0.1, -0.05])
    whole = solve(tg_field, bench_params, ic, 0.0, 1.0, 2**9)
    split = solve(tg_field, bench_params, ic, 0.0, 1.0, 2**9, restart_at=0.5)
    assert split.restarts == [0.5]
    assert scheme_agreement(whole, split) <= 5e-6


def test_unknown_scheme_rejected(tg_field, bench_params):
    with pytest.raises(ValueError):
        solve(tg_field, bench_params, State(y=[0, 0], w=[0, 0]),
              0.0, 1.0, 8, scheme="rk4")


def test_bad_horizon_rejected(tg_field, bench_params):
    with pytest.raises(ValueError):
        solve(tg_field, bench_params, State(y=[0, 0], w=[0, 0]), 1.0, 1.0, 8)


def test_dimension_mismatch_rejected(tg_field, bench_params):
    with pytest.raises(ValueError):
        solve(tg_field, bench_params, State(y=[0.0], w=[0.0]), 0.0, 1.0, 8)


def test_picard_radius_conditions_hold(bench_params):
    field = TaylorGreenField()
    grid = [np.array(x) for x in
            ([0.0, 0.0], [0.5, 0.5], [-0.5, 0.5], [1.0, -1.0])]
    bounds = coefficient_constants(field, bench_params, grid, [0.0])
    box = picard_radius(bench_params, bounds, R_bound=1.0, t0=0.0, T=1.0)
    c1, c2, c3 = box.conditions(bench_params)
    assert c1 < 1.0 / 5.0  # strictest of the two stated constants
    assert c2 < 1.0 / 4.0
    assert c3 < box.K / 4.0
    # delta is the largest certified dyadic window: doubling it must break
    # at least one of the three smallness conditions.
    assert math.log2(box.delta) == int(math.log2(box.delta))
    bigger = replace(box, delta=2.0 * box.delta)
    d1, d2, d3 = bigger.conditions(bench_params)
    assert d1 >= 1.0 / 5.0 or d2 >= 1.0 / 4.0 or d3 >= bigger.K / 4.0


def test_picard_local_contracts(bench_params):
    field = TaylorGreenField()
    grid = [np.array(x) for x in ([0.0, 0.0], [0.5, 0.5], [1.0, -1.0])]
    bounds = coefficient_constants(field, bench_params, grid, [0.0])
    box = picard_radius(bench_params, bounds, R_bound=1.0, t0=0.0, T=1.0)
    start = State(y=[0.3, 0.1], w=[0.05, -0.02])
    res = picard_local(field, bench_params, start, 0.0, box)
    assert res.contraction_ok
    assert all(r <= 0.5 for r in res.contraction_ratios[1:])
    # The window solution agrees with the marching scheme on the same span.
    m = solve(field, bench_params, start, 0.0, box.delta,
              res.trajectory.grid.n_steps)
    assert scheme_agreement(m, res.trajectory) <= 1e-6


def test_inner_iteration_guard_raises():
    # A reversed large-drag problem on a coarse grid makes the implicit step
    # expansive, so the 50-iteration fixed-point guard must trip rather than
    # loop forever.
    p = derive_params(R=2.0, St=0.004, Re=100.0).reversed()
    field = ZeroField(dim=1)
    p = replace(p, g=np.zeros(1))
    with pytest.raises(SolverError):
        solve(field, p, State(y=[0.0], w=[1.0]), 0.0, 1.0, 4)


def test_memoryless_case_matches_exponential_decay():
    # With kappa = 0 and still fluid the equation is w' = -mu w.
    p = params_from_rates(mu=2.0, kappa=0.0, gamma=0.0, dim=1)
    traj = solve(ZeroField(dim=1), p, State(y=[0.0], w=[1.0]), 0.0, 1.0, 2**10)
    assert float(traj.ws[-1][0]) == pytest.approx(math.exp(-2.0), rel=1e-5)


def test_gravity_settling_without_memory():
    # kappa = 0, still fluid, R != 3/2: w' = -mu w + (3R/2 - 1)(-g), whose
    # terminal velocity is (3R/2 - 1)(-g)/mu.
    R, St, Re = 0.5, 0.2, 50.0
    g = [0.0, -1.0]
    base = derive_params(R=R, St=St, Re=Re, g=g)
    p = replace(base, kappa=0.0, gamma=0.0, basset=0.0)
    traj = solve(ZeroField(dim=2), p, State(y=[0, 0], w=[0, 0]), 0.0, 20.0, 2**12)
    terminal = (1.5 * R - 1.0) * (-np.asarray(g)) / base.mu
    assert traj.ws[-1] == pytest.approx(terminal, rel=1e-6)
