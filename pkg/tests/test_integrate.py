"""Integrator and period-detector tests.

Oracles: flow semigroup property, closed-form steady rotation of the
rigid body, the linearized small-oscillation period of Euler's
equations near a stable axis, and re-integration at a tighter tolerance.
"""

import csv
import io
import math

import numpy as np
import pytest

from reconphase.dynsys import (
    SurfaceProfile,
    act,
    ball_point,
    energy,
    make_ball_system,
    make_rigid_body,
    rigid_point,
    state_distance,
)
from reconphase.errors import (
    IntegrationError,
    NotPeriodicError,
    PeriodNotFoundError,
)
from reconphase.integrate import (
    _period_search,
    dense_eval,
    export_csv,
    find_reduced_period,
    flow,
    flow_trajectory,
)
from reconphase.liegroup import GroupElement, Rotation, exp_so3


@pytest.fixture(scope="module")
def ball():
    return make_ball_system(SurfaceProfile((0.0, 0.5)))


@pytest.fixture(scope="module")
def rigid():
    return make_rigid_body((1.0, 2.0, 3.0))


@pytest.fixture(scope="module")
def mball(ball):
    rng = np.random.default_rng(1)
    return ball_point(ball, (0.9, -0.2), (0.1, 0.35), Rotation(rng.normal(size=4)), 0.4)


@pytest.fixture(scope="module")
def mrigid(rigid):
    rng = np.random.default_rng(2)
    return rigid_point(rigid, Rotation(rng.normal(size=4)), (1.1, 0.2, 0.15))


# ----------------------------------------------------------------------
# flow
# ----------------------------------------------------------------------


def test_flow_zero_time_is_identity(ball, mball):
    assert flow(ball, mball, 0.0) is mball


def test_flow_semigroup(ball, mball):
    m12 = flow(ball, flow(ball, mball, 1.7), 2.3)
    m_direct = flow(ball, mball, 4.0)
    assert state_distance(m12, m_direct) < 1e-8


def test_flow_backward_inverts_forward(ball, mball):
    m_fwd = flow(ball, mball, 3.0)
    m_back = flow(ball, m_fwd, -3.0)
    assert state_distance(m_back, mball) < 1e-9


def test_rigid_steady_rotation_closed_form(rigid):
    # principal-axis rotation: Q(t) = exp(t * omega_spatial) Q0
    rng = np.random.default_rng(3)
    Q0 = Rotation(rng.normal(size=4))
    omega_body = np.array([0.0, 0.0, 0.8])
    m = rigid_point(rigid, Q0, omega_body)
    t = 2.37
    mt = flow(rigid, m, t)
    omega_spatial = Q0.apply(omega_body)
    expected = exp_so3(t * omega_spatial) @ Q0
    assert mt.Q.distance(expected) < 1e-9
    np.testing.assert_allclose(mt.omega_body, omega_body, atol=1e-12)


def test_flow_integration_error_on_domain_exit(ball):
    m = ball_point(ball, (1.4, 0.0), (2.5, 0.0), Rotation.identity(), 0.0)
    with pytest.raises(IntegrationError) as exc:
        flow(ball, m, 10.0)
    # the error carries the last valid state, still inside the annulus
    last = exc.value.last_state
    assert last is not None
    assert np.linalg.norm(last.a) <= 2.5 + 1e-9


def test_flow_rejects_bad_start(ball):
    m = ball_point(ball, (5.0, 0.0), (0.0, 0.1), Rotation.identity(), 0.0)
    with pytest.raises(IntegrationError):
        flow(ball, m, 1.0)


# ----------------------------------------------------------------------
# trajectories and dense output
# ----------------------------------------------------------------------


def test_trajectory_nodes_and_dense_output(ball, mball):
    traj = flow_trajectory(ball, mball, 5.0)
    times = np.array(traj.times)
    assert np.all(np.diff(times) > 0)
    for t, y in zip(traj.times, traj.states):
        assert np.abs(traj.eval_y(t) - y).max() < 1e-12
        assert abs(np.linalg.norm(y[4:8]) - 1.0) < 1e-12
    assert traj.n_accepted == len(traj.times) - 1
    assert traj.n_rhs_evals > 12 * traj.n_accepted


def test_dense_eval_matches_tighter_reintegration(ball, mball):
    traj = flow_trajectory(ball, mball, 5.0, rtol=1e-10, atol=1e-12)
    k = len(traj.times) // 2
    tq = 0.5 * (traj.times[k] + traj.times[k + 1])
    m_interp = dense_eval(traj, tq)
    m_exact = flow(ball, mball, tq, rtol=1e-12, atol=1e-14)
    assert state_distance(m_interp, m_exact) < 1e-9


def test_dense_eval_out_of_span(ball, mball):
    traj = flow_trajectory(ball, mball, 1.0)
    with pytest.raises(ValueError):
        dense_eval(traj, 1.5)
    with pytest.raises(ValueError):
        dense_eval(traj, -0.1)


# ----------------------------------------------------------------------
# period detection
# ----------------------------------------------------------------------


def test_ball_period_closure(ball, mball):
    pr = find_reduced_period(ball, mball)
    assert pr.tau > 1e-3
    assert pr.closure_residual < 1e-7
    assert pr.crossing_refinement_iterations >= 1
    # independent confirmation: the reduced state at tau matches the start
    y0 = ball.pack(mball)
    ytau = ball.pack(flow(ball, mball, pr.tau))
    assert np.linalg.norm(ball.reduce_y(ytau) - ball.reduce_y(y0)) < 1e-8


def test_rigid_linearized_period_near_stable_axis(rigid):
    # small oscillation about e1 for inertia (1,2,3):
    # omega^2 = Omega1^2 (I2-I1)(I3-I1)/(I2 I3) => tau = 2 pi sqrt(3)/Omega1
    m = rigid_point(rigid, Rotation.identity(), (1.0, 0.01, 0.01))
    pr = find_reduced_period(rigid, m)
    assert pr.tau == pytest.approx(2 * math.pi * math.sqrt(3), rel=1e-2)


def test_period_is_orbit_intrinsic(ball, mball):
    pr = find_reduced_period(ball, mball)
    m_shift = flow(ball, mball, 0.3 * pr.tau)
    pr2 = find_reduced_period(ball, m_shift)
    assert abs(pr2.tau - pr.tau) < 1e-8 * pr.tau


def test_period_is_group_invariant(ball, mball):
    pr = find_reduced_period(ball, mball)
    g = GroupElement(1.1, exp_so3(np.array([0.3, -0.2, 0.5])))
    pr2 = find_reduced_period(ball, act(g, mball))
    assert abs(pr2.tau - pr.tau) < 1e-8 * pr.tau


def test_period_rejects_reduced_equilibrium(rigid):
    m = rigid_point(rigid, Rotation.identity(), (0.8, 0.0, 0.0))
    with pytest.raises(PeriodNotFoundError):
        find_reduced_period(rigid, m)


def test_period_not_found_within_t_max(ball, mball):
    with pytest.raises(PeriodNotFoundError):
        find_reduced_period(ball, mball, t_max=1.0)


def test_not_periodic_when_closure_unattainable(ball, mball):
    # an impossible closure tolerance turns every crossing into a miss
    with pytest.raises(NotPeriodicError) as exc:
        find_reduced_period(ball, mball, tol_closure=1e-16, t_max=30.0)
    assert exc.value.best_residual < 1e-9


def test_energy_drift_below_contract_over_one_period(ball, rigid, mball, mrigid):
    for spec, m in ((ball, mball), (rigid, mrigid)):
        pr, traj = _period_search(spec, m, rtol=1e-10, atol=1e-12)
        E0 = spec.energy_y(spec.pack(m))
        drift = max(abs(spec.energy_y(y) - E0) for y in traj.states)
        assert drift / abs(E0) < 1e-9


# ----------------------------------------------------------------------
# CSV export
# ----------------------------------------------------------------------


def test_export_csv_round_trips(ball, mball, tmp_path):
    traj = flow_trajectory(ball, mball, 2.0)
    out = tmp_path / "traj.csv"
    export_csv(traj, str(out), config_echo='{"system":"ball"}')
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# reconphase trajectory csv v1")
    header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    reader = csv.DictReader(lines[header_idx:])
    rows = list(reader)
    assert len(rows) == len(traj.times)
    # shortest-roundtrip floats reproduce the stored values exactly
    for row, t, y in zip(rows, traj.times, traj.states):
        assert float(row["t"]) == t
        assert float(row["a1"]) == y[0]
        assert float(row["qw"]) == y[4]
        assert float(row["energy"]) == ball.energy_y(y)


def test_export_csv_to_stream(rigid, mrigid):
    traj = flow_trajectory(rigid, mrigid, 1.0)
    buf = io.StringIO()
    export_csv(traj, buf)
    text = buf.getvalue()
    assert "omega1" in text and "momentum_norm" in text
