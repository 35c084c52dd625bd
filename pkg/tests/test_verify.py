import math

import numpy as np
import pytest

from reconphase.dynsys import (
    SurfaceProfile,
    ball_point,
    make_ball_system,
    make_rigid_body,
    rigid_point,
)
from reconphase.errors import OracleUnavailableError
from reconphase.liegroup import Rotation
from reconphase.reconstruct import phase
from reconphase.verify import (
    ALL_CHECKS,
    CheckReport,
    check_delta_integral,
    check_equivariance,
    check_flower_invariants,
    check_frequency_flower_constancy,
    check_linearization,
    check_period_continuity,
    check_phase_conserved,
    check_vf_invariance,
    measured_rotation_angle,
    momentum_loop_area,
    montgomery_oracle,
    rigid_family_margin,
    sample_ball,
    sample_points,
    sample_rigid,
)

TWO_PI = 2.0 * math.pi


def wrap_angle(x: float) -> float:
    return abs((x + math.pi) % TWO_PI - math.pi)


@pytest.fixture(scope="module")
def ball_spec():
    return make_ball_system(SurfaceProfile((0.0, 0.5)), annulus=(0.2, 2.5))


@pytest.fixture(scope="module")
def rigid_spec():
    return make_rigid_body((1.0, 2.0, 3.0))


@pytest.fixture(scope="module")
def ball_samples(ball_spec):
    return sample_ball(ball_spec, np.random.default_rng(7), 3)


@pytest.fixture(scope="module")
def rigid_samples(rigid_spec):
    return sample_rigid(rigid_spec, np.random.default_rng(7), 4)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def test_ball_sampler_region_and_admission(ball_spec, ball_samples):
    for m in ball_samples:
        r = float(np.linalg.norm(m.a))
        assert 0.5 <= r <= 1.5
        assert np.linalg.norm(m.a_dot) <= 0.6
        assert abs(m.w) <= 0.6
    # admission guarantees a regular phase exists
    assert phase(ball_spec, ball_samples[0]).regular


def test_ball_sampler_deterministic(ball_spec, ball_samples):
    again = sample_ball(ball_spec, np.random.default_rng(7), 3)
    for m1, m2 in zip(ball_samples, again):
        assert np.array_equal(m1.a, m2.a)
        assert np.array_equal(m1.a_dot, m2.a_dot)
        assert m1.w == m2.w


def test_rigid_sampler_stratifies_families(rigid_spec, rigid_samples):
    margins = [rigid_family_margin(rigid_spec, m.omega_body) for m in rigid_samples]
    assert all(abs(k) >= 0.12 for k in margins)
    signs = [k > 0 for k in margins]
    assert signs == [True, False, True, False]  # alternating by construction


def test_rigid_family_margin_reference_values(rigid_spec):
    # short axis: I2/I1 - 1 = +1;  long axis: I2/I3 - 1 = -1/3;  middle: 0
    assert rigid_family_margin(rigid_spec, (1.0, 0, 0)) == pytest.approx(1.0)
    assert rigid_family_margin(rigid_spec, (0, 0, 0.7)) == pytest.approx(-1 / 3)
    assert rigid_family_margin(rigid_spec, (0, 1.3, 0)) == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# report mechanics
# ---------------------------------------------------------------------------

def test_report_verdict_matches_residual(ball_spec, ball_samples):
    rep = check_vf_invariance(ball_spec, ball_samples, tol=1e-10, seed=3)
    assert rep.passed and rep.verdict == "pass"
    assert rep.max_residual < rep.tolerance
    tight = check_vf_invariance(ball_spec, ball_samples, tol=1e-300, seed=3)
    assert tight.verdict == "fail"


def test_report_serialization_excludes_wall_time(ball_spec, ball_samples):
    rep = check_vf_invariance(ball_spec, ball_samples, tol=1e-10, seed=3)
    d = rep.to_dict()
    assert "wall_time" not in d
    assert d["seed"] == 3
    assert d["system"] == "ball"
    assert rep.wall_time >= 0.0


def test_reports_deterministic_and_idempotent(ball_spec, ball_samples):
    a = check_equivariance(ball_spec, ball_samples[:2], 5e-7, seed=11, n_group=2)
    b = check_equivariance(ball_spec, ball_samples[:2], 5e-7, seed=11, n_group=2)
    assert a.to_dict() == b.to_dict()


def test_empty_samples_are_inconclusive(ball_spec):
    for name, fn in ALL_CHECKS.items():
        rep = fn(ball_spec, [], 1e-6)
        assert rep.verdict == "inconclusive", name
        assert rep.max_residual is None
        assert rep.n_samples == 0


# ---------------------------------------------------------------------------
# the checks pass on healthy samples
# ---------------------------------------------------------------------------

def test_all_checks_pass_ball(ball_spec, ball_samples):
    reports = [
        check_phase_conserved(ball_spec, ball_samples, 5e-7, seed=1,
                              fractions=(0.2, 1.5)),
        check_equivariance(ball_spec, ball_samples, 5e-7, seed=2, n_group=2),
        check_linearization(ball_spec, ball_samples, 1e-6, seed=3),
        check_flower_invariants(ball_spec, ball_samples, 1e-6, seed=4, n_frames=3),
        check_delta_integral(ball_spec, ball_samples, 1e-6, seed=5),
        check_frequency_flower_constancy(ball_spec, ball_samples, 1e-7, seed=6,
                                         n_frames=2),
        check_vf_invariance(ball_spec, ball_samples, 1e-10, seed=7),
    ]
    for rep in reports:
        assert rep.passed, (rep.name, rep.max_residual)
        assert rep.n_skipped == 0


def test_all_checks_pass_rigid(rigid_spec, rigid_samples):
    samples = rigid_samples[:3]
    reports = [
        check_phase_conserved(rigid_spec, samples, 5e-7, seed=1,
                              fractions=(0.7, 3.1)),
        check_equivariance(rigid_spec, samples, 5e-7, seed=2, n_group=2),
        check_linearization(rigid_spec, samples, 1e-6, seed=3),
        check_flower_invariants(rigid_spec, samples, 1e-6, seed=4, n_frames=3),
        check_delta_integral(rigid_spec, samples, 1e-6, seed=5),
        check_frequency_flower_constancy(rigid_spec, samples, 1e-7, seed=6,
                                         n_frames=2),
        check_vf_invariance(rigid_spec, samples, 1e-10, seed=7),
    ]
    for rep in reports:
        assert rep.passed, (rep.name, rep.max_residual)


def test_checks_pass_near_relative_equilibrium(rigid_spec):
    m = rigid_point(
        rigid_spec, Rotation.from_axis_angle([0.1, 0.8, 0.2], 0.5),
        (1.1, 0.005, 0.008),
    )
    assert check_phase_conserved(rigid_spec, [m], 1e-6, seed=1,
                                 fractions=(0.2, 0.7)).passed
    assert check_linearization(rigid_spec, [m], 1e-6, seed=2).passed


def test_period_continuity_smooth_family(ball_spec):
    fam = [
        ball_point(ball_spec, a=(0.9, -0.2), a_dot=(0.1, 0.35), w=w)
        for w in np.linspace(-0.5, 0.5, 12)
    ]
    rep = check_period_continuity(ball_spec, fam, 1.0)
    assert rep.passed
    assert rep.n_samples == 11  # one residual per period jump


def test_period_continuity_detects_separatrix_spike(rigid_spec):
    def fam_point(theta):
        u = np.array([math.cos(theta), 0.35, math.sin(theta)])
        u /= np.linalg.norm(u)
        return rigid_point(rigid_spec, Rotation.identity(), 1.2 * u / rigid_spec.inertia)

    angles = sorted(list(np.linspace(0.15, 1.45, 14)) + [math.pi / 3 + 2e-6])
    rep = check_period_continuity(rigid_spec, [fam_point(t) for t in angles], 1.0)
    assert rep.verdict == "fail"


def test_negative_control_corrupted_flow_fails(rigid_spec, rigid_samples):
    rep = check_linearization(
        rigid_spec, rigid_samples[:2], 1e-6, seed=3,
        rtol=1e-2, atol=1e-2, tol_closure=0.5, tol_phase=np.inf,
    )
    assert rep.verdict == "fail"
    assert rep.max_residual > 1e-4


# ---------------------------------------------------------------------------
# the independent rotation-angle oracle
# ---------------------------------------------------------------------------

def test_oracle_agrees_with_phase_both_families(rigid_spec, rigid_samples):
    for m in rigid_samples:
        p = phase(rigid_spec, m)
        predicted = montgomery_oracle(rigid_spec.inertia, m)
        measured = measured_rotation_angle(p, m)
        assert wrap_angle(predicted - measured) < 1e-6
        assert 0.0 <= measured < TWO_PI


def test_oracle_symmetric_top_closed_form():
    # inertia (1, 2, 2): the momentum loop precesses uniformly about e1
    # with period 2 pi I2 / (|I2 - I1| |Omega_1|), and the per-period
    # rotation angle is ||L|| tau / I2 (mod 2 pi)
    spec = make_rigid_body((1.0, 2.0, 2.0))
    omega = np.array([0.8, 0.3, -0.25])
    m = rigid_point(spec, Rotation.identity(), omega)
    L = float(np.linalg.norm(spec.inertia * omega))
    tau = TWO_PI * 2.0 / (1.0 * 0.8)
    expected = (L * tau / 2.0) % TWO_PI
    assert wrap_angle(montgomery_oracle(spec.inertia, m) - expected) < 1e-8


def test_oracle_point_loop_requires_period(rigid_spec):
    m = rigid_point(rigid_spec, Rotation.identity(), (0.9, 0.0, 0.0))
    with pytest.raises(OracleUnavailableError):
        montgomery_oracle(rigid_spec.inertia, m)
    ang = montgomery_oracle(rigid_spec.inertia, m, period=7.0)
    assert ang == pytest.approx((0.9 * 7.0) % TWO_PI, abs=1e-12)


def test_oracle_separatrix_unavailable(rigid_spec):
    m = rigid_point(rigid_spec, Rotation.identity(), (1e-6, 0.8, 1e-6))
    with pytest.raises(OracleUnavailableError):
        montgomery_oracle(rigid_spec.inertia, m)


def test_loop_reversal_negates_enclosed_area(rigid_spec, rigid_samples):
    m = rigid_samples[0]
    tau_f, area_f = momentum_loop_area(rigid_spec.inertia, m)
    tau_b, area_b = momentum_loop_area(rigid_spec.inertia, m, reverse=True)
    assert abs(tau_f - tau_b) < 1e-9
    assert abs(area_f + area_b) < 1e-8
    assert abs(area_f) > 1e-3  # a genuine loop, not a degenerate point


def test_sample_points_dispatches(ball_spec, rigid_spec):
    rng = np.random.default_rng(0)
    assert sample_points(ball_spec, rng, 1)[0].system is ball_spec
    assert sample_points(rigid_spec, rng, 1)[0].system is rigid_spec
