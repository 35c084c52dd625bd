"""System-layer tests: profiles, action axioms, reduction, energy,
vector-field invariance.  Oracles: closed-form values computed by hand,
numpy polynomial evaluation, and small scipy integrations."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from reconphase.dynsys import (
    PhasePoint,
    SurfaceProfile,
    act,
    ball_point,
    d_act,
    energy,
    make_ball_system,
    make_rigid_body,
    reduce,
    rigid_point,
    rolling_residual,
    state_distance,
    vector_field,
)
from reconphase.errors import ConfigError, DomainError
from reconphase.liegroup import (
    E3,
    SO3,
    S1XSO3,
    GroupElement,
    Rotation,
    exp_so3,
    group_distance,
)


@pytest.fixture(scope="module")
def ball():
    return make_ball_system(SurfaceProfile((0.0, 0.5)))


@pytest.fixture(scope="module")
def rigid():
    return make_rigid_body((1.0, 2.0, 3.0))


def random_ball_point(spec, rng, q=None):
    phi = rng.uniform(0, 2 * math.pi)
    r = rng.uniform(0.5, 1.5)
    a = r * np.array([math.cos(phi), math.sin(phi)])
    a_dot = rng.normal(size=2) * 0.3
    quat = Rotation(q if q is not None else rng.normal(size=4))
    return ball_point(spec, a, a_dot, quat, rng.uniform(-0.6, 0.6))


def random_group(rng, group=S1XSO3):
    th = rng.uniform(0, 2 * math.pi) if group == S1XSO3 else 0.0
    return GroupElement(th, exp_so3(rng.normal(size=3)), group)


# ----------------------------------------------------------------------
# profiles
# ----------------------------------------------------------------------


def test_profile_derivatives_match_numpy_polyval():
    coeffs = (0.1, 0.5, -0.02, 0.003)
    p = SurfaceProfile(coeffs)
    poly = np.polynomial.Polynomial(coeffs)
    dpoly = poly.deriv()
    ddpoly = poly.deriv(2)
    for s in np.linspace(0.0, 5.0, 23):
        assert p.f(s) == pytest.approx(poly(s), rel=1e-14, abs=1e-14)
        assert p.fp(s) == pytest.approx(dpoly(s), rel=1e-14, abs=1e-14)
        assert p.fpp(s) == pytest.approx(ddpoly(s), rel=1e-14, abs=1e-14)


def test_paraboloid_profile_accepted():
    make_ball_system(SurfaceProfile((0.0, 0.5)))  # z = r^2/2, d2z/dr2 = 1


def test_concave_profile_rejected():
    # z = r^2 - r^4/2 flattens and turns concave for r > 1/sqrt(2)
    with pytest.raises(ConfigError):
        make_ball_system(SurfaceProfile((0.0, 1.0, -0.5)))


def test_profile_parameter_validation():
    with pytest.raises(ConfigError):
        SurfaceProfile((0.0, 0.5), gravity=-1.0)
    with pytest.raises(ConfigError):
        SurfaceProfile((0.0, 0.5), mass=0.0)
    with pytest.raises(ConfigError):
        SurfaceProfile((0.0, 0.5), inertia_ratio=1.5)
    with pytest.raises(ConfigError):
        make_ball_system(SurfaceProfile((0.0, 0.5)), annulus=(1.0, 0.5))


def test_rigid_body_validation():
    with pytest.raises(ConfigError):
        make_rigid_body((1.0, -2.0, 3.0))
    with pytest.raises(ConfigError):
        make_rigid_body((1.0, 2.0))


# ----------------------------------------------------------------------
# phase points
# ----------------------------------------------------------------------


def test_ball_point_excludes_origin(ball):
    with pytest.raises(ValueError):
        PhasePoint(np.zeros(2), np.zeros(2), Rotation.identity(), 0.3, ball)


def test_rigid_point_packing(rigid):
    m = rigid_point(rigid, Rotation.identity(), (0.3, -0.4, 0.5))
    np.testing.assert_array_equal(m.omega_body, [0.3, -0.4, 0.5])
    y = rigid.pack(m)
    m2 = rigid.unpack(y)
    assert state_distance(m, m2) < 1e-15


def test_ball_pack_unpack_round_trip(ball):
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = random_ball_point(ball, rng)
        assert state_distance(m, ball.unpack(ball.pack(m))) < 1e-15


# ----------------------------------------------------------------------
# the action
# ----------------------------------------------------------------------


def test_act_identity(ball):
    rng = np.random.default_rng(2)
    m = random_ball_point(ball, rng)
    assert state_distance(act(GroupElement.identity(), m), m) == 0.0


def test_act_quarter_turn_frozen(ball):
    m = ball_point(ball, (1.0, 0.0), (0.2, 0.1), Rotation.identity(), 0.0)
    g = GroupElement(math.pi / 2, Rotation.identity())
    m2 = act(g, m)
    np.testing.assert_allclose(m2.a, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(m2.a_dot, [-0.1, 0.2], atol=1e-15)


def test_act_is_group_action(ball, rigid):
    rng = np.random.default_rng(3)
    for spec, sampler, group in (
        (ball, random_ball_point, S1XSO3),
        (rigid, lambda s, r: rigid_point(s, Rotation(r.normal(size=4)), r.normal(size=3)), SO3),
    ):
        for _ in range(50):
            m = sampler(spec, rng)
            g1, g2 = random_group(rng, group), random_group(rng, group)
            lhs = act(g1 @ g2, m)
            rhs = act(g1, act(g2, m))
            assert state_distance(lhs, rhs) < 1e-12


def test_act_freeness(ball):
    rng = np.random.default_rng(4)
    m = random_ball_point(ball, rng)
    for _ in range(50):
        g = random_group(rng)
        if group_distance(g, GroupElement.identity()) > 0.1:
            assert state_distance(act(g, m), m) > 1e-3


def test_act_group_tag_mismatch(ball):
    rng = np.random.default_rng(5)
    m = random_ball_point(ball, rng)
    with pytest.raises(ValueError):
        act(GroupElement(0.0, Rotation.identity(), SO3), m)


# ----------------------------------------------------------------------
# vector field
# ----------------------------------------------------------------------


def test_rigid_principal_axes_are_equilibria(rigid):
    for axis in np.eye(3):
        m = rigid_point(rigid, Rotation.identity(), 0.7 * axis)
        v = vector_field(m)
        np.testing.assert_allclose(v[3:], 0.0, atol=1e-15)
        np.testing.assert_allclose(v[:3], 0.7 * axis, atol=1e-15)


def test_ball_restoring_force_sign(ball):
    # displaced rest state on an upward bowl: horizontal acceleration
    # must point back toward the axis
    m = ball_point(ball, (0.3, 0.0), (0.0, 0.0), Rotation.identity(), 0.0)
    v = vector_field(m)
    assert v[2] < 0.0
    assert abs(v[3]) < 1e-15


def test_ball_domain_errors(ball):
    outside = ball_point(ball, (3.0, 0.0), (0.0, 0.1), Rotation.identity(), 0.0)
    with pytest.raises(DomainError):
        vector_field(outside)
    at_axis = ball_point(ball, (0.0, 0.0), (0.1, 0.0), Rotation.identity(), 0.0)
    with pytest.raises(DomainError):
        vector_field(at_axis)


def test_vector_field_invariance(ball, rigid):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        m = random_ball_point(ball, rng)
        g = random_group(rng)
        lhs = vector_field(act(g, m))
        rhs = d_act(g, m, vector_field(m))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst < 1e-10
    for _ in range(100):
        m = rigid_point(rigid, Rotation(rng.normal(size=4)), rng.normal(size=3))
        g = random_group(rng, SO3)
        lhs = vector_field(act(g, m))
        rhs = d_act(g, m, vector_field(m))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst < 1e-10


# ----------------------------------------------------------------------
# reduction
# ----------------------------------------------------------------------


def test_reduce_anchor_values(ball):
    m = ball_point(ball, (1.0, 0.0), (0.0, 0.0), Rotation.identity(), 0.7)
    r = reduce(m)
    np.testing.assert_allclose(r.b, [0.5, 0.0, 0.0], atol=0)
    assert r.w == 0.7
    m2 = ball_point(ball, (0.0, 1.0), (1.0, 0.0), Rotation.identity(), 0.0)
    np.testing.assert_allclose(reduce(m2).b, [0.0, 0.0, -1.0], atol=0)


def test_reduce_quotients_the_action(ball, rigid):
    rng = np.random.default_rng(7)
    for _ in range(100):
        m = random_ball_point(ball, rng)
        g = random_group(rng)
        d = np.abs(
            reduce(act(g, m)).to_vector() - reduce(m).to_vector()
        ).max()
        assert d < 1e-12
    for _ in range(50):
        m = rigid_point(rigid, Rotation(rng.normal(size=4)), rng.normal(size=3))
        g = random_group(rng, SO3)
        assert np.array_equal(
            reduce(act(g, m)).to_vector(), reduce(m).to_vector()
        )


def test_reduce_norm_identity(ball):
    # |b| = (|a|^2 + |a_dot|^2)/2 under the chosen quotient convention
    rng = np.random.default_rng(8)
    for _ in range(100):
        m = random_ball_point(ball, rng)
        expect = 0.5 * (m.a @ m.a + m.a_dot @ m.a_dot)
        assert np.linalg.norm(reduce(m).b) == pytest.approx(expect, rel=1e-13)


def test_reduce_rigid_is_body_momentum(rigid):
    m = rigid_point(rigid, Rotation.identity(), (0.5, -0.25, 0.125))
    r = reduce(m)
    np.testing.assert_allclose(r.b, [0.5, -0.5, 0.375], atol=0)
    assert r.w == 0.0


def test_reduced_velocity_matches_finite_difference(ball, rigid):
    rng = np.random.default_rng(9)
    h = 1e-6
    for spec, m in (
        (ball, random_ball_point(ball, rng)),
        (rigid, rigid_point(rigid, Rotation(rng.normal(size=4)), (1.1, 0.2, 0.15))),
    ):
        y0 = spec.pack(m)
        yp = solve_ivp(spec.rhs, (0, h), y0, method="DOP853",
                       rtol=1e-13, atol=1e-15).y[:, -1]
        ym = solve_ivp(lambda t, y: -spec.rhs(t, y), (0, h), y0,
                       method="DOP853", rtol=1e-13, atol=1e-15).y[:, -1]
        fd = (spec.reduce_y(yp) - spec.reduce_y(ym)) / (2 * h)
        an = spec.reduced_velocity(y0)
        assert np.abs(fd - an).max() < 1e-9


# ----------------------------------------------------------------------
# energy and constraint
# ----------------------------------------------------------------------


def test_energy_at_rest_is_potential(ball):
    prof = ball.profile
    m = ball_point(ball, (1.2, 0.0), (0.0, 0.0), Rotation.identity(), 0.0)
    assert energy(m) == pytest.approx(
        prof.mass * prof.gravity * prof.f(1.44), rel=1e-15
    )


def test_energy_invariant_under_action(ball, rigid):
    rng = np.random.default_rng(10)
    for _ in range(100):
        m = random_ball_point(ball, rng)
        g = random_group(rng)
        assert energy(act(g, m)) == pytest.approx(energy(m), rel=1e-12)
    for _ in range(50):
        m = rigid_point(rigid, Rotation(rng.normal(size=4)), rng.normal(size=3))
        g = random_group(rng, SO3)
        assert energy(act(g, m)) == energy(m)


def test_rigid_energy_closed_form(rigid):
    m = rigid_point(rigid, Rotation.identity(), (0.3, 0.5, -0.2))
    expect = 0.5 * (1 * 0.3**2 + 2 * 0.5**2 + 3 * 0.2**2)
    assert energy(m) == pytest.approx(expect, rel=1e-15)


def test_rolling_residual_is_negligible(ball):
    # the state parametrization solves the rolling constraint exactly;
    # the residual measures only floating-point arithmetic
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = random_ball_point(ball, rng)
        assert rolling_residual(m) < 1e-13


def test_energy_conserved_along_trajectory(ball):
    rng = np.random.default_rng(12)
    m = random_ball_point(ball, rng)
    y0 = ball.pack(m)
    sol = solve_ivp(ball.rhs, (0, 20), y0, method="DOP853",
                    rtol=1e-11, atol=1e-13)
    E0 = ball.energy_y(y0)
    drift = max(abs(ball.energy_y(sol.y[:, i]) - E0)
                for i in range(sol.y.shape[1]))
    assert drift / abs(E0) < 1e-10


def test_rigid_spatial_momentum_conserved(rigid):
    rng = np.random.default_rng(13)
    m = rigid_point(rigid, Rotation(rng.normal(size=4)), (1.1, 0.2, 0.15))
    y0 = rigid.pack(m)
    sol = solve_ivp(rigid.rhs, (0, 40), y0, method="DOP853",
                    rtol=1e-12, atol=1e-14)

    def spatial(y):
        return Rotation(y[0:4]).apply(rigid.inertia * y[4:7])

    p0 = spatial(y0)
    drift = max(np.linalg.norm(spatial(sol.y[:, i]) - p0)
                for i in range(sol.y.shape[1]))
    assert drift < 1e-11
    # body momentum norm equals spatial momentum norm
    assert np.linalg.norm(rigid.reduce_y(y0)[:3]) == pytest.approx(
        np.linalg.norm(p0), rel=1e-12
    )
