"""Symmetric mechanical systems: a ball rolling without sliding inside a
convex surface of revolution, and a free rigid body used for validation.

Ball system
-----------
The ball has unit effective radius, mass ``m`` and inertia ``k m`` about
any axis (``k`` = inertia ratio, 2/5 for a homogeneous sphere).  The
surface is described by the locus of the *center*: the center sits at
``(a1, a2, f(s))`` with ``s = ||a||^2`` and ``f`` a polynomial; the
profile must be convex on the working annulus.  State:

* ``a`` (2-vector) — horizontal center position; the chart needs a != 0.
* ``a_dot`` (2-vector) — horizontal center velocity.
* ``Q`` — attitude expressed in the frame corotating with the radial
  direction: ``Q = A^-1 psi(a)`` where ``A`` is the body-to-space
  attitude and ``psi(a)`` the orthonormal frame (a/r, e3 x a/r, e3).
  Working in this chart makes the symmetry action on the attitude a
  plain left multiplication (see ``act``).
* ``w`` — angular-velocity component about the contact normal.

Symmetry group S^1 x SO(3): the circle rotates the system about the
vertical axis, the SO(3) factor re-labels the ball's material frame:
``(theta, R).(a, a_dot, Q, w) = (S_theta a, S_theta a_dot, R Q, w)``.

The equations of motion follow from the Newton-Euler equations with the
rolling constraint (zero material velocity at the contact point)
eliminating two angular-velocity components.  With

    n      = unit upward surface normal at the center,
    v_c    = 3-velocity of the center,
    omega  = n x v_c + w n      (rolling constraint solved for omega),

the center acceleration and spin rate obey

    dv_c/dt = -(v_c . dn/dt) n + (k/(k+1)) w (n x dn/dt) + G_t/(k+1),
    dw/dt   = det[n, v_c, dn/dt],

where ``G_t`` is the tangential part of the gravity acceleration
(0, 0, -g).  Energy  H = m/2 |v_c|^2 + k m/2 |omega|^2 + m g f(s)  is
conserved; conservation, group invariance and the constraint residual
are enforced by tests rather than assumed.

Rigid body
----------
State (Q, Omega): attitude (body-to-space) and body angular velocity.
Euler's equations  Omega' = I^-1 (I Omega x Omega),  Q' = Q hat(Omega).
Symmetry SO(3) acting on the left (spatial rotations): Q -> R Q.
Packing note: ``PhasePoint`` reuses the ball fields — Omega is stored as
(a_dot[0], a_dot[1], w) and ``a`` is unused (zeros).

Reduction
---------
``reduce`` quotients the full symmetry group.  Ball: the S^1-invariants
of (a, a_dot) as a 4-vector (b, w) with b the standard quadratic-map
image of R^4\\{0} in R^3\\{0} (anchor: a=(1,0), a_dot=0 -> b=(1/2,0,0)),
w passed through; the attitude disappears with the SO(3) factor.  Rigid
body: body angular momentum b = I Omega (w slot kept at 0 so reduced
states are uniformly 4-vectors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError
from .liegroup import (
    E3,
    SO3,
    S1XSO3,
    GroupElement,
    Rotation,
)

BALL = "ball"
RIGID = "rigid"


# ---------------------------------------------------------------------------
# surface profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceProfile:
    """Surface of revolution traced by the ball's center: z = f(r^2) with
    f a polynomial (coeffs[j] multiplies (r^2)^j).  Convexity d^2z/dr^2 > 0
    is required on the working annulus and checked by make_ball_system."""

    coeffs: tuple
    gravity: float = 1.0
    mass: float = 1.0
    inertia_ratio: float = 0.4

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if len(c) == 0 or not all(math.isfinite(x) for x in c):
            raise ConfigError("profile coefficients must be finite and nonempty")
        if not (self.gravity > 0 and math.isfinite(self.gravity)):
            raise ConfigError("gravity must be positive")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ConfigError("mass must be positive")
        if not (0.0 < self.inertia_ratio <= 1.0):
            raise ConfigError("inertia_ratio must lie in (0, 1]")
        object.__setattr__(self, "coeffs", c)
        # derivative coefficient tables for Horner evaluation
        object.__setattr__(
            self, "_dc", tuple(j * c[j] for j in range(1, len(c)))
        )
        object.__setattr__(
            self, "_ddc", tuple(j * (j - 1) * c[j] for j in range(2, len(c)))
        )

    def f(self, s: float) -> float:
        acc = 0.0
        for cj in reversed(self.coeffs):
            acc = acc * s + cj
        return acc

    def fp(self, s: float) -> float:
        acc = 0.0
        for cj in reversed(self._dc):
            acc = acc * s + cj
        return acc

    def fpp(self, s: float) -> float:
        acc = 0.0
        for cj in reversed(self._ddc):
            acc = acc * s + cj
        return acc

    def height_convexity(self, r: float) -> float:
        """d^2 z / d r^2 of the height z(r) = f(r^2)."""
        s = r * r
        return 2.0 * self.fp(s) + 4.0 * s * self.fpp(s)


# ---------------------------------------------------------------------------
# phase points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhasePoint:
    """Full state of either system; see the module docstring for the
    rigid-body packing of Omega into (a_dot, w)."""

    a: np.ndarray
    a_dot: np.ndarray
    Q: Rotation
    w: float
    system: "SystemSpec"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        ad = np.asarray(self.a_dot, dtype=float)
        if a.shape != (2,) or ad.shape != (2,):
            raise ValueError("a and a_dot must be 2-vectors")
        if self.system.kind == BALL and float(a @ a + ad @ ad) == 0.0:
            raise ValueError("(a, a_dot) = 0 is outside the phase space")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a_dot", ad)
        object.__setattr__(self, "w", float(self.w))
        a.flags.writeable = False
        ad.flags.writeable = False

    @property
    def omega_body(self) -> np.ndarray:
        """Rigid body only: the packed body angular velocity."""
        if self.system.kind != RIGID:
            raise ValueError("omega_body is a rigid-body accessor")
        return np.array([self.a_dot[0], self.a_dot[1], self.w])


@dataclass(frozen=True)
class ReducedPoint:
    """Image of a PhasePoint under the symmetry quotient."""

    b: np.ndarray
    w: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.shape != (3,):
            raise ValueError("b must be a 3-vector")
        if float(b @ b) == 0.0:
            raise ValueError("reduced point must have b != 0")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", float(self.w))
        b.flags.writeable = False

    def to_vector(self) -> np.ndarray:
        return np.array([self.b[0], self.b[1], self.b[2], self.w])


@dataclass(frozen=True)
class IntegrationDefaults:
    rtol: float = 1e-10
    atol: float = 1e-12
    t_max: float = 1e3
    tol_closure: float = 1e-7
    tol_phase: float = 1e-7
    min_period: float = 1e-3
    v_min: float = 1e-5


@dataclass(frozen=True)
class SystemSpec:
    """Bundle of a system's action, vector field, reduction and
    invariants, plus integration defaults.  Immutable; evaluators are
    pure functions of the state."""

    kind: str
    group: str
    dim: int            # manifold dimension (8 ball / 6 rigid)
    nstate: int         # packed-vector length (9 ball / 7 rigid)
    profile: Optional[SurfaceProfile] = None
    inertia: Optional[np.ndarray] = None
    annulus: tuple = (0.2, 2.5)
    defaults: IntegrationDefaults = field(default_factory=IntegrationDefaults)

    # -- packing -------------------------------------------------------
    def pack(self, m: PhasePoint) -> np.ndarray:
        if m.system is not self:
            raise ValueError("phase point belongs to a different system")
        if self.kind == BALL:
            return np.concatenate([m.a, m.a_dot, m.Q.q, [m.w]])
        return np.concatenate([m.Q.q, m.omega_body])

    def unpack(self, y: np.ndarray) -> PhasePoint:
        y = np.asarray(y, dtype=float)
        if self.kind == BALL:
            return PhasePoint(y[0:2], y[2:4], Rotation(y[4:8]), y[8], self)
        return PhasePoint(
            np.zeros(2), y[4:6], Rotation(y[0:4]), y[6], self
        )

    @property
    def quat_slice(self) -> slice:
        return slice(4, 8) if self.kind == BALL else slice(0, 4)

    # -- pointwise evaluators (packed form) -----------------------------
    def domain_check(self, y: np.ndarray, t: float = 0.0):
        if self.kind == BALL:
            s = y[0] * y[0] + y[1] * y[1]
            rmin, rmax = self.annulus
            if not (rmin * rmin <= s <= rmax * rmax):
                raise DomainError(
                    f"center radius {math.sqrt(max(s, 0.0)):.6g} left the annulus "
                    f"[{rmin}, {rmax}]",
                    last_state=np.array(y),
                    t=t,
                )
            if s + y[2] * y[2] + y[3] * y[3] < 1e-16:
                raise DomainError(
                    "(a, a_dot) collapsed to 0", last_state=np.array(y), t=t
                )

    def _ball_geometry(self, a1, a2, ad1, ad2):
        pr = self.profile
        s = a1 * a1 + a2 * a2
        fp = pr.fp(s)
        fpp = pr.fpp(s)
        g1 = 2.0 * fp * a1
        g2 = 2.0 * fp * a2
        N2 = 1.0 + g1 * g1 + g2 * g2
        N = math.sqrt(N2)
        n = (-g1 / N, -g2 / N, 1.0 / N)
        ca = a1 * ad1 + a2 * ad2
        dg1 = 2.0 * fp * ad1 + 4.0 * fpp * ca * a1
        dg2 = 2.0 * fp * ad2 + 4.0 * fpp * ca * a2
        gdg = g1 * dg1 + g2 * dg2
        nd = (
            -dg1 / N - n[0] * gdg / N2,
            -dg2 / N - n[1] * gdg / N2,
            -n[2] * gdg / N2,
        )
        vc = (ad1, ad2, g1 * ad1 + g2 * ad2)
        return s, g1, g2, n, nd, vc

    def _ball_rates(self, y):
        """Core ball dynamics: returns (addot1, addot2, wdot, mu) where mu
        is the body-frame rate of the stored attitude Q."""
        pr = self.profile
        a1, a2, ad1, ad2 = y[0], y[1], y[2], y[3]
        w = y[8]
        s, g1, g2, n, nd, vc = self._ball_geometry(a1, a2, ad1, ad2)
        k = pr.inertia_ratio
        grav = pr.gravity
        vdn = vc[0] * nd[0] + vc[1] * nd[1] + vc[2] * nd[2]
        nxnd = (
            n[1] * nd[2] - n[2] * nd[1],
            n[2] * nd[0] - n[0] * nd[2],
            n[0] * nd[1] - n[1] * nd[0],
        )
        c1 = k / (k + 1.0)
        c2 = 1.0 / (k + 1.0)
        # tangential gravity: G - (n.G) n with G = (0, 0, -grav)
        gt = (grav * n[2] * n[0], grav * n[2] * n[1], grav * (n[2] * n[2] - 1.0))
        vd1 = -vdn * n[0] + c1 * w * nxnd[0] + c2 * gt[0]
        vd2 = -vdn * n[1] + c1 * w * nxnd[1] + c2 * gt[1]
        # wdot = det[n, vc, nd]
        wdot = (
            n[0] * (vc[1] * nd[2] - vc[2] * nd[1])
            - n[1] * (vc[0] * nd[2] - vc[2] * nd[0])
            + n[2] * (vc[0] * nd[1] - vc[1] * nd[0])
        )
        # attitude rate in the corotating chart
        om = (
            n[1] * vc[2] - n[2] * vc[1] + w * n[0],
            n[2] * vc[0] - n[0] * vc[2] + w * n[1],
            n[0] * vc[1] - n[1] * vc[0] + w * n[2],
        )
        r = math.sqrt(s)
        e1 = (a1 / r, a2 / r)
        chidot = (a1 * ad2 - a2 * ad1) / s
        mu = (
            -(e1[0] * om[0] + e1[1] * om[1]),
            -(-e1[1] * om[0] + e1[0] * om[1]),
            chidot - om[2],
        )
        return vd1, vd2, wdot, mu

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """Packed-state time derivative (quaternion slot included)."""
        if self.kind == BALL:
            self.domain_check(y, t)
            vd1, vd2, wdot, mu = self._ball_rates(y)
            qw, qx, qy, qz = y[4], y[5], y[6], y[7]
            m1, m2, m3 = mu
            return np.array(
                [
                    y[2],
                    y[3],
                    vd1,
                    vd2,
                    0.5 * (-qx * m1 - qy * m2 - qz * m3),
                    0.5 * (qw * m1 + qy * m3 - qz * m2),
                    0.5 * (qw * m2 + qz * m1 - qx * m3),
                    0.5 * (qw * m3 + qx * m2 - qy * m1),
                    wdot,
                ]
            )
        # rigid body
        qw, qx, qy, qz = y[0], y[1], y[2], y[3]
        o1, o2, o3 = y[4], y[5], y[6]
        I1, I2, I3 = self.inertia
        od1 = (I2 - I3) * o2 * o3 / I1
        od2 = (I3 - I1) * o3 * o1 / I2
        od3 = (I1 - I2) * o1 * o2 / I3
        return np.array(
            [
                0.5 * (-qx * o1 - qy * o2 - qz * o3),
                0.5 * (qw * o1 + qy * o3 - qz * o2),
                0.5 * (qw * o2 + qz * o1 - qx * o3),
                0.5 * (qw * o3 + qx * o2 - qy * o1),
                od1,
                od2,
                od3,
            ]
        )

    def reduce_y(self, y: np.ndarray) -> np.ndarray:
        """Reduced state as a 4-vector (b, w)."""
        if self.kind == BALL:
            a1, a2, ad1, ad2 = y[0], y[1], y[2], y[3]
            return np.array(
                [
                    0.5 * (a1 * a1 + a2 * a2 - ad1 * ad1 - ad2 * ad2),
                    a1 * ad1 + a2 * ad2,
                    a1 * ad2 - a2 * ad1,
                    y[8],
                ]
            )
        I1, I2, I3 = self.inertia
        return np.array([I1 * y[4], I2 * y[5], I3 * y[6], 0.0])

    def reduced_velocity(self, y: np.ndarray) -> np.ndarray:
        """Time derivative of reduce_y along the flow (analytic)."""
        if self.kind == BALL:
            a1, a2, ad1, ad2 = y[0], y[1], y[2], y[3]
            vd1, vd2, wdot, _ = self._ball_rates(y)
            return np.array(
                [
                    a1 * ad1 + a2 * ad2 - (ad1 * vd1 + ad2 * vd2),
                    ad1 * ad1 + ad2 * ad2 + a1 * vd1 + a2 * vd2,
                    a1 * vd2 - a2 * vd1,
                    wdot,
                ]
            )
        b = self.reduce_y(y)[:3]
        om = np.array([y[4], y[5], y[6]])
        bd = np.cross(b, om)
        return np.array([bd[0], bd[1], bd[2], 0.0])

    def energy_y(self, y: np.ndarray) -> float:
        if self.kind == BALL:
            pr = self.profile
            a1, a2, ad1, ad2 = y[0], y[1], y[2], y[3]
            w = y[8]
            s, g1, g2, n, nd, vc = self._ball_geometry(a1, a2, ad1, ad2)
            om = (
                n[1] * vc[2] - n[2] * vc[1] + w * n[0],
                n[2] * vc[0] - n[0] * vc[2] + w * n[1],
                n[0] * vc[1] - n[1] * vc[0] + w * n[2],
            )
            v2 = vc[0] ** 2 + vc[1] ** 2 + vc[2] ** 2
            o2 = om[0] ** 2 + om[1] ** 2 + om[2] ** 2
            return pr.mass * (
                0.5 * v2 + 0.5 * pr.inertia_ratio * o2 + pr.gravity * pr.f(s)
            )
        om = np.array([y[4], y[5], y[6]])
        return 0.5 * float(om @ (self.inertia * om))

    def rolling_residual_y(self, y: np.ndarray) -> float:
        """Norm of the material velocity at the contact point,
        reconstructed from the state (ball only)."""
        if self.kind != BALL:
            raise ValueError("rolling residual is defined for the ball system")
        a1, a2, ad1, ad2 = y[0], y[1], y[2], y[3]
        w = y[8]
        _, _, _, n, _, vc = self._ball_geometry(a1, a2, ad1, ad2)
        om = (
            n[1] * vc[2] - n[2] * vc[1] + w * n[0],
            n[2] * vc[0] - n[0] * vc[2] + w * n[1],
            n[0] * vc[1] - n[1] * vc[0] + w * n[2],
        )
        # contact velocity = v_c - omega x n  (contact offset is -n)
        res = (
            vc[0] - (om[1] * n[2] - om[2] * n[1]),
            vc[1] - (om[2] * n[0] - om[0] * n[2]),
            vc[2] - (om[0] * n[1] - om[1] * n[0]),
        )
        return math.sqrt(res[0] ** 2 + res[1] ** 2 + res[2] ** 2)

    def momentum_norm_y(self, y: np.ndarray) -> float:
        if self.kind != RIGID:
            raise ValueError("momentum norm is a rigid-body invariant")
        b = self.reduce_y(y)[:3]
        return float(np.linalg.norm(b))

    def invariant_names(self):
        if self.kind == BALL:
            return ("energy", "rolling_residual")
        return ("energy", "momentum_norm")

    def invariants_y(self, y: np.ndarray):
        if self.kind == BALL:
            return (self.energy_y(y), self.rolling_residual_y(y))
        return (self.energy_y(y), self.momentum_norm_y(y))

    def state_columns(self):
        if self.kind == BALL:
            return ("a1", "a2", "adot1", "adot2", "qw", "qx", "qy", "qz", "w")
        return ("qw", "qx", "qy", "qz", "omega1", "omega2", "omega3")


# ---------------------------------------------------------------------------
# module-level operations (dispatch on the point's system)
# ---------------------------------------------------------------------------


def _rot2(theta: float, v: np.ndarray) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def act(g: GroupElement, m: PhasePoint) -> PhasePoint:
    """Symmetry action.  Ball: (theta, R).(a, a_dot, Q, w) =
    (S_theta a, S_theta a_dot, R Q, w).  Rigid: Q -> R Q, Omega fixed."""
    spec = m.system
    if g.group != spec.group:
        raise ValueError(
            f"group tag {g.group!r} does not match the system's {spec.group!r}"
        )
    if spec.kind == BALL:
        return PhasePoint(
            _rot2(g.theta, m.a), _rot2(g.theta, m.a_dot), g.rot @ m.Q, m.w, spec
        )
    return PhasePoint(m.a, m.a_dot, g.rot @ m.Q, m.w, spec)


def vector_field(m: PhasePoint) -> np.ndarray:
    """Tangent vector at m: ball 8-vector (da, da_dot, mu, dw) with mu the
    body-frame attitude rate; rigid 6-vector (Omega, Omega_dot)."""
    spec = m.system
    y = spec.pack(m)
    if spec.kind == BALL:
        spec.domain_check(y)
        vd1, vd2, wdot, mu = spec._ball_rates(y)
        return np.array(
            [m.a_dot[0], m.a_dot[1], vd1, vd2, mu[0], mu[1], mu[2], wdot]
        )
    yd = spec.rhs(0.0, y)
    om = m.omega_body
    return np.array([om[0], om[1], om[2], yd[4], yd[5], yd[6]])


def d_act(g: GroupElement, m: PhasePoint, v: np.ndarray) -> np.ndarray:
    """Pushforward of the tangent vector v at m by the action of g, in the
    same coordinates as vector_field."""
    spec = m.system
    if spec.kind == BALL:
        da = _rot2(g.theta, v[0:2])
        dad = _rot2(g.theta, v[2:4])
        # Q -> R Q keeps the body-frame rate mu unchanged
        return np.array([da[0], da[1], dad[0], dad[1], v[4], v[5], v[6], v[7]])
    return np.array(v, dtype=float)


def reduce(m: PhasePoint) -> ReducedPoint:
    """Quotient by the full symmetry group; see module docstring."""
    r = m.system.reduce_y(m.system.pack(m))
    return ReducedPoint(r[:3], r[3])


def energy(m: PhasePoint) -> float:
    return m.system.energy_y(m.system.pack(m))


def rolling_residual(m: PhasePoint) -> float:
    return m.system.rolling_residual_y(m.system.pack(m))


def state_distance(m1: PhasePoint, m2: PhasePoint) -> float:
    """Uniform state metric used by the phase checks: max over blocks of
    the Euclidean block distances and the rotation geodesic angle."""
    if m1.system is not m2.system:
        raise ValueError("points belong to different systems")
    dq = m1.Q.distance(m2.Q)
    if m1.system.kind == BALL:
        return max(
            float(np.linalg.norm(m1.a - m2.a)),
            float(np.linalg.norm(m1.a_dot - m2.a_dot)),
            dq,
            abs(m1.w - m2.w),
        )
    return max(dq, float(np.linalg.norm(m1.omega_body - m2.omega_body)))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_ball_system(
    profile: SurfaceProfile,
    annulus: tuple = (0.2, 2.5),
    defaults: IntegrationDefaults = None,
) -> SystemSpec:
    """Wire up the ball system; rejects profiles that are not strictly
    convex (as height functions of r) anywhere on the annulus."""
    rmin, rmax = float(annulus[0]), float(annulus[1])
    if not (0.0 < rmin < rmax and math.isfinite(rmax)):
        raise ConfigError(f"invalid annulus {annulus!r}")
    for r in np.linspace(rmin, rmax, 257):
        if not profile.height_convexity(float(r)) > 0.0:
            raise ConfigError(
                f"profile is not convex at r = {float(r):.6g} "
                f"(d2z/dr2 = {profile.height_convexity(float(r)):.6g})"
            )
    return SystemSpec(
        kind=BALL,
        group=S1XSO3,
        dim=8,
        nstate=9,
        profile=profile,
        annulus=(rmin, rmax),
        defaults=defaults or IntegrationDefaults(),
    )


def make_rigid_body(
    inertia, defaults: IntegrationDefaults = None
) -> SystemSpec:
    inertia = np.asarray(inertia, dtype=float)
    if inertia.shape != (3,) or not np.all(np.isfinite(inertia)):
        raise ConfigError("inertia must be three finite numbers")
    if not np.all(inertia > 0):
        raise ConfigError("inertia components must be positive")
    inertia.flags.writeable = False
    return SystemSpec(
        kind=RIGID,
        group=SO3,
        dim=6,
        nstate=7,
        inertia=inertia,
        defaults=defaults or IntegrationDefaults(),
    )


def ball_point(spec: SystemSpec, a, a_dot, Q: Rotation = None, w: float = 0.0) -> PhasePoint:
    if spec.kind != BALL:
        raise ValueError("spec is not a ball system")
    return PhasePoint(np.asarray(a, float), np.asarray(a_dot, float),
                      Q if Q is not None else Rotation.identity(), w, spec)


def rigid_point(spec: SystemSpec, Q: Rotation, omega) -> PhasePoint:
    if spec.kind != RIGID:
        raise ValueError("spec is not a rigid body")
    om = np.asarray(omega, dtype=float)
    return PhasePoint(np.zeros(2), om[0:2], Q, float(om[2]), spec)
