"""Named verification checks with machine-readable verdicts, plus the
independent rigid-body rotation-angle oracle.

Each ``check_*`` function takes a system, a list of sample phase points,
and a tolerance, and returns a :class:`CheckReport`.  Samples whose
preconditions fail (no reduced period, singular phase, domain exit) are
*skipped*, not failed; if every sample is skipped the verdict is
``"inconclusive"`` — deliberately distinct from ``"fail"``.  Checks are
evaluated sequentially sample by sample, which makes every report
deterministic for a fixed seed; extra randomness a check needs (group
elements, frame coordinates) comes from its own ``numpy`` generator
seeded with the ``seed`` argument recorded in the report.

The rotation-angle oracle (:func:`montgomery_oracle`) re-derives the
rigid body's per-period rotation about its spatial momentum axis from
scratch — its own momentum-loop integration, its own period detection,
and an adaptive quadrature of the enclosed spherical area — so that
agreement with ``phase()`` genuinely cross-validates two code paths.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .dynsys import (
    BALL,
    PhasePoint,
    RIGID,
    SystemSpec,
    act,
    ball_point,
    d_act,
    rigid_point,
    state_distance,
    vector_field,
)
from .errors import (
    DomainError,
    IntegrationError,
    NotPeriodicError,
    OracleUnavailableError,
    PeriodNotFoundError,
    PhaseInconsistencyError,
)
from .integrate import find_reduced_period, flow
from .liegroup import (
    E1,
    E2,
    E3,
    GroupElement,
    Rotation,
    conj,
    group_distance,
    projective_distance,
)
from .reconstruct import (
    flower_frame,
    frequency_mismatch,
    phase,
    reduced_orbit_distance,
    same_petal,
    torus_embed,
    weyl_partner,
)

TWO_PI = 2.0 * math.pi

# recoverable per-sample failures: the sample is skipped, not the check
_SKIP = (PeriodNotFoundError, DomainError, IntegrationError)


@dataclass
class CheckReport:
    """Verdict of one named check.

    ``verdict`` is ``"pass"`` iff ``max_residual < tolerance``, ``"fail"``
    otherwise, and ``"inconclusive"`` when no sample survived its
    preconditions (``max_residual`` is then None).  ``wall_time`` is kept
    for interactive use but excluded from :meth:`to_dict` so serialized
    reports stay byte-reproducible.
    """

    name: str
    system: str
    sample_description: str
    max_residual: Optional[float]
    tolerance: float
    verdict: str
    n_samples: int
    n_skipped: int
    seed: Optional[int]
    wall_time: float

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "system": self.system,
            "sample_description": self.sample_description,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "n_samples": self.n_samples,
            "n_skipped": self.n_skipped,
            "seed": self.seed,
        }


def _finish(name, spec, desc, residuals, n_skipped, tol, seed, t0) -> CheckReport:
    if residuals:
        worst = float(max(residuals))
        verdict = "pass" if worst < tol else "fail"
    else:
        worst = None
        verdict = "inconclusive"
    return CheckReport(
        name=name,
        system=spec.kind,
        sample_description=desc,
        max_residual=worst,
        tolerance=tol,
        verdict=verdict,
        n_samples=len(residuals),
        n_skipped=n_skipped,
        seed=seed,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _random_rotation(rng) -> Rotation:
    q = rng.normal(size=4)
    return Rotation(q / np.linalg.norm(q))


def _random_group_element(spec: SystemSpec, rng) -> GroupElement:
    theta = float(rng.uniform(0.0, TWO_PI)) if spec.kind == BALL else 0.0
    return GroupElement(theta, _random_rotation(rng), spec.group)


def _keep_sample(spec: SystemSpec, m: PhasePoint) -> bool:
    """Sampler admission: the candidate must have a periodic reduced
    orbit staying in the domain and a regular phase."""
    try:
        return phase(spec, m).regular
    except _SKIP + (NotPeriodicError, PhaseInconsistencyError):
        return False


def sample_ball(spec: SystemSpec, rng, n: int):
    """Ball-system initial conditions with contact radius in [0.5, 1.5]
    and moderate speeds/spins: the energy stays below the potential wall
    of the default annulus, so orbits cannot escape outward.  Candidates
    whose orbit leaves the domain inward (near-radial motion passing
    close to the chart singularity at the axis) or whose phase is
    singular are rejected and redrawn."""
    out = []
    budget = 60 * n
    while len(out) < n:
        if budget == 0:
            raise RuntimeError("ball sampler exhausted its rejection budget")
        budget -= 1
        r = rng.uniform(0.5, 1.5)
        psi = rng.uniform(0.0, TWO_PI)
        speed = rng.uniform(0.15, 0.6)
        chi = rng.uniform(0.0, TWO_PI)
        m = ball_point(
            spec,
            a=(r * math.cos(psi), r * math.sin(psi)),
            a_dot=(speed * math.cos(chi), speed * math.sin(chi)),
            Q=_random_rotation(rng),
            w=float(rng.uniform(-0.6, 0.6)),
        )
        if _keep_sample(spec, m):
            out.append(m)
    return out


def rigid_family_margin(spec: SystemSpec, omega) -> float:
    """Separatrix classifier for the Euler flow: positive for loops around
    the short axis (e1 family), negative for the long axis (e3 family),
    zero on the separatrix through the middle axis."""
    inertia = spec.inertia
    L = inertia * np.asarray(omega, float)
    L2 = float(L @ L)
    return float(inertia[1] * (L @ (L / inertia)) / L2 - 1.0)


def sample_rigid(spec: SystemSpec, rng, n: int, margin: float = 0.12):
    """Rigid-body initial conditions stratified across both stable-axis
    families, keeping a margin from the separatrix (|classifier| >=
    ``margin``) and from the middle axis itself."""
    out = []
    want_positive = True
    budget = 200 * n
    while len(out) < n:
        if budget == 0:
            raise RuntimeError("rigid sampler exhausted its rejection budget")
        budget -= 1
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        if min(np.linalg.norm(u - E2), np.linalg.norm(u + E2)) < 0.35:
            continue
        L = float(rng.uniform(0.8, 1.5))
        omega = L * u / spec.inertia
        kappa = rigid_family_margin(spec, omega)
        if abs(kappa) < margin:
            continue
        if (kappa > 0) != want_positive:
            continue
        m = rigid_point(spec, _random_rotation(rng), omega)
        if not _keep_sample(spec, m):
            continue
        want_positive = not want_positive
        out.append(m)
    return out


def sample_points(spec: SystemSpec, rng, n: int):
    return sample_ball(spec, rng, n) if spec.kind == BALL else sample_rigid(spec, rng, n)


# ---------------------------------------------------------------------------
# the named checks
# ---------------------------------------------------------------------------

def check_phase_conserved(spec, samples, tol, seed=None, fractions=(0.2, 0.7, 1.5, 3.1)) -> CheckReport:
    """The phase is constant along the flow: recomputing it anywhere on
    the orbit returns the same group element and the same period."""
    t0 = time.perf_counter()
    residuals, skipped = [], 0
    for m in samples:
        try:
            p = phase(spec, m)
            worst = 0.0
            for frac in fractions:
                pt = phase(spec, flow(spec, m, frac * p.tau))
                worst = max(
                    worst,
                    abs(pt.tau - p.tau),
                    group_distance(pt.gamma, p.gamma),
                )
            residuals.append(worst)
        except PhaseInconsistencyError as e:
            residuals.append(e.residual)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(samples)} initial conditions x flow offsets {list(fractions)} of tau"
    return _finish("phase_conserved", spec, desc, residuals, skipped, tol, seed, t0)


def check_equivariance(spec, samples, tol, seed=None, n_group=5) -> CheckReport:
    """Conjugation equivariance: the phase of a translated point is the
    translated phase, gamma(g.m) = g gamma(m) g^-1."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    residuals, skipped = [], 0
    for m in samples:
        try:
            p = phase(spec, m)
            worst = 0.0
            for _ in range(n_group):
                g = _random_group_element(spec, rng)
                pg = phase(spec, act(g, m))
                worst = max(
                    worst,
                    abs(pg.tau - p.tau),
                    group_distance(pg.gamma, conj(g, p.gamma)),
                )
            residuals.append(worst)
        except PhaseInconsistencyError as e:
            residuals.append(e.residual)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(samples)} initial conditions x {n_group} group elements"
    return _finish("equivariance", spec, desc, residuals, skipped, tol, seed, t0)


def check_linearization(spec, samples, tol, seed=None, rtol=None, atol=None,
                        tol_closure=None, tol_phase=None) -> CheckReport:
    """The torus chart conjugates the flow to a linear flow: the
    commuting-square residual of flow-then-embed vs embed-then-shift on
    an (alpha, beta, t) grid.

    ``rtol``/``atol`` (with matching ``tol_closure``/``tol_phase``
    loosening) exist so a deliberately corrupted flow can be fed through
    the same code path as a negative control.
    """
    t0 = time.perf_counter()
    alphas = (0.0, 1.0 / 3.0, 2.0 / 3.0)
    t_fracs = (0.15, 0.45, 0.75)
    residuals, skipped = [], 0
    for m in samples:
        try:
            p = phase(spec, m, rtol=rtol, atol=atol,
                      tol_phase=tol_phase, tol_closure=tol_closure)
            if not p.regular:
                skipped += 1
                continue
            rank = p.eta.beta.size
            betas = [np.zeros(rank), np.full(rank, 0.3), np.full(rank, 0.7)]
            if rank == 2:
                betas[2] = np.array([0.7, 0.2])
            worst = 0.0
            for al in alphas:
                for be in betas:
                    x = torus_embed(spec, p, m, al, be, rtol=rtol, atol=atol)
                    for tf in t_fracs:
                        lhs = flow(spec, x, tf * p.tau, rtol=rtol, atol=atol)
                        rhs = torus_embed(
                            spec, p, m, al + tf, be + tf * p.eta.beta,
                            rtol=rtol, atol=atol,
                        )
                        worst = max(worst, state_distance(lhs, rhs))
            residuals.append(worst)
        except PhaseInconsistencyError as e:
            residuals.append(e.residual)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(samples)} initial conditions x 3x3x3 (alpha, beta, t) grid"
    return _finish("linearization", spec, desc, residuals, skipped, tol, seed, t0)


def check_flower_invariants(spec, samples, tol, seed=None, n_frames=6) -> CheckReport:
    """Every flower frame J_m(alpha, g) lands on the reduced orbit of m:
    the flower projects to a single reduced periodic orbit."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    residuals, skipped = [], 0
    for m in samples:
        try:
            p = phase(spec, m)
            if not p.regular:
                skipped += 1
                continue
            worst = 0.0
            for _ in range(n_frames):
                al = float(rng.uniform(0.0, 1.0))
                g = _random_group_element(spec, rng)
                x = flower_frame(spec, p, m, al, g)
                d, _ = reduced_orbit_distance(spec, p, x)
                worst = max(worst, d)
            residuals.append(worst)
        except PhaseInconsistencyError as e:
            residuals.append(e.residual)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(samples)} initial conditions x {n_frames} random (alpha, g) frames"
    return _finish("flower_invariants", spec, desc, residuals, skipped, tol, seed, t0)


def check_delta_integral(spec, samples, tol, seed=None) -> CheckReport:
    """delta is an integral of motion, constant on petals: it is preserved
    along the flow, under torus translation, and by the petal-swapping
    Weyl flip; the flip itself lands on a different petal (binary
    violations count as residual 1)."""
    t0 = time.perf_counter()
    residuals, skipped = [], 0
    for m in samples:
        try:
            p = phase(spec, m)
            if not p.regular:
                skipped += 1
                continue
            worst = 0.0
            for frac in (0.35, 1.6):
                pt = phase(spec, flow(spec, m, frac * p.tau))
                worst = max(worst, projective_distance(pt.delta_rep, p.delta_rep))
            rank = p.eta.beta.size
            x = torus_embed(spec, p, m, 0.4, np.full(rank, 0.3))
            px = phase(spec, x)
            worst = max(worst, projective_distance(px.delta_rep, p.delta_rep))
            m_w, _ = weyl_partner(spec, m, p)
            pw = phase(spec, m_w)
            worst = max(worst, projective_distance(pw.delta_rep, p.delta_rep))
            if not same_petal(spec, m, x, p1=p, p2=px):
                worst = max(worst, 1.0)
            if same_petal(spec, m, m_w, p1=p, p2=pw):
                worst = max(worst, 1.0)
            residuals.append(worst)
        except PhaseInconsistencyError as e:
            residuals.append(e.residual)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(samples)} initial conditions; flow/torus/Weyl transports"
    return _finish("delta_integral", spec, desc, residuals, skipped, tol, seed, t0)


def check_frequency_flower_constancy(spec, samples, tol, seed=None, n_frames=4) -> CheckReport:
    """All points of one flower share the frequency vector (modulo the
    branch lattice): frequencies depend only on the reduced orbit."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    residuals, skipped = [], 0
    for m in samples:
        try:
            p = phase(spec, m)
            if not p.regular:
                skipped += 1
                continue
            worst = 0.0
            for _ in range(n_frames):
                al = float(rng.uniform(0.0, 1.0))
                g = _random_group_element(spec, rng)
                x = flower_frame(spec, p, m, al, g)
                px = phase(spec, x)
                if not px.regular:
                    continue
                worst = max(
                    worst,
                    frequency_mismatch(px.frequencies, p.frequencies, p.tau),
                )
            residuals.append(worst)
        except PhaseInconsistencyError as e:
            residuals.append(e.residual)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(samples)} initial conditions x {n_frames} flower frames"
    return _finish(
        "frequency_flower_constancy", spec, desc, residuals, skipped, tol, seed, t0
    )


def check_vf_invariance(spec, samples, tol, seed=None, n_group=5) -> CheckReport:
    """The vector field is symmetric: pushing it forward by any group
    element reproduces it at the translated point."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    residuals, skipped = [], 0
    for m in samples:
        try:
            v = vector_field(m)
            worst = 0.0
            for _ in range(n_group):
                g = _random_group_element(spec, rng)
                diff = vector_field(act(g, m)) - d_act(g, m, v)
                worst = max(worst, float(np.max(np.abs(diff))))
            residuals.append(worst)
        except _SKIP:
            skipped += 1
    desc = f"{len(samples)} phase points x {n_group} group elements"
    return _finish("vf_invariance", spec, desc, residuals, skipped, tol, seed, t0)


def check_period_continuity(spec, family, tol=1.0, seed=None, jump_factor=10.0) -> CheckReport:
    """The reduced period varies smoothly along a one-parameter family of
    initial conditions: no period jump may exceed ``jump_factor`` times
    the local finite-difference trend.  Residual = worst jump ratio
    normalized by ``jump_factor`` (pass iff < tol = 1)."""
    t0 = time.perf_counter()
    taus, skipped = [], 0
    for m in family:
        try:
            taus.append(find_reduced_period(spec, m).tau)
        except _SKIP + (NotPeriodicError,):
            skipped += 1
    desc = f"{len(family)}-point family, jump factor {jump_factor}"
    if len(taus) < 4:
        return _finish("period_continuity", spec, desc, [], skipped, tol, seed, t0)
    taus = np.asarray(taus)
    jumps = np.abs(np.diff(taus))
    floor = 1e-12 * float(np.max(taus))
    ratios = []
    for i in range(len(jumps)):
        lo, hi = max(0, i - 3), min(len(jumps), i + 4)
        neighbors = np.delete(jumps[lo:hi], i - lo)
        trend = max(float(np.median(neighbors)), floor)
        ratios.append(float(jumps[i] / trend / jump_factor))
    return _finish("period_continuity", spec, desc, ratios, skipped, tol, seed, t0)


ALL_CHECKS = {
    "phase_conserved": check_phase_conserved,
    "equivariance": check_equivariance,
    "linearization": check_linearization,
    "flower_invariants": check_flower_invariants,
    "delta_integral": check_delta_integral,
    "frequency_flower_constancy": check_frequency_flower_constancy,
    "vf_invariance": check_vf_invariance,
    "period_continuity": check_period_continuity,
}


# ---------------------------------------------------------------------------
# independent rigid-body rotation-angle oracle
# ---------------------------------------------------------------------------

def measured_rotation_angle(p, m: PhasePoint) -> float:
    """Rotation angle of the computed phase about the spatial momentum
    direction, in [0, 2 pi): the quantity the oracle predicts."""
    L_body = m.system.inertia * m.omega_body
    mu_hat = m.Q.apply(L_body / np.linalg.norm(L_body))
    qw = float(p.gamma.rot.q[0])
    qv = p.gamma.rot.q[1:]
    return (2.0 * math.atan2(float(qv @ mu_hat), qw)) % TWO_PI


def montgomery_oracle(inertia, m: PhasePoint, period: float = None,
                      quad_tol: float = 1e-9) -> float:
    """Predicted per-period rotation angle about the spatial momentum
    axis, from the classical energy/solid-angle formula:

        angle = 2 H tau / ||L||  -  (signed solid angle of the
                 body-momentum loop about its encircled axis)   (mod 2 pi)

    Everything is recomputed from scratch here: the unit momentum loop is
    integrated with its own solver, its period found with its own section
    refinement, and the enclosed spherical area evaluated by trapezoid
    quadrature doubled until two refinement levels agree to ``quad_tol``.

    Conventions: the loop's solid angle is taken about the stable axis it
    encircles (+-e1 for the short-axis family, +-e3 for the long-axis
    family, sign matched to the loop); a degenerate point loop (momentum
    exactly on a principal axis) encloses zero area, and since the
    reduced orbit is then an equilibrium with no intrinsic period, the
    ``period`` argument must be supplied; separatrix-adjacent loops raise
    OracleUnavailableError.
    """
    inertia = np.asarray(inertia, dtype=float)
    omega0 = m.omega_body
    L_body = inertia * omega0
    L = float(np.linalg.norm(L_body))
    if L == 0.0:
        raise OracleUnavailableError("zero angular momentum")
    H = 0.5 * float(omega0 @ L_body)
    u0 = L_body / L
    kappa = float(inertia[1] * (u0 @ (u0 / inertia)) - 1.0)

    # family pole: the principal axis the momentum loop encircles
    if abs(kappa) < 1e-3:
        raise OracleUnavailableError(
            f"momentum loop too close to the separatrix (margin {kappa:.2e})"
        )
    pole = E1 if kappa > 0 else E3
    pole = pole if float(u0 @ pole) >= 0.0 else -pole

    if np.linalg.norm(np.cross(u0, pole)) < 1e-12:
        # point loop: zero enclosed area by convention
        if period is None:
            raise OracleUnavailableError(
                "momentum on a principal axis: the reduced orbit is an "
                "equilibrium, supply the period explicitly"
            )
        return (2.0 * H * period / L) % TWO_PI

    tau_loop, area = momentum_loop_area(inertia, m, quad_tol=quad_tol)
    return (2.0 * H * tau_loop / L - area) % TWO_PI


def momentum_loop_area(inertia, m: PhasePoint, quad_tol: float = 1e-9,
                       reverse: bool = False):
    """Period of the unit body-momentum loop and the signed spherical
    area it encloses about the family pole (right-handed about the pole;
    ``reverse=True`` traverses the loop backward, negating the area)."""
    inertia = np.asarray(inertia, dtype=float)
    L_body = inertia * m.omega_body
    L = float(np.linalg.norm(L_body))
    u0 = L_body / L
    kappa = float(inertia[1] * (u0 @ (u0 / inertia)) - 1.0)
    if abs(kappa) < 1e-3:
        raise OracleUnavailableError(
            f"momentum loop too close to the separatrix (margin {kappa:.2e})"
        )
    pole = E1 if kappa > 0 else E3
    pole = pole if float(u0 @ pole) >= 0.0 else -pole
    sign = -1.0 if reverse else 1.0

    def u_rhs(t, u):
        return sign * L * np.cross(u, u / inertia)

    du0 = u_rhs(0.0, u0)
    sp = float(np.linalg.norm(du0))
    if sp < 1e-12:
        raise OracleUnavailableError("stationary momentum loop without period")
    dn = du0 / sp

    # crude window: several symmetric-top precession periods of slack
    t_guess = TWO_PI / sp * max(inertia) / min(inertia) * 4.0 + 1.0
    sol = solve_ivp(
        u_rhs, (0.0, 3.0 * t_guess), u0, method="DOP853",
        rtol=1e-12, atol=1e-14, dense_output=True,
    )

    def section(t):
        return float((sol.sol(t) - u0) @ dn)

    tau_loop = None
    ts = np.linspace(0.0, sol.t[-1], 4096)
    vals = [section(t) for t in ts]
    for i in range(1, len(ts)):
        if vals[i - 1] < 0.0 <= vals[i] and ts[i] > 1e-6:
            t_star = brentq(section, ts[i - 1], ts[i], xtol=1e-13, rtol=1e-15)
            if t_star > 1e-6 and np.linalg.norm(sol.sol(t_star) - u0) < 1e-8:
                tau_loop = float(t_star)
                break
    if tau_loop is None:
        raise OracleUnavailableError(
            "no closed momentum loop found (separatrix or integration range)"
        )

    def enclosed_area(n_nodes):
        t = np.linspace(0.0, tau_loop, n_nodes + 1)
        u = sol.sol(t)  # 3 x (n+1)
        du = sign * L * np.cross(u.T, (u / inertia[:, None]).T)
        cos_th = pole @ u
        az_rate = (np.cross(u.T, du) @ pole) / np.maximum(
            1.0 - cos_th**2, 1e-300
        )
        f = (1.0 - cos_th) * az_rate
        return float(np.trapezoid(f, t))

    n = 256
    area = enclosed_area(n)
    while True:
        n *= 2
        refined = enclosed_area(n)
        if abs(refined - area) < quad_tol:
            return tau_loop, float(refined)
        area = refined
        if n > 2**20:
            raise OracleUnavailableError(
                "solid-angle quadrature failed to converge"
            )
