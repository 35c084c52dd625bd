"""Reconstruction geometry of a symmetric flow with periodic reduced
dynamics: the group-valued phase of one reduced period, its torus
coordinates and frequencies, embedded invariant tori ("petals"), their
group translates ("flowers"), and the projective-plane-valued integral
of motion delta.

Conventions
-----------
* ``gamma`` (the phase) is the unique group element with
  ``act(gamma, m) = flow(m, tau)`` — solved in closed form per block:
  a 2D orthogonal-Procrustes fit for the circle angle (ball system) and
  the attitude quotient ``Q(tau) Q(0)^-1`` for the rotation part.
* For a regular phase, ``g_m = conjugator_to_torus(gamma)`` conjugates
  gamma into the reference torus T: ``conj(g_m, gamma) in T``.  The
  centralizer torus through gamma is then ``T_m = g_m^-1 T g_m``, and
  every torus element used by the embeddings acts through
  ``g_m^-1 Xi(beta) g_m``.
* ``eta`` = lattice coordinates of ``conj(g_m, gamma)``; by the
  principal-branch and axis conventions the rotation slot lies in
  [0, 1/2].  Frequencies are (1/tau, eta/tau) and are canonical only
  modulo (1/tau) Z in the eta slots.
* ``delta`` = projective class of ``g_m`` in G/N(T), represented by the
  folded image of e3 under g_m's rotation.  It is an integral of motion
  and is constant on petals; its level set inside one flower consists of
  exactly two petals (swapped by a half-turn about a horizontal axis
  orthogonal to the phase axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .dynsys import BALL, PhasePoint, SystemSpec, act, state_distance
from .errors import DomainError, PhaseInconsistencyError
from .integrate import Trajectory, _period_search, flow
from .liegroup import (
    E1,
    E3,
    GroupElement,
    Rotation,
    TorusElement,
    Xi,
    conj,
    conjugator_to_torus,
    fold_projective,
    hat,
    is_regular,
    projective_distance,
    torus_coords,
    weyl_representative,
)


@dataclass(frozen=True)
class PhaseResult:
    """Phase data of one reduced period at a point."""

    tau: float
    gamma: GroupElement
    regular: bool
    conjugator: Optional[GroupElement]
    eta: Optional[TorusElement]
    frequencies: Optional[np.ndarray]
    delta_rep: Optional[np.ndarray]
    residuals: dict
    _trajectory: Trajectory = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        def group_el(g):
            if g is None:
                return None
            d = {"theta": g.theta, "quat": list(g.rot.q), "angle": g.rot.angle()}
            d["axis"] = list(g.rot.axis()) if d["angle"] > 1e-12 else None
            return d

        return {
            "tau": self.tau,
            "gamma": group_el(self.gamma),
            "regular": self.regular,
            "conjugator": group_el(self.conjugator),
            "eta": None if self.eta is None else list(self.eta.beta),
            "frequencies": None
            if self.frequencies is None
            else list(self.frequencies),
            "delta_rep": None if self.delta_rep is None else list(self.delta_rep),
            "residuals": dict(self.residuals),
        }


def _procrustes_angle(sources, targets) -> float:
    """Best rotation angle for S_theta @ source_i ~ target_i (2-vectors)."""
    m00 = m01 = m10 = m11 = 0.0
    for s, t in zip(sources, targets):
        m00 += t[0] * s[0] + t[1] * s[1]
        m01 += -t[0] * s[1] + t[1] * s[0]
    return math.atan2(m01, m00)


def _solve_group_element(m_from: PhasePoint, m_to: PhasePoint) -> GroupElement:
    """Closed-form solve of act(g, m_from) = m_to (exact when the states
    lie on one group orbit; otherwise least-squares per block)."""
    spec = m_from.system
    R = m_to.Q @ m_from.Q.inverse()
    if spec.kind == BALL:
        theta = _procrustes_angle(
            (m_from.a, m_from.a_dot), (m_to.a, m_to.a_dot)
        )
        return GroupElement(theta, R, spec.group)
    return GroupElement(0.0, R, spec.group)


def phase(
    spec: SystemSpec,
    m: PhasePoint,
    rtol=None,
    atol=None,
    tol_phase=None,
    **period_kwargs,
) -> PhaseResult:
    """Compute the phase of one reduced period at m, with torus data when
    the phase is a regular group element."""
    if m.system is not spec:
        raise ValueError("phase point belongs to a different system")
    tol_phase = spec.defaults.tol_phase if tol_phase is None else tol_phase
    pr, traj = _period_search(spec, m, rtol=rtol, atol=atol, **period_kwargs)
    m_tau = traj.eval(pr.tau)
    gamma = _solve_group_element(m, m_tau)
    defining = state_distance(act(gamma, m), m_tau)
    residuals = {
        "closure": pr.closure_residual,
        "defining": defining,
        "section_iterations": pr.crossing_refinement_iterations,
    }
    if defining > tol_phase:
        raise PhaseInconsistencyError(
            f"phase extraction residual {defining:.3e} exceeds tol_phase = "
            f"{tol_phase:.3e}; the integration did not return to the group "
            "orbit accurately enough",
            residual=defining,
        )
    regular = is_regular(gamma)
    conjugator = eta = freqs = delta_rep = None
    if regular:
        conjugator = conjugator_to_torus(gamma)
        eta = torus_coords(conj(conjugator, gamma), tol=1e-8)
        freqs = np.concatenate([[1.0 / pr.tau], eta.beta / pr.tau])
        freqs.flags.writeable = False
        delta_rep = weyl_representative(conjugator)
    return PhaseResult(
        tau=pr.tau,
        gamma=gamma,
        regular=regular,
        conjugator=conjugator,
        eta=eta,
        frequencies=freqs,
        delta_rep=delta_rep,
        residuals=residuals,
        _trajectory=traj,
    )


def eta_from_phase(p: PhaseResult) -> TorusElement:
    """Lattice coordinates of the phase conjugated into the reference
    torus; defined modulo Z^r (branch documented in the module doc)."""
    if not p.regular:
        raise DomainError("eta is only defined for a regular phase")
    return torus_coords(conj(p.conjugator, p.gamma), tol=1e-8)


def frequencies(p: PhaseResult) -> np.ndarray:
    """(1/tau, eta_1/tau, ..., eta_r/tau); canonical modulo (1/tau) Z in
    the eta slots."""
    if not p.regular:
        raise DomainError("frequencies are only defined for a regular phase")
    return np.concatenate([[1.0 / p.tau], p.eta.beta / p.tau])


def frequency_mismatch(f1, f2, tau: float) -> float:
    """Distance between frequency vectors modulo the branch lattice
    (1/tau) Z in the torus slots."""
    f1 = np.asarray(f1, float)
    f2 = np.asarray(f2, float)
    d = abs(f1[0] - f2[0])
    for a, b in zip(f1[1:], f2[1:]):
        frac = (a - b) * tau
        frac = abs((frac + 0.5) % 1.0 - 0.5)
        d = max(d, frac / tau)
    return d


def _conjugated_torus_element(p: PhaseResult, beta, group: str) -> GroupElement:
    """Element of T_m = g_m^-1 T g_m with reference coordinates beta."""
    g_m = p.conjugator
    return (g_m.inverse() @ Xi(beta, group)) @ g_m


def torus_embed(
    spec: SystemSpec,
    p: PhaseResult,
    m: PhasePoint,
    alpha: float,
    beta,
    rtol=None,
    atol=None,
) -> PhasePoint:
    """Invariant-torus chart at m: the point with torus coordinates
    (alpha, beta).  (0, 0) maps to m; the flow acts linearly:
    flow(embed(alpha, beta), t) = embed(alpha + t/tau, beta + (t/tau) eta).
    """
    if not p.regular:
        raise DomainError("torus embedding requires a regular phase")
    beta = beta.beta if isinstance(beta, TorusElement) else np.asarray(beta, float)
    h_alpha = _conjugated_torus_element(p, alpha * p.eta.beta, spec.group)
    m1 = act(h_alpha.inverse(), m)
    m2 = flow(spec, m1, alpha * p.tau, rtol=rtol, atol=atol)
    h_beta = _conjugated_torus_element(p, beta, spec.group)
    return act(h_beta, m2)


def flower_frame(
    spec: SystemSpec,
    p: PhaseResult,
    m: PhasePoint,
    alpha: float,
    g: GroupElement,
    rtol=None,
    atol=None,
) -> PhasePoint:
    """Point of the flower through m with frame coordinates (alpha, g):
    the g-translate of the alpha-transported petal basepoint."""
    if not p.regular:
        raise DomainError("the flower frame requires a regular phase")
    h_alpha = _conjugated_torus_element(p, alpha * p.eta.beta, spec.group)
    m1 = act(h_alpha.inverse(), m)
    m2 = flow(spec, m1, alpha * p.tau, rtol=rtol, atol=atol)
    return act(g, m2)


def delta(spec: SystemSpec, m: PhasePoint, p: PhaseResult = None) -> np.ndarray:
    """The projective integral of motion: class of the conjugator in
    G/N(T), as a folded unit 3-vector."""
    if p is None:
        p = phase(spec, m)
    if not p.regular:
        raise DomainError("delta is only defined on the regular set")
    return p.delta_rep


def delta_from_axis(gamma: GroupElement) -> np.ndarray:
    """Direct evaluation of delta from the phase's rotation axis v: the
    class of the image of e3 under the rotation of angle arccos(v.e3)
    about v x e3, computed through the explicit Rodrigues matrix.  This
    is an independent code path from the conjugator-based delta and is
    cross-checked against it in tests."""
    v = gamma.rot.axis()
    c = float(np.clip(v @ E3, -1.0, 1.0))
    u = np.cross(v, E3)
    s = float(np.linalg.norm(u))
    if s < 1e-12:
        # v parallel to e3: the conjugating rotation degenerates and the
        # class is [e3] for either sign
        return fold_projective(E3)
    u /= s
    ang = math.acos(c)
    K = hat(u)
    R = np.eye(3) + math.sin(ang) * K + (1.0 - math.cos(ang)) * (K @ K)
    return fold_projective(R @ E3)


def weyl_partner(spec: SystemSpec, m: PhasePoint, p: PhaseResult = None):
    """A representative of the second petal in the delta-level set of the
    flower through m: act(n, m) for n a half turn about a horizontal axis
    orthogonal to the phase axis.  Returns (partner point, n)."""
    if p is None:
        p = phase(spec, m)
    if not p.regular:
        raise DomainError("the petal pairing requires a regular phase")
    v = p.gamma.rot.axis()
    u = np.cross(v, E3)
    nu = float(np.linalg.norm(u))
    if nu < 1e-8:
        u = E1  # any horizontal axis works when v is vertical
    else:
        u = u / nu
    n = GroupElement(0.0, Rotation.from_axis_angle(u, math.pi), spec.group)
    return act(n, m), n


def reduced_orbit_distance(spec: SystemSpec, p: PhaseResult, m2: PhasePoint):
    """Minimum distance of reduce(m2) to the (periodic) reduced orbit
    recorded in p's trajectory, refined from a dense subsample.  Returns
    (distance, argmin time in [0, tau])."""
    traj = p._trajectory
    y2r = spec.reduce_y(spec.pack(m2))

    def dist(t):
        return float(np.linalg.norm(spec.reduce_y(traj.eval_y(t)) - y2r))

    ts = np.linspace(0.0, p.tau, 512)
    ds = [dist(t) for t in ts]
    i = int(np.argmin(ds))
    lo = ts[max(0, i - 1)]
    hi = ts[min(len(ts) - 1, i + 1)]
    res = minimize_scalar(dist, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.fun), float(res.x)


def same_petal(
    spec: SystemSpec,
    m1: PhasePoint,
    m2: PhasePoint,
    p1: PhaseResult = None,
    p2: PhaseResult = None,
    tol: float = 1e-6,
) -> bool:
    """Numerical membership test: is m2 on the invariant torus (petal)
    through m1?  Three-stage filter:

    1. the reduced point of m2 must lie on the reduced orbit of m1
       (same flower), within tol;
    2. the delta representatives must agree within tol (petals in one
       delta-level);
    3. m2 must be reachable from the m1-trajectory by a torus element:
       solving act(h, flow(m1, t*)) = m2 at the closest-approach time t*
       must succeed and h must conjugate into the reference torus.
    """
    if p1 is None:
        p1 = phase(spec, m1)
    if p2 is None:
        p2 = phase(spec, m2)
    if not (p1.regular and p2.regular):
        raise DomainError("petal membership requires regular phases")
    traj = p1._trajectory
    scale = max(1.0, float(np.linalg.norm(spec.reduce_y(spec.pack(m2)))))
    d_star, t_star = reduced_orbit_distance(spec, p1, m2)
    if d_star > tol * scale:
        return False  # not even on the same flower
    if projective_distance(p1.delta_rep, p2.delta_rep) > tol:
        return False  # same flower, different delta level
    m_t = traj.eval(t_star)
    h = _solve_group_element(m_t, m2)
    if state_distance(act(h, m_t), m2) > 10.0 * tol:
        return False  # no group element carries the trajectory to m2
    try:
        torus_coords(conj(p1.conjugator, h), tol=1e-5)
    except DomainError:
        return False  # reachable only through a non-torus element
    return True
