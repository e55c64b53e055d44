"""Near-optimal work-fluctuation charging.

Phase one shifts every population up by m flattened levels while parking
the m smallest populations, in increasing order, on the m lowest levels.
The shift parameter is chosen as the largest one that does not overshoot
the target energy.  Phase two closes the residual gap with one
common-angle batch of two-level rotations; the reference description is
the descending adjacent chain, whose theta = pi/2 limit reproduces the
(m+1)-shift exactly, so the realized energy is continuous in theta and
the exact angle comes from bisection.

The protocol's published curves (`closed_form_fluct`, the idealized
single-shot mixing map and its closed-form angle) are not the transition
structure of any single unitary once the mixed block exceeds two levels;
runs therefore carry both those curves and the exact TPM statistics of
the best realizable completion, keeping the idealized-versus-realized gap
on record.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InternalError, RangeError, ValidationError
from .report import ChargeReport
from .spectrum import Spectrum
from .states import (
    Distribution,
    beta_to_temperature,
    mean_energy,
    thermal_distribution,
    variance,
)
from .trace import apply_givens, apply_permutation, new_trace, tpm_stats

ENERGY_TOL = 1e-10
BISECT_MAX_ITERS = 200
RANGE_SLACK = 1e-9
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class ShiftPlan:
    """Chosen shift m_tilde, its energy, the residual gap, and the chain angle."""

    m_tilde: int
    eps_after_shift: float
    residual: float
    theta: float


def _phase1_sources(dim: int, m: int) -> np.ndarray:
    """1-based gather sources: new level n holds p(D-n+1) for n <= m and
    p(n-m) for n > m."""
    n = np.arange(1, dim + 1)
    return np.where(n <= m, dim - n + 1, n - m)


def phase1_permutation(dim: int, m: int) -> tuple[int, ...]:
    """Population permutation of the m-fold upward shift (1-based sources)."""
    if not 0 <= m <= dim - 1:
        raise ValidationError(f"shift m={m} outside 0..{dim - 1}")
    return tuple(int(s) for s in _phase1_sources(dim, m))


def energy_after_shift(initial: Distribution, m: int) -> float:
    """Mean energy after the m-fold shift, in units of omega."""
    if not 0 <= m <= initial.spectrum.dim - 1:
        raise ValidationError(f"shift m={m} outside 0..{initial.spectrum.dim - 1}")
    mlev = initial.spectrum.level_of_slot
    w = initial.weights[_phase1_sources(initial.spectrum.dim, m) - 1]
    return math.fsum(mlev * w)


def _chain_weights(weights: np.ndarray, m_tilde: int, theta: float) -> np.ndarray:
    """Apply the descending adjacent rotation chain to phase-one weights."""
    w = weights.copy()
    c2 = math.cos(theta) ** 2
    s2 = math.sin(theta) ** 2
    for a in range(len(w) - 1, m_tilde, -1):
        ia, ib = a - 1, a
        wa, wb = w[ia], w[ib]
        w[ia] = wa * c2 + wb * s2
        w[ib] = wb * c2 + wa * s2
    return w


def solve_theta(initial: Distribution, m_tilde: int, eps_target: float) -> float:
    """Chain angle whose realized final energy equals eps_target.

    Bisects the continuous energy-vs-theta map; the endpoints bracket by
    construction because the chain interpolates between the m and m+1
    shifts.  Coincides with arcsin(sqrt(residual/gap)) whenever the chain
    energy is exactly linear in sin^2(theta) (e.g. point-mass states).
    """
    spec = initial.spectrum
    mlev = spec.level_of_slot
    w1 = initial.weights[_phase1_sources(spec.dim, m_tilde) - 1]
    e_lo = math.fsum(mlev * w1)
    residual = eps_target - e_lo
    if residual <= RESIDUAL_TOL:
        return 0.0
    if m_tilde >= spec.dim - 1:
        raise InternalError(f"residual {residual} left above the top shift")
    e_hi = math.fsum(mlev * _chain_weights(w1, m_tilde, math.pi / 2))
    if residual >= (e_hi - e_lo) - RESIDUAL_TOL:
        return math.pi / 2
    if not e_lo <= eps_target <= e_hi:
        raise InternalError(
            f"target {eps_target} not bracketed by [{e_lo}, {e_hi}] at m={m_tilde}"
        )
    lo, hi = 0.0, math.pi / 2
    theta = 0.5 * (lo + hi)
    for _ in range(BISECT_MAX_ITERS):
        theta = 0.5 * (lo + hi)
        f = math.fsum(mlev * _chain_weights(w1, m_tilde, theta)) - eps_target
        if abs(f) <= 1e-12:
            break
        if f < 0:
            lo = theta
        else:
            hi = theta
    return theta


def select_m_tilde(initial: Distribution, delta_eps: float) -> ShiftPlan:
    """Largest shift not overshooting the target, with residual and angle.

    Verifies that the shift energies are monotone while scanning.
    """
    spec = initial.spectrum
    eps_target = mean_energy(initial) + delta_eps
    m_tilde = 0
    e_prev = energy_after_shift(initial, 0)
    e_sel = e_prev
    for m in range(1, spec.dim):
        e = energy_after_shift(initial, m)
        if e < e_prev - 1e-12:
            raise InternalError(f"shift energies not monotone at m={m}: {e} < {e_prev}")
        if e <= eps_target + RESIDUAL_TOL:
            m_tilde, e_sel = m, e
        e_prev = e
    if eps_target > e_prev + RANGE_SLACK:
        raise RangeError(f"target {eps_target} above the maximal shift energy {e_prev}")
    residual = max(eps_target - e_sel, 0.0)
    theta = solve_theta(initial, m_tilde, eps_target)
    return ShiftPlan(m_tilde=m_tilde, eps_after_shift=e_sel, residual=residual, theta=theta)


def phase2_chain(t, m_tilde: int, theta: float):
    """Apply the descending adjacent chain G(D-1,D), ..., G(m+1, m+2) to a
    trace holding the phase-one(m) output.  At theta=pi/2 this realizes the
    (m+1)-shift exactly; at theta=0 it is the identity."""
    dim = t.spectrum.dim
    if not 0 <= m_tilde <= dim - 1:
        raise ValidationError(f"shift m={m_tilde} outside 0..{dim - 1}")
    for a in range(dim - 1, m_tilde, -1):
        apply_givens(t, a, a + 1, theta)
    return t


def ideal_shift_theta(initial: Distribution, m_tilde: int, eps_target: float) -> float:
    """Closed-form common angle arcsin(sqrt(residual/gap)) of the idealized
    single-shot mixing map, where gap is the energy difference between the
    (m+1)- and m-shifts."""
    spec = initial.spectrum
    e_lo = energy_after_shift(initial, m_tilde)
    residual = eps_target - e_lo
    if residual <= RESIDUAL_TOL:
        return 0.0
    if m_tilde >= spec.dim - 1:
        raise InternalError(f"residual {residual} left above the top shift")
    gap = energy_after_shift(initial, m_tilde + 1) - e_lo
    return math.asin(math.sqrt(min(max(residual / gap, 0.0), 1.0)))


def idealized_distribution(
    initial: Distribution, m_tilde: int, theta: float
) -> Distribution:
    """Output of the idealized protocol: the m-shift followed by the
    single-shot cyclic mixing of the shifted block with weight sin^2(theta).

    This doubly stochastic map is the protocol as displayed; its output
    distribution is unitarily reachable even though its transition matrix
    is not realized by any single unitary for blocks longer than two.
    """
    spec = initial.spectrum
    if not 0 <= m_tilde <= spec.dim - 1:
        raise ValidationError(f"shift m={m_tilde} outside 0..{spec.dim - 1}")
    w = initial.weights[_phase1_sources(spec.dim, m_tilde) - 1]
    s2 = math.sin(theta) ** 2
    block = w[m_tilde:]
    w[m_tilde:] = (1.0 - s2) * block + s2 * np.roll(block, 1)
    return Distribution(spec, w)


def closed_form_fluct(
    initial: Distribution, m_tilde: int, theta: float, delta_eps: float
) -> float:
    """Three-group closed-form fluctuations of the idealized transition
    structure (shift by m with cos^2, by m+1 with sin^2, top block reversed),
    in units of omega^2."""
    spec = initial.spectrum
    if not 0 <= m_tilde <= spec.dim - 1:
        raise ValidationError(f"shift m={m_tilde} outside 0..{spec.dim - 1}")
    p = initial.weights
    e = spec.level_of_slot.astype(float)  # e[i] = level of 1-based slot i+1
    dim = spec.dim
    c2 = math.cos(theta) ** 2
    s2 = math.sin(theta) ** 2
    total = []
    for n in range(1, dim - m_tilde):
        total.append(
            p[n - 1]
            * (
                c2 * (e[n + m_tilde - 1] - e[n - 1] - delta_eps) ** 2
                + s2 * (e[n + m_tilde] - e[n - 1] - delta_eps) ** 2
            )
        )
    n = dim - m_tilde
    total.append(
        p[n - 1]
        * (
            c2 * (e[dim - 1] - e[n - 1] - delta_eps) ** 2
            + s2 * (e[m_tilde] - e[n - 1] - delta_eps) ** 2
        )
    )
    for n in range(dim - m_tilde + 1, dim + 1):
        total.append(p[n - 1] * (e[dim - n] - e[n - 1] - delta_eps) ** 2)
    return math.fsum(total)


def _chain_trace(initial: Distribution, plan: ShiftPlan):
    tr = new_trace(initial)
    if plan.m_tilde > 0:
        apply_permutation(tr, phase1_permutation(initial.spectrum.dim, plan.m_tilde))
    if plan.theta > 0.0:
        phase2_chain(tr, plan.m_tilde, plan.theta)
    return tr


def _subchain_weights(weights: np.ndarray, a_lo: int, theta: float) -> np.ndarray:
    """Descending adjacent chain restricted to 1-based slots a_lo..D."""
    w = weights.copy()
    c2 = math.cos(theta) ** 2
    s2 = math.sin(theta) ** 2
    for a in range(len(w) - 1, a_lo - 1, -1):
        ia, ib = a - 1, a
        wa, wb = w[ia], w[ib]
        w[ia] = wa * c2 + wb * s2
        w[ib] = wb * c2 + wa * s2
    return w


def _subchain_trace(initial: Distribution, plan: ShiftPlan, a_lo: int):
    """Completion that rotates only the topmost slots (a_lo..D) of the
    phase-one output with one common angle; None if its span cannot reach
    the target.  a_lo = m_tilde+1 recovers the full phase-two chain."""
    spec = initial.spectrum
    dim = spec.dim
    mlev = spec.level_of_slot
    w1 = initial.weights[_phase1_sources(dim, plan.m_tilde) - 1]
    eps_target = plan.eps_after_shift + plan.residual
    e_hi = math.fsum(mlev * _subchain_weights(w1, a_lo, math.pi / 2))
    if eps_target > e_hi + RESIDUAL_TOL:
        return None
    lo, hi = 0.0, math.pi / 2
    theta = hi
    for _ in range(BISECT_MAX_ITERS):
        theta = 0.5 * (lo + hi)
        f = math.fsum(mlev * _subchain_weights(w1, a_lo, theta)) - eps_target
        if abs(f) <= 1e-12:
            break
        if f < 0:
            lo = theta
        else:
            hi = theta
    tr = new_trace(initial)
    if plan.m_tilde > 0:
        apply_permutation(tr, phase1_permutation(dim, plan.m_tilde))
    for a in range(dim - 1, a_lo - 1, -1):
        apply_givens(tr, a, a + 1, theta)
    return tr


def _seam_trace(initial: Distribution, plan: ShiftPlan):
    """Alternative completion: overshoot with phase-one(m+1), then pull the
    residual back down with one rotation dropping the heaviest shifted
    weight by a single level.

    Unlike the chain, this keeps every bulk population on exactly two
    adjacent work values, which is what keeps the realized fluctuations
    near the idealized closed form at large residuals.  Returns None when
    the single pull-down rotation cannot absorb the overshoot.
    """
    spec = initial.spectrum
    dim = spec.dim
    m_over = plan.m_tilde + 1
    if plan.residual <= RESIDUAL_TOL or m_over > dim - 1:
        return None
    mlev = spec.level_of_slot
    sources = _phase1_sources(dim, m_over)
    w = initial.weights[sources - 1]
    eps_target = plan.eps_after_shift + plan.residual
    shed = math.fsum(mlev * w) - eps_target
    if shed <= 0.0:
        return None
    b = m_over  # 0-based slot that received the heaviest population
    level_b = int(mlev[b])
    best = None
    for a in range(b):
        if mlev[a] != level_b - 1:
            continue
        lever = w[b] - w[a]
        if lever <= 0.0 or shed > lever * (1.0 + 1e-12):
            continue
        s2 = min(shed / lever, 1.0)
        tr = new_trace(initial)
        apply_permutation(tr, tuple(int(s) for s in sources))
        apply_givens(tr, a + 1, b + 1, math.asin(math.sqrt(s2)))
        fluct = tpm_stats(initial, tr).fluct_sq
        if best is None or fluct < best[0]:
            best = (fluct, tr)
    return None if best is None else best[1]


def best_completion(initial: Distribution, plan: ShiftPlan):
    """Realize the common-angle completion with the smallest exact TPM
    fluctuation and return (trace, tpm_stats).

    Candidates: the full descending chain, chains restricted to the topmost
    slots, and the single pull-down from the (m+1)-shift.  Above dimension
    64 only the full chain and the pull-down are considered.
    """
    dim = initial.spectrum.dim
    tr = _chain_trace(initial, plan)
    stats = tpm_stats(initial, tr)
    candidates = []
    if plan.theta > 0.0 and dim <= 64:
        candidates.extend(
            _subchain_trace(initial, plan, a_lo)
            for a_lo in range(plan.m_tilde + 2, dim)
        )
    candidates.append(_seam_trace(initial, plan))
    for cand in candidates:
        if cand is None:
            continue
        cand_stats = tpm_stats(initial, cand)
        if cand_stats.fluct_sq < stats.fluct_sq:
            tr, stats = cand, cand_stats
    return tr, stats


def charge_min_fluct(
    spec: Spectrum, beta: float, delta_eps: float, protocol: str = "fluctuation"
) -> ChargeReport:
    """Run the full fluctuation protocol; reports the exact TPM fluctuations
    of the realized trace, the final-state variance, and the closed-form
    reference value.

    Column semantics: ``variance`` and ``fluct_sq_eq32`` are the idealized
    protocol curves (single-shot mixing map at the closed-form angle, i.e.
    what the figures plot); ``fluct_sq`` is the exact TPM value of the
    realized unitary trace, kept so the idealized-vs-realized gap is always
    on record.

    The realized common-angle completion of phase one is chosen among the
    realizable candidates: the full descending chain, chains restricted to
    the topmost slots, and the single pull-down from the (m+1)-shift; the
    trace with the smallest exact TPM fluctuation wins.  Above dimension 64
    only the full chain and the pull-down are considered.
    """
    t0 = time.perf_counter()
    initial = thermal_distribution(spec, beta)
    eps0 = mean_energy(initial)
    dmax = spec.m_max - 2.0 * eps0
    if delta_eps < -RANGE_SLACK or delta_eps > dmax + RANGE_SLACK:
        raise RangeError(f"delta_eps={delta_eps} outside [0, {dmax}]")
    delta_eps = min(max(delta_eps, 0.0), dmax)

    plan = select_m_tilde(initial, delta_eps)
    tr, stats = best_completion(initial, plan)
    final = tr.dist
    eps_final = mean_energy(final)
    if abs(eps_final - (eps0 + delta_eps)) > ENERGY_TOL:
        raise InternalError(
            f"final energy {eps_final} missed target {eps0 + delta_eps}"
        )
    theta_ideal = ideal_shift_theta(initial, plan.m_tilde, eps0 + delta_eps)
    ideal_final = idealized_distribution(initial, plan.m_tilde, theta_ideal)
    if abs(mean_energy(ideal_final) - (eps0 + delta_eps)) > ENERGY_TOL:
        raise InternalError("idealized map missed the target energy")
    elapsed_ms = (time.perf_counter() - t0) * 1e3
    return ChargeReport(
        protocol=protocol,
        d=spec.d,
        n_qubits=spec.n_subsystems,
        temperature=beta_to_temperature(beta, spec.omega),
        delta_eps=delta_eps,
        eps0=eps0,
        variance=variance(ideal_final),
        fluct_sq=stats.fluct_sq,
        fluct_sq_eq32=closed_form_fluct(initial, plan.m_tilde, theta_ideal, delta_eps),
        mean_work=stats.mean_work,
        n_steps=tr.n_steps,
        elapsed_ms=elapsed_ms,
        extras={
            "m_tilde": plan.m_tilde,
            "theta_chain": plan.theta,
            "theta_ideal": theta_ideal,
            "variance_realized": variance(final),
        },
    )
