"""Local unitary charging of N-qubit batteries.

Local rotations keep the state a product, so the diagonal objectives
depend only on the per-qubit excited-state populations p1_i, each
reachable within [p1, p0] from the thermal qubit (p0, p1).  The
symmetric local charging process (SLCP) gives every qubit the same share
and is the worst case for both the variance and the work fluctuations;
optimal local allocations are found by seeded random-restart coordinate
descent over the box-constrained allocation simplex.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, ValidationError
from .report import ChargeReport
from .spectrum import build_spectrum
from .states import beta_to_temperature, thermal_distribution

ALLOC_TOL = 1e-12


@dataclass(frozen=True)
class LocalPlan:
    """Per-qubit excited-state populations after local charging."""

    n_qubits: int
    beta: float
    excitations: tuple[float, ...]

    def __post_init__(self):
        p0, p1 = qubit_populations(self.beta)
        for x in self.excitations:
            if not p1 - ALLOC_TOL <= x <= p0 + ALLOC_TOL:
                raise ValidationError(f"excitation {x} outside reachable [{p1}, {p0}]")


def qubit_populations(beta: float) -> tuple[float, float]:
    """(p0, p1) of a thermal qubit; beta may be inf for T=0."""
    qubit = build_spectrum(2, 1)
    w = thermal_distribution(qubit, beta).weights
    return float(w[0]), float(w[1])


def _per_qubit_variance(p1_tilde: np.ndarray) -> np.ndarray:
    return p1_tilde * (1.0 - p1_tilde)


def _per_qubit_fluct(p1_tilde: np.ndarray, p0: float, p1: float) -> np.ndarray:
    """One qubit's TPM fluctuations as a function of its final excitation:
    V(final) + V(thermal) - 2*(p1*(p1t-p0)/(p1-p0) - p1*p1t)."""
    if p1 == p0:  # never happens for beta > 0, keeps the formula total
        return np.zeros_like(p1_tilde)
    cross = p1 * (p1_tilde - p0) / (p1 - p0) - p1 * p1_tilde
    return p1_tilde * (1.0 - p1_tilde) + p1 * (1.0 - p1) - 2.0 * cross


def plan_variance(plan: LocalPlan) -> float:
    """Total variance of a local plan (sum of per-qubit variances), units omega^2."""
    return float(np.sum(_per_qubit_variance(np.asarray(plan.excitations))))


def plan_fluct(plan: LocalPlan) -> float:
    """Total TPM fluctuations of a local plan, units omega^2."""
    p0, p1 = qubit_populations(plan.beta)
    return float(np.sum(_per_qubit_fluct(np.asarray(plan.excitations), p0, p1)))


def slcp_fluct_formula(n_qubits: int, beta: float, p1_tilde: float) -> float:
    """Closed-form SLCP work fluctuations for N identical qubits at final
    excitation p1_tilde, in units of omega^2."""
    p0, p1 = qubit_populations(beta)
    if not p1 - ALLOC_TOL <= p1_tilde <= p0 + ALLOC_TOL:
        raise ValidationError(f"p1_tilde={p1_tilde} outside [{p1}, {p0}]")
    return float(
        np.sum(_per_qubit_fluct(np.full(n_qubits, float(p1_tilde)), p0, p1))
    )


def perturbed_slcp_variance(
    n_qubits: int, beta: float, p1_tilde: float, delta: float
) -> float:
    """Variance after perturbing two qubits of an SLCP by +/- delta:
    exactly V_SLCP - 2*delta^2 (units omega^2)."""
    if n_qubits < 2:
        raise ValidationError("perturbation needs at least two qubits")
    p0, p1 = qubit_populations(beta)
    for x in (p1_tilde + delta, p1_tilde - delta):
        if not p1 - ALLOC_TOL <= x <= p0 + ALLOC_TOL:
            raise ValidationError(f"perturbed excitation {x} outside [{p1}, {p0}]")
    return n_qubits * p1_tilde * (1.0 - p1_tilde) - 2.0 * delta * delta


def _check_local_range(n_qubits: int, beta: float, delta_eps: float) -> tuple[float, float]:
    p0, p1 = qubit_populations(beta)
    dmax = n_qubits * (p0 - p1)
    if delta_eps < -1e-9 or delta_eps > dmax + 1e-9:
        raise RangeError(f"delta_eps={delta_eps} outside local range [0, {dmax}]")
    return p0, p1


def _report(
    protocol: str,
    n_qubits: int,
    beta: float,
    delta_eps: float,
    plan: LocalPlan,
    t0: float,
    seed: int | None = None,
    extras: dict | None = None,
) -> ChargeReport:
    _, p1 = qubit_populations(beta)
    return ChargeReport(
        protocol=protocol,
        d=2,
        n_qubits=n_qubits,
        temperature=beta_to_temperature(beta),
        delta_eps=delta_eps,
        eps0=n_qubits * p1,
        variance=plan_variance(plan),
        fluct_sq=plan_fluct(plan),
        mean_work=float(math.fsum(plan.excitations) - n_qubits * p1),
        n_steps=n_qubits,
        seed=seed,
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
        extras=extras or {},
    )


def slcp_charge(n_qubits: int, beta: float, delta_eps: float) -> ChargeReport:
    """Symmetric local charging: every qubit receives delta_eps/N."""
    t0 = time.perf_counter()
    p0, p1 = _check_local_range(n_qubits, beta, delta_eps)
    share = min(max(p1 + delta_eps / n_qubits, p1), p0)
    plan = LocalPlan(n_qubits, beta, (share,) * n_qubits)
    return _report("slcp", n_qubits, beta, delta_eps, plan, t0)


def basis_flat_slots(n_qubits: int) -> np.ndarray:
    """Flat slot (0-based) of each computational basis state, grouping by
    excitation number and ordering ties by bitstring value."""
    spec = build_spectrum(2, n_qubits)
    weights = [bin(b).count("1") for b in range(2**n_qubits)]
    slots = np.empty(2**n_qubits, dtype=int)
    counters = [0] * (n_qubits + 1)
    for b, m in enumerate(weights):
        slots[b] = spec._offsets[m] + counters[m]
        counters[m] += 1
    return slots


def local_plan_trace(plan: LocalPlan):
    """Realize a local plan as a trace on the flattened N-qubit spectrum:
    per qubit, one Givens rotation on every basis pair differing in that
    bit.  Used to cross-check the closed forms against exact TPM values."""
    from .trace import apply_givens, new_trace

    n = plan.n_qubits
    p0, p1 = qubit_populations(plan.beta)
    spec = build_spectrum(2, n)
    slots = basis_flat_slots(n)
    t = new_trace(thermal_distribution(spec, plan.beta))
    for i, x in enumerate(plan.excitations):
        span = p0 - p1
        s2 = 0.0 if span <= 0 else min(max((x - p1) / span, 0.0), 1.0)
        theta = math.asin(math.sqrt(s2))
        for b in range(2**n):
            if not b & (1 << i):
                apply_givens(t, int(slots[b]) + 1, int(slots[b | (1 << i)]) + 1, theta)
    return t


def _sample_allocations(
    n_qubits: int, p0: float, p1: float, delta_eps: float, count: int, rng
) -> np.ndarray:
    """Uniform samples on the allocation simplex intersected with the
    reachable box, via Dirichlet rejection on the smaller side."""
    width = p0 - p1
    total = delta_eps
    flip = total > n_qubits * width / 2.0
    budget = n_qubits * width - total if flip else total
    out = np.empty((count, n_qubits))
    filled = 0
    attempts = 0
    while filled < count:
        attempts += 1
        if attempts > 2000:
            raise RangeError("feasible allocation set is empty or vanishingly small")
        draw = rng.dirichlet(np.ones(n_qubits), size=max(count - filled, 64)) * budget
        good = draw[(draw <= width + ALLOC_TOL).all(axis=1)]
        take = good[: count - filled]
        out[filled : filled + len(take)] = take
        filled += len(take)
    y = (width - out) if flip else out
    return p1 + np.clip(y, 0.0, width)


def random_local_sample(
    n_qubits: int, beta: float, delta_eps: float, count: int, seed: int
) -> list[tuple[float, float]]:
    """Seeded uniform random local allocations; returns (V, fluct_sq) pairs."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    p0, p1 = _check_local_range(n_qubits, beta, delta_eps)
    rng = np.random.default_rng(seed)
    allocs = _sample_allocations(n_qubits, p0, p1, delta_eps, count, rng)
    variances = _per_qubit_variance(allocs).sum(axis=1)
    flucts = _per_qubit_fluct(allocs, p0, p1).sum(axis=1)
    return list(zip(variances.tolist(), flucts.tolist()))


def _coordinate_descent(
    x: np.ndarray, lo: float, hi: float, per_qubit, max_sweeps: int = 500
) -> np.ndarray:
    """Pairwise transfers: for concave per-qubit objectives the restricted
    1-D problem is minimized at an endpoint, so each pair is pushed to its
    best feasible extreme until no transfer improves the total."""
    n = len(x)
    for _ in range(max_sweeps):
        improved = False
        for i in range(n):
            for j in range(i + 1, n):
                c = x[i] + x[j]
                t_lo = max(lo, c - hi)
                t_hi = min(hi, c - lo)
                if t_hi - t_lo <= ALLOC_TOL:
                    continue
                current = per_qubit(np.array([x[i], x[j]])).sum()
                cand = min(
                    (float(per_qubit(np.array([t, c - t])).sum()), t)
                    for t in (t_lo, t_hi)
                )
                if cand[0] < current - 1e-14:
                    x[i], x[j] = cand[1], c - cand[1]
                    improved = True
        if not improved:
            break
    return x


def optimal_local_search(
    n_qubits: int,
    beta: float,
    delta_eps: float,
    seed: int = 0,
    restarts: int = 64,
) -> tuple[ChargeReport, ChargeReport]:
    """Best local allocations for each objective separately.

    Returns (variance-optimal, fluctuation-optimal) reports, tagged
    ``local-opt-v`` and ``local-opt-w``; each report carries both metrics
    of its own allocation.
    """
    t0 = time.perf_counter()
    p0, p1 = _check_local_range(n_qubits, beta, delta_eps)
    rng = np.random.default_rng(seed)
    starts = _sample_allocations(n_qubits, p0, p1, delta_eps, restarts, rng)
    per_fluct = lambda x: _per_qubit_fluct(x, p0, p1)  # noqa: E731
    best = {}
    for name, fn in (("v", _per_qubit_variance), ("w", per_fluct)):
        best_val, best_x = math.inf, None
        for x0 in starts:
            x = _coordinate_descent(x0.copy(), p1, p0, fn)
            val = float(fn(x).sum())
            if val < best_val - 1e-15:
                best_val, best_x = val, x
        best[name] = LocalPlan(n_qubits, beta, tuple(float(v) for v in np.sort(best_x)))
    extras = {"restarts": restarts, "objective": "variance"}
    rep_v = _report(
        "local-opt-v", n_qubits, beta, delta_eps, best["v"], t0, seed, dict(extras)
    )
    extras["objective"] = "fluct"
    rep_w = _report(
        "local-opt-w", n_qubits, beta, delta_eps, best["w"], t0, seed, extras
    )
    return rep_v, rep_w
