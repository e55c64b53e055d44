"""Elementary unitary operations and two-point-measurement work statistics.

A trace records a sequence of population permutations and two-level
(Givens) rotations applied to an initial diagonal state, together with
the exact composed real orthogonal matrix.  Work statistics are always
computed from that composed matrix: composing per-step transition
matrices instead would ignore interference and is deliberately not
offered.

Flat eigenstate indices in this module's public API (and in the JSON
trace export) are 1-based, matching the reporting convention; arrays are
0-based internally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeError, ValidationError
from .spectrum import Spectrum
from .states import Distribution

# Dense D x D storage keeps TPM statistics exact; desk-scale cap.
MAX_TRACE_DIM = 4096

THETA_SLACK = 1e-9


@dataclass(frozen=True)
class GivensStep:
    """Two-level rotation between flat slots a and b (1-based), angle theta."""

    a: int
    b: int
    theta: float


@dataclass(frozen=True)
class PermutationStep:
    """Population permutation; ``sources[t]`` is the 1-based flat index whose
    weight lands on slot t+1."""

    sources: tuple[int, ...]


RotationStep = GivensStep | PermutationStep


@dataclass
class TraceState:
    """Current diagonal, composed orthogonal matrix, and step log.

    Single-writer semantics: the apply_* functions mutate in place and
    return the same object; independent traces may run in parallel.
    """

    initial: Distribution
    matrix: np.ndarray
    steps: list[RotationStep] = field(default_factory=list)
    _weights: np.ndarray | None = None

    @property
    def spectrum(self) -> Spectrum:
        return self.initial.spectrum

    @property
    def dist(self) -> Distribution:
        """Current diagonal as an immutable Distribution."""
        return Distribution(self.spectrum, self._weights.copy())

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def new_trace(initial: Distribution) -> TraceState:
    """Start a trace at `initial` with the identity matrix and no steps."""
    dim = initial.spectrum.dim
    if dim > MAX_TRACE_DIM:
        raise SizeError(f"dimension {dim} exceeds trace cap {MAX_TRACE_DIM}")
    return TraceState(
        initial=initial,
        matrix=np.eye(dim),
        steps=[],
        _weights=initial.weights.copy(),
    )


def _check_slot(t: TraceState, s: int) -> int:
    if not 1 <= s <= t.spectrum.dim:
        raise ValidationError(f"flat index {s} outside 1..{t.spectrum.dim}")
    return s - 1


def apply_givens(t: TraceState, a: int, b: int, theta: float) -> TraceState:
    """Left-multiply by the Givens rotation G(a, b, theta) and update the
    diagonal.  On a coherence-free pair this is the two-level map
    (p_a, p_b) -> (p_a cos^2 + p_b sin^2, p_b cos^2 + p_a sin^2); in general
    the exact update includes the off-diagonal element of the evolved state,
    r_ab = sum_k U[a,k] U[b,k] p0_k, so the tracked diagonal always equals
    the one implied by the composed matrix.

    Sign convention: cos(theta) at (a,a) and (b,b), -sin(theta) at (a,b),
    +sin(theta) at (b,a).  TPM statistics only see squared entries, but the
    fixed convention keeps traces reproducible bit-for-bit.
    """
    if a == b:
        raise ValidationError(f"Givens indices must differ, got a=b={a}")
    ia, ib = _check_slot(t, a), _check_slot(t, b)
    if not -THETA_SLACK <= theta <= math.pi / 2 + THETA_SLACK:
        raise ValidationError(f"theta={theta} outside [0, pi/2]")
    theta = min(max(theta, 0.0), math.pi / 2)

    c, s = math.cos(theta), math.sin(theta)
    m = t.matrix
    r_ab = float(np.dot(m[ia] * m[ib], t.initial.weights))
    row_a = m[ia].copy()
    m[ia] = c * row_a - s * m[ib]
    m[ib] = s * row_a + c * m[ib]

    w = t._weights
    c2, s2, cross = c * c, s * s, 2.0 * c * s * r_ab
    wa, wb = w[ia], w[ib]
    w[ia] = wa * c2 + wb * s2 - cross
    w[ib] = wb * c2 + wa * s2 + cross

    t.steps.append(GivensStep(a=a, b=b, theta=theta))
    return t


def apply_permutation(t: TraceState, sources) -> TraceState:
    """Apply the population permutation where slot t+1 receives the weight of
    1-based flat index ``sources[t]``; left-multiplies the matching
    permutation matrix."""
    dim = t.spectrum.dim
    src = np.asarray(sources, dtype=int)
    if src.shape != (dim,) or sorted(src.tolist()) != list(range(1, dim + 1)):
        raise ValidationError("permutation must list each flat index 1..D exactly once")
    idx = src - 1
    t.matrix[:] = t.matrix[idx, :]
    t._weights[:] = t._weights[idx]
    t.steps.append(PermutationStep(sources=tuple(int(s) for s in src)))
    return t


@dataclass(frozen=True)
class TpmStats:
    """Two-point-measurement work statistics of a whole trace.

    mean_work is in units of omega, fluct_sq in units of omega^2;
    transition[n, m] is the probability of ending in eigenstate n+1 when
    starting from m+1 (columns: start, rows: end).
    """

    mean_work: float
    fluct_sq: float
    transition: np.ndarray


def _require_same_initial(initial: Distribution, t: TraceState) -> None:
    if initial.spectrum is not t.spectrum and initial.spectrum != t.spectrum:
        raise ValidationError("trace was built on a different spectrum")
    if not np.array_equal(initial.weights, t.initial.weights):
        raise ValidationError("trace was not constructed from this initial distribution")


def tpm_stats(initial: Distribution, t: TraceState) -> TpmStats:
    """Exact TPM mean work and fluctuations from the composed matrix.

    transition(n|m) = U[n,m]^2; the work of an (m -> n) record is the level
    difference, and fluct_sq is the second moment about the mean work.
    """
    _require_same_initial(initial, t)
    transition = t.matrix * t.matrix
    mlev = t.spectrum.level_of_slot.astype(float)
    p = initial.weights
    joint = transition * p[None, :]
    de = mlev[:, None] - mlev[None, :]
    mean_work = float(np.sum(joint * de))
    fluct_sq = float(np.sum(joint * (de - mean_work) ** 2))
    return TpmStats(mean_work=mean_work, fluct_sq=fluct_sq, transition=transition)


def fluct_via_identity(initial: Distribution, t: TraceState) -> float:
    """Work fluctuations from the variance identity
    (DW)^2 = V(final) + V(initial) - 2*(Tr[H~ H tau] - E(tau) E(final)),
    with H~ = U^T H U computed from the composed matrix.  Cross-checks the
    direct TPM sum."""
    _require_same_initial(initial, t)
    mlev = t.spectrum.level_of_slot.astype(float)
    p = initial.weights
    w_final = t._weights
    eps0 = float(np.dot(mlev, p))
    eps1 = float(np.dot(mlev, w_final))
    v0 = float(np.dot(p, (mlev - eps0) ** 2))
    v1 = float(np.dot(w_final, (mlev - eps1) ** 2))
    # (U^T H U)[s,s] = sum_n U[n,s]^2 m(n)
    htilde_diag = (t.matrix * t.matrix).T @ mlev
    cross = float(np.dot(htilde_diag * mlev, p))
    return v1 + v0 - 2.0 * (cross - eps0 * eps1)


def orthogonality_error(t: TraceState) -> float:
    """Max-entry deviation of U^T U from the identity."""
    dim = t.spectrum.dim
    return float(np.abs(t.matrix.T @ t.matrix - np.eye(dim)).max())


def diagonal_consistency_error(t: TraceState) -> float:
    """Max deviation between the tracked diagonal and the one implied by the
    composed matrix acting on the initial weights."""
    implied = (t.matrix * t.matrix) @ t.initial.weights
    return float(np.abs(implied - t._weights).max())


def export_steps(t: TraceState) -> str:
    """Serialize the step log as JSON lines for audit and replay."""
    lines = []
    for step in t.steps:
        if isinstance(step, GivensStep):
            record = {"op": "givens", "a": step.a, "b": step.b, "theta": step.theta}
        else:
            record = {"op": "perm", "map": list(step.sources)}
        lines.append(json.dumps(record, separators=(",", ":")))
    return "\n".join(lines)


def replay_steps(initial: Distribution, text: str) -> TraceState:
    """Rebuild a trace from its JSON-lines export."""
    t = new_trace(initial)
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec["op"] == "givens":
            apply_givens(t, rec["a"], rec["b"], rec["theta"])
        elif rec["op"] == "perm":
            apply_permutation(t, rec["map"])
        else:
            raise ValidationError(f"unknown trace op {rec['op']!r}")
    return t
