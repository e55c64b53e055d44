"""Energy-level structure of N identical equally spaced qudits.

A battery made of N non-interacting d-level systems with level spacing
omega has total energies m*omega for m = 0..N(d-1), where level m is
g(m)-fold degenerate.  Eigenstates are addressed either by the pair
(m, i_m) with i_m = 1..g(m), or by a single flattened index
s = 1..d^N that runs through the levels in order of increasing energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SizeError, ValidationError

# Dimension cap for building spectra; full dense traces are capped
# separately (see trace.MAX_TRACE_DIM).
MAX_SPECTRUM_DIM = 2**20


@dataclass(frozen=True)
class Spectrum:
    """Immutable level structure: dimensions, spacing and degeneracies.

    ``degeneracies[m]`` is the number of eigenstates with energy m*omega.
    """

    d: int
    n_subsystems: int
    omega: float
    degeneracies: tuple[int, ...]

    @property
    def dim(self) -> int:
        """Total number of eigenstates D = d^N."""
        return self.d**self.n_subsystems

    @property
    def m_max(self) -> int:
        """Highest level index N(d-1)."""
        return len(self.degeneracies) - 1

    @property
    def levels(self) -> list[tuple[int, int]]:
        """List of (level index m, degeneracy g(m)) pairs."""
        return list(enumerate(self.degeneracies))

    @cached_property
    def _offsets(self) -> tuple[int, ...]:
        """Cumulative degeneracy below each level: offsets[m] = sum(g(n), n<m)."""
        out = [0]
        for g in self.degeneracies:
            out.append(out[-1] + g)
        return tuple(out)

    @cached_property
    def level_of_slot(self) -> np.ndarray:
        """Level index m for each 0-based slot (slot t holds flat index s=t+1)."""
        arr = np.repeat(np.arange(len(self.degeneracies)), self.degeneracies)
        arr.setflags(write=False)
        return arr

    def g(self, m: int) -> int:
        """Degeneracy of level m."""
        if not 0 <= m <= self.m_max:
            raise ValidationError(f"level index {m} outside 0..{self.m_max}")
        return self.degeneracies[m]

    def energy(self, m: int) -> float:
        """Absolute energy of level m (units of the Hamiltonian)."""
        return m * self.omega


def build_spectrum(
    d: int, n_subsystems: int, omega: float = 1.0, max_dim: int = MAX_SPECTRUM_DIM
) -> Spectrum:
    """Build the level structure of N identical d-level subsystems.

    Degeneracies are obtained by N-fold integer convolution of the uniform
    length-d vector, so the single-qudit (all g=1) and N-qubit
    (g(m) = binomial(N, m)) cases fall out of one code path.
    """
    if not (isinstance(d, int) and isinstance(n_subsystems, int)):
        raise ValidationError("d and n_subsystems must be integers")
    if d < 2:
        raise ValidationError(f"local dimension d={d} must be >= 2")
    if n_subsystems < 1:
        raise ValidationError(f"n_subsystems={n_subsystems} must be >= 1")
    if not omega > 0:
        raise ValidationError(f"omega={omega} must be positive")
    dim = d**n_subsystems
    if dim > max_dim:
        raise SizeError(f"d^N = {dim} exceeds cap {max_dim}")

    # Exact integer convolution: g_{k+1} = g_k * [1]*d.
    degs = [1]
    for _ in range(n_subsystems):
        new = [0] * (len(degs) + d - 1)
        for i, gi in enumerate(degs):
            for j in range(d):
                new[i + j] += gi
        degs = new
    assert sum(degs) == dim
    return Spectrum(d=d, n_subsystems=n_subsystems, omega=float(omega), degeneracies=tuple(degs))


def flatten(spec: Spectrum, m: int, i_m: int) -> int:
    """Flat index s (1-based) of eigenstate (m, i_m)."""
    if not 0 <= m <= spec.m_max:
        raise ValidationError(f"level index {m} outside 0..{spec.m_max}")
    if not 1 <= i_m <= spec.degeneracies[m]:
        raise ValidationError(f"slot index {i_m} outside 1..{spec.degeneracies[m]} at level {m}")
    return spec._offsets[m] + i_m


def unflatten(spec: Spectrum, s: int) -> tuple[int, int]:
    """Inverse of :func:`flatten`: (m, i_m) for flat index s (1-based)."""
    if not 1 <= s <= spec.dim:
        raise ValidationError(f"flat index {s} outside 1..{spec.dim}")
    m = int(spec.level_of_slot[s - 1])
    return m, s - spec._offsets[m]
