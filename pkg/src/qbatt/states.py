"""Thermal states, energy statistics, and the admissible charge range.

All energies are expressed in units of omega (epsilon = E/omega) and all
second moments (variance, average squared distance) in units of omega^2,
matching the dimensionless axes used throughout the charging analysis.
Absolute scales enter only through Spectrum.omega at the reporting layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectrum import Spectrum

# Distributions must be normalized to this tolerance on construction;
# silent renormalization is forbidden (it would hide protocol bugs).
NORM_TOL = 1e-12

# beta*omega beyond this is numerically indistinguishable from T=0 and is
# replaced by the exact ground-state point mass.
T0_BETA_OMEGA = 700.0


@dataclass(frozen=True)
class Distribution:
    """Probability weights over flattened eigenstates (diagonal of a state).

    ``weights[t]`` is the population of the slot with flat index s = t+1.
    """

    spectrum: Spectrum
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.spectrum.dim,):
            raise ValidationError(
                f"weights shape {w.shape} does not match spectrum dim {self.spectrum.dim}"
            )
        if w.min() < -NORM_TOL:
            raise ValidationError(f"negative weight {w.min()}")
        total = math.fsum(w)
        if abs(total - 1.0) > NORM_TOL:
            raise ValidationError(f"weights sum to {total}, not 1 (renormalization is forbidden)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class EnergyStats:
    """Mean energy, variance, and optional squared distance from a target."""

    mean_eps: float
    variance: float
    asd: float | None = None


def thermal_distribution(spec: Spectrum, beta: float) -> Distribution:
    """Gibbs weights e^(-beta*m*omega) / Z_d(beta)^N on the flattened spectrum.

    ``beta = math.inf`` (or beta*omega > 700) gives the exact T=0 point mass
    on the ground state.  Negative beta (population-inverted initial states)
    is rejected; inversion is reached by protocols, not initial states.
    """
    if beta < 0:
        raise ValidationError(f"beta={beta} must be >= 0")
    x = beta * spec.omega
    weights = np.zeros(spec.dim)
    if x > T0_BETA_OMEGA or math.isinf(x):
        weights[0] = 1.0
        return Distribution(spec, weights)
    z1 = math.fsum(math.exp(-x * n) for n in range(spec.d))
    zn = z1**spec.n_subsystems
    for m, g in spec.levels:
        w = math.exp(-x * m) / zn
        lo = spec._offsets[m]
        weights[lo : lo + g] = w
    return Distribution(spec, weights)


def mean_energy(dist: Distribution) -> float:
    """Average energy in units of omega: sum_s m(s) w(s)."""
    m = dist.spectrum.level_of_slot
    return math.fsum(m * dist.weights)


def variance(dist: Distribution) -> float:
    """Energy variance in units of omega^2."""
    eps = mean_energy(dist)
    m = dist.spectrum.level_of_slot
    return math.fsum(dist.weights * (m - eps) ** 2)


def asd(dist: Distribution, eps_target: float) -> float:
    """Average squared distance from a target energy, in units of omega^2.

    Equals the variance when the target is the distribution's own mean.
    """
    m = dist.spectrum.level_of_slot
    return math.fsum(dist.weights * (m - eps_target) ** 2)


def energy_stats(dist: Distribution, eps_target: float | None = None) -> EnergyStats:
    """Mean, variance and (optionally) ASD of a distribution in one pass."""
    return EnergyStats(
        mean_eps=mean_energy(dist),
        variance=variance(dist),
        asd=None if eps_target is None else asd(dist, eps_target),
    )


def charge_range(spec: Spectrum, beta: float) -> tuple[float, float]:
    """Admissible charge interval (0, delta_eps_max) with
    delta_eps_max = N(d-1) - 2*eps0."""
    eps0 = mean_energy(thermal_distribution(spec, beta))
    return 0.0, spec.n_subsystems * (spec.d - 1) - 2.0 * eps0


def temperature_to_beta(temperature: float, omega: float = 1.0) -> float:
    """Inverse temperature for T given in units of (hbar*omega/k_B); T=0 maps
    to beta = inf (exact ground state)."""
    if temperature < 0:
        raise ValidationError(f"temperature={temperature} must be >= 0")
    if temperature == 0.0:
        return math.inf
    return 1.0 / (temperature * omega)


def beta_to_temperature(beta: float, omega: float = 1.0) -> float:
    """Inverse of :func:`temperature_to_beta`."""
    if math.isinf(beta):
        return 0.0
    if beta == 0.0:
        return math.inf
    return 1.0 / (beta * omega)


def pure_state_variance_bound(delta_eps: float) -> float:
    """Minimum final variance for a T=0 (ground-state) battery charged by
    delta_eps, in units of omega^2: (de - floor(de)) * (ceil(de) - de)."""
    if delta_eps < 0:
        raise ValidationError(f"delta_eps={delta_eps} must be >= 0")
    return (delta_eps - math.floor(delta_eps)) * (math.ceil(delta_eps) - delta_eps)
