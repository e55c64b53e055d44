import math

import numpy as np
import pytest

from qbatt import (
    Distribution,
    ValidationError,
    asd,
    build_spectrum,
    charge_range,
    mean_energy,
    pure_state_variance_bound,
    thermal_distribution,
    variance,
)

# Direct evaluations of the thermal weights for d=3, beta=1 (independent
# of the module code path): e^{-n} / sum_k e^{-k}.
P3 = (0.6652409557748219, 0.2447284710547977, 0.0900305731703804)


def test_thermal_qubit_weights():
    spec = build_spectrum(2, 1)
    w = thermal_distribution(spec, 1.0).weights
    assert w == pytest.approx((0.7310585786300049, 0.2689414213699951), abs=1e-12)


def test_thermal_qutrit_weights():
    spec = build_spectrum(3, 1)
    w = thermal_distribution(spec, 1.0).weights
    assert w == pytest.approx(P3, abs=1e-12)


def test_thermal_t0_point_mass():
    for spec in (build_spectrum(5, 1), build_spectrum(2, 4)):
        for beta in (math.inf, 1e4):
            w = thermal_distribution(spec, beta).weights
            assert w[0] == 1.0
            assert np.all(w[1:] == 0.0)


def test_thermal_negative_beta_rejected():
    with pytest.raises(ValidationError):
        thermal_distribution(build_spectrum(2, 1), -0.5)


@pytest.mark.parametrize("d,n,beta", [(2, 1, 1.0), (3, 2, 0.7), (5, 1, 2.0), (2, 4, 1.0), (4, 3, 0.3)])
def test_mean_energy_matches_closed_form(d, n, beta):
    # E(tau)/omega = N * (1/(e^x - 1) - d/(e^{x d} - 1)) with x = beta*omega
    spec = build_spectrum(d, n)
    dist = thermal_distribution(spec, beta)
    x = beta
    expected = n * (1.0 / math.expm1(x) - d / math.expm1(x * d))
    assert mean_energy(dist) == pytest.approx(expected, abs=1e-12)


def test_mean_energy_examples():
    assert mean_energy(thermal_distribution(build_spectrum(2, 1), 1.0)) == pytest.approx(
        1.0 / (1.0 + math.e), abs=1e-12
    )
    assert mean_energy(thermal_distribution(build_spectrum(3, 1), 1.0)) == pytest.approx(
        P3[1] + 2 * P3[2], abs=1e-12
    )
    assert mean_energy(thermal_distribution(build_spectrum(2, 4), math.inf)) == 0.0


def test_variance_examples():
    spec3 = build_spectrum(3, 1)
    assert variance(thermal_distribution(spec3, math.inf)) == 0.0
    two_point = Distribution(spec3, np.array([0.5, 0.0, 0.5]))
    assert variance(two_point) == pytest.approx(1.0, abs=1e-15)
    expected = (P3[1] + 4 * P3[2]) - (P3[1] + 2 * P3[2]) ** 2
    assert variance(thermal_distribution(spec3, 1.0)) == pytest.approx(expected, abs=1e-12)


def test_asd_examples():
    spec3 = build_spectrum(3, 1)
    th = thermal_distribution(spec3, 1.0)
    assert asd(th, mean_energy(th)) == pytest.approx(variance(th), abs=1e-14)
    point = Distribution(spec3, np.array([0.0, 0.0, 1.0]))
    assert asd(point, 1.5) == pytest.approx(0.25, abs=1e-15)
    # direct: 4*p0 + 1*p1 + 0*p2 (the spec sheet's 2.906067 is a typo)
    assert asd(th, 2.0) == pytest.approx(4 * P3[0] + P3[1], abs=1e-12)
    assert asd(th, 2.0) == pytest.approx(2.905692294154085, abs=1e-12)


def test_parallel_axis_identity_random():
    rng = np.random.default_rng(7)
    spec = build_spectrum(4, 2)
    for _ in range(50):
        w = rng.dirichlet(np.ones(spec.dim))
        dist = Distribution(spec, w)
        target = rng.uniform(-1.0, spec.m_max + 1.0)
        lhs = asd(dist, target) - variance(dist)
        rhs = (mean_energy(dist) - target) ** 2
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_charge_range_examples():
    assert charge_range(build_spectrum(2, 4), math.inf) == (0.0, 4.0)
    spec5 = build_spectrum(5, 1)
    eps0 = 1.0 / math.expm1(1.0) - 5.0 / math.expm1(5.0)
    assert charge_range(spec5, 1.0)[1] == pytest.approx(4.0 - 2.0 * eps0, abs=1e-12)
    # maximally mixed qubit sits mid-spectrum: the admissible charge closes
    assert charge_range(build_spectrum(2, 1), 1e-9)[1] == pytest.approx(0.0, abs=1e-8)


def test_charge_range_equals_reversed_mean():
    for d, n, beta in [(3, 1, 1.0), (5, 1, 0.5), (2, 4, 1.0)]:
        spec = build_spectrum(d, n)
        dist = thermal_distribution(spec, beta)
        reversed_mean = mean_energy(Distribution(spec, dist.weights[::-1].copy()))
        assert charge_range(spec, beta)[1] == pytest.approx(
            reversed_mean - mean_energy(dist), abs=1e-12
        )


def test_pure_state_variance_bound():
    assert pure_state_variance_bound(0.5) == pytest.approx(0.25, abs=1e-15)
    assert pure_state_variance_bound(2.0) == 0.0
    assert pure_state_variance_bound(1.25) == pytest.approx(0.1875, abs=1e-15)
    with pytest.raises(ValidationError):
        pure_state_variance_bound(-0.1)


def test_thermal_is_passive():
    for d, n, beta in [(3, 1, 1.0), (2, 4, 0.7), (4, 2, 2.0)]:
        spec = build_spectrum(d, n)
        w = thermal_distribution(spec, beta).weights
        assert np.all(np.diff(w) <= 1e-15)
        for m, g in spec.levels:
            lo = sum(spec.degeneracies[:m])
            block = w[lo : lo + g]
            assert np.all(block == block[0])


def test_distribution_validation():
    spec = build_spectrum(3, 1)
    with pytest.raises(ValidationError):
        Distribution(spec, np.array([0.5, 0.5]))
    with pytest.raises(ValidationError):
        Distribution(spec, np.array([0.6, 0.5, -0.1]))
    with pytest.raises(ValidationError):  # renormalization is forbidden
        Distribution(spec, np.array([0.5, 0.3, 0.1]))
    with pytest.raises(ValidationError):
        Distribution(spec, np.array([1.0 / 3 + 5e-12, 1.0 / 3, 1.0 / 3]))
    Distribution(spec, np.array([1.0 / 3 + 2e-13, 1.0 / 3, 1.0 / 3 - 2e-13]))


def test_weights_are_immutable():
    dist = thermal_distribution(build_spectrum(3, 1), 1.0)
    with pytest.raises(ValueError):
        dist.weights[0] = 0.9


def test_energy_stats_bundle():
    from qbatt.states import energy_stats

    dist = thermal_distribution(build_spectrum(3, 1), 1.0)
    stats = energy_stats(dist, eps_target=2.0)
    assert stats.mean_eps == mean_energy(dist)
    assert stats.variance == variance(dist)
    assert stats.asd == asd(dist, 2.0)
    assert stats.asd >= stats.variance
    assert energy_stats(dist).asd is None
