import math

import pytest

from qbatt import RangeError, ValidationError, build_spectrum, thermal_distribution, variance
from qbatt.fluctuation import charge_min_fluct
from qbatt.local import (
    LocalPlan,
    local_plan_trace,
    optimal_local_search,
    perturbed_slcp_variance,
    plan_fluct,
    plan_variance,
    qubit_populations,
    random_local_sample,
    slcp_charge,
    slcp_fluct_formula,
)
from qbatt.precision import charge_min_variance
from qbatt.trace import tpm_stats


def test_slcp_maximum_variance_point():
    _, p1 = qubit_populations(1.0)
    r = slcp_charge(4, 1.0, 4 * (0.5 - p1))
    assert r.variance == pytest.approx(1.0, abs=1e-12)


def test_slcp_zero_charge():
    r = slcp_charge(4, 1.0, 0.0)
    tau = thermal_distribution(build_spectrum(2, 4), 1.0)
    assert r.variance == pytest.approx(variance(tau), abs=1e-12)
    assert r.fluct_sq == pytest.approx(0.0, abs=1e-14)


def test_slcp_range_error():
    p0, p1 = qubit_populations(1.0)
    with pytest.raises(RangeError):
        slcp_charge(4, 1.0, 4 * (p0 - p1) + 1e-6)


def test_slcp_fluct_formula_edges():
    p0, p1 = qubit_populations(1.0)
    assert slcp_fluct_formula(3, 1.0, p1) == pytest.approx(0.0, abs=1e-14)
    # T=0: fluctuations coincide with the SLCP variance form
    assert slcp_fluct_formula(2, math.inf, 0.3) == pytest.approx(2 * 0.3 * 0.7, abs=1e-14)
    with pytest.raises(ValidationError):
        slcp_fluct_formula(2, 1.0, p0 + 0.01)


def test_single_qubit_fluct_matches_trace():
    beta = 1.0
    p0, p1 = qubit_populations(beta)
    plan = LocalPlan(1, beta, (0.5,))
    t = local_plan_trace(plan)
    stats = tpm_stats(t.initial, t)
    assert slcp_fluct_formula(1, beta, 0.5) == pytest.approx(stats.fluct_sq, abs=1e-12)


@pytest.mark.parametrize(
    "n,beta,fracs",
    [(2, 1.0, (0.3, 0.62)), (3, 2.0, (0.2, 0.5, 0.75)), (4, 1.0, (0.4, 0.4, 0.4, 0.4))],
)
def test_product_trace_consistency(n, beta, fracs):
    p0, p1 = qubit_populations(beta)
    plan = LocalPlan(n, beta, tuple(p1 + f * (p0 - p1) for f in fracs))
    t = local_plan_trace(plan)
    stats = tpm_stats(t.initial, t)
    assert plan_variance(plan) == pytest.approx(variance(t.dist), abs=1e-10)
    assert plan_fluct(plan) == pytest.approx(stats.fluct_sq, abs=1e-10)
    assert abs(stats.mean_work - (math.fsum(plan.excitations) - n * p1)) <= 1e-10


def test_perturbed_identity():
    assert perturbed_slcp_variance(4, 1.0, 0.5, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert perturbed_slcp_variance(4, 1.0, 0.5, 0.1) == pytest.approx(0.98, abs=1e-15)
    # direct two-qubit-perturbed product computation
    for delta in (0.02, 0.07):
        direct = (
            (0.5 + delta) * (0.5 - delta)
            + (0.5 - delta) * (0.5 + delta)
            + 2 * 0.5 * 0.5
        )
        assert perturbed_slcp_variance(4, 1.0, 0.5, delta) == pytest.approx(direct, abs=1e-15)
        assert perturbed_slcp_variance(4, 1.0, 0.5, delta) < 1.0
    with pytest.raises(ValidationError):
        perturbed_slcp_variance(4, 1.0, 0.7, 0.2)


def test_random_samples_seeded_and_dominated():
    r = slcp_charge(4, 1.0, 1.5)
    a = random_local_sample(4, 1.0, 1.5, 200, seed=1)
    b = random_local_sample(4, 1.0, 1.5, 200, seed=1)
    assert a == b
    assert max(v for v, _ in a) <= r.variance + 1e-9
    assert max(w for _, w in a) <= r.fluct_sq + 1e-9


def test_random_samples_zero_charge_degenerate():
    tau_v = variance(thermal_distribution(build_spectrum(2, 3), 1.0))
    for v, w in random_local_sample(3, 1.0, 0.0, 5, seed=2):
        assert v == pytest.approx(tau_v, abs=1e-12)
        assert w == pytest.approx(0.0, abs=1e-12)


def test_random_samples_infeasible():
    p0, p1 = qubit_populations(1.0)
    with pytest.raises(RangeError):
        random_local_sample(2, 1.0, 2 * (p0 - p1) + 0.1, 10, seed=0)


def _enumerate_vertex_optimum(n, beta, delta_eps, objective):
    """Exact optimum of a concave symmetric sum over the box-simplex:
    extreme points have at most one non-bound coordinate."""
    p0, p1 = qubit_populations(beta)
    total = n * p1 + delta_eps
    best = math.inf
    for hi in range(n + 1):
        for lo in range(n - hi + 1):
            free = n - hi - lo
            if free == 0:
                if abs(hi * p0 + lo * p1 - total) > 1e-12:
                    continue
                x = [p0] * hi + [p1] * lo
            elif free == 1:
                r = total - hi * p0 - lo * p1
                if not p1 - 1e-12 <= r <= p0 + 1e-12:
                    continue
                x = [p0] * hi + [p1] * lo + [min(max(r, p1), p0)]
            else:
                continue
            plan = LocalPlan(n, beta, tuple(x))
            val = objective(plan)
            best = min(best, val)
    return best


@pytest.mark.parametrize("n,beta,de_frac", [(2, 1.0, 0.4), (3, 1.0, 0.55), (4, 2.0, 0.3), (4, 1.0, 0.75)])
def test_search_matches_vertex_enumeration(n, beta, de_frac):
    p0, p1 = qubit_populations(beta)
    de = de_frac * n * (p0 - p1)
    rv, rw = optimal_local_search(n, beta, de, seed=3, restarts=24)
    assert rv.variance == pytest.approx(
        _enumerate_vertex_optimum(n, beta, de, plan_variance), abs=1e-10
    )
    assert rw.fluct_sq == pytest.approx(
        _enumerate_vertex_optimum(n, beta, de, plan_fluct), abs=1e-10
    )


def test_search_boundary_equals_slcp():
    p0, p1 = qubit_populations(1.0)
    dmax = 4 * (p0 - p1)
    rv, rw = optimal_local_search(4, 1.0, dmax, seed=1, restarts=8)
    s = slcp_charge(4, 1.0, dmax)
    assert rv.variance == pytest.approx(s.variance, abs=1e-10)
    assert rw.fluct_sq == pytest.approx(s.fluct_sq, abs=1e-10)


def test_t0_optimal_local_is_pure_bound():
    from qbatt.states import pure_state_variance_bound

    for de in (0.5, 1.5, 2.25):
        rv, rw = optimal_local_search(4, math.inf, de, seed=2, restarts=16)
        s = slcp_charge(4, math.inf, de)
        bound = pure_state_variance_bound(de)
        assert rv.variance == pytest.approx(bound, abs=1e-10)
        assert rw.fluct_sq == pytest.approx(bound, abs=1e-10)
        if 0 < de < 4:
            assert rv.variance < s.variance - 1e-6


def test_local_never_below_global():
    for n, beta, frac in [(3, 1.0, 0.4), (4, 1.0, 0.6)]:
        p0, p1 = qubit_populations(beta)
        de = frac * n * (p0 - p1)
        rv, rw = optimal_local_search(n, beta, de, seed=4, restarts=24)
        spec = build_spectrum(2, n)
        assert rv.variance >= charge_min_variance(spec, beta, de).variance - 1e-9
        assert rw.fluct_sq >= charge_min_fluct(spec, beta, de).fluct_sq_eq32 - 1e-9
