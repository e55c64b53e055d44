import itertools
import math

import pytest

from qbatt import SizeError, ValidationError, build_spectrum, flatten, unflatten


def test_four_qubits_binomial_degeneracies():
    spec = build_spectrum(2, 4)
    assert spec.degeneracies == (1, 4, 6, 4, 1)
    assert spec.dim == 16
    assert [math.comb(4, m) for m in range(5)] == list(spec.degeneracies)


def test_single_qudit_no_degeneracy():
    spec = build_spectrum(5, 1)
    assert spec.degeneracies == (1, 1, 1, 1, 1)
    assert spec.dim == 5
    assert spec.m_max == 4


def test_two_qutrits_match_enumeration():
    # independent oracle: enumerate all 9 two-trit energy sums
    counts = [0] * 5
    for a, b in itertools.product(range(3), range(3)):
        counts[a + b] += 1
    spec = build_spectrum(3, 2)
    assert list(spec.degeneracies) == counts == [1, 2, 3, 2, 1]
    assert spec.dim == 9


@pytest.mark.parametrize("d,n", [(2, 1), (2, 4), (2, 8), (3, 3), (4, 2), (5, 1), (6, 2), (7, 1)])
def test_degeneracy_symmetry_and_total(d, n):
    spec = build_spectrum(d, n)
    g = spec.degeneracies
    top = spec.m_max
    assert all(g[m] == g[top - m] for m in range(top + 1))
    assert sum(g) == d**n


def test_flatten_examples_three_qubits():
    spec = build_spectrum(2, 3)  # g = (1, 3, 3, 1)
    assert flatten(spec, 1, 2) == 3
    assert flatten(spec, 0, 1) == 1
    assert unflatten(spec, 8) == (3, 1)


def test_flatten_first_slot_offsets():
    for d, n in [(2, 3), (3, 2), (5, 1)]:
        spec = build_spectrum(d, n)
        for m in range(spec.m_max + 1):
            assert flatten(spec, m, 1) == 1 + sum(spec.degeneracies[:m])


@pytest.mark.parametrize("d,n", [(2, 10), (3, 6), (4, 5), (2, 1), (6, 1)])
def test_flatten_roundtrip_exhaustive(d, n):
    spec = build_spectrum(d, n)
    assert spec.dim <= 1024
    for s in range(1, spec.dim + 1):
        m, i_m = unflatten(spec, s)
        assert 1 <= i_m <= spec.degeneracies[m]
        assert flatten(spec, m, i_m) == s


def test_level_of_slot_matches_unflatten():
    spec = build_spectrum(3, 3)
    for s in range(1, spec.dim + 1):
        assert spec.level_of_slot[s - 1] == unflatten(spec, s)[0]


def test_energy_scales_with_omega():
    spec = build_spectrum(3, 1, omega=2.5)
    assert spec.energy(2) == pytest.approx(5.0)


def test_invalid_parameters():
    with pytest.raises(ValidationError):
        build_spectrum(1, 2)
    with pytest.raises(ValidationError):
        build_spectrum(2, 0)
    with pytest.raises(ValidationError):
        build_spectrum(2, 2, omega=0.0)
    with pytest.raises(ValidationError):
        build_spectrum(2.0, 2)  # type: ignore[arg-type]


def test_dimension_cap():
    with pytest.raises(SizeError):
        build_spectrum(2, 21)
    build_spectrum(2, 20)  # exactly at the cap


def test_flatten_range_errors():
    spec = build_spectrum(2, 2)
    with pytest.raises(ValidationError):
        flatten(spec, 3, 1)
    with pytest.raises(ValidationError):
        flatten(spec, 1, 3)
    with pytest.raises(ValidationError):
        unflatten(spec, 0)
    with pytest.raises(ValidationError):
        unflatten(spec, 5)
