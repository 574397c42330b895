import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibqkd.errors import DomainError
from fibqkd.fibcode import DEFAULT_ALPHABET, FibAlphabet
from fibqkd.quantum import (
    EntangledPairState,
    OamKet,
    fibonacci_pair_state,
    inner_product,
    measure,
    project,
    superpose,
    test_state,
)

from . import oracles


def test_basis_and_superpose():
    k = OamKet.basis(5)
    assert k.values == (5,) and k.norm() == 1
    s = superpose([3, 5, 3])
    assert s.values == (3, 5)
    assert s.probabilities()[3] == pytest.approx(0.8)
    with pytest.raises(DomainError):
        superpose([2, 2], [1, -1])  # amplitudes cancel
    with pytest.raises(DomainError):
        OamKet.from_mapping({5: 0})


def test_inner_product_is_conjugate_linear_in_first_argument():
    a = OamKet.from_mapping({1: 1j, 2: 1})
    b = OamKet.from_mapping({1: 1, 2: 1})
    assert inner_product(a, b) == pytest.approx((1 - 1j) / 2)
    assert inner_product(b, a) == pytest.approx((1 + 1j) / 2)


@given(st.dictionaries(st.integers(-20, 20), st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3), min_size=1, max_size=6))
def test_self_overlap_is_one(amps):
    k = OamKet.from_mapping(amps)
    assert abs(inner_product(k, k)) == pytest.approx(1.0)


def test_measure_statistics_follow_born_rule():
    rng = np.random.default_rng(0)
    k = superpose([2, 5, 13], [1, math.sqrt(2), 1])
    draws = np.array([measure(k, rng) for _ in range(40_000)])
    for v, p in {2: 0.25, 5: 0.5, 13: 0.25}.items():
        sigma = math.sqrt(p * (1 - p) / len(draws))
        assert abs(np.mean(draws == v) - p) < 4 * sigma


def test_measure_refuses_unnormalized():
    k = OamKet.from_mapping({1: 2.0}, normalize=False)
    with pytest.raises(DomainError):
        measure(k, np.random.default_rng(0))


def test_measure_single_term_uses_no_randomness():
    rng = np.random.default_rng(1)
    before = rng.bit_generator.state
    assert measure(OamKet.basis(8), rng) == 8
    assert rng.bit_generator.state == before


def test_test_state_overlaps_with_each_member():
    psi = test_state(DEFAULT_ALPHABET)
    for v in DEFAULT_ALPHABET:
        assert abs(inner_product(psi, OamKet.basis(v))) == pytest.approx(1 / math.sqrt(8), abs=1e-15)


def test_test_state_is_blind_to_consecutive_pairs():
    psi = test_state(DEFAULT_ALPHABET)
    members = list(DEFAULT_ALPHABET)
    for x, y in zip(members, members[1:]):
        assert abs(inner_product(psi, superpose([x, y]))) < 1e-12


@pytest.mark.parametrize("size", [2, 4, 16])
def test_test_state_against_dense_oracle(size):
    a = FibAlphabet(3, size)
    psi = test_state(a)
    test_amps = {v: (-1) ** i for i, v in enumerate(a)}
    for v in a:
        assert abs(inner_product(psi, OamKet.basis(v))) ** 2 == pytest.approx(oracles.dense_overlap(test_amps, {v: 1}))


def test_projection():
    k = superpose([1, 3, 4, 5])
    kept, w = project(k, DEFAULT_ALPHABET)
    assert kept.values == (3, 5) and w == pytest.approx(0.5)
    assert kept.norm() == pytest.approx(1.0)
    none, w0 = project(k, [100])
    assert none is None and w0 == 0


def test_pair_state_conditioning():
    state = fibonacci_pair_state(DEFAULT_ALPHABET)
    bob = state.condition_on_alice(8)
    assert bob.probabilities() == pytest.approx({5: 0.5, 13: 0.5})
    marg = state.alice_marginal()
    assert sum(marg.values()) == pytest.approx(1.0)
    # 89 never reaches Alice: it is a pump, not an arm value
    assert 89 not in marg
    with pytest.raises(DomainError):
        state.condition_on_alice(89)


def test_pair_state_validation():
    with pytest.raises(DomainError):
        EntangledPairState((((1, 1), 1.0),), (3,))
    with pytest.raises(DomainError):
        EntangledPairState((((1, 2), 0.5),), (3,))
