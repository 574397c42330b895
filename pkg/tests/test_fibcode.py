from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibqkd.errors import ChannelCorruption, ConfigurationError, DomainError, SchemeViolation
from fibqkd.fibcode import (
    DEFAULT_ALPHABET,
    DEFAULT_SCHEME,
    ExchangeScheme,
    FibAlphabet,
    decompose,
    eve_infer,
    exchange_bits,
    fib,
    fib_above,
    fib_below,
    fib_index,
    fib_sequence,
    guess_success,
    index_parity_bit,
    is_adjacent,
    is_fibonacci,
    nearest_fibonacci_below,
    observation_table,
    outcome_joint,
    table_scheme,
)

from . import oracles

SIZES = [2, 4, 8, 16, 32]


def test_sequence_matches_plain_addition():
    assert fib_sequence(25) == oracles.fib_list(10**9)[:25]
    assert fib(1) == 1 and fib(2) == 2 and fib(11) == 144


def test_membership_and_index():
    seq = oracles.fib_list(10**6)
    for v in range(1, 2000):
        assert is_fibonacci(v) == (v in seq)
    assert fib_index(89) == 10
    assert not is_fibonacci(0) and not is_fibonacci(-3)
    with pytest.raises(DomainError):
        fib_index(4)
    with pytest.raises(DomainError):
        fib(0)


def test_neighbours():
    assert fib_below(5) == 3 and fib_above(5) == 8
    assert fib_below(1) is None
    assert nearest_fibonacci_below(12) == 8
    assert nearest_fibonacci_below(13) == 13
    with pytest.raises(DomainError):
        nearest_fibonacci_below(0)


@pytest.mark.parametrize("v", oracles.fib_list(10**6)[2:])
def test_decompose_against_exhaustive_split(v):
    assert decompose(v) == oracles.splits(v)[-1]


def test_decompose_rejects_small_and_non_fibonacci():
    with pytest.raises(DomainError):
        decompose(2)
    with pytest.raises(DomainError):
        decompose(10)


def test_adjacency():
    assert is_adjacent(5, 8) and is_adjacent(8, 5)
    assert not is_adjacent(5, 13)
    assert not is_adjacent(4, 5)
    assert is_adjacent(1, 2)


def test_default_alphabet():
    a = DEFAULT_ALPHABET
    assert tuple(a) == (3, 5, 8, 13, 21, 34, 55, 89)
    assert a.bits_per_segment == 3
    assert a.arm_values == (1, 2, 3, 5, 8, 13, 21, 34, 55)
    assert len(a) == 8 and 13 in a and 4 not in a


def test_alphabet_validation():
    with pytest.raises(ConfigurationError):
        FibAlphabet(3, 6)
    with pytest.raises(ConfigurationError):
        FibAlphabet(3, 1)
    with pytest.raises(DomainError):
        FibAlphabet(2, 4)


def test_codebook_is_ascending_binary():
    book = DEFAULT_ALPHABET.codebook()
    assert book[3] == "000" and book[89] == "111"
    assert list(book.values()) == oracles.all_blocks(3)


@given(st.sampled_from(SIZES), st.integers(3, 8), st.data())
def test_encode_decode_roundtrip(size, n0, data):
    a = FibAlphabet(n0, size)
    v = data.draw(st.sampled_from(tuple(a)))
    assert a.decode(a.encode(v)) == v
    assert len(a.encode(v)) == a.bits_per_segment
    s = data.draw(st.sampled_from((-1, 1)))
    block = a.encode_signed(s * v)
    assert len(block) == a.bits_per_segment + 1
    assert a.decode_signed(block) == s * v


def test_signed_block_puts_sign_first():
    assert DEFAULT_ALPHABET.encode_signed(3) == "0000"
    assert DEFAULT_ALPHABET.encode_signed(-89) == "1111"


def test_configurations_count_is_two_per_pump():
    confs = DEFAULT_ALPHABET.configurations()
    assert len(confs) == 16
    assert sorted(confs) == sorted(oracles.configurations(list(DEFAULT_ALPHABET)))


def test_parity_bit_pattern():
    assert [index_parity_bit(v) for v in (1, 2, 3, 5, 8, 13, 21, 34, 55)] == [0, 0, 1, 1, 0, 0, 1, 1, 0]


@pytest.mark.parametrize("size", SIZES)
@pytest.mark.parametrize("n0", [3, 4, 6])
def test_default_scheme_decodes_every_configuration(n0, size):
    a = FibAlphabet(n0, size)
    DEFAULT_SCHEME.verify(a)
    for p, x, y in a.configurations():
        abit, bbit = exchange_bits(x, y)
        assert DEFAULT_SCHEME.decode_alice_value(y, abit, a) == x
        assert DEFAULT_SCHEME.decode_bob_value(x, bbit, a) == y


def test_flip_only_changes_what_eve_sees():
    # the two neighbours of any value always differ in parity bit, so both
    # variants decode; the flip matters for the eavesdropper's table
    plain = ExchangeScheme(conjugate_on_odd=False)
    plain.verify(DEFAULT_ALPHABET)
    assert observation_table(DEFAULT_ALPHABET, plain) != observation_table()


def test_all_zero_table_scheme_is_rejected():
    bits = {v: 0 for v in DEFAULT_ALPHABET.arm_values + (89,)}
    with pytest.raises(SchemeViolation) as info:
        table_scheme(bits).verify(DEFAULT_ALPHABET)
    assert info.value.configuration in DEFAULT_ALPHABET.configurations()


def test_decoder_reports_corruption():
    # no neighbour of 89 sums with it to an alphabet member
    with pytest.raises(ChannelCorruption):
        DEFAULT_SCHEME.decode_alice_value(89, 1, DEFAULT_ALPHABET)


@pytest.mark.parametrize("size", [2, 4, 8, 16])
def test_eve_table_matches_oracle(size):
    a = FibAlphabet(3, size)
    assert {k: list(v) for k, v in observation_table(a).items()} == oracles.eve_table(3, size)


def test_eve_table_for_eight_values():
    t = observation_table()
    assert t[(0, 0)] == (3, 21, 34, 89)
    assert t[(0, 1)] == (3, 5, 13, 21)
    assert t[(1, 0)] == (8, 55, 89)
    assert t[(1, 1)] == (5, 13, 34, 55)
    assert eve_infer((1, 0)) == (8, 55, 89)


def test_guess_rates_exact():
    assert guess_success() == Fraction(13, 48) == oracles.uniform_guess_rate()
    assert guess_success(mode="ml") == Fraction(5, 16) == oracles.ml_guess_rate()


@pytest.mark.parametrize("size", [2, 4, 16])
def test_guess_rates_other_sizes(size):
    a = FibAlphabet(3, size)
    assert guess_success(a) == oracles.uniform_guess_rate(3, size)
    assert guess_success(a, mode="ml") == oracles.ml_guess_rate(3, size)


def test_joint_sums_to_one_and_honours_weights():
    joint = outcome_joint()
    assert sum(sum(r.values()) for r in joint.values()) == 1
    w = {p: (2 if p == 89 else 1) for p in DEFAULT_ALPHABET}
    assert guess_success(pump_weights=w) != guess_success()
    with pytest.raises(ConfigurationError):
        guess_success(mode="psychic")
