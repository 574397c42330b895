"""Fibonacci arithmetic, the working alphabet, and the classical exchange.

The sequence uses F_1 = 1, F_2 = 2, so that every alphabet member with
index >= 3 splits into two positive Fibonacci parts.  Values are plain
Python ints throughout; nothing here touches floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Mapping

from .errors import ChannelCorruption, ConfigurationError, DomainError, SchemeViolation

_SEQ = [1, 2]


def _extend_to(value: int) -> None:
    while _SEQ[-1] < value:
        _SEQ.append(_SEQ[-1] + _SEQ[-2])


def fib(k: int) -> int:
    """Return F_k (1-based, F_1 = 1, F_2 = 2)."""
    if k < 1:
        raise DomainError(f"Fibonacci index must be >= 1, got {k}")
    while len(_SEQ) < k:
        _SEQ.append(_SEQ[-1] + _SEQ[-2])
    return _SEQ[k - 1]


def fib_sequence(kmax: int) -> list[int]:
    return [fib(k) for k in range(1, kmax + 1)]


@lru_cache(maxsize=4096)
def _index(value: int) -> int | None:
    if value < 1:
        return None
    _extend_to(value)
    lo, hi = 0, len(_SEQ) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if _SEQ[mid] == value:
            return mid + 1
        if _SEQ[mid] < value:
            lo = mid + 1
        else:
            hi = mid - 1
    return None


def is_fibonacci(value: int) -> bool:
    return _index(int(value)) is not None


def fib_index(value: int) -> int:
    k = _index(int(value))
    if k is None:
        raise DomainError(f"{value} is not a Fibonacci value")
    return k


@lru_cache(maxsize=4096)
def fib_below(value: int) -> int | None:
    """Fibonacci value immediately preceding ``value``; None for F_1."""
    k = fib_index(value)
    return fib(k - 1) if k > 1 else None


@lru_cache(maxsize=4096)
def fib_above(value: int) -> int:
    return fib(fib_index(value) + 1)


def nearest_fibonacci_below(value: int) -> int:
    """Largest Fibonacci value <= ``value`` (for value >= 1)."""
    if value < 1:
        raise DomainError(f"no Fibonacci value below {value}")
    _extend_to(value)
    return max(f for f in _SEQ if f <= value)


@lru_cache(maxsize=4096)
def decompose(value: int) -> tuple[int, int]:
    """Split F_n into (F_{n-1}, F_{n-2}).

    >>> decompose(21)
    (13, 8)
    """
    k = fib_index(value)
    if k < 3:
        raise DomainError(f"{value} has index {k}; decomposition needs index >= 3")
    return fib(k - 1), fib(k - 2)


@lru_cache(maxsize=4096)
def is_adjacent(a: int, b: int) -> bool:
    """True iff ``a`` and ``b`` are consecutive Fibonacci values, in either order."""
    ka, kb = _index(int(a)), _index(int(b))
    if ka is None or kb is None:
        return False
    return abs(ka - kb) == 1


def _block(i: int, width: int) -> str:
    return format(i, f"0{width}b") if width else ""


@dataclass(frozen=True)
class FibAlphabet:
    """N consecutive Fibonacci values starting at sequence index ``start_index``.

    Members map to bit blocks in ascending order, so the smallest value
    encodes as all zeros and the largest as all ones.
    """

    start_index: int
    size: int
    members: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.size < 2 or self.size & (self.size - 1):
            raise ConfigurationError(f"alphabet size must be a power of two >= 2, got {self.size}")
        if self.start_index < 3:
            raise DomainError(f"start index must be >= 3, got {self.start_index}")
        vals = tuple(fib(k) for k in range(self.start_index, self.start_index + self.size))
        object.__setattr__(self, "members", vals)

    @property
    def bits_per_segment(self) -> int:
        return self.size.bit_length() - 1

    @property
    def indices(self) -> range:
        return range(self.start_index, self.start_index + self.size)

    @property
    def arm_values(self) -> tuple[int, ...]:
        """Every value a signal or idler photon can carry in a kept pair."""
        return tuple(fib(k) for k in range(self.start_index - 2, self.start_index + self.size - 1))

    def __contains__(self, value) -> bool:
        return value in self.members

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return self.size

    def position(self, value: int) -> int:
        try:
            return self.members.index(value)
        except ValueError:
            raise DomainError(f"{value} is not in the alphabet {self.members}") from None

    def encode(self, value: int) -> str:
        return _block(self.position(value), self.bits_per_segment)

    def decode(self, block: str) -> int:
        if len(block) != self.bits_per_segment or set(block) - {"0", "1"}:
            raise DomainError(f"bad block {block!r} for {self.bits_per_segment}-bit segments")
        return self.members[int(block, 2)]

    def codebook(self) -> dict[int, str]:
        return {v: self.encode(v) for v in self.members}

    def encode_signed(self, value: int) -> str:
        """Sign bit (1 for negative) followed by the unsigned block of ``|value|``."""
        return ("1" if value < 0 else "0") + self.encode(abs(value))

    def decode_signed(self, block: str) -> int:
        if not block or block[0] not in "01":
            raise DomainError(f"bad signed block {block!r}")
        mag = self.decode(block[1:])
        return -mag if block[0] == "1" else mag

    def signed_codebook(self) -> dict[int, str]:
        book = {}
        for v in self.members:
            book[v] = self.encode_signed(v)
        for v in self.members:
            book[-v] = self.encode_signed(-v)
        return book

    def configurations(self) -> list[tuple[int, int, int]]:
        """All (pump, alice, bob) triples a kept pair can realize."""
        out = []
        for p in self.members:
            big, small = decompose(p)
            out.append((p, big, small))
            out.append((p, small, big))
        return out


def fib_alphabet(n0: int, N: int) -> FibAlphabet:
    return FibAlphabet(n0, N)


DEFAULT_ALPHABET = FibAlphabet(3, 8)


def encode_segment(value: int, alphabet: FibAlphabet = DEFAULT_ALPHABET) -> str:
    return alphabet.encode(value)


def encode_signed(value: int, alphabet: FibAlphabet = DEFAULT_ALPHABET) -> str:
    return alphabet.encode_signed(value)


def index_parity_bit(value: int) -> int:
    """floor((k - 1) / 2) mod 2 for value = F_k: 1,2 -> 0; 3,5 -> 1; 8,13 -> 0; ..."""
    return ((fib_index(value) - 1) // 2) % 2


@dataclass(frozen=True)
class ExchangeScheme:
    """One public bit each way, enough for both sides to learn the partner value.

    Alice announces ``bit_of(a)``.  Bob answers with ``bit_of(b)`` when
    Alice's value is even and its complement when it is odd; Alice knows
    her own parity, so she can undo the flip.
    """

    bit_of: Callable[[int], int] = index_parity_bit
    conjugate_on_odd: bool = True

    def alice_bit(self, value: int) -> int:
        return self._bit(value)

    def bob_bit(self, value: int, alice_value: int) -> int:
        b = self._bit(value)
        if self.conjugate_on_odd and alice_value % 2:
            b = 1 - b
        return b

    def _bit(self, value: int) -> int:
        if not is_fibonacci(value):
            raise DomainError(f"{value} is not a valid arm value")
        return int(self.bit_of(value))

    def partner_candidates(self, own: int, alphabet: FibAlphabet) -> list[int]:
        """Fibonacci neighbours of ``own`` that sum with it to an alphabet member."""
        out = []
        below = fib_below(own)
        for c in (below, fib_above(own)):
            if c is not None and c + own in alphabet:
                out.append(c)
        return out

    def decode_alice_value(self, bob_value: int, bit: int, alphabet: FibAlphabet) -> int:
        """Bob's side: recover Alice's value from her bit."""
        cands = self.partner_candidates(bob_value, alphabet)
        hits = [c for c in cands if self.alice_bit(c) == bit]
        return self._pick(hits, bob_value, bit, "alice")

    def decode_bob_value(self, alice_value: int, bit: int, alphabet: FibAlphabet) -> int:
        """Alice's side: recover Bob's value from his reply."""
        cands = self.partner_candidates(alice_value, alphabet)
        hits = [c for c in cands if self.bob_bit(c, alice_value) == bit]
        return self._pick(hits, alice_value, bit, "bob")

    @staticmethod
    def _pick(hits, own, bit, whose):
        if len(hits) == 1:
            return hits[0]
        if not hits:
            raise ChannelCorruption(f"bit {bit} matches no {whose} value next to {own}")
        raise SchemeViolation(f"bit {bit} matches {whose} values {hits} next to {own}")

    def verify(self, alphabet: FibAlphabet) -> None:
        """Replay every configuration; raise SchemeViolation on the first decoding failure."""
        for pump, a, b in alphabet.configurations():
            try:
                got_a = self.decode_alice_value(b, self.alice_bit(a), alphabet)
                got_b = self.decode_bob_value(a, self.bob_bit(b, a), alphabet)
            except (SchemeViolation, ChannelCorruption) as exc:
                raise SchemeViolation(str(exc), (pump, a, b)) from exc
            if (got_a, got_b) != (a, b):
                raise SchemeViolation(f"decoded ({got_a}, {got_b}) for ({a}, {b})", (pump, a, b))


DEFAULT_SCHEME = ExchangeScheme()


def table_scheme(bits: Mapping[int, int], conjugate_on_odd: bool = True) -> ExchangeScheme:
    """Scheme from an explicit value -> bit table (missing values raise)."""

    def bit_of(v):
        try:
            return bits[v]
        except KeyError:
            raise DomainError(f"no bit assigned to {v}") from None

    return ExchangeScheme(bit_of, conjugate_on_odd)


def exchange_bits(alice: int, bob: int, scheme: ExchangeScheme = DEFAULT_SCHEME) -> tuple[int, int]:
    return scheme.alice_bit(alice), scheme.bob_bit(bob, alice)


def _weights(alphabet, pump_weights):
    if pump_weights is None:
        return {p: Fraction(1, alphabet.size) for p in alphabet}
    total = sum(Fraction(pump_weights[p]) for p in alphabet)
    return {p: Fraction(pump_weights[p]) / total for p in alphabet}


def outcome_joint(
    alphabet: FibAlphabet = DEFAULT_ALPHABET,
    scheme: ExchangeScheme = DEFAULT_SCHEME,
    pump_weights: Mapping[int, object] | None = None,
) -> dict[tuple[int, int], dict[int, Fraction]]:
    """Exact P(observed bits, pump) with both orientations equally likely."""
    w = _weights(alphabet, pump_weights)
    joint: dict[tuple[int, int], dict[int, Fraction]] = {}
    for pump, a, b in alphabet.configurations():
        bits = exchange_bits(a, b, scheme)
        row = joint.setdefault(bits, {})
        row[pump] = row.get(pump, Fraction(0)) + w[pump] / 2
    return dict(sorted(joint.items()))


def observation_table(
    alphabet: FibAlphabet = DEFAULT_ALPHABET, scheme: ExchangeScheme = DEFAULT_SCHEME
) -> dict[tuple[int, int], tuple[int, ...]]:
    """Candidate pump values for each pair of bits an eavesdropper can see."""
    return {bits: tuple(sorted(row)) for bits, row in outcome_joint(alphabet, scheme).items()}


def eve_infer(
    bits: tuple[int, int],
    alphabet: FibAlphabet = DEFAULT_ALPHABET,
    scheme: ExchangeScheme = DEFAULT_SCHEME,
) -> tuple[int, ...]:
    return observation_table(alphabet, scheme).get(tuple(bits), ())


def guess_success(
    alphabet: FibAlphabet = DEFAULT_ALPHABET,
    scheme: ExchangeScheme = DEFAULT_SCHEME,
    mode: str = "uniform",
    pump_weights: Mapping[int, object] | None = None,
) -> Fraction:
    """Exact probability that a listener on the classical channel names the pump.

    ``uniform`` picks among the candidate set at random; ``ml`` picks a
    pump with the largest joint weight for the observed bits.
    """
    joint = outcome_joint(alphabet, scheme, pump_weights)
    if mode == "uniform":
        return sum((sum(row.values()) / len(row) for row in joint.values()), Fraction(0))
    if mode == "ml":
        return sum((max(row.values()) for row in joint.values()), Fraction(0))
    raise ConfigurationError(f"unknown guess mode {mode!r}")
