"""Sparse state algebra over integer OAM labels.

Kets are small dictionaries ``{l: amplitude}``; the alphabets in play have
at most a few dozen members, so no dense Hilbert-space vectors are built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError

ATOL = 1e-12


@dataclass(frozen=True)
class OamKet:
    """Finite superposition of OAM basis states.

    ``terms`` is a sorted tuple of ``(l, amplitude)`` pairs with no zero
    amplitudes.  ``normalized`` is False only for intermediates produced by
    projection before renormalization.
    """

    terms: tuple[tuple[int, complex], ...]
    normalized: bool = True

    @classmethod
    def from_mapping(cls, amps: Mapping[int, complex], normalize: bool = True) -> "OamKet":
        clean = {int(l): complex(a) for l, a in amps.items() if a != 0}
        if not clean:
            raise DomainError("a ket needs at least one nonzero amplitude")
        if normalize:
            n = math.sqrt(sum(abs(a) ** 2 for a in clean.values()))
            clean = {l: a / n for l, a in clean.items()}
        return cls(tuple(sorted(clean.items())), normalize)

    @classmethod
    def basis(cls, l: int) -> "OamKet":
        return cls(((int(l), 1 + 0j),))

    def as_dict(self) -> dict[int, complex]:
        return dict(self.terms)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(l for l, _ in self.terms)

    def amplitude(self, l: int) -> complex:
        return self.as_dict().get(l, 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for _, a in self.terms))

    def probabilities(self) -> dict[int, float]:
        return {l: abs(a) ** 2 for l, a in self.terms}

    def scaled(self, sign: int) -> "OamKet":
        """Same amplitudes on labels multiplied by ``sign`` (+1 or -1)."""
        return OamKet(tuple(sorted((sign * l, a) for l, a in self.terms)), self.normalized)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        body = " + ".join(f"({a.real:.4g}{a.imag:+.4g}j)|{l}>" for l, a in self.terms)
        return f"OamKet({body})"


def superpose(values: Iterable[int], amplitudes: Iterable[complex] | None = None) -> OamKet:
    """Normalized superposition; equal amplitudes when none are given.

    Repeated labels add their amplitudes.
    """
    values = list(values)
    amplitudes = [1.0] * len(values) if amplitudes is None else list(amplitudes)
    if len(values) != len(amplitudes):
        raise DomainError("values and amplitudes differ in length")
    acc: dict[int, complex] = {}
    for l, a in zip(values, amplitudes):
        acc[int(l)] = acc.get(int(l), 0j) + complex(a)
    return OamKet.from_mapping(acc)


def inner_product(a: OamKet, b: OamKet) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    bd = b.as_dict()
    return sum((amp.conjugate() * bd[l] for l, amp in a.terms if l in bd), 0j)


def measure(ket: OamKet, rng: np.random.Generator) -> int:
    """Projective OAM measurement; returns l with probability |amp(l)|^2."""
    if ket.normalized and len(ket.terms) == 1:
        return ket.terms[0][0]
    if not ket.normalized or abs(ket.norm() - 1.0) > 1e-9:
        raise DomainError("measure() needs a normalized ket")
    u = rng.random()
    acc = 0.0
    for l, a in ket.terms:
        acc += abs(a) ** 2
        if u < acc:
            return l
    return ket.terms[-1][0]


def test_state(alphabet) -> OamKet:
    """Alternating-sign superposition (1/sqrt N) sum_k (-1)^k |F_{n0+k}>."""
    members = list(alphabet)
    if len(members) < 2:
        raise DomainError("test state needs at least two members")
    return OamKet.from_mapping({v: (-1) ** k for k, v in enumerate(members)})


test_state.__test__ = False  # keep pytest from collecting it as a test


def project(ket: OamKet, allowed) -> tuple[OamKet | None, float]:
    """Restrict to ``allowed`` labels; returns (renormalized ket or None, kept weight)."""
    allowed = set(allowed)
    kept = {l: a for l, a in ket.terms if l in allowed}
    weight = sum(abs(a) ** 2 for a in kept.values())
    if weight <= 0.0:
        return None, 0.0
    return OamKet.from_mapping(kept), weight


def project_fib_subspace(ket: OamKet, alphabet) -> tuple[OamKet | None, float]:
    return project(ket, alphabet)


@dataclass(frozen=True)
class EntangledPairState:
    """Joint amplitudes over (l_A, l_B) with l_A + l_B equal to one of ``pumps``."""

    terms: tuple[tuple[tuple[int, int], complex], ...]
    pumps: tuple[int, ...]

    def __post_init__(self):
        for (la, lb), _ in self.terms:
            if la + lb not in self.pumps:
                raise DomainError(f"pair ({la}, {lb}) does not sum to a pump value")
        n = math.sqrt(sum(abs(a) ** 2 for _, a in self.terms))
        if abs(n - 1.0) > 1e-9:
            raise DomainError("entangled state is not normalized")

    def condition_on_alice(self, value: int) -> OamKet:
        """Bob's normalized state after Alice finds ``value``."""
        amps = {lb: a for (la, lb), a in self.terms if la == value}
        if not amps:
            raise DomainError(f"Alice cannot observe {value} in this state")
        return OamKet.from_mapping(amps)

    def alice_marginal(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (la, _), a in self.terms:
            out[la] = out.get(la, 0.0) + abs(a) ** 2
        return out


def fibonacci_pair_state(alphabet, weights: Mapping[int, float] | None = None) -> EntangledPairState:
    """Sorted source state: sum over pumps of |F_{n-1}>|F_{n-2}> + |F_{n-2}>|F_{n-1}>."""
    from .fibcode import decompose

    acc: dict[tuple[int, int], complex] = {}
    for p in alphabet:
        w = 1.0 if weights is None else weights[p]
        big, small = decompose(p)
        for pair in ((big, small), (small, big)):
            acc[pair] = acc.get(pair, 0j) + math.sqrt(w)
    n = math.sqrt(sum(abs(a) ** 2 for a in acc.values()))
    return EntangledPairState(tuple(sorted((k, a / n) for k, a in acc.items())), tuple(alphabet))
