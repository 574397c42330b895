"""Source pipeline: pump OAM, down-conversion splitting, sorting and filters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, DomainError
from .fibcode import FibAlphabet, decompose, is_fibonacci
from .quantum import OamKet


@dataclass(frozen=True)
class PumpDistribution:
    """Probability of each pump OAM value reaching the crystal."""

    values: tuple[int, ...]
    weights: tuple[float, ...]
    provenance: str = "raw"

    def __post_init__(self):
        if not self.values:
            raise ConfigurationError("empty pump distribution")
        if len(self.values) != len(self.weights):
            raise ConfigurationError("pump values and weights differ in length")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ConfigurationError("pump weights must be finite and non-negative")
        total = sum(self.weights)
        if total <= 0:
            raise ConfigurationError("pump weights sum to zero")
        if abs(total - 1.0) > 1e-9:
            object.__setattr__(self, "weights", tuple(w / total for w in self.weights))

    @classmethod
    def from_mapping(cls, weights: Mapping[int, float], provenance: str = "raw") -> "PumpDistribution":
        items = sorted(weights.items())
        return cls(tuple(int(k) for k, _ in items), tuple(float(v) for _, v in items), provenance)

    @classmethod
    def uniform(cls, alphabet: FibAlphabet) -> "PumpDistribution":
        return cls(tuple(alphabet), tuple([1.0 / alphabet.size] * alphabet.size), "equalized")

    @classmethod
    def geometric(cls, alphabet: FibAlphabet, ratio: float = 0.7) -> "PumpDistribution":
        """Weights decaying by ``ratio`` per step up the alphabet."""
        if not 0 < ratio:
            raise ConfigurationError("geometric ratio must be positive")
        return cls(tuple(alphabet), tuple(ratio**i for i in range(alphabet.size)))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.values, self.weights))

    def signed(self) -> "PumpDistribution":
        """Split each weight evenly between +l and -l."""
        d = {}
        for v, w in zip(self.values, self.weights):
            d[v] = d.get(v, 0.0) + w / 2
            d[-v] = d.get(-v, 0.0) + w / 2
        return PumpDistribution.from_mapping(d, self.provenance)

    def reweighted(self, factors: Mapping[int, float], provenance: str) -> "PumpDistribution":
        return PumpDistribution(
            self.values, tuple(w * factors.get(v, 1.0) for v, w in zip(self.values, self.weights)), provenance
        )


def sample_pump(dist: PumpDistribution, rng: np.random.Generator, size: int | None = None):
    values = np.asarray(dist.values, dtype=np.int64)
    idx = rng.choice(len(values), size=size, p=np.asarray(dist.weights))
    out = values[idx]
    return int(out) if size is None else out


@dataclass(frozen=True)
class SpdcProfile:
    """Distribution of one down-converted OAM value l given the pump value p.

    The partner carries p - l.  Both |l| and |p - l| stay within
    ``bandwidth``.  ``kind`` is ``uniform`` (flat over allowed splittings)
    or ``triangular`` (peaked at the even split).
    """

    bandwidth: int = 89
    kind: str = "uniform"

    def __post_init__(self):
        if self.bandwidth < 1:
            raise ConfigurationError("bandwidth must be >= 1")
        if self.kind not in ("uniform", "triangular"):
            raise ConfigurationError(f"unknown SPDC profile {self.kind!r}")

    def support(self, pump: int) -> tuple[int, int]:
        lo, hi = max(-self.bandwidth, pump - self.bandwidth), min(self.bandwidth, pump + self.bandwidth)
        if lo > hi:
            raise DomainError(f"pump {pump} exceeds twice the bandwidth {self.bandwidth}")
        return lo, hi

    def weights(self, pump: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.support(pump)
        ls = np.arange(lo, hi + 1)
        if self.kind == "uniform":
            w = np.ones(len(ls))
        else:
            w = 1.0 + np.minimum(ls - lo, hi - ls).astype(float)
        return ls, w / w.sum()

    def probability(self, pump: int, l: int) -> float:
        lo, hi = self.support(pump)
        if not lo <= l <= hi:
            return 0.0
        ls, w = self.weights(pump)
        return float(w[l - lo])

    def fibonacci_split_probability(self, pump: int) -> float:
        """Probability that the pair is (F_{n-1}, F_{n-2}) in some order."""
        sign = -1 if pump < 0 else 1
        big, small = decompose(abs(pump))
        return self.probability(pump, sign * big) + self.probability(pump, sign * small)

    def sample(self, pumps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        pumps = np.asarray(pumps, dtype=np.int64)
        if self.kind == "uniform":
            lo = np.maximum(-self.bandwidth, pumps - self.bandwidth)
            hi = np.minimum(self.bandwidth, pumps + self.bandwidth)
            return rng.integers(lo, hi + 1)
        u = rng.random(pumps.shape)
        out = np.empty_like(pumps)
        for p in np.unique(pumps):
            mask = pumps == p
            ls, w = self.weights(int(p))
            cdf = np.cumsum(w)
            out[mask] = ls[np.minimum(np.searchsorted(cdf, u[mask], side="right"), len(ls) - 1)]
        return out


def check_bandwidth(profile: SpdcProfile, alphabet: FibAlphabet) -> None:
    need = max(alphabet.arm_values)
    if profile.bandwidth < need:
        raise ConfigurationError(
            f"bandwidth {profile.bandwidth} cannot produce arm value {need} needed by pump {max(alphabet)}"
        )


def spdc_split(pump: int, profile: SpdcProfile, rng: np.random.Generator, orientation_rng=None) -> tuple[int, int]:
    """One down-conversion: returns (alice, bob) with alice + bob == pump.

    Which photon goes to Alice is a fair coin drawn from ``orientation_rng``
    (defaults to ``rng``).
    """
    l_one = int(profile.sample(np.array([pump]), rng)[0])
    l_two = pump - l_one
    coin = (orientation_rng or rng).random() < 0.5
    return (l_one, l_two) if coin else (l_two, l_one)


@dataclass(frozen=True)
class FilterBank:
    """Transmission probability per OAM detector position (absent values pass)."""

    transmissions: Mapping[int, float] = field(default_factory=dict)
    throughput: float = 1.0

    def __post_init__(self):
        t = dict(self.transmissions)
        if any(not 0.0 <= v <= 1.0 for v in t.values()):
            raise ConfigurationError("filter transmissions must lie in [0, 1]")
        if t and max(t.values()) < 1.0 - 1e-12:
            raise ConfigurationError("at least one filter channel must transmit fully")
        object.__setattr__(self, "transmissions", t)

    def transmission(self, l: int) -> float:
        return self.transmissions.get(abs(int(l)), 1.0)


def equalization_filters(raw: PumpDistribution) -> FilterBank:
    """Per-value transmissions p_min / p_l that flatten ``raw``.

    ``throughput`` is the expected surviving fraction, N * p_min.
    """
    w = raw.as_dict()
    if any(v <= 0 for v in w.values()):
        raise ConfigurationError("cannot equalize a value with zero weight")
    pmin = min(w.values())
    return FilterBank({abs(l): pmin / p for l, p in w.items()}, throughput=len(w) * pmin)


def detector_filters(detected: Mapping[int, float], alphabet: FibAlphabet) -> FilterBank:
    """Detector-position transmissions that flatten the kept-pump distribution.

    A kept pair (F_{k-1}, F_{k-2}) survives with t(F_{k-1}) * t(F_{k-2}),
    so we need log t(F_{k-1}) + log t(F_{k-2}) = C - log q_k for each pump
    F_k, where q_k is its unfiltered kept weight.  The chain has one free
    parameter; C is pushed as high as the constraint t <= 1 allows.
    """
    arms = alphabet.arm_values
    q = [detected[p] for p in alphabet]
    if any(v <= 0 for v in q):
        raise ConfigurationError("cannot equalize a value with zero weight")
    y = [-math.log(v) for v in q]
    # x_i = (-1)^i s + z_i + C [i odd]
    z = [0.0]
    for i in range(len(y)):
        z.append(y[i] - z[i])
    s = -max(z[i] for i in range(0, len(z), 2))
    c = s - max(z[i] for i in range(1, len(z), 2))
    x = [((-1) ** i) * s + z[i] + (c if i % 2 else 0.0) for i in range(len(z))]
    trans = {a: min(1.0, math.exp(v)) for a, v in zip(arms, x)}
    kept = sum(qk * trans[decompose(p)[0]] * trans[decompose(p)[1]] for p, qk in zip(alphabet, q))
    return FilterBank(trans, throughput=kept / sum(q))


def kept_pump_weights(raw: PumpDistribution, profile: SpdcProfile) -> dict[int, float]:
    """Unnormalized probability that an emission is a kept Fibonacci pair, per pump."""
    return {p: w * profile.fibonacci_split_probability(p) for p, w in raw.as_dict().items()}


@dataclass(frozen=True)
class PairEvent:
    """One emission as it moves through sorting."""

    seq: int
    pump: int
    alice: int
    bob: int
    alice_fib: bool = False
    bob_fib: bool = False
    kept: bool = False
    decoy: bool = False
    signs_match: bool = True


def sort_pair(event: PairEvent, alphabet: FibAlphabet, mode: str = "strict", signed: bool = False) -> PairEvent:
    """Flag arms against the sorter passband.

    ``strict`` keeps only pairs with both arms in the arm-value set.
    ``decoy`` additionally keeps pairs where Alice's value is not Fibonacci
    but Bob's lies in the alphabet.  Unsigned sorters reject negative OAM.
    """
    if mode not in ("strict", "decoy"):
        raise ConfigurationError(f"unknown sorter mode {mode!r}")
    arms = set(alphabet.arm_values)
    a, b = event.alice, event.bob
    if signed:
        passes_a, passes_b = abs(a) in arms, abs(b) in arms
    else:
        passes_a, passes_b = a in arms, b in arms
    kept = passes_a and passes_b
    decoy = (
        mode == "decoy"
        and a != 0
        and (signed or a > 0)
        and not is_fibonacci(abs(a))
        and (signed or b > 0)
        and abs(b) in alphabet
    )
    return replace(
        event,
        alice_fib=passes_a,
        bob_fib=passes_b,
        kept=kept,
        decoy=decoy,
        signs_match=(a > 0) == (b > 0),
    )


def conditional_partner_ket(
    measured: int, alphabet: FibAlphabet, weights: Mapping[int, float] | None = None
) -> OamKet:
    """Bob's state once Alice has found ``measured`` in a kept pair.

    Amplitudes are sqrt of the pump weights (equal when ``weights`` is None).
    A negative ``measured`` gives the mirror-image ket.
    """
    sign = -1 if measured < 0 else 1
    m = abs(measured)
    amps = {}
    for p in alphabet:
        if m in decompose(p):
            w = 1.0 if weights is None else weights.get(sign * p, weights.get(p, 0.0))
            if w > 0:
                amps[sign * (p - m)] = math.sqrt(w)
    if not amps:
        raise DomainError(f"{measured} appears in no decomposition of the alphabet")
    return OamKet.from_mapping(amps)


def decoy_partner_ket(alice_value: int, pump: PumpDistribution, profile: SpdcProfile) -> OamKet:
    """Bob's unsorted state when Alice holds ``alice_value``.

    Each pump p contributes |p - a> with amplitude sqrt(P(p) P(a | p)).
    """
    amps = {}
    for p, w in pump.as_dict().items():
        pa = 0.5 * (profile.probability(p, alice_value) + profile.probability(p, p - alice_value))
        if w > 0 and pa > 0:
            amps[p - alice_value] = amps.get(p - alice_value, 0.0) + math.sqrt(w * pa)
    if not amps:
        raise DomainError(f"no pump can leave Alice with {alice_value}")
    return OamKet.from_mapping(amps)

