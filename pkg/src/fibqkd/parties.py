"""Alice, Bob and Eve: exchange, attacks, and the checks that expose them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .channel import FilterBank, conditional_partner_ket
from .errors import ChannelCorruption, ConfigurationError, DomainError
from .fibcode import (
    DEFAULT_SCHEME,
    ExchangeScheme,
    FibAlphabet,
    decompose,
    exchange_bits,
    fib_above,
    fib_below,
    is_adjacent,
    is_fibonacci,
    nearest_fibonacci_below,
    outcome_joint,
)
from .quantum import OamKet, inner_product, measure, project, superpose, test_state

RESEND_POLICIES = ("partner", "adjacent")
NONFIB_POLICIES = ("forward", "nearest")
EVE_STRATEGIES = ("none", "intercept-resend", "classical-only", "both")


# --- intercept-resend -------------------------------------------------------


@lru_cache(maxsize=1024)
def resend_options(value: int, alphabet: FibAlphabet, policy: str = "partner") -> tuple[OamKet, ...]:
    """Superpositions Eve may prepare after measuring the Fibonacci value ``value``.

    ``partner``: for each value Alice could hold next to ``value``, the state
    Bob would then have received (index distance two, e.g. 5 -> 2+5 or 5+13).
    ``adjacent``: the neighbouring pairs of consecutive alphabet members
    (e.g. 5 -> 3+5 or 5+8; 3 -> 3+5 only); values outside the alphabet
    have no such pair.
    Returns an empty tuple when no hypothesis fits.
    """
    sign = -1 if value < 0 else 1
    v = abs(value)
    if policy == "partner":
        arms = set(alphabet.arm_values)
        out = []
        for h in (fib_below(v), fib_above(v)):
            if h is not None and h in arms and h + v in alphabet:
                out.append(conditional_partner_ket(sign * h, alphabet))
        return tuple(out)
    if policy == "adjacent":
        members = list(alphabet)
        if v not in members:
            return ()
        i = members.index(v)
        pairs = [members[j : j + 2] for j in (i - 1, i) if 0 <= j and j + 1 < len(members)]
        return tuple(superpose([sign * x for x in pair]) for pair in pairs)
    raise ConfigurationError(f"unknown resend policy {policy!r}")


def eve_intercept_resend(
    in_transit: OamKet,
    alphabet: FibAlphabet,
    rng: np.random.Generator,
    policy: str = "partner",
    nonfib: str = "forward",
) -> tuple[int, OamKet]:
    """Measure the photon heading to Bob and send a guessed replacement.

    Returns ``(measured value, resent ket)``.  A non-Fibonacci outcome is
    either forwarded as the collapsed basis state or, with ``nonfib="nearest"``,
    treated as the nearest Fibonacci value at or below it.
    """
    measured = measure(in_transit, rng)
    anchor = measured
    if not is_fibonacci(abs(measured)):
        if nonfib == "forward" or abs(measured) < 1:
            return measured, OamKet.basis(measured)
        if nonfib != "nearest":
            raise ConfigurationError(f"unknown non-Fibonacci policy {nonfib!r}")
        anchor = (-1 if measured < 0 else 1) * nearest_fibonacci_below(abs(measured))
    options = resend_options(anchor, alphabet, policy)
    if not options:
        return measured, OamKet.basis(measured)
    if len(options) == 1:
        return measured, options[0]
    return measured, options[int(rng.integers(len(options)))]


def intercept_resend_rate(
    alphabet: FibAlphabet,
    policy: str = "partner",
    interior_only: bool = False,
    pump_weights: Mapping[int, float] | None = None,
) -> Fraction:
    """Exact non-adjacency fraction among detected pairs under full interception.

    Enumerates every kept configuration (pumps weighted by ``pump_weights``,
    uniform when None; fair orientation),
    Eve's resend choice given the partner value she finds, and Bob's outcome.  With
    ``interior_only`` the enumeration keeps only events where Bob's honest
    state has two terms and Eve has two resend choices.
    """
    arms = set(alphabet.arm_values)
    bad = total = Fraction(0)
    for pump, a, b in alphabet.configurations():
        w = Fraction(1) if pump_weights is None else Fraction(pump_weights[pump]).limit_denominator(10**12)
        opts = resend_options(b, alphabet, policy) or (OamKet.basis(b),)
        if interior_only and (len(conditional_partner_ket(a, alphabet)) < 2 or len(opts) < 2):
            continue
        for ket in opts:
            for x in ket.values:
                wx = w / len(opts) / len(ket)
                if x not in arms:
                    continue
                total += wx
                if not is_adjacent(a, x):
                    bad += wx
    return bad / total if total else Fraction(0)


# --- classical exchange -----------------------------------------------------


@dataclass(frozen=True)
class ExchangeRecord:
    alice_bit: int
    bob_bit: int
    alice_view_of_bob: int | None
    bob_view_of_alice: int | None
    alice_pump: int | None
    bob_pump: int | None
    alice_block: str | None
    bob_block: str | None
    violation: bool = False
    corrupted: bool = False

    @property
    def bits(self) -> tuple[int, int]:
        return self.alice_bit, self.bob_bit

    @property
    def agreed(self) -> bool:
        return not self.corrupted and self.alice_block == self.bob_block


@lru_cache(maxsize=4096)
def classical_exchange(
    alice_value: int,
    bob_value: int,
    alphabet: FibAlphabet,
    scheme: ExchangeScheme = DEFAULT_SCHEME,
    signed: bool = False,
) -> ExchangeRecord:
    """Run the two-bit exchange and let each side rebuild the pump value.

    Signs, when used, are already public; the bits only concern magnitudes.
    A pair that is not Fibonacci-adjacent is flagged as a violation; a bit
    that no neighbour matches is flagged as corruption.
    """
    sign = -1 if alice_value < 0 else 1
    a, b = abs(alice_value), abs(bob_value)
    abit, bbit = scheme.alice_bit(a), scheme.bob_bit(b, a)
    violation = not is_adjacent(a, b)
    try:
        b_seen = scheme.decode_bob_value(a, bbit, alphabet)
        a_seen = scheme.decode_alice_value(b, abit, alphabet)
    except ChannelCorruption:
        return ExchangeRecord(abit, bbit, None, None, None, None, None, None, violation, True)
    pa, pb = sign * (a + b_seen), sign * (b + a_seen)
    enc = alphabet.encode_signed if signed else alphabet.encode
    return ExchangeRecord(abit, bbit, sign * b_seen, sign * a_seen, pa, pb, enc(pa), enc(pb), violation)


# --- eavesdropper on the classical channel ---------------------------------


def eve_classical_guess(
    bits: tuple[int, int],
    alphabet: FibAlphabet,
    rng: np.random.Generator,
    mode: str = "uniform",
    scheme: ExchangeScheme = DEFAULT_SCHEME,
    true_pump: int | None = None,
    sign: int = 1,
    joint: Mapping | None = None,
) -> tuple[int, bool | None]:
    """Guess the pump from the two public bits.

    ``uniform`` picks any candidate; ``ml`` picks the candidate with the
    largest joint weight (ties broken by the smallest value).  Pass a
    precomputed ``outcome_joint`` as ``joint`` to skip the enumeration.
    """
    joint = joint if joint is not None else outcome_joint(alphabet, scheme)
    row = joint.get(tuple(bits))
    if not row:
        raise DomainError(f"bits {bits} cannot occur under this scheme")
    if mode == "uniform":
        cands = sorted(row)
        guess = cands[int(rng.integers(len(cands)))]
    elif mode == "ml":
        best = max(row.values())
        guess = min(p for p, w in row.items() if w == best)
    else:
        raise ConfigurationError(f"unknown guess mode {mode!r}")
    guess *= sign
    return guess, (None if true_pump is None else guess == true_pump)


def simulate_guessing(
    alphabet: FibAlphabet,
    trials: int,
    rng: np.random.Generator,
    scheme: ExchangeScheme = DEFAULT_SCHEME,
) -> float:
    """Monte Carlo rate at which a uniform guess from the public bits hits the pump.

    Configurations are drawn uniformly (equal pumps, fair orientation).
    """
    configs = alphabet.configurations()
    joint = outcome_joint(alphabet, scheme)
    cands = [sorted(joint[exchange_bits(a, b, scheme)]) for _, a, b in configs]
    width = max(len(c) for c in cands)
    table = np.array([c + [0] * (width - len(c)) for c in cands])
    sizes = np.array([len(c) for c in cands])
    pumps = np.array([p for p, _, _ in configs])
    pick = rng.integers(len(configs), size=trials)
    slot = (rng.random(trials) * sizes[pick]).astype(int)
    return float(np.mean(table[pick, slot] == pumps[pick]))


def quantum_candidates(measured: int, alphabet: FibAlphabet) -> tuple[int, ...]:
    """Pumps consistent with Eve's reading of Bob's photon alone."""
    sign = -1 if measured < 0 else 1
    v = abs(measured)
    if not is_fibonacci(v):
        return ()
    out = []
    for h in (fib_below(v), fib_above(v)):
        if h is not None and h + v in alphabet:
            out.append(sign * (h + v))
    return tuple(sorted(out))


# --- checks -----------------------------------------------------------------


@dataclass(frozen=True)
class SecurityResult:
    samples: int
    nonadjacent: int
    fraction: float | None
    sigma: float | None
    threshold: float
    verdict: str


def security_check(
    pairs: Sequence[tuple[int, int]], threshold: float | None = None, min_samples: int = 30
) -> SecurityResult:
    """Fraction of disclosed pairs whose values are not Fibonacci-adjacent.

    With no explicit ``threshold`` the no-eavesdropper baseline is 0 with
    zero spread, so a single non-adjacent pair marks the run compromised.
    """
    n = len(pairs)
    thr = 0.0 if threshold is None else float(threshold)
    if n == 0:
        return SecurityResult(0, 0, None, None, thr, "inconclusive")
    bad = sum(1 for a, b in pairs if not is_adjacent(abs(a), abs(b)) or (a > 0) != (b > 0))
    frac = bad / n
    sigma = math.sqrt(frac * (1 - frac) / n)
    if n < min_samples:
        verdict = "inconclusive"
    else:
        verdict = "compromised" if frac > thr else "pass"
    return SecurityResult(n, bad, frac, sigma, thr, verdict)


@dataclass(frozen=True)
class DecoyResult:
    samples: int
    mean_overlap: float | None
    click_rate: float | None
    expected: float
    sigma: float | None
    verdict: str


def decoy_check(
    overlaps: Sequence[float], clicks: Sequence[bool], alphabet_size: int, min_samples: int = 30
) -> DecoyResult:
    """Compare Bob's test-state click rate on decoy events with 1/N.

    ``overlaps`` are the exact squared overlaps |<psi_test|phi>|^2 per event,
    ``clicks`` the simulated outcomes of the test-state projector.  The run
    is compromised when the click rate falls 3 sigma below 1/N.
    """
    n = len(overlaps)
    p0 = 1.0 / alphabet_size
    if n == 0:
        return DecoyResult(0, None, None, p0, None, "inconclusive")
    mean = float(np.mean(overlaps))
    rate = float(np.mean(clicks))
    sigma0 = math.sqrt(p0 * (1 - p0) / n)
    if n < min_samples:
        verdict = "inconclusive"
    else:
        verdict = "compromised" if rate < p0 - 3 * sigma0 else "pass"
    return DecoyResult(n, mean, rate, p0, sigma0, verdict)


def sift_signed(events: Iterable[tuple[int, int]], alphabet: FibAlphabet) -> list[tuple[int, int, str]]:
    """Keep same-sign (alice, bob) pairs; each yields its signed pump block."""
    kept = []
    for a, b in events:
        if (a > 0) == (b > 0) and a + b != 0:
            kept.append((a, b, alphabet.encode_signed(a + b)))
    return kept


# --- photon-number splitting -----------------------------------------------


def pns_samples(
    n_pulses: int,
    pump_values: Sequence[int],
    pump_weights: Sequence[float],
    rng: np.random.Generator,
    correlated: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split one photon from each multi-photon pulse on Bob's arm.

    Every photon in a pulse comes from its own down-conversion, so it makes
    its own pump and orientation draw; how many photons the pulse holds
    does not matter.  ``correlated`` clones one photon's state across the
    pulse instead (the identically-prepared control).  Returns Eve's
    measured value, the value of the photon Bob keeps and the pump behind it.
    """
    if n_pulses < 1:
        raise ConfigurationError("need at least one pulse")
    vals = np.asarray(pump_values, dtype=np.int64)
    p = np.asarray(pump_weights, dtype=float)
    p = p / p.sum()

    def draw(size):
        pumps = vals[rng.choice(len(vals), size=size, p=p)]
        big = np.array([decompose(int(x))[0] for x in np.abs(pumps)]) * np.sign(pumps)
        coin = rng.random(size) < 0.5
        return pumps, np.where(coin, big, pumps - big)

    kept_pump, kept_bob = draw(n_pulses)
    if correlated:
        eve_val = kept_bob.copy()
    else:
        _, eve_val = draw(n_pulses)
    return eve_val, kept_bob, kept_pump


def mutual_information(x: Sequence[int], y: Sequence[int]) -> float:
    """Plug-in mutual information in bits between two discrete samples."""
    x = np.asarray(x)
    y = np.asarray(y)
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(table, (xi, yi), 1)
    pxy = table / table.sum()
    px = pxy.sum(1, keepdims=True)
    py = pxy.sum(0, keepdims=True)
    nz = pxy > 0
    return float((pxy[nz] * np.log2(pxy[nz] / (px @ py)[nz])).sum())


def independence_test(x: Sequence[int], y: Sequence[int]) -> float:
    """Chi-square independence p-value for two discrete samples."""
    x = np.asarray(x)
    y = np.asarray(y)
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(table, (xi, yi), 1)
    if min(table.shape) < 2:
        return 1.0
    return float(stats.chi2_contingency(table)[1])


# --- per-pair protocol ------------------------------------------------------


@dataclass
class PartyLog:
    """What one legitimate party has seen and kept."""

    role: str
    measured: list = field(default_factory=list)
    sent_bits: list = field(default_factory=list)
    decoded: list = field(default_factory=list)
    key_blocks: list = field(default_factory=list)

    @property
    def key(self) -> str:
        return "".join(self.key_blocks)


@dataclass
class EveLog:
    strategy: str = "none"
    intercepted: int = 0
    measured: list = field(default_factory=list)
    classical_guesses: int = 0
    classical_hits: int = 0
    combined_hits: int = 0
    quantum_candidate_sizes: list = field(default_factory=list)
    # (Eve's reading, Alice's pump) on intercepted key pairs
    readings: list = field(default_factory=list)
    detections_caused: int = 0


@dataclass
class Outcome:
    """Everything that happened to one emission (JSON-friendly)."""

    seq: int
    pump: int
    alice: int
    bob_sent: int
    kind: str = "lost"  # lost | key | security | sifted | corrupt | decoy
    steps: list = field(default_factory=list)
    eve_measured: int | None = None
    eve_resent: tuple | None = None
    bob: int | None = None
    alice_bit: int | None = None
    bob_bit: int | None = None
    alice_pump: int | None = None
    bob_pump: int | None = None
    overlap: float | None = None
    click: bool | None = None

    def as_dict(self) -> dict:
        d = asdict(self)
        d["steps"] = ",".join(self.steps)
        d["eve_resent"] = None if self.eve_resent is None else list(self.eve_resent)
        return d


class Protocol:
    """State machine that carries a realized pair through one protocol round.

    Order per pair: Alice detects, the partner photon travels (and may be
    intercepted), Bob detects, signs are compared, then the pair is either
    disclosed for the security check or used for key via the two-bit
    exchange.  Decoy pairs (Alice non-Fibonacci) go to the test-state check.
    """

    def __init__(
        self,
        alphabet: FibAlphabet,
        streams: Mapping[str, np.random.Generator],
        *,
        scheme: ExchangeScheme = DEFAULT_SCHEME,
        signed: bool = False,
        decoy: bool = False,
        filters: FilterBank | None = None,
        loss: float = 0.0,
        eve_strategy: str = "none",
        intercept_rate: float = 0.0,
        resend_policy: str = "partner",
        nonfib_policy: str = "forward",
        guess_mode: str = "uniform",
        security_rate: float = 0.1,
        decoy_ket=None,
        keep_log: bool = False,
    ):
        if eve_strategy not in EVE_STRATEGIES:
            raise ConfigurationError(f"unknown Eve strategy {eve_strategy!r}")
        self.alphabet = alphabet
        self.arms = frozenset(alphabet.arm_values)
        self.members = frozenset(alphabet.members)
        self.rng = streams
        self.scheme = scheme
        self.signed = signed
        self.decoy = decoy
        self.filters = filters
        self._trans = dict(filters.transmissions) if filters is not None else {}
        self.loss = loss
        self.quantum_eve = eve_strategy in ("intercept-resend", "both") and intercept_rate > 0
        self.classical_eve = eve_strategy in ("classical-only", "both")
        self.intercept_rate = intercept_rate
        self.resend_policy = resend_policy
        self.nonfib_policy = nonfib_policy
        self.guess_mode = guess_mode
        self.security_rate = security_rate
        self.decoy_ket = decoy_ket
        self.psi_test = test_state(alphabet)
        self.joint = outcome_joint(alphabet, scheme)
        self.alice = PartyLog("alice")
        self.bob = PartyLog("bob")
        self.eve = EveLog(eve_strategy)
        self.security_pairs: list[tuple[int, int]] = []
        self.decoy_overlaps: list[float] = []
        self.decoy_clicks: list[bool] = []
        self.counts = {"key": 0, "security": 0, "sifted": 0, "corrupt": 0, "decoy": 0, "lost": 0}
        self.kept_pumps: dict[int, int] = {}
        self.bob_values: dict[int, int] = {}
        self.keep_log = keep_log
        self.log: list[Outcome] = []

    # detector passbands
    def _alice_sees(self, a: int) -> str | None:
        if self._passes(a):
            return "fib"
        if self.decoy and a > 0 and not is_fibonacci(a):
            return "decoy"
        return None

    def _passes(self, v: int) -> bool:
        return (abs(v) in self.arms) if self.signed else (v in self.arms)

    def _survives(self, v: int) -> bool:
        t = self._trans.get(abs(v), 1.0) * (1.0 - self.loss)
        return t >= 1.0 or self.rng["filters"].random() < t

    def wants(self, alice: int, bob: int) -> bool:
        """Cheap pre-filter: can this emission produce any coincidence?"""
        seen = self._alice_sees(alice)
        if seen is None:
            return False
        if self.quantum_eve:
            return self.nonfib_policy == "nearest" or is_fibonacci(abs(bob))
        if seen == "decoy":
            return bob in self.members
        return self._passes(bob)

    def process(self, seq: int, pump: int, alice: int, bob: int) -> Outcome:
        out = Outcome(seq, pump, alice, bob)
        seen = self._alice_sees(alice)
        if seen is None or not self._survives(alice):
            return self._finish(out, "lost")
        out.steps.append("alice")
        self.alice.measured.append(alice)

        tampered = False
        incoming: OamKet = OamKet.basis(bob)
        if self.quantum_eve and self.rng["eve"].random() < self.intercept_rate:
            measured, incoming = eve_intercept_resend(
                OamKet.basis(bob), self.alphabet, self.rng["eve"], self.resend_policy, self.nonfib_policy
            )
            tampered = True
            out.eve_measured = measured
            out.eve_resent = incoming.values
            out.steps.append("eve")
            self.eve.intercepted += 1
            self.eve.measured.append(measured)

        if seen == "decoy":
            return self._decoy(out, incoming, tampered)

        x = measure(incoming, self.rng["detect"])
        if not self._passes(x) or not self._survives(x):
            return self._finish(out, "lost")
        out.bob = x
        out.steps.append("bob")
        self.bob.measured.append(x)
        if tampered:
            self.eve.detections_caused += 1

        if self.signed and (alice > 0) != (x > 0):
            out.steps.append("sift")
            return self._finish(out, "sifted")

        if self.security_rate > 0 and self.rng["sampling"].random() < self.security_rate:
            self.security_pairs.append((alice, x))
            out.steps.append("disclose")
            return self._finish(out, "security")

        rec = classical_exchange(alice, x, self.alphabet, self.scheme, self.signed)
        out.alice_bit, out.bob_bit = rec.bits
        out.steps.append("exchange")
        self.alice.sent_bits.append(rec.alice_bit)
        self.bob.sent_bits.append(rec.bob_bit)
        if rec.corrupted:
            return self._finish(out, "corrupt")
        out.alice_pump, out.bob_pump = rec.alice_pump, rec.bob_pump
        self.alice.decoded.append(rec.alice_view_of_bob)
        self.bob.decoded.append(rec.bob_view_of_alice)
        self.alice.key_blocks.append(rec.alice_block)
        self.bob.key_blocks.append(rec.bob_block)
        self.kept_pumps[rec.alice_pump] = self.kept_pumps.get(rec.alice_pump, 0) + 1
        self.bob_values[x] = self.bob_values.get(x, 0) + 1

        if self.classical_eve:
            sign = -1 if alice < 0 else 1
            guess, hit = eve_classical_guess(
                rec.bits, self.alphabet, self.rng["eve"], self.guess_mode, self.scheme, rec.alice_pump, sign, self.joint
            )
            self.eve.classical_guesses += 1
            self.eve.classical_hits += bool(hit)
            if out.eve_measured is not None:
                qc = quantum_candidates(out.eve_measured, self.alphabet)
                both = [p for p in qc if abs(p) in self.joint.get(rec.bits, ())]
                pick = both or list(qc) or [guess]
                self.eve.combined_hits += pick[int(self.rng["eve"].integers(len(pick)))] == rec.alice_pump
        if out.eve_measured is not None:
            self.eve.quantum_candidate_sizes.append(len(quantum_candidates(out.eve_measured, self.alphabet)))
            self.eve.readings.append((out.eve_measured, rec.alice_pump))
        return self._finish(out, "key")

    def _decoy(self, out: Outcome, incoming: OamKet, tampered: bool) -> Outcome:
        if tampered:
            state, weight = project(incoming, self.members)
            if state is None or self.rng["detect"].random() >= weight:
                return self._finish(out, "lost")
        else:
            if out.bob_sent not in self.members:
                return self._finish(out, "lost")
            state, _ = project(self.decoy_ket(out.alice), self.members)
        ov = abs(inner_product(self.psi_test, state)) ** 2
        click = bool(self.rng["detect"].random() < ov)
        out.overlap, out.click = ov, click
        out.steps.append("test")
        self.decoy_overlaps.append(ov)
        self.decoy_clicks.append(click)
        return self._finish(out, "decoy")

    def _finish(self, out: Outcome, kind: str) -> Outcome:
        out.kind = kind
        self.counts[kind] += 1
        if self.keep_log and kind != "lost":
            self.log.append(out)
        return out
