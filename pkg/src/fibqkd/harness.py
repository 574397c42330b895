"""Session orchestration: configuration, seeded streams, reports and sweeps."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .channel import (
    PumpDistribution,
    SpdcProfile,
    check_bandwidth,
    decoy_partner_ket,
    detector_filters,
    kept_pump_weights,
    sample_pump,
)
from .errors import ConfigurationError
from .fibcode import FibAlphabet, fib
from .parties import (
    EVE_STRATEGIES,
    NONFIB_POLICIES,
    RESEND_POLICIES,
    Protocol,
    decoy_check,
    independence_test,
    mutual_information,
    pns_samples,
    security_check,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STREAMS = ("pump", "spdc", "orientation", "eve", "sampling", "filters", "detect", "pns")
BATCH = 1 << 16
SWEEPABLE = ("intercept_rate", "alphabet_size", "security_rate", "filters", "loss")


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """One independent generator per named purpose, all derived from ``seed``.

    Each name owns a fixed spawn key, so switching a feature on or off
    never shifts the draws seen by the others.
    """
    return {
        name: np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
        for i, name in enumerate(STREAMS)
    }


@dataclass(frozen=True)
class SessionConfig:
    seed: int
    n0: int = 3
    alphabet_size: int = 8
    signed: bool = False
    decoy: bool = False
    filters: bool = False
    pump: str = "uniform"  # uniform | balanced | geometric | explicit
    pump_ratio: float = 0.7
    pump_weights: dict | None = None
    spdc_kind: str = "uniform"
    bandwidth: int | None = None
    eve: str = "none"
    intercept_rate: float = 0.0
    resend_policy: str = "partner"
    nonfib_policy: str = "forward"
    guess_mode: str = "uniform"
    security_rate: float = 0.1
    threshold: float | None = None
    min_samples: int = 30
    loss: float = 0.0
    target_pairs: int = 10_000
    max_emissions: int = 500_000_000
    pns_pulses: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        for name in ("intercept_rate", "security_rate", "loss"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        if self.eve not in EVE_STRATEGIES:
            raise ConfigurationError(f"eve must be one of {EVE_STRATEGIES}")
        if self.resend_policy not in RESEND_POLICIES:
            raise ConfigurationError(f"resend_policy must be one of {RESEND_POLICIES}")
        if self.nonfib_policy not in NONFIB_POLICIES:
            raise ConfigurationError(f"nonfib_policy must be one of {NONFIB_POLICIES}")
        if self.guess_mode not in ("uniform", "ml"):
            raise ConfigurationError("guess_mode must be uniform or ml")
        if self.pump not in ("uniform", "balanced", "geometric", "explicit"):
            raise ConfigurationError(f"unknown pump kind {self.pump!r}")
        if self.pump == "explicit" and not self.pump_weights:
            raise ConfigurationError("explicit pump needs pump_weights")
        if self.target_pairs < 1 or self.min_samples < 1:
            raise ConfigurationError("target_pairs and min_samples must be >= 1")
        if self.decoy and self.signed:
            raise ConfigurationError("decoy mode is only defined for unsigned runs")
        if self.pns_pulses < 0:
            raise ConfigurationError("pns_pulses must be >= 0")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must lie in [0, 1]")
        alphabet = self.alphabet()
        check_bandwidth(self.profile(), alphabet)
        if self.pump == "explicit":
            missing = set(alphabet) - {abs(int(k)) for k in self.pump_weights}
            extra = {abs(int(k)) for k in self.pump_weights} - set(alphabet)
            if missing or extra:
                raise ConfigurationError(f"pump_weights must cover exactly the alphabet {tuple(alphabet)}")

    def alphabet(self) -> FibAlphabet:
        return FibAlphabet(self.n0, self.alphabet_size)

    def profile(self) -> SpdcProfile:
        bw = self.bandwidth if self.bandwidth is not None else fib(self.n0 + self.alphabet_size - 1)
        return SpdcProfile(bw, self.spdc_kind)

    def pump_distribution(self) -> PumpDistribution:
        a = self.alphabet()
        if self.pump == "uniform":
            d = PumpDistribution.uniform(a)
        elif self.pump == "balanced":
            # raw weights that make every pump equally likely among kept pairs
            prof = self.profile()
            d = PumpDistribution.from_mapping({p: 1.0 / prof.fibonacci_split_probability(p) for p in a}, "balanced")
        elif self.pump == "geometric":
            d = PumpDistribution.geometric(a, self.pump_ratio)
        else:
            d = PumpDistribution.from_mapping({int(k): float(v) for k, v in self.pump_weights.items()})
        return d.signed() if self.signed else d

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in data:
            raise ConfigurationError("config must set a seed")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "SessionConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "SessionConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _interval(frac, n):
    if frac is None or n == 0:
        return None
    half = 3 * math.sqrt(frac * (1 - frac) / n)
    return [max(0.0, frac - half), min(1.0, frac + half)]


@dataclass
class SessionReport:
    schema_version: int
    config_hash: str
    seed: int
    alphabet: list
    bits_per_segment: int
    emissions: int
    kept_pairs: int
    key_pairs: int
    key_bits: int
    key_hash: str
    keys_agree: bool
    key_block_errors: int
    counts: dict
    security: dict
    decoy: dict | None
    eve: dict
    pns: dict | None
    pump_frequencies: dict
    filters: dict | None
    verdict: str
    alice_key: str = field(default="", repr=False)
    bob_key: str = field(default="", repr=False)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("alice_key")
        d.pop("bob_key")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def nonadjacent_fraction(self) -> float | None:
        return self.security["fraction"]

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "compromised": 1}.get(self.verdict, 2)


def _entropy(counts: dict) -> float | None:
    n = sum(counts.values())
    if not n:
        return None
    p = np.array([c / n for c in counts.values() if c])
    return float(-(p * np.log2(p)).sum())


def _verdict(*verdicts: str) -> str:
    if "compromised" in verdicts:
        return "compromised"
    if "pass" in verdicts:
        return "pass"
    return "inconclusive"


class _Lookup:
    """Membership tests for bounded integer arrays via a boolean table."""

    def __init__(self, values, bound: int):
        self.off = bound
        self.table = np.zeros(2 * bound + 1, dtype=bool)
        v = np.array([x for x in values if abs(x) <= bound], dtype=np.int64)
        self.table[v + bound] = True

    def __call__(self, arr):
        return self.table[arr + self.off]


def _candidate_mask(alice, bob, tables, signed, decoy, quantum_eve, any_bob):
    """Vectorized twin of :meth:`Protocol.wants`."""
    arms, fibs, members = tables
    a = np.abs(alice) if signed else alice
    b = np.abs(bob) if signed else bob
    sees_fib = arms(a)
    sees_decoy = (alice > 0) & ~fibs(alice) if decoy else np.zeros_like(sees_fib)
    if quantum_eve:
        return (sees_fib | sees_decoy) & (any_bob | fibs(np.abs(bob)))
    return (sees_fib & arms(b)) | (sees_decoy & members(bob))


def run_session(config: SessionConfig, keep_log: bool = False) -> tuple[SessionReport, Protocol]:
    """Simulate one session until ``target_pairs`` coincidences are kept.

    Returns the report and the protocol object (party logs, optional event log).
    """
    config.validate()
    alphabet = config.alphabet()
    profile = config.profile()
    pump = config.pump_distribution()
    streams = make_streams(config.seed)

    bank = None
    if config.filters:
        kept = kept_pump_weights(pump, profile)
        mags: dict[int, float] = {}
        for p, w in kept.items():
            mags[abs(p)] = mags.get(abs(p), 0.0) + w
        bank = detector_filters(mags, alphabet)

    @lru_cache(maxsize=None)
    def decoy_ket(a):
        return decoy_partner_ket(a, pump, profile)

    proto = Protocol(
        alphabet,
        streams,
        signed=config.signed,
        decoy=config.decoy,
        filters=bank,
        loss=config.loss,
        eve_strategy=config.eve,
        intercept_rate=config.intercept_rate,
        resend_policy=config.resend_policy,
        nonfib_policy=config.nonfib_policy,
        guess_mode=config.guess_mode,
        security_rate=config.security_rate,
        decoy_ket=decoy_ket,
        keep_log=keep_log,
    )
    # emitted values satisfy |l| <= bandwidth + max pump
    top = profile.bandwidth + max(alphabet)
    fib_values = [f for f in (fib(k) for k in range(1, 90)) if f <= top]
    tables = (
        _Lookup(alphabet.arm_values, top),
        _Lookup(fib_values + [-f for f in fib_values], top),
        _Lookup(alphabet.members, top),
    )
    any_bob = proto.quantum_eve and config.nonfib_policy == "nearest"

    def kept_count():
        c = proto.counts
        return c["key"] + c["security"] + c["corrupt"]

    emitted = 0
    seq = 0
    while kept_count() < config.target_pairs:
        if emitted >= config.max_emissions:
            raise ConfigurationError(
                f"reached max_emissions={config.max_emissions} with only {kept_count()} kept pairs"
            )
        pumps = sample_pump(pump, streams["pump"], BATCH)
        l_one = profile.sample(pumps, streams["spdc"])
        coin = streams["orientation"].random(BATCH) < 0.5
        alice = np.where(coin, l_one, pumps - l_one)
        bob = pumps - alice
        mask = _candidate_mask(alice, bob, tables, config.signed, config.decoy, proto.quantum_eve, any_bob)
        idx = np.flatnonzero(mask)
        last = BATCH - 1
        for i, p, a, b in zip(idx.tolist(), pumps[idx].tolist(), alice[idx].tolist(), bob[idx].tolist()):
            proto.process(seq + i, p, a, b)
            if kept_count() >= config.target_pairs:
                last = i
                break
        emitted += last + 1
        seq += BATCH

    log.debug("session seed=%d: %d emissions, counts %s", config.seed, emitted, proto.counts)
    return _report(config, alphabet, proto, emitted, bank, streams), proto


def _report(config, alphabet, proto: Protocol, emitted, bank, streams) -> SessionReport:
    sec = security_check(proto.security_pairs, config.threshold, config.min_samples)
    dec = decoy_check(proto.decoy_overlaps, proto.decoy_clicks, alphabet.size, config.min_samples)
    akey, bkey = proto.alice.key, proto.bob.key
    block_errors = sum(a != b for a, b in zip(proto.alice.key_blocks, proto.bob.key_blocks))
    ev = proto.eve
    n_guess = ev.classical_guesses
    succ = ev.classical_hits / n_guess if n_guess else None
    qsizes = ev.quantum_candidate_sizes
    eve = {
        "strategy": ev.strategy,
        "intercepted": ev.intercepted,
        "detections_caused": ev.detections_caused,
        "effective_rate": ev.detections_caused / ev.intercepted if ev.intercepted else None,
        "classical_guesses": n_guess,
        "classical_success": succ,
        "classical_success_sigma": math.sqrt(succ * (1 - succ) / n_guess) if n_guess else None,
        "combined_success": ev.combined_hits / n_guess if n_guess and ev.intercepted else None,
        "quantum_mean_candidates": float(np.mean(qsizes)) if qsizes else None,
        "quantum_single_candidate_fraction": float(np.mean(np.array(qsizes) == 1)) if qsizes else None,
        "quantum_information_bits": mutual_information(*zip(*ev.readings)) if ev.readings else None,
        "key_pump_entropy_bits": _entropy(proto.kept_pumps),
    }
    pns = None
    if config.pns_pulses:
        kept = kept_pump_weights(config.pump_distribution(), config.profile())
        eve_val, sibling, sibling_pump = pns_samples(
            config.pns_pulses, list(kept), list(kept.values()), streams["pns"]
        )
        pns = {
            "pulses": config.pns_pulses,
            "mutual_information_bits": mutual_information(eve_val, sibling),
            "independence_p_value": independence_test(eve_val, sibling),
            "pump_mutual_information_bits": mutual_information(eve_val, sibling_pump),
            "pump_independence_p_value": independence_test(eve_val, sibling_pump),
        }
    total = sum(proto.kept_pumps.values())
    freqs = {str(k): v / total for k, v in sorted(proto.kept_pumps.items())} if total else {}
    security = dataclasses.asdict(sec)
    security["interval_3sigma"] = _interval(sec.fraction, sec.samples)
    decoy = dataclasses.asdict(dec) if config.decoy else None
    c = proto.counts
    return SessionReport(
        schema_version=SCHEMA_VERSION,
        config_hash=config.digest(),
        seed=config.seed,
        alphabet=list(alphabet),
        bits_per_segment=alphabet.bits_per_segment + (1 if config.signed else 0),
        emissions=emitted,
        kept_pairs=c["key"] + c["security"] + c["corrupt"],
        key_pairs=len(proto.alice.key_blocks),
        key_bits=len(akey),
        key_hash=hashlib.sha256(akey.encode()).hexdigest(),
        keys_agree=akey == bkey,
        key_block_errors=block_errors,
        counts=dict(c),
        security=security,
        decoy=decoy,
        eve=eve,
        pns=pns,
        pump_frequencies=freqs,
        filters=None if bank is None else {
            "transmissions": {str(k): v for k, v in sorted(bank.transmissions.items())},
            "throughput": bank.throughput,
        },
        verdict=_verdict(sec.verdict, *([dec.verdict] if config.decoy else [])),
        alice_key=akey,
        bob_key=bkey,
    )


def _sweep_one(cfg: SessionConfig) -> SessionReport:
    return run_session(cfg)[0]


def attack_sweep(
    base: SessionConfig, parameter: str, values: Sequence, workers: int = 1
) -> list[tuple[Any, SessionReport]]:
    """One session per value; session i uses seed ``base.seed + i``.

    Sessions are independent, so ``workers > 1`` runs them in a process
    pool without changing any result.
    """
    if parameter not in SWEEPABLE:
        raise ConfigurationError(f"cannot sweep {parameter!r}; choose from {SWEEPABLE}")
    configs = []
    for i, v in enumerate(values):
        changes = {parameter: v, "seed": base.seed + i}
        if parameter == "alphabet_size":
            changes["bandwidth"] = None  # let the bandwidth follow the alphabet
        configs.append(base.replace(**changes))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_sweep_one, configs))
    else:
        reports = [_sweep_one(c) for c in configs]
    return list(zip(values, reports))


def sweep_rows(results: Sequence[tuple[Any, SessionReport]], parameter: str) -> list[dict]:
    """Tidy rows for CSV output."""
    rows = []
    for v, r in results:
        rows.append(
            {
                parameter: v,
                "seed": r.seed,
                "kept_pairs": r.kept_pairs,
                "key_bits": r.key_bits,
                "bits_per_pair": r.key_bits / r.key_pairs if r.key_pairs else None,
                "nonadjacent_fraction": r.security["fraction"],
                "security_samples": r.security["samples"],
                "decoy_click_rate": r.decoy["click_rate"] if r.decoy else None,
                "eve_classical_success": r.eve["classical_success"],
                "verdict": r.verdict,
            }
        )
    return rows


# --- serialization ---------------------------------------------------------


def key_hex(bits: str) -> str:
    if not bits:
        return ""
    return format(int(bits, 2), f"0{(len(bits) + 3) // 4}x")


def manifest(config: SessionConfig, extra: dict | None = None) -> dict:
    m = {
        "tool": "fibqkd",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "config_hash": config.digest(),
        "config": config.to_dict(),
    }
    if extra:
        m.update(extra)
    return m


def write_key(path, bits: str, config: SessionConfig) -> None:
    path = Path(path)
    path.write_text(key_hex(bits) + "\n")
    side = manifest(config, {"key_bits": len(bits), "key_file": path.name})
    path.with_suffix(path.suffix + ".manifest.json").write_text(json.dumps(side, sort_keys=True, indent=2) + "\n")


EVENT_FIELDS = (
    "seq", "pump", "alice", "bob_sent", "kind", "steps", "eve_measured", "eve_resent", "bob",
    "alice_bit", "bob_bit", "alice_pump", "bob_pump", "overlap", "click",
)


def write_events_jsonl(path, outcomes) -> None:
    with open(path, "w") as fh:
        for o in outcomes:
            fh.write(canonical_json(o.as_dict()) + "\n")


def write_events_csv(path, outcomes) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EVENT_FIELDS)
        w.writeheader()
        for o in outcomes:
            w.writerow(o.as_dict())
