import csv
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from fibqkd.channel import PumpDistribution, SpdcProfile, kept_pump_weights
from fibqkd.errors import ConfigurationError
from fibqkd.fibcode import DEFAULT_ALPHABET
from fibqkd.harness import (
    EVENT_FIELDS,
    SessionConfig,
    _candidate_mask,
    _Lookup,
    attack_sweep,
    key_hex,
    make_streams,
    manifest,
    run_session,
    sweep_rows,
    write_events_csv,
    write_events_jsonl,
    write_key,
)
from fibqkd.parties import Protocol, intercept_resend_rate


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SessionConfig(seed=-1)
    with pytest.raises(ConfigurationError):
        SessionConfig(seed=1, intercept_rate=1.5)
    with pytest.raises(ConfigurationError):
        SessionConfig(seed=1, decoy=True, signed=True)
    with pytest.raises(ConfigurationError):
        SessionConfig(seed=1, bandwidth=40)
    with pytest.raises(ConfigurationError):
        SessionConfig(seed=1, pump="explicit", pump_weights={"3": 1.0})
    with pytest.raises(ConfigurationError):
        SessionConfig(seed=1, eve="wiretap")


def test_from_dict_rejects_unknown_keys_and_missing_seed():
    with pytest.raises(ConfigurationError):
        SessionConfig.from_dict({"seed": 1, "colour": "blue"})
    with pytest.raises(ConfigurationError):
        SessionConfig.from_dict({"alphabet_size": 4})
    assert SessionConfig.from_dict({"seed": 4}).seed == 4


def test_load_round_trip_and_digest(tmp_path):
    cfg = SessionConfig(seed=3, eve="intercept-resend", intercept_rate=0.5)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = SessionConfig.load(path)
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.replace(seed=4).digest() != cfg.digest()
    path.write_text("[1, 2]")
    with pytest.raises(ConfigurationError):
        SessionConfig.load(path)
    with pytest.raises(ConfigurationError):
        SessionConfig.load(tmp_path / "missing.json")


def test_streams_are_independent_of_each_other():
    a, b = make_streams(7), make_streams(7)
    assert a["pump"].random() == b["pump"].random()
    assert make_streams(7)["pump"].random() != make_streams(7)["spdc"].random()


def test_balanced_pump_flattens_kept_pairs():
    cfg = SessionConfig(seed=0, pump="balanced")
    q = kept_pump_weights(cfg.pump_distribution(), cfg.profile())
    assert max(q.values()) == pytest.approx(min(q.values()))


def test_candidate_mask_matches_protocol_wants():
    rng = np.random.default_rng(0)
    alice = rng.integers(-150, 150, 4000)
    bob = rng.integers(-150, 150, 4000)
    for signed, decoy, eve, nonfib in [
        (False, False, "none", "forward"),
        (True, False, "none", "forward"),
        (False, True, "none", "forward"),
        (False, False, "intercept-resend", "forward"),
        (False, True, "intercept-resend", "nearest"),
    ]:
        proto = Protocol(DEFAULT_ALPHABET, make_streams(0), signed=signed, decoy=decoy,
                         eve_strategy=eve, intercept_rate=1.0, nonfib_policy=nonfib)
        fibs = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]
        tables = (
            _Lookup(DEFAULT_ALPHABET.arm_values, 300),
            _Lookup(fibs + [-f for f in fibs], 300),
            _Lookup(DEFAULT_ALPHABET.members, 300),
        )
        mask = _candidate_mask(alice, bob, tables, signed, decoy, proto.quantum_eve,
                               proto.quantum_eve and nonfib == "nearest")
        want = np.array([proto.wants(a, b) for a, b in zip(alice.tolist(), bob.tolist())])
        assert np.array_equal(mask, want)


@pytest.fixture(scope="module")
def honest():
    return run_session(SessionConfig(seed=11, target_pairs=3000), keep_log=True)


def test_same_seed_same_report(honest):
    again, _ = run_session(SessionConfig(seed=11, target_pairs=3000))
    assert again.to_json() == honest[0].to_json()
    other, _ = run_session(SessionConfig(seed=12, target_pairs=3000))
    assert other.key_hash != honest[0].key_hash


def test_honest_keys_agree_and_have_the_right_length(honest):
    r, proto = honest
    assert r.keys_agree and r.key_block_errors == 0 and r.verdict == "pass"
    assert r.key_bits == 3 * r.key_pairs
    assert r.kept_pairs == 3000
    assert r.security["nonadjacent"] == 0
    assert r.counts["security"] + r.key_pairs == r.kept_pairs
    assert r.alice_key == "".join(proto.alice.key_blocks)
    assert sum(r.pump_frequencies.values()) == pytest.approx(1.0)


def test_fraction_fields_lie_in_unit_interval(honest):
    r = honest[0]
    assert r.eve["classical_success"] is None
    assert 0 <= r.security["fraction"] <= 1
    lo, hi = r.security["interval_3sigma"]
    assert 0 <= lo <= hi <= 1


def test_decoy_toggle_does_not_move_the_key():
    base = SessionConfig(seed=5, target_pairs=2000)
    plain, _ = run_session(base)
    with_decoy, _ = run_session(base.replace(decoy=True))
    assert plain.key_hash == with_decoy.key_hash
    assert with_decoy.decoy["samples"] > 0 and plain.decoy is None


def test_signed_sessions_carry_a_sign_bit():
    r, _ = run_session(SessionConfig(seed=2, signed=True, target_pairs=1000))
    assert r.bits_per_segment == 4 and r.key_bits == 4 * r.key_pairs and r.keys_agree


def test_too_few_security_samples_is_inconclusive():
    r, _ = run_session(SessionConfig(seed=1, target_pairs=50, security_rate=0.1))
    assert r.verdict == "inconclusive" and r.exit_code == 2


def test_max_emissions_guard():
    with pytest.raises(ConfigurationError):
        run_session(SessionConfig(seed=1, target_pairs=10_000, max_emissions=1000))


def test_intercept_rate_sweep_is_linear():
    base = SessionConfig(seed=20, eve="intercept-resend", security_rate=1.0, target_pairs=20_000)
    rates = [0.0, 0.5, 1.0]
    results = attack_sweep(base, "intercept_rate", rates)
    assert [r.seed for _, r in results] == [20, 21, 22]
    q = kept_pump_weights(PumpDistribution.uniform(DEFAULT_ALPHABET), SpdcProfile(89))
    exact = float(intercept_resend_rate(DEFAULT_ALPHABET, pump_weights=q))
    for rate, r in results:
        expected = rate * exact
        sigma = math.sqrt(max(expected * (1 - expected), 1e-12) / r.security["samples"])
        assert abs(r.security["fraction"] - expected) <= 3 * sigma
    rows = sweep_rows(results, "intercept_rate")
    assert rows[0]["nonadjacent_fraction"] == 0 and rows[2]["verdict"] == "compromised"


def test_alphabet_size_sweep_changes_bits_per_pair():
    base = SessionConfig(seed=1, target_pairs=500, security_rate=0.0)
    rows = sweep_rows(attack_sweep(base, "alphabet_size", [2, 4, 8]), "alphabet_size")
    assert [r["bits_per_pair"] for r in rows] == [1, 2, 3]


def test_sweep_parameter_must_be_known():
    with pytest.raises(ConfigurationError):
        attack_sweep(SessionConfig(seed=1), "seed", [1, 2])


def test_parallel_sweep_matches_serial():
    base = SessionConfig(seed=3, target_pairs=300)
    serial = attack_sweep(base, "loss", [0.0, 0.2])
    parallel = attack_sweep(base, "loss", [0.0, 0.2], workers=2)
    assert [r.to_json() for _, r in serial] == [r.to_json() for _, r in parallel]


def test_key_hex():
    assert key_hex("") == ""
    assert key_hex("1") == "1"
    assert key_hex("00010000") == "10"
    assert key_hex("101011110") == "15e"


def test_key_and_manifest_files(tmp_path, honest):
    r, _ = honest
    cfg = SessionConfig(seed=11, target_pairs=3000)
    write_key(tmp_path / "alice.key", r.alice_key, cfg)
    assert int((tmp_path / "alice.key").read_text(), 16) == int(r.alice_key, 2)
    side = json.loads((tmp_path / "alice.key.manifest.json").read_text())
    assert side["config_hash"] == cfg.digest() and side["key_bits"] == r.key_bits
    assert manifest(cfg)["config"]["seed"] == 11


def test_event_writers(tmp_path, honest):
    _, proto = honest
    write_events_jsonl(tmp_path / "e.jsonl", proto.log)
    write_events_csv(tmp_path / "e.csv", proto.log)
    lines = (tmp_path / "e.jsonl").read_text().splitlines()
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert len(lines) == len(rows) == len(proto.log)
    first = json.loads(lines[0])
    assert set(first) == set(EVENT_FIELDS)
    assert first["pump"] == first["alice"] + first["bob_sent"]


def test_key_pump_frequencies_follow_source_weights():
    r, _ = run_session(SessionConfig(seed=8, target_pairs=20_000, security_rate=0.0))
    q = kept_pump_weights(PumpDistribution.uniform(DEFAULT_ALPHABET), SpdcProfile(89))
    total = sum(q.values())
    for p, w in q.items():
        w /= total
        f = r.pump_frequencies[str(p)]
        assert abs(f - w) < 4 * math.sqrt(w * (1 - w) / r.key_pairs)
    assert Fraction(r.key_bits, r.key_pairs) == 3


def test_eve_guessing_statistics_are_reported():
    r, _ = run_session(SessionConfig(seed=4, eve="classical-only", target_pairs=5000))
    e = r.eve
    assert e["classical_guesses"] == r.key_pairs and e["intercepted"] == 0
    assert 0 <= e["classical_success"] <= 1 and e["classical_success_sigma"] > 0
    assert r.keys_agree and r.verdict == "pass"
