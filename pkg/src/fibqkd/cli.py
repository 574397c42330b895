"""Command-line entry point: ``fibqkd {run,sweep,spiral-spectrum,verify-scheme}``.

Exit codes: 0 pass, 1 security verdict (compromised run, scheme violation),
2 usage or configuration error.  Every command writes a ``manifest.json``
beside its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, DomainError, SchemeViolation
from .fibcode import (
    DEFAULT_SCHEME,
    FibAlphabet,
    guess_success,
    observation_table,
    outcome_joint,
    table_scheme,
)
from .harness import (
    SWEEPABLE,
    SessionConfig,
    attack_sweep,
    manifest,
    run_session,
    sweep_rows,
    write_events_csv,
    write_events_jsonl,
    write_key,
)
from .parties import simulate_guessing
from .spiral import GOLDEN_ANGLE, classify_peaks, far_field, fourier_hankel, vogel_points

OUT_ENV = "FIBQKD_OUT"
EXIT_PASS, EXIT_SECURITY, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("fibqkd")


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "fibqkd-out")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_manifest(out: Path, command: str, extra: dict, started: float) -> None:
    extra = dict(extra)
    extra.update(
        command=command,
        runtime_seconds=round(time.perf_counter() - started, 3),
        python=platform.python_version(),
        numpy=np.__version__,
    )
    _write_json(out / "manifest.json", extra)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config(args) -> SessionConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        data[key.strip()] = _parse_value(value)
    if args.seed is not None:
        data["seed"] = args.seed
    return SessionConfig.from_dict(data)


def cmd_run(args) -> int:
    started = time.perf_counter()
    config = _load_config(args)
    report, proto = run_session(config, keep_log=args.events != "none")
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    if args.events == "csv":
        write_events_csv(out / "events.csv", proto.log)
    elif args.events == "jsonl":
        write_events_jsonl(out / "events.jsonl", proto.log)
    if args.key:
        write_key(out / "alice.key", report.alice_key, config)
        write_key(out / "bob.key", report.bob_key, config)
    _write_manifest(out, "run", manifest(config, {"report": "report.json"}), started)
    log.info("wrote report to %s", out)
    sec = report.security
    frac = "n/a" if sec["fraction"] is None else f"{sec['fraction']:.4f}"
    print(
        f"kept={report.kept_pairs} key_bits={report.key_bits} keys_agree={report.keys_agree} "
        f"nonadjacent={frac} (n={sec['samples']}) verdict={report.verdict}"
    )
    return report.exit_code


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    config = _load_config(args)
    if args.param not in SWEEPABLE:
        raise ConfigurationError(f"cannot sweep {args.param!r}; choose from {SWEEPABLE}")
    values = [_parse_value(v) for v in args.values.split(",")]
    # validate every point before simulating anything
    for i, v in enumerate(values):
        changes = {args.param: v, "seed": config.seed + i}
        if args.param == "alphabet_size":
            changes["bandwidth"] = None
        config.replace(**changes)
    results = attack_sweep(config, args.param, values, workers=args.workers)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_rows(results, args.param)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    _write_json(out / "sweep.json", {"parameter": args.param, "reports": [r.to_dict() for _, r in results]})
    _write_manifest(out, "sweep", manifest(config, {"parameter": args.param, "values": values}), started)
    log.info("wrote sweep to %s", out)
    for row in rows:
        print(", ".join(f"{k}={v}" for k, v in row.items()))
    return EXIT_PASS


def _alpha(text: str) -> float:
    if text == "golden":
        return GOLDEN_ANGLE
    try:
        return math.radians(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError("--alpha takes 'golden' or an angle in degrees") from None


def cmd_spiral(args) -> int:
    started = time.perf_counter()
    geometry = vogel_points(args.particles, args.a0_um, args.alpha)
    if args.n_theta < 4 * args.m_max:
        raise ConfigurationError(f"--n-theta {args.n_theta} aliases --m-max {args.m_max}; need >= {4 * args.m_max}")
    field = far_field(geometry, args.wavelength_nm / 1000.0, args.cone_deg, args.n_r, args.n_theta)
    spectrum = fourier_hankel(field, args.m_max)
    peaks = classify_peaks(spectrum, args.threshold, include_dc=args.include_dc)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "S"])
        w.writerows(spectrum.rows())
    if args.field_csv:
        with open(out / "field.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["nu_r", "nu_theta", "abs_E"])
            mag = np.abs(field.field)
            for i, r in enumerate(field.nu_r):
                for j, t in enumerate(field.nu_theta):
                    w.writerow([repr(float(r)), repr(float(t)), repr(float(mag[i, j]))])
    params = {
        "particles": args.particles,
        "a0_um": args.a0_um,
        "alpha_rad": args.alpha,
        "wavelength_nm": args.wavelength_nm,
        "cone_deg": args.cone_deg,
        "n_r": args.n_r,
        "n_theta": args.n_theta,
        "m_max": args.m_max,
        "threshold": args.threshold,
        "include_dc": args.include_dc,
    }
    report = {
        "schema_version": 1,
        "parameters": params,
        "peaks": [{"m": p.m, "height": p.height, "relative": p.relative, "is_fibonacci": p.is_fibonacci} for p in peaks],
        "all_fibonacci": all(p.is_fibonacci for p in peaks),
    }
    _write_json(out / "peaks.json", report)
    _write_manifest(out, "spiral-spectrum", {"tool": "fibqkd", "version": __version__, "parameters": params}, started)
    log.info("wrote spectrum to %s", out)
    print(" ".join(f"{p.m}{'*' if p.is_fibonacci else ''}" for p in peaks) or "no peaks")
    return EXIT_PASS


def _scheme_from_args(args):
    if not args.bits:
        return DEFAULT_SCHEME
    try:
        table = {int(k): int(v) for k, v in json.loads(args.bits).items()}
    except (json.JSONDecodeError, AttributeError, ValueError) as exc:
        raise ConfigurationError(f"--bits must be a JSON object of value -> bit: {exc}") from exc
    return table_scheme(table, conjugate_on_odd=not args.no_conjugate)


def cmd_verify_scheme(args) -> int:
    started = time.perf_counter()
    alphabet = FibAlphabet(args.n0, args.size)
    scheme = _scheme_from_args(args)
    try:
        scheme.verify(alphabet)
    except SchemeViolation as exc:
        print(f"scheme violation: {exc}; configuration={exc.configuration}")
        return EXIT_SECURITY
    table = observation_table(alphabet, scheme)
    exact = guess_success(alphabet, scheme, "uniform")
    ml = guess_success(alphabet, scheme, "ml")
    print("Eve sees | candidate pumps")
    for bits, cands in table.items():
        print(f"   {bits[0]}{bits[1]}    | {', '.join(map(str, cands))}")
    print(f"uniform-guess success = {exact} = {float(exact):.4%}")
    print(f"best-guess success    = {ml} = {float(ml):.4%}")

    mc = simulate_guessing(alphabet, args.trials, np.random.default_rng(args.seed), scheme)
    sigma = math.sqrt(float(exact) * (1 - float(exact)) / args.trials)
    agrees = abs(mc - float(exact)) <= 3 * sigma
    print(f"monte carlo ({args.trials} exchanges) = {mc:.4f} +/- {sigma:.4f} ({'ok' if agrees else 'MISMATCH'})")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        joint = outcome_joint(alphabet, scheme)
        _write_json(
            out / "scheme.json",
            {
                "alphabet": list(alphabet),
                "table": {f"{b[0]}{b[1]}": list(c) for b, c in table.items()},
                "joint": {f"{b[0]}{b[1]}": {str(p): str(w) for p, w in row.items()} for b, row in joint.items()},
                "uniform_guess_success": str(exact),
                "ml_guess_success": str(ml),
                "monte_carlo": {"trials": args.trials, "seed": args.seed, "success": mc, "sigma": sigma},
            },
        )
        _write_manifest(
            out, "verify-scheme", {"tool": "fibqkd", "version": __version__, "n0": args.n0, "size": args.size}, started
        )
    return EXIT_PASS if agrees else EXIT_SECURITY


def _add_session_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON session config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field (JSON value)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fibqkd {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one session")
    _add_session_args(p)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./fibqkd-out)")
    p.add_argument("--events", choices=("none", "csv", "jsonl"), default="none", help="per-event log format")
    p.add_argument("--key", action="store_true", help="also write both keys as hex with manifests")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one session per value of a parameter")
    _add_session_args(p)
    p.add_argument("--param", required=True, choices=SWEEPABLE)
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 0,0.25,0.5,1")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spiral-spectrum", help="OAM spectrum of a Vogel spiral far field")
    p.add_argument("--particles", type=int, default=2000)
    p.add_argument("--a0-um", type=float, default=9.28)
    p.add_argument("--wavelength-nm", type=float, default=405.0)
    p.add_argument("--cone-deg", type=float, default=2.0)
    p.add_argument("--alpha", type=_alpha, default=GOLDEN_ANGLE, help="'golden' or degrees")
    p.add_argument("--n-r", type=int, default=256)
    p.add_argument("--n-theta", type=int, default=512)
    p.add_argument("--m-max", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.5, help="peak floor relative to the largest peak")
    p.add_argument("--include-dc", action="store_true", help="let m = 0 count as a peak")
    p.add_argument("--field-csv", action="store_true", help="also write |E| on the grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spiral)

    p = sub.add_parser("verify-scheme", help="enumerate the two-bit exchange and Eve's view")
    p.add_argument("--n0", type=int, default=3)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--bits", help="JSON value -> bit table replacing the default parity rule")
    p.add_argument("--no-conjugate", action="store_true", help="Bob never flips his bit")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_scheme)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
