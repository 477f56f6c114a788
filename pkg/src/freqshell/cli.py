"""Command-line entry point.

Machine-readable reports (JSON/CSV) go to files or stdout; human-readable
summaries go to stderr.  Exit codes: 0 all checks pass, 1 violations found,
2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, profiles, sequences, sim

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _err(message: str) -> None:
    print(f"freqshell: {message}", file=sys.stderr)


def _dump_json(payload, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_certify_sequences(args) -> int:
    try:
        weight_report = sequences.certify_averaged_weight(args.jmax)
        window_report = sequences.certify_window_count(args.nmax)
        paired = sequences.certify_paired_weight_sums(args.sum_nmax)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    payload = {
        "averaged_weight_bound": weight_report.to_dict(),
        "window_count_bound": {
            **window_report.to_dict(),
            "set_size_at_nmax": len(sequences.sparse_window_set(args.nmax)),
        },
        "paired_weight_sums": paired.to_dict(),
    }
    _dump_json(payload, args.out)
    ok = weight_report.passed and window_report.passed and paired.report.passed
    print(
        f"averaged-weight bound: {'pass' if weight_report.passed else 'FAIL'} "
        f"(max ratio {weight_report.max_ratio:.6f}); "
        f"window count: {'pass' if window_report.passed else 'FAIL'} "
        f"(max ratio {window_report.max_ratio:.6f}); "
        f"paired sums: n0={paired.threshold}"
        + (" (no certified tail in range)" if paired.tail_is_empty else ""),
        file=sys.stderr,
    )
    return EXIT_PASS if ok else EXIT_VIOLATION


def _cmd_verify_scaling(args) -> int:
    certs = []
    if args.profile is not None:
        try:
            prof = profiles.read_profile(args.profile)
        except profiles.ProfileFormatError as exc:
            _err(f"{args.profile}: {exc}")
            return EXIT_USAGE
        except OSError as exc:
            _err(str(exc))
            return EXIT_USAGE
        named = [("file", prof)]
    else:
        rng = np.random.default_rng(args.seed)
        named = [
            (f"random-{i}", profiles.random_profile(rng)) for i in range(args.random)
        ]
    for name, prof in named:
        cert = profiles.certify_rescaling_smallness(prof, args.epsilon, args.extra_levels)
        certs.append({"profile": name, "shells": len(prof), **cert.to_dict()})
    _dump_json(certs, args.out)
    ok = all(c["passed"] for c in certs)
    limited = sum(1 for c in certs if c["range_limited"])
    print(
        f"{len(certs)} profile(s): {'all pass' if ok else 'VIOLATIONS'}"
        f" ({limited} range-limited)",
        file=sys.stderr,
    )
    return EXIT_PASS if ok else EXIT_VIOLATION


def _cmd_simulate(args) -> int:
    try:
        config = sim.SimConfig.from_json(args.config)
    except (sim.ConfigError, OSError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    if config.out_dir is None:
        _err("config must set out_dir for the snapshot stream")
        return EXIT_USAGE
    try:
        result = sim.run_simulation(config)
    except sim.BlowUpError as exc:
        _err(f"blow-up: {exc}")
        print(json.dumps(exc.report, sort_keys=True), file=sys.stderr)
        return EXIT_VIOLATION
    summary = Path(config.out_dir) / "summary.json"
    if result.stability["dt_exceeds_estimate"]:
        _err(
            "warning: dt=%g exceeds the advective stability estimate %g"
            % (config.dt, result.stability["advective_dt_estimate"])
        )
    print(
        f"{len(result.times) - 1} steps, {len(result.snapshot_paths)} snapshots, "
        f"energy {result.energies[0]:.6f} -> {result.energies[-1]:.6f}, "
        f"summary at {summary}",
        file=sys.stderr,
    )
    return EXIT_PASS


def _cmd_diagnose(args) -> int:
    root = Path(args.snapshots)
    if not root.is_dir():
        _err(f"{root} is not a directory")
        return EXIT_USAGE
    try:
        result = diagnostics.run_diagnostics(
            root, kmax=args.kmax, epsilon=args.epsilon
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.write_records_csv(out / "records.csv")
    result.write_constants_json(out / "constants.json")
    result.write_certificate_json(out / "uniform_smallness.json")
    failed = result.failed_records
    print(
        f"{len(result.records)} records, {len(failed)} failed; "
        f"{len(result.errors)} unreadable snapshot(s); reports in {out}",
        file=sys.stderr,
    )
    for record in failed[:10]:
        print(
            f"  FAIL {record.name} t={record.t:g} k={record.k:g} "
            f"lhs={record.lhs:.6e} rhs={record.rhs:.6e}",
            file=sys.stderr,
        )
    return EXIT_PASS if not failed else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqshell",
        description="Dyadic frequency-shell certifications, simulation and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify-sequences", help="exhaustive weight/window certifications")
    p.add_argument("--jmax", type=int, default=2**20, help="averaged-weight range (default 2^20)")
    p.add_argument("--nmax", type=int, default=10**6, help="window-count range (default 1e6)")
    p.add_argument("--sum-nmax", type=int, default=10**5, help="paired-sum range (default 1e5)")
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=_cmd_certify_sequences)

    p = sub.add_parser("verify-scaling", help="rescaling smallness certificates")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--profile", default=None, help="profile file (j<TAB>sigma lines)")
    group.add_argument("--random", type=int, default=None, help="number of random profiles")
    p.add_argument("--seed", type=int, default=0, help="seed for --random")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--extra-levels", type=int, default=3)
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=_cmd_verify_scaling)

    p = sub.add_parser("simulate", help="run the pseudo-spectral flow")
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("diagnose", help="evaluate the inequality records on snapshots")
    p.add_argument("--snapshots", required=True, help="directory of .shf1 files")
    p.add_argument("--kmax", type=int, default=None, help="top cutoff (default: dealias radius)")
    p.add_argument("--epsilon", type=float, default=0.1, help="uniform-smallness epsilon")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.set_defaults(func=_cmd_diagnose)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "epsilon", 1.0) <= 0:
        _err("epsilon must be positive")
        return EXIT_USAGE
    if getattr(args, "random", None) is not None and args.random < 1:
        _err("--random needs a positive count")
        return EXIT_USAGE
    if getattr(args, "extra_levels", 0) < 0:
        _err("--extra-levels must be >= 0")
        return EXIT_USAGE
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
