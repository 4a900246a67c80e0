"""Command-line front end.

Subcommands: simulate, keyrate, sweep, reduce-check, stats. Every
command is a pure function of its flags, optional config file, and seed,
and writes deterministic bytes: reruns with the same inputs reproduce
output files exactly. A config file holds `key=value` lines (UTF-8, `#`
comments); explicit flags override it. The seed falls back to the
MSQKD_SEED environment variable when neither flag nor config provides
one.

Exit codes: 0 success; 1 protocol abort, fidelity failure, or baseline
drift; 2 unusable statistics (missing cells or infeasible); 3 invalid
attack construction.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import engine, keyrate, reduction, stats
from .protocol import (
    Mode,
    ModePolicy,
    ProtocolConfig,
    sampling_stage,
    simulate,
    write_transcript,
)
from .rng import SAMPLING_STREAM, Stream

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BAD_STATS = 2
EXIT_BAD_ATTACK = 3


def _fmt(x: float) -> str:
    """Numeric CSV/report formatting: 9 significant digits."""
    return f"{x:.9g}"


def load_config(path: str) -> dict:
    """Parse a `key=value` config file; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


class _Resolver:
    """Flag > config file > environment (seed only) > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, conv, default):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return conv(self.config[name])
        return default

    def seed(self) -> int:
        value = self.get("seed", int, None)
        if value is not None:
            return value
        env = os.environ.get("MSQKD_SEED", "")
        return int(env) if env else 0


def _warn_low_confidence(tallied: stats.ObservedStats) -> None:
    cells = tallied.low_confidence_cells()
    if cells:
        print(
            f"warning: {len(cells)} cells estimated from fewer than "
            f"{stats.LOW_CONFIDENCE_THRESHOLD} samples: " + " ".join(cells),
            file=sys.stderr,
        )


def _cmd_simulate(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = ProtocolConfig(
        rounds=res.get("rounds", int, 1000),
        p_m=res.get("pm", float, 0.5),
        sample_fraction=res.get("sample_fraction", float, 0.1),
        noise=(res.get("qf", float, 0.0), res.get("qr", float, 0.0)),
        seed=res.seed(),
    )
    workers = res.get("workers", int, 1)
    records = simulate(cfg, workers=workers)
    records, abort = sampling_stage(
        records, cfg.sample_fraction, Stream(cfg.seed, SAMPLING_STREAM)
    )
    tallied = stats.tally(records)
    write_transcript(records, args.transcript)
    with open(args.stats_out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(stats.to_text(tallied))
    n_sample = sum(1 for r in records if r.in_sample)
    print(f"engine: {engine.backend_name()}")
    print(f"rounds: {cfg.rounds}  sampled: {n_sample}")
    print(f"abort: {str(abort).lower()}")
    print(f"transcript: {args.transcript}")
    print(f"stats: {args.stats_out}")
    _warn_low_confidence(tallied)
    if abort:
        print("error: inconsistent messages between the parties", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _report_lines(report: keyrate.KeyRateReport, mode: Mode) -> list[str]:
    rate = report.rate_flip if mode is Mode.FLIP else report.rate_noflip
    return [
        f"h_ae_lower   = {_fmt(report.h_ae_lower)}",
        f"h_ab_noflip  = {_fmt(report.h_ab_noflip)}",
        f"h_ab_flip    = {_fmt(report.h_ab_flip)}",
        f"rate_noflip  = {_fmt(report.rate_noflip)}",
        f"rate_flip    = {_fmt(report.rate_flip)}",
        f"mode         = {mode.value}",
        f"rate         = {_fmt(rate)}  (clamped: {_fmt(max(rate, 0.0))})",
    ]


def _apply_mode_policy(report: keyrate.KeyRateReport, policy: ModePolicy) -> Mode:
    if policy is ModePolicy.FORCE_FLIP:
        return Mode.FLIP
    if policy is ModePolicy.FORCE_NOFLIP:
        return Mode.NOFLIP
    return report.chosen_mode


def _cmd_keyrate(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    qf = qr = None
    try:
        if args.from_stats:
            with open(args.from_stats, "r", encoding="utf-8") as fh:
                observed = stats.from_text(fh.read())
            _warn_low_confidence(observed)
        else:
            qf = res.get("qf", float, 0.0)
            qr = res.get("qr", float, 0.0)
            observed = stats.predict_depolarization(qf, qr)
        report = keyrate.key_rate(observed)
    except keyrate.MissingStatsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_STATS
    except (keyrate.InfeasibleStats, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_STATS
    policy = ModePolicy(res.get("mode", str, "auto"))
    mode = _apply_mode_policy(report, policy)
    for line in _report_lines(report, mode):
        print(line)
    if args.csv:
        rate = report.rate_flip if mode is Mode.FLIP else report.rate_noflip
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("qf,qr,h_ae,h_ab_noflip,h_ab_flip,rate_noflip,rate_flip,rate_best,mode\n")
            qf_text = "" if qf is None else _fmt(qf)
            qr_text = "" if qr is None else _fmt(qr)
            fh.write(
                f"{qf_text},{qr_text},{_fmt(report.h_ae_lower)},"
                f"{_fmt(report.h_ab_noflip)},{_fmt(report.h_ab_flip)},"
                f"{_fmt(report.rate_noflip)},{_fmt(report.rate_flip)},"
                f"{_fmt(rate)},{mode.value}\n"
            )
    return EXIT_OK


def _sweep_rows(q_values, mult_f: float, mult_r: float, workers: int):
    def one(q: float):
        observed = stats.predict_depolarization(mult_f * q, mult_r * q)
        report = keyrate.key_rate(observed)
        return (
            f"{_fmt(q)},{_fmt(mult_f * q)},{_fmt(mult_r * q)},"
            f"{_fmt(report.h_ae_lower)},{_fmt(report.h_ab_noflip)},"
            f"{_fmt(report.h_ab_flip)},{_fmt(report.rate_noflip)},"
            f"{_fmt(report.rate_flip)},{_fmt(report.rate_best)},"
            f"{report.chosen_mode.value}"
        )

    if workers <= 1:
        return [one(q) for q in q_values]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, q_values))


_SWEEP_HEADER = "q,qf,qr,h_ae,h_ab_noflip,h_ab_flip,rate_noflip,rate_flip,rate_best,mode"

_BASELINE_COLUMNS = ("rate_noflip", "rate_flip", "rate_best")
_BASELINE_TOL = 1e-6


def _compare_baseline(rows: list[str], baseline_path: str) -> int:
    with open(baseline_path, "r", encoding="utf-8") as fh:
        base_lines = [line.strip() for line in fh if line.strip()]
    if not base_lines or base_lines[0] != _SWEEP_HEADER:
        print(f"error: baseline {baseline_path} has an unexpected header", file=sys.stderr)
        return EXIT_FAILURE
    base_rows = base_lines[1:]
    if len(base_rows) != len(rows):
        print(
            f"error: baseline has {len(base_rows)} rows, sweep produced {len(rows)}",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    header = _SWEEP_HEADER.split(",")
    cols = [header.index(c) for c in _BASELINE_COLUMNS]
    for idx, (got, want) in enumerate(zip(rows, base_rows)):
        got_f = got.split(",")
        want_f = want.split(",")
        for c in cols:
            delta = abs(float(got_f[c]) - float(want_f[c]))
            if delta > _BASELINE_TOL:
                print(
                    f"error: baseline drift at row {idx}, column {header[c]}: "
                    f"{got_f[c]} vs {want_f[c]} (|delta| = {delta:.3g})",
                    file=sys.stderr,
                )
                return EXIT_FAILURE
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    q_max = res.get("q_max", float, 0.1)
    steps = res.get("steps", int, 21)
    mult_f = res.get("mult_f", float, 1.0)
    mult_r = res.get("mult_r", float, 1.0)
    workers = res.get("workers", int, 1)
    if steps < 1:
        print("error: steps must be at least 1", file=sys.stderr)
        return EXIT_BAD_STATS
    if mult_f < 0 or mult_r < 0:
        print("error: multipliers must be non-negative", file=sys.stderr)
        return EXIT_BAD_STATS
    if max(mult_f, mult_r) * q_max > 0.5 or q_max < 0:
        print("error: swept q values leave [0, 0.5]", file=sys.stderr)
        return EXIT_BAD_STATS
    if steps == 1:
        q_values = [0.0]
    else:
        q_values = [q_max * i / (steps - 1) for i in range(steps)]
    rows = _sweep_rows(q_values, mult_f, mult_r, workers)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_SWEEP_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.baseline:
        code = _compare_baseline(rows, args.baseline)
        if code == EXIT_OK:
            print(f"baseline match: {args.baseline}")
        return code
    return EXIT_OK


def _cmd_reduce_check(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    trials = res.get("trials", int, 100)
    dim = res.get("dim", int, 4)
    n = res.get("n", int, 1)
    tol = res.get("tol", float, 1e-9)
    perturb = res.get("perturb", float, 0.0)
    seed = res.seed()
    if n not in (1, 2):
        print("error: n must be 1 or 2", file=sys.stderr)
        return EXIT_BAD_ATTACK
    worst = 1.0
    checked = 0
    all_pairs = [
        reduction.BasisChoice(ta, tb)
        for ta in _bit_tuples(n)
        for tb in _bit_tuples(n)
    ]
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        try:
            attack = _random_reduction_attack(n, dim, rng, perturb)
        except ValueError as exc:
            print(f"error: attack validation failed at trial {trial}: {exc}", file=sys.stderr)
            return EXIT_BAD_ATTACK
        if n == 1:
            pairs = all_pairs
        else:
            idx = rng.choice(len(all_pairs), size=4, replace=False)
            pairs = [all_pairs[i] for i in idx]
        for choice in pairs:
            result = reduction.verify_equivalence(attack, choice, tol)
            checked += 1
            worst = min(worst, result.fidelity)
            if not result.passed:
                print(
                    f"FAIL seed={seed} trial={trial} "
                    f"theta_a={''.join(map(str, choice.theta_a))} "
                    f"theta_b={''.join(map(str, choice.theta_b))} "
                    f"fidelity={result.fidelity!r} non_abort={result.non_abort_prob!r}",
                )
                return EXIT_FAILURE
    print(f"checked {checked} cases at n={n}, dim={dim}: all passed (min fidelity {worst!r})")
    return EXIT_OK


def _bit_tuples(n: int):
    return [tuple((v >> (n - 1 - r)) & 1 for r in range(n)) for v in range(2**n)]


def _random_reduction_attack(n, dim, rng, perturb):
    attack = reduction.NRoundAttack.random(n, dim, rng)
    if perturb:
        vecs = attack.eve_vectors.copy()
        vecs[0, 0, 0, 0] += perturb
        attack = reduction.NRoundAttack(n, attack.alphas, vecs)
    return attack


def _cmd_stats(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    if args.from_transcript:
        from .protocol import read_transcript

        records = read_transcript(args.from_transcript)
        table = stats.tally(records)
        _warn_low_confidence(table)
    else:
        qf = res.get("qf", float, 0.0)
        qr = res.get("qr", float, 0.0)
        table = stats.predict_depolarization(qf, qr)
    text = stats.to_text(table)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote stats to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msqkd",
        description="Simulation and key-rate analysis of a mediated semi-quantum protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--seed", type=int, help="64-bit seed (default: $MSQKD_SEED or 0)")

    p = sub.add_parser("simulate", help="run the protocol and write transcript + stats")
    add_common(p)
    p.add_argument("--rounds", type=int, help="number of rounds (default 1000)")
    p.add_argument("--qf", type=float, help="forward depolarizing strength (default 0)")
    p.add_argument("--qr", type=float, help="return depolarizing strength (default 0)")
    p.add_argument("--pm", type=float, help="per-party measure-resend probability (default 0.5)")
    p.add_argument("--sample-fraction", dest="sample_fraction", type=float,
                   help="disclosed fraction of rounds (default 0.1)")
    p.add_argument("--workers", type=int, help="simulation worker threads (default 1)")
    p.add_argument("--transcript", default="transcript.csv", help="transcript output path")
    p.add_argument("--stats-out", dest="stats_out", default="stats.csv",
                   help="stats table output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("keyrate", help="evaluate the key-rate bound")
    add_common(p)
    p.add_argument("--qf", type=float, help="forward depolarizing strength (default 0)")
    p.add_argument("--qr", type=float, help="return depolarizing strength (default 0)")
    p.add_argument("--from-stats", dest="from_stats", help="read a stats table instead")
    p.add_argument("--mode", choices=["auto", "flip", "noflip"],
                   help="force the raw-key mode (default auto)")
    p.add_argument("--csv", help="also write a one-row CSV report")
    p.set_defaults(func=_cmd_keyrate)

    p = sub.add_parser("sweep", help="key rate across a noise grid, written as CSV")
    add_common(p)
    p.add_argument("--q-max", dest="q_max", type=float, help="grid upper end (default 0.1)")
    p.add_argument("--steps", type=int, help="grid points including 0 (default 21)")
    p.add_argument("--mult-f", dest="mult_f", type=float,
                   help="forward noise multiplier: qf = mult_f * q (default 1)")
    p.add_argument("--mult-r", dest="mult_r", type=float,
                   help="return noise multiplier: qr = mult_r * q (default 1)")
    p.add_argument("--workers", type=int, help="concurrent grid evaluations (default 1)")
    p.add_argument("--out", default="sweep.csv", help="output CSV path")
    p.add_argument("--baseline", help="compare rate columns against this CSV (tol 1e-6)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("reduce-check", help="verify the entanglement-based equivalence")
    add_common(p)
    p.add_argument("--trials", type=int, help="random attacks to draw (default 100)")
    p.add_argument("--dim", type=int, help="ancilla dimension (default 4)")
    p.add_argument("--n", type=int, help="rounds per attack, 1 or 2 (default 1)")
    p.add_argument("--tol", type=float, help="fidelity tolerance (default 1e-9)")
    p.add_argument("--perturb", type=float,
                   help="diagnostic: break the isometry by this amount before validation")
    p.set_defaults(func=_cmd_reduce_check)

    p = sub.add_parser("stats", help="print or write a statistics table")
    add_common(p)
    p.add_argument("--qf", type=float, help="forward depolarizing strength (default 0)")
    p.add_argument("--qr", type=float, help="return depolarizing strength (default 0)")
    p.add_argument("--from-transcript", dest="from_transcript",
                   help="tally a transcript file instead of the closed form")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
