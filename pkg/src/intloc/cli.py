"""Command-line entry point: ``intloc approx | oracle | sweep | ratefit``."""

from __future__ import annotations

import argparse
import math
import sys

from . import records
from .dist_zoo import ZOO_NAMES, builtin
from .edgeworth import IntervalQuery, refined_approx
from .inversion import InversionConfig, UnattainableTolerance, sandwich_bracket, smoothed_interval_prob
from .oracles import MemoryBudgetError, interval_prob_fft, interval_prob_mc
from .rates import ResolutionAdvisory, rate_fit, sweep


class CommandError(Exception):
    """Runtime failure reported on stderr with exit code 1."""


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def _finite(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {s!r}")
    return v


def _positive(s: str) -> float:
    v = _finite(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


def _query_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dist", required=True, choices=ZOO_NAMES)
    p.add_argument("--n", required=True, type=_positive_int)
    p.add_argument("--x", required=True, type=_finite)
    p.add_argument("--delta", required=True, type=_positive)


def build_parser() -> argparse.ArgumentParser:
    # --seed is accepted before or after the subcommand; SUPPRESS keeps the
    # subparser from overwriting a value given up front.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (default 0)")

    parser = argparse.ArgumentParser(prog="intloc", parents=[common],
                                     description="Integro-local approximations and their oracles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx", parents=[common], help="Stone and refined approximations")
    _query_flags(p)
    p.add_argument("--clamp", action="store_true",
                   help="report max(total, 0) in place of the signed total")

    p = sub.add_parser("oracle", parents=[common], help="ground-truth interval probability")
    p.add_argument("--kind", required=True, choices=("fft", "mc", "inversion"))
    _query_flags(p)
    p.add_argument("--h", type=_positive, default=1e-3, help="FFT grid step")
    p.add_argument("--samples", type=_positive_int, default=10**6, help="Monte Carlo sample count")
    p.add_argument("--tail-tol", type=_positive, default=1e-10, help="inversion tail tolerance")
    p.add_argument("--delta-smooth", type=_positive, default=None,
                   help="inversion smoothing width (default delta/n)")
    p.add_argument("--bracket", action="store_true", help="print the sandwich bracket")

    p = sub.add_parser("sweep", parents=[common], help="run a sweep config, write CSV")
    p.add_argument("--config", required=True)

    p = sub.add_parser("ratefit", parents=[common], help="fit log sup-error against log n")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--plot-out", default=None)
    return parser


def cmd_approx(args, out) -> None:
    q = IntervalQuery(args.n, args.x, args.delta)
    b = refined_approx(builtin(args.dist), q)
    total = max(b.total, 0.0) if args.clamp else b.total
    per = b.per_unit(args.delta)
    print(f"dist        {args.dist}", file=out)
    print(f"v           {b.v:.10g}", file=out)
    print(f"{'':12}{'probability':>18}{'per unit delta':>18}", file=out)
    for label, a, c in (("stone_term", b.stone_term, per.stone_term),
                        ("skew_term", b.skew_term, per.skew_term),
                        ("delta_term", b.delta_term, per.delta_term),
                        ("total", total, total / args.delta)):
        print(f"{label:12}{a + 0.0:18.10g}{c + 0.0:18.10g}", file=out)
    if args.clamp and b.total < 0:
        print(f"(clamped from {b.total:.10g})", file=out)
    print(f"seed        {args.seed}", file=out)


def cmd_oracle(args, out) -> None:
    dist = builtin(args.dist)
    q = IntervalQuery(args.n, args.x, args.delta)
    br = None
    try:
        if args.kind == "fft":
            est = interval_prob_fft(dist, q, h=args.h)
            value, half, kind = est.value, est.error_half_width, est.error_kind
        elif args.kind == "mc":
            est = interval_prob_mc(dist, q, args.samples, seed=args.seed)
            value, half, kind = est.value, est.error_half_width, est.error_kind
        else:
            cfg = InversionConfig(delta_smooth=args.delta_smooth, tail_tol=args.tail_tol)
            res = smoothed_interval_prob(dist, q, cfg)
            value, half, kind = res.value, res.certificate, "quadrature"
            br = sandwich_bracket(dist, q, cfg) if args.bracket else None
    except MemoryBudgetError as exc:
        raise CommandError(f"{exc}; advisory: --h {exc.min_h:.3g}") from None
    except UnattainableTolerance as exc:
        raise CommandError(f"{exc}; advisory: --tail-tol {exc.achievable:.3g}") from None
    print(f"kind        {args.kind}", file=out)
    print(f"value       {value:.10g}", file=out)
    print(f"certificate {half:.3g} ({kind})", file=out)
    if br is not None:
        print(f"bracket     [{br.lower:.10g}, {br.upper:.10g}] tol {br.tol:.3g}", file=out)
    print(f"seed        {args.seed}", file=out)


def cmd_sweep(args, out) -> None:
    seed = getattr(args, "seed_given", None)
    try:
        cfg, path = records.load_sweep_config(args.config, seed)
    except OSError as exc:
        raise CommandError(f"cannot read config: {exc}") from None
    except records.ConfigError as exc:
        raise CommandError(str(exc)) from None
    stamp = records.run_timestamp()
    try:
        results = sweep(cfg)
    except (ResolutionAdvisory, MemoryBudgetError) as exc:
        raise CommandError(str(exc)) from None
    rows = records.sweep_records(cfg, results, stamp)
    try:
        records.write_csv(path, rows)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc}") from None
    for r in results:
        print(f"n={r.n:<6d} sup={r.sup:.6g} at x={r.x_at_sup:.6g} "
              f"flagged={r.flagged_fraction:.1%}", file=out)
    print(f"wrote {len(rows)} rows to {path} (seed {cfg.seed})", file=out)


def cmd_ratefit(args, out) -> None:
    try:
        rows = records.read_csv(args.infile)
    except OSError as exc:
        raise CommandError(f"cannot read {args.infile}: {exc}") from None
    except ValueError as exc:
        raise CommandError(f"malformed CSV: {exc}") from None
    pts = records.summary_points(rows)
    if len(pts) < 3:
        raise CommandError(f"need at least 3 summary rows, found {len(pts)}")
    fit = rate_fit(pts)
    print(f"slope       {fit.slope:.4f}", file=out)
    print(f"intercept   {fit.intercept:.4f}", file=out)
    print(f"r_squared   {fit.r_squared:.6f}", file=out)
    if args.plot_out:
        try:
            with open(args.plot_out, "w") as fh:
                fh.write("log_n log_sup_err\n")
                for n, e in pts:
                    if e > 0:
                        fh.write(f"{records.fmt(math.log(n))} {records.fmt(math.log(e))}\n")
        except OSError as exc:
            raise CommandError(f"cannot write {args.plot_out}: {exc}") from None


COMMANDS = {"approx": cmd_approx, "oracle": cmd_oracle, "sweep": cmd_sweep,
            "ratefit": cmd_ratefit}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = getattr(args, "seed", None)
    if args.seed_given is None:
        args.seed = 0
    try:
        COMMANDS[args.command](args, out)
    except CommandError as exc:
        print(f"intloc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"intloc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
