"""Command line entry point: ``ssafsim bounds | simulate | outage | presets``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from . import bounds, harness, outage, plotting
from .bicm import SlotPlan
from .channel import ProtocolConfig
from .precoder import for_bound_config, make_precoder
from .receiver import DetectorCapExceeded

EXIT_OK, EXIT_CONFIG, EXIT_CAP = 0, 2, 3

log = logging.getLogger("ssafsim")


def _fraction(text: str):
    try:
        return bounds.as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _snr(text: str):
    try:
        return harness.parse_snr(text)
    except harness.ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


# -- bounds -------------------------------------------------------------------


def cmd_bounds_table(args) -> int:
    s_max = args.s_max or args.beta_max + 1
    table = bounds.emit_bound_tables(args.rc, range(1, args.beta_max + 1), range(1, s_max + 1))
    print(table.to_text(), end="")
    if args.out:
        tag = f"{args.rc.numerator}_{args.rc.denominator}"
        _write(Path(args.out) / f"bounds_table_rc{tag}.csv", table.to_csv())
    return EXIT_OK


def cmd_bounds_maxrate(args) -> int:
    alphas = list(range(args.alpha_max + 1))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beta", "alpha", "s", "max_rc"])
    curves = {}
    for beta in args.beta:
        valid = [a for a in alphas if beta > 1 or a == 0]
        rates = [bounds.max_full_diversity_rate(beta, a, args.s) for a in valid]
        curves[beta] = (valid, rates)
        for a, r in zip(valid, rates):
            writer.writerow([beta, a, args.s, str(r)])
    print(buf.getvalue(), end="")
    if args.out:
        out = Path(args.out)
        _write(out / "max_rate.csv", buf.getvalue())
        log.info("wrote %s", plotting.plot_max_rate(curves, out / "max_rate.png"))
    return EXIT_OK


def cmd_bounds_check(args) -> int:
    cfg = harness.load_config(Path(args.config).read_text())
    check = harness.validate(cfg)
    print(f"{cfg.name}: delta = {check.delta} on {check.channel} (K = {check.k_info}, Rc = {cfg.rc})")
    return EXIT_OK


# -- simulate -----------------------------------------------------------------


def _experiments(args) -> list[harness.ExperimentConfig]:
    if args.config:
        cfgs = [harness.load_config(Path(args.config).read_text())]
    else:
        cfgs = list(harness.find_preset(args.preset))
    changes = {}
    if args.snr is not None:
        changes["snr_db"] = args.snr
    if args.seed is not None:
        changes["seed"] = args.seed
    for key in ("n_coded", "min_word_errors", "max_frames", "batch", "outage_trials"):
        value = getattr(args, key)
        if value is not None:
            changes[key] = value
    if args.iterations is not None:
        changes["n_iter"] = args.iterations
    cfgs = [c.with_(**changes) for c in cfgs]
    for c in cfgs:
        check = harness.validate(c)
        print(f"{c.name}: predicted diversity {check.delta} on {check.channel}", file=sys.stderr)
    return cfgs


def cmd_simulate(args) -> int:
    cfgs = _experiments(args)
    out = Path(args.out)
    curves, overlays = {}, {}
    for cfg in cfgs:
        rows = harness.run_wer(cfg, workers=args.workers)
        points = None
        if cfg.outage_trials:
            precoder = for_bound_config(cfg.bound_config()).matrix
            points = outage.outage_probability(
                cfg.rate, cfg.snr_db, cfg.protocol, cfg.outage_trials, cfg.seed, precoder
            )
            overlays[f"outage {cfg.name}"] = ([p.snr_db for p in points], [p.p_out for p in points])
        for path in harness.write_outputs(out, cfg, rows, points).values():
            log.info("wrote %s", path)
        print(harness.emit_csv(rows, cfg), end="")
        curves[cfg.name] = ([r.snr_db for r in rows], [r.wer for r in rows])
    stem = args.preset or cfgs[0].name
    log.info("wrote %s", plotting.plot_wer(curves, out / f"{stem}_wer.png", overlays, title=stem))
    return EXIT_OK


# -- outage -------------------------------------------------------------------


def cmd_outage(args) -> int:
    proto = ProtocolConfig(
        beta=args.beta,
        alpha=args.alpha,
        energies=tuple(args.energies) if args.energies else None,
        relay_mode=args.relay_mode,
    )
    precoder = make_precoder(proto.m_slots, args.s, args.strategy).matrix if args.s > 1 else None
    points = outage.outage_probability(args.rate, args.snr, proto, args.trials, args.seed, precoder)
    text = outage.outage_csv(points)
    print(f"# snr axis: Eb/N0 in dB, Eb = Es/R, R = {args.rate} bit per channel use")
    print(text, end="")
    if args.out:
        out = Path(args.out)
        tag = f"outage_b{args.beta}_a{args.alpha}_r{args.rate.numerator}_{args.rate.denominator}"
        _write(out / f"{tag}.csv", text)
        log.info("wrote %s", plotting.plot_outage(points, out / f"{tag}.png", label=f"R = {args.rate}"))
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.dump:
        print(harness.dump_config(harness.find_preset(args.dump)[0]), end="")
        return EXIT_OK
    for cfgs in harness.presets().values():
        for cfg in cfgs:
            check = harness.validate(cfg)
            plan = SlotPlan(cfg.slot_plan)
            print(
                f"{cfg.name:18s} beta={cfg.protocol.beta} alpha={cfg.protocol.alpha} code={cfg.code} "
                f"m={plan.m} s={cfg.s} N={cfg.n_coded} R={cfg.rate} delta={check.delta}"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssafsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="diversity bounds").add_subparsers(dest="bounds_command", required=True)
    t = b.add_parser("table", help="single-precoder bound over (beta, s)")
    t.add_argument("--rc", type=_fraction, required=True)
    t.add_argument("--beta-max", type=int, default=8)
    t.add_argument("--s-max", type=int, default=None)
    t.add_argument("--out", default=None, help="directory for the CSV")
    t.set_defaults(func=cmd_bounds_table)
    m = b.add_parser("maxrate", help="largest full-diversity coding rate")
    m.add_argument("--beta", type=_int_list, default=[2, 3, 4])
    m.add_argument("--alpha-max", type=int, default=6)
    m.add_argument("--s", type=int, default=1)
    m.add_argument("--out", default=None, help="directory for CSV and PNG")
    m.set_defaults(func=cmd_bounds_maxrate)
    c = b.add_parser("check", help="validate a config file and print its bound")
    c.add_argument("--config", required=True)
    c.set_defaults(func=cmd_bounds_check)

    s = sub.add_parser("simulate", help="Monte Carlo WER sweep")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="E1..E4 or a variant name such as E4-s2")
    src.add_argument("--config", help="INI experiment file")
    s.add_argument("--snr", type=_snr, default=None, help="lo:hi:step in dB (inclusive) or a comma list")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--n-coded", type=int, default=None)
    s.add_argument("--min-word-errors", type=int, default=None)
    s.add_argument("--max-frames", type=int, default=None)
    s.add_argument("--batch", type=int, default=None)
    s.add_argument("--iterations", type=int, default=None)
    s.add_argument("--outage-trials", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("outage", help="Monte Carlo outage probability")
    o.add_argument("--rate", type=_fraction, required=True, help="target rate p/q in bit per channel use")
    o.add_argument("--beta", type=int, default=2)
    o.add_argument("--alpha", type=int, default=0)
    o.add_argument("--energies", type=lambda v: [float(x) for x in v.split(",")], default=None)
    o.add_argument("--relay-mode", choices=("faded", "ideal", "off"), default="ideal")
    o.add_argument("--s", type=int, default=1, help="spreading of an optional precoder")
    o.add_argument("--strategy", default="single_precoder", choices=("single_precoder", "multi_precoder"))
    o.add_argument("--snr", type=_snr, default=harness.parse_snr("0:30:5"))
    o.add_argument("--trials", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_outage)

    pr = sub.add_parser("presets", help="list preset experiments")
    pr.add_argument("--dump", default=None, help="print one variant as a config file")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (harness.CapExceeded, bounds.EnumerationCapExceeded, DetectorCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
