"""Command-line front end: ``ocvu <command> [options]``.

Exit codes: 0 success, 1 validation failures, 2 parse errors, 3 domain errors,
4 I/O errors.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import characterization as ch
from . import mc_oracle
from .estimation import OcvObservation, estimate_capacity, lookup_soc, nlc_curve, soc_variance
from .exceptions import InvalidModelError, OcvError, ParseError
from .ocv_model import OcvModel
from .uncertainty import ErrorBudget, combined_bias, combined_sd

log = logging.getLogger("ocvu")

DEFAULT_SEED = 7
SEED_ENV = "OCVU_SEED"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4


def default_seed():
    value = os.environ.get(SEED_ENV)
    if value is None:
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{SEED_ENV} must be an integer, got {value!r}") from None


def _read_json(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def load_model(path):
    try:
        return OcvModel.from_dict(_read_json(path))
    except InvalidModelError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if not isinstance(x, str) else x for x in row])
    _write_text(path, buf.getvalue())


def _write_text(path, text):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_simulate(args):
    cfg = ch.CellSimConfig.from_dict(_read_json(args.config))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    discharge, charge = ch.simulate_low_rate_cycle(cfg, args.c_rate, args.sample_period)
    pseudo = ch.pseudo_ocv(discharge, charge)
    discharge.to_csv(out / "discharge.csv")
    charge.to_csv(out / "charge.csv")
    pseudo.to_csv(out / "pseudo.csv")
    extra = ""
    if args.gitt_step:
        gitt = ch.simulate_gitt(cfg, args.gitt_step)
        gitt.to_csv(out / "gitt.csv")
        extra = f" gitt_rows={len(gitt)}"
    print(f"simulate ok rows={len(pseudo)} c_rate=C/{args.c_rate:g}{extra} out={out}")
    return EXIT_OK


def cmd_fit(args):
    table = ch.OcvSocTable.from_csv(args.table)
    report = ch.fit(table, args.form, args.degree, args.bins)
    _write_text(args.out, report.model.to_json() + "\n")
    if args.residuals:
        edges = report.bin_edges
        rows = zip(edges[:-1], edges[1:], report.bin_counts, report.residual_mean_by_bin, report.residual_sd_by_bin)
        _write_csv(
            args.residuals,
            ["soc_lo", "soc_hi", "count", "mean_v", "sd_v"],
            [(a, b, str(int(c)), m, s) for a, b, c, m, s in rows],
        )
    print(f"fit ok form={args.form} rows={report.n_rows} rmse_v={report.rmse!r} out={args.out}")
    return EXIT_OK


def cmd_soc(args):
    model = load_model(args.model)
    sigma = args.sigma_e_mv / 1000.0
    rows = []
    for e in args.ocv:
        est = lookup_soc(model, OcvObservation(e, sigma))
        if est.out_of_range:
            log.warning("OCV %.6g V outside the model range; SOC saturated at %.4f%%", e, 100 * est.s_hat)
        log.info("OCV %.6g V -> SOC %.4f%% (sd %.4f%%)", e, 100 * est.s_hat, 100 * est.sd)
        rows.append((est.s_hat, est.variance, est.nlc))
    _write_csv(args.out, ["s_hat", "variance", "nlc"], rows)
    print(f"soc ok n={len(rows)} s_hat={rows[0][0]!r} variance={rows[0][1]!r} out={args.out}")
    return EXIT_OK


def cmd_capacity(args):
    model = load_model(args.model)
    sigma = args.sigma_e_mv / 1000.0
    est = estimate_capacity(model, OcvObservation(args.ocv1, sigma), OcvObservation(args.ocv2, sigma), args.coulombs)
    _write_csv(args.out, ["q_hat_ah", "q_inv", "variance_q"], [(est.q_hat, est.q_inv_hat, est.variance_q)])
    log.info("SOC %.3f%% -> %.3f%% (%s)", 100 * est.soc1.s_hat, 100 * est.soc2.s_hat, est.direction)
    print(f"capacity ok q_hat_ah={est.q_hat!r} variance_q={est.variance_q!r} out={args.out}")
    return EXIT_OK


def cmd_nlc(args):
    model = load_model(args.model)
    curve = nlc_curve(model, args.grid)
    _write_csv(args.out, ["s", "nlc"], curve)
    i = int(np.argmax(curve[:, 1]))
    print(f"nlc ok rows={len(curve)} argmax_s={float(curve[i, 0])!r} max_nlc={float(curve[i, 1])!r} out={args.out}")
    return EXIT_OK


def cmd_budget(args):
    try:
        budget = ErrorBudget.from_dict(_read_json(args.budget))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    grid = np.linspace(0.0, 1.0, args.grid)
    sd = combined_sd(budget, grid)
    bias = combined_bias(budget, grid)
    header = ["s", "sd_v", "bias_v"]
    cols = [grid, sd, bias]
    if args.model:
        model = load_model(args.model)
        header.append("soc_sd")
        cols.append(np.sqrt(soc_variance(model, grid, sd)))
    _write_csv(args.out, header, np.column_stack(cols))
    print(f"budget ok sources={len(budget)} rows={len(grid)} max_sd_v={float(sd.max())!r} out={args.out}")
    return EXIT_OK


def cmd_validate(args):
    seed = args.seed if args.seed is not None else default_seed()
    reports = mc_oracle.run_suite(args.suite, seed=seed, sigma_e=args.sigma_e_mv / 1000.0, n_jobs=args.jobs)
    _write_text(args.out, mc_oracle.reports_to_jsonl(reports))
    if args.csv:
        _write_text(args.csv, mc_oracle.reports_to_csv(reports))
    asserted = [r for r in reports if r.asserted]
    failed = [r for r in asserted if not r.passed]
    for r in reports:
        log.info("%-16s %-40s rel_error=%.3g tol=%.3g %s", r.quantity, r.label, r.rel_error, r.tolerance,
                 "PASS" if r.passed else ("FAIL" if r.asserted else "info"))
    print(f"validate {'ok' if not failed else 'failed'} suite={args.suite} seed={seed} "
          f"checks={len(asserted)} failed={len(failed)} out={args.out}")
    return EXIT_FAILED if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ocvu", description="OCV-SOC modeling and uncertainty toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate low-rate cycling (and optional GITT) tables")
    p.add_argument("--config", required=True)
    p.add_argument("--c-rate", type=float, default=ch.DEFAULT_C_RATE, help="N in C/N (default 25)")
    p.add_argument("--sample-period", type=float, default=60.0, help="seconds between samples")
    p.add_argument("--gitt-step", type=float, default=None, help="also write gitt.csv with this step (percent)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="least-squares fit of an OCV model to a table")
    p.add_argument("--table", required=True)
    p.add_argument("--form", choices=["nernst", "poly"], default="nernst")
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--bins", type=int, default=ch.DEFAULT_BINS)
    p.add_argument("--residuals", default=None, help="optional CSV of binned residual statistics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("soc", help="SOC lookup with first-order variance")
    p.add_argument("--model", required=True)
    p.add_argument("--ocv", type=float, nargs="+", required=True, help="OCV reading(s) in volts")
    p.add_argument("--sigma-e-mv", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_soc)

    p = sub.add_parser("capacity", help="two-rest OCV capacity estimate")
    p.add_argument("--model", required=True)
    p.add_argument("--ocv1", type=float, required=True)
    p.add_argument("--ocv2", type=float, required=True)
    p.add_argument("--coulombs", type=float, required=True, help="charge moved between rests, Ah")
    p.add_argument("--sigma-e-mv", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("nlc", help="non-linearity coefficient curve")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_nlc)

    p = sub.add_parser("budget", help="combined OCV error s.d. and bias over SOC")
    p.add_argument("--budget", required=True)
    p.add_argument("--model", default=None, help="also report the implied SOC error s.d.")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("validate", help="run the Monte-Carlo oracle suite")
    p.add_argument("--suite", choices=sorted(mc_oracle.SUITES), default="full")
    p.add_argument("--seed", type=int, default=None, help=f"default {DEFAULT_SEED}, or ${SEED_ENV}")
    p.add_argument("--sigma-e-mv", type=float, default=5.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", default=None, help="optional CSV summary path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, json.JSONDecodeError) as exc:
        print(f"error: parse: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (OcvError, ValueError) as exc:
        print(f"error: domain: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
