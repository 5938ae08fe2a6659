"""
Command-line interface.

Subcommands::

    npvine benchmark --manifest M --out DIR [--workers W]
    npvine fit --data F --estimator E --criterion {tau,caic} [--copula-scale] --out DIR
    npvine crossval --data F --train N --test N --repeats R [--estimators E ...]
    npvine rank --results F [--csv]
    npvine simulate --d D --n N --dep-type T --strength S [--seed S] [--rep R] --out DIR

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
Tables go to stdout, diagnostics to stderr.
"""
import argparse
import csv
import json
import logging
import os
import sys
import warnings

import numpy as np

from .core import as_copula_data, pseudo_obs, read_csv_matrix, write_csv_matrix
from .evaluation import oos_loglik, read_records, scenario_medians, scenario_ranks
from .vine import CRITERIA, ESTIMATORS, select_structure_and_fit

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _parse_options(text):
    if text is None:
        return None
    try:
        opts = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--options is not valid JSON: {exc}") from None
    if not isinstance(opts, dict):
        raise UsageError("--options must be a JSON object")
    return opts


def _load_data(path, header, copula_scale, min_rows=10):
    try:
        x, names = read_csv_matrix(path, header=header)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    if x.ndim != 2 or x.shape[0] < min_rows or x.shape[1] < 2:
        raise DataError(f"need at least {min_rows} rows and 2 columns, got {x.shape}")
    try:
        u = as_copula_data(x) if copula_scale else pseudo_obs(x)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return u, names


def _emit(rows, header, as_csv, out=None):
    out = out or sys.stdout
    if as_csv:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    cells = [header] + [[c if isinstance(c, str) else f"{c:.4f}" for c in r] for r in rows]
    widths = [max(len(str(r[i])) for r in cells) for i in range(len(header))]
    for r in cells:
        out.write("  ".join(str(c).rjust(w) for c, w in zip(r, widths)) + "\n")


# --- subcommands ----------------------------------------------------------------

def cmd_benchmark(args):
    from .benchmark import Manifest, ManifestError, run_benchmark, write_outputs
    try:
        manifest = Manifest.load(args.manifest)
    except ManifestError as exc:
        raise UsageError(str(exc)) from None
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be positive")
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory: {exc}") from None
    if not os.access(args.out, os.W_OK):
        raise UsageError(f"output directory {args.out} is not writable")
    records, failures = run_benchmark(manifest, args.workers)
    summary = write_outputs(args.out, manifest, records, failures)
    for f in failures:
        print(f, file=sys.stderr)
    rows = [[e, r] for e, r in summary["average_ranks"].items()]
    _emit(sorted(rows, key=lambda r: r[1]), ["estimator", "average_rank"], False)
    print(f"{len(records)} records written to {os.path.join(args.out, 'results.csv')}")
    return EXIT_OK


def cmd_fit(args):
    options = _parse_options(args.options)
    u, _ = _load_data(args.data, args.header, args.copula_scale)
    model = select_structure_and_fit(u, args.estimator, args.criterion, options)
    report = model.report()
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "model.json"), "w") as fh:
        json.dump(model.to_dict(), fh)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"estimator {report['estimator']}  criterion {report['criterion']}  n {report['nobs']}")
    print(f"loglik {report['loglik']:.4f}  edf {report['edf']:.4f}  fit calls {report['fit_calls']}")
    _emit([[str(r["tree"]), r["edge"], r["loglik"], r["edf"], r["caic"]] for r in report["edges"]],
          ["tree", "edge", "loglik", "edf", "caic"], False)
    return EXIT_OK


def crossval(u, n_train, n_test, repeats, estimators, criteria, seed=0, options=None):
    """Out-of-sample mean log-likelihood over random disjoint splits.

    Returns
    -------
    dict (estimator, criterion) -> list of per-repeat values
    """
    n = u.shape[0]
    if n < n_train + n_test:
        raise DataError(f"need {n_train + n_test} rows, data has {n}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    out = {(e, c): [] for e in estimators for c in criteria}
    for _ in range(repeats):
        perm = rng.permutation(n)
        tr, te = perm[:n_train], perm[n_train:n_train + n_test]
        assert not set(tr.tolist()) & set(te.tolist()), "train and test overlap"
        for e in estimators:
            for c in criteria:
                model = select_structure_and_fit(u[tr], e, c, (options or {}).get(e))
                out[(e, c)].append(oos_loglik(model, u[te]))
    return out


def cmd_crossval(args):
    options = _parse_options(args.options)
    if options and any(k not in ESTIMATORS or not isinstance(v, dict) for k, v in options.items()):
        raise UsageError("--options must map estimator names to JSON objects")
    bad = [e for e in args.estimators if e not in ESTIMATORS]
    if bad:
        raise UsageError(f"unknown estimators {bad}")
    if min(args.train, args.test, args.repeats) < 1:
        raise UsageError("--train, --test and --repeats must be positive")
    u, _ = _load_data(args.data, args.header, args.copula_scale)
    res = crossval(u, args.train, args.test, args.repeats, args.estimators, args.criteria,
                   args.seed, options)
    rows = []
    for (e, c), vals in res.items():
        q25, q50, q75 = np.percentile(vals, [25, 50, 75])
        rows.append([e, c, float(np.mean(vals)), float(q25), float(q50), float(q75)])
    _emit(rows, ["estimator", "criterion", "mean", "q25", "median", "q75"], args.csv)
    return EXIT_OK


def cmd_rank(args):
    try:
        records = read_records(args.results)
    except OSError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise DataError(f"malformed results file: {exc}") from None
    if not records:
        raise DataError("results file has no records")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        per = scenario_ranks(records)
    for w in caught:
        print(str(w.message), file=sys.stderr)
    if not per:
        raise DataError("no scenario has finite results for every estimator")
    ests = sorted(next(iter(per.values())))
    avg = {e: float(np.mean([per[s][e] for s in per])) for e in ests}
    rows = [[e, avg[e]] for e in sorted(ests, key=lambda e: (avg[e], e))]
    _emit(rows, ["estimator", "average_rank"], args.csv)
    if not args.csv:
        print()
        med = scenario_medians(records)
        _emit([[s, e, v] for (s, e), v in med.items()], ["scenario", "estimator", "median_iae"],
              False)
    return EXIT_OK


def cmd_simulate(args):
    from .simulation import MODEL, SAMPLE, ScenarioConfig, draw_model, substream
    try:
        cfg = ScenarioConfig(args.d, args.n, args.dep_type, args.strength, 1, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    truth = draw_model(cfg, substream(cfg.seed, cfg.name, args.rep, MODEL), args.decay_from_zero)
    data = truth.sample(cfg.n, substream(cfg.seed, cfg.name, args.rep, SAMPLE))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "truth.json"), "w") as fh:
        fh.write(truth.to_json())
    write_csv_matrix(os.path.join(args.out, "sample.csv"), data,
                     [f"u{i + 1}" for i in range(cfg.d)])
    rows = [[str(e), truth.specs[e].family, str(truth.specs[e].rotation),
             float(truth.specs[e].theta), truth.taus[e]] for e in truth.structure.edges]
    _emit(rows, ["edge", "family", "rotation", "theta", "tau"], False)
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="npvine",
                                description="Nonparametric simplified vine copula estimation")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("benchmark", help="run a simulation benchmark from a JSON manifest")
    b.add_argument("--manifest", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_benchmark)

    def data_args(q, options_help):
        q.add_argument("--data", required=True, help="CSV file, one observation per row")
        q.add_argument("--header", action="store_true", help="first CSV row holds column names")
        q.add_argument("--copula-scale", action="store_true",
                       help="data already lie in (0, 1); skip the rank transform")
        q.add_argument("--options", help=options_help)

    f = sub.add_parser("fit", help="select and fit a vine copula to one dataset")
    data_args(f, "JSON object of estimator options, e.g. '{\"K\": 8}'")
    f.add_argument("--estimator", required=True, choices=ESTIMATORS)
    f.add_argument("--criterion", default="tau", choices=CRITERIA)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("crossval", help="out-of-sample log-likelihood over random splits")
    data_args(c, "JSON object mapping estimators to their options, "
                 "e.g. '{\"pspl2\": {\"K\": 8}}'")
    c.add_argument("--train", type=int, required=True)
    c.add_argument("--test", type=int, required=True)
    c.add_argument("--repeats", type=int, default=100)
    c.add_argument("--estimators", nargs="+", default=list(ESTIMATORS))
    c.add_argument("--criteria", nargs="+", default=["tau"], choices=CRITERIA)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--csv", action="store_true")
    c.set_defaults(func=cmd_crossval)

    r = sub.add_parser("rank", help="average ranks from a benchmark results CSV")
    r.add_argument("--results", required=True)
    r.add_argument("--csv", action="store_true")
    r.set_defaults(func=cmd_rank)

    s = sub.add_parser("simulate", help="draw a true model and a sample from it")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dep-type", required=True, choices=("TailOnly", "NoTail", "Both"))
    s.add_argument("--strength", required=True, choices=("Weak", "Strong"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rep", type=int, default=0)
    s.add_argument("--decay-from-zero", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
