"""Command-line interface: ``macroatk <subcommand> ...``.

Exit codes: 0 success, 2 parse error, 3 numeric/contract violation,
4 search space too large.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import core
from . import io as mio
from .evaluation import DEFAULT_METRICS, audit_scores, metric_label, score_predictions
from .exceptions import ContractError, MacroAtKError, ParseError, SearchSpaceTooLargeError
from .fw import FWConfig, frank_wolfe, empirical_provider, split_dataset
from .linear import closed_form_strategy, estimate_priors, parse_strategy, strategy_name
from .metrics import (
    F1,
    DEFAULT_EPS,
    MetricId,
    instance_precision,
    macro_value,
    metric_name,
    parse_metric,
)
from .oracle import (
    APPENDIX_E_EPS,
    BUILTIN_DISTRIBUTIONS,
    best_deterministic,
    best_randomized_vertex_fw,
    coupling_witness,
)

log = logging.getLogger("macroatk")

EXIT_OK, EXIT_PARSE, EXIT_CONTRACT, EXIT_SEARCH = 0, 2, 3, 4


def _step_rule(text):
    return {"linesearch": "line_search", "line_search": "line_search", "fixed": "fixed"}[text]


def _fw_config(args):
    return FWConfig(max_iters=args.max_iters, stop_eps=args.eps, init=args.init,
                    step_rule=_step_rule(args.step), line_search_iters=args.line_search_iters,
                    seed=args.seed, metric_eps=args.metric_eps)


def _load_data(args):
    Y = mio.load_labels(args.labels)
    X = mio.load_marginals(args.marginals, args.kprime)
    if X.shape != Y.shape:
        raise ContractError(f"labels {Y.shape} and marginals {X.shape} differ in shape")
    return Y, X


def _fmt_assignment(assignment):
    return " | ".join("{" + ",".join(str(j) for j in labels) + "}" for labels in assignment)


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------


def _strategy_predictor(spec, args, prior_labels, m):
    """Return ``(name, randomized, predict(X, seed))`` for a strategy string."""
    if spec.startswith("fw:"):
        rclf = mio.load_classifier(spec[3:])
        if rclf.k != args.k or rclf.m != m:
            raise ContractError(f"classifier {spec[3:]} has k={rclf.k}, m={rclf.m}")
        randomized = len(rclf) > 1 and np.count_nonzero(rclf.weights) > 1

        def predict(X, seed):
            rng = core.make_rng(seed)
            if args.sampling == "madow":
                return core.madow_sample_rows(core.randomized_marginals(rclf, X), rng, k=args.k)
            return core.predict_randomized_batch(rclf, X, rng)

        return f"fw:{Path(spec[3:]).stem}", randomized, predict
    strategy = parse_strategy(spec)
    if strategy.needs_priors:
        priors = estimate_priors(prior_labels, add_count=args.prior_smoothing)
        clf = closed_form_strategy(strategy, priors, args.k)
    else:
        clf = closed_form_strategy(strategy, m, args.k)
    return strategy_name(strategy), False, lambda X, seed: core.predict_batch(clf, X)


def cmd_infer(args):
    Y, X = _load_data(args)
    prior_labels = mio.load_labels(args.prior_labels) if args.prior_labels else Y
    metrics = list(DEFAULT_METRICS) + [metric_name(parse_metric(s)) for s in args.metric or []]
    results = {}
    pred_dir = Path(args.predictions_dir) if args.predictions_dir else None
    if pred_dir:
        pred_dir.mkdir(parents=True, exist_ok=True)
    audit_failures = []
    strategies = [s for spec in args.strategy for s in spec.split(",") if s]
    for spec in strategies:
        name, randomized, predict = _strategy_predictor(spec, args, prior_labels, X.shape[1])
        cached = None
        for r in range(args.repeats):
            if randomized or cached is None:
                pred = predict(X, args.seed + r)
                scores = score_predictions(pred, Y, metrics)
                cached = (pred, scores)
            pred, scores = cached
            for metric, value in scores.items():
                results.setdefault((name, metric_label(metric, args.k)), []).append(value)
            if pred_dir:
                path = pred_dir / f"{name.replace(':', '_')}.r{r}.txt"
                mio.save_predictions(pred, path)
            if args.audit:
                audit_failures += _audit(pred, Y, scores, args.k, pred_dir, name, r)
    rows = mio.report_rows(results)
    _emit_report(rows, args.out)
    if audit_failures:
        for msg in audit_failures:
            log.error("audit mismatch: %s", msg)
        return EXIT_CONTRACT
    return EXIT_OK


def _audit(pred, Y, scores, k, pred_dir, name, r):
    if pred_dir:
        pred = mio.load_predictions(pred_dir / f"{name.replace(':', '_')}.r{r}.txt")
    to_rows = lambda M: [list(M.indices[M.indptr[i]:M.indptr[i + 1]]) for i in range(M.shape[0])]
    ref = audit_scores(to_rows(pred.tocsr()), to_rows(Y.tocsr()), Y.shape[1], k)
    failures = []
    for metric, value in ref.items():
        if metric in scores and abs(scores[metric] - value) > 1e-9:
            failures.append(f"{name} repeat {r} {metric}: {scores[metric]!r} != {value!r}")
    return failures


def _emit_report(rows, out):
    if out:
        mio.save_report(rows, out)
    else:
        print("\t".join(mio.REPORT_COLUMNS))
        for r in rows:
            print(f"{r['strategy']}\t{r['metric']}\t{r['mean']:.6f}\t{r['std']:.6f}\t{r['repeats']}")


# ---------------------------------------------------------------------------
# fw-train
# ---------------------------------------------------------------------------


def cmd_fw_train(args):
    Y, X = _load_data(args)
    _, (Y2, X2) = split_dataset(Y, X, args.split, seed=args.seed)
    metric = parse_metric(args.metric)
    provider = empirical_provider(X2, Y2)
    rclf, trace, _ = frank_wolfe(metric, provider, X2.shape[1], args.k, _fw_config(args))
    out = Path(args.out)
    mio.save_classifier(rclf, out)
    trace_path = Path(args.trace) if args.trace else out.with_suffix(".trace.tsv")
    mio.save_trace(trace, trace_path)
    log.info("%d components, final %s = %.6f", len(rclf), metric_name(metric), trace.objectives[-1])
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def cmd_sample(args):
    rng = core.make_rng(args.seed)
    X = mio.load_marginals(args.marginals)
    if args.classifier:
        rclf = mio.load_classifier(args.classifier)
        fractional = core.randomized_marginals(rclf, X)
        k = rclf.k
    else:
        fractional, k = X, args.k
    pred = core.madow_sample_rows(fractional, rng, k=k)
    mio.save_predictions(pred, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def _load_dist(spec):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN_DISTRIBUTIONS:
            raise ParseError(f"unknown builtin distribution {name!r}")
        return BUILTIN_DISTRIBUTIONS[name], True
    return mio.load_distribution(spec), False


def cmd_oracle(args):
    if args.check_appendix_e:
        report = coupling_witness(k=2, eps=APPENDIX_E_EPS if args.metric_eps is None else args.metric_eps)
        for name in report.values:
            print(f"{name}\tvalue={report.values[name]:.6f}\texpected={report.expected_values[name]:.6f}"
                  f"\tassignment={_fmt_assignment(report.assignments[name])}")
        print(f"values_match={report.values_match}\tassignments_match={report.assignments_match}"
              f"\tx1_flip={report.flip}\tdeterministic={report.deterministic}")
        return EXIT_OK if report.passed else EXIT_CONTRACT
    if not args.dist:
        raise ParseError("--dist is required unless --check-appendix-e is given")
    metric = parse_metric(args.metric)
    dist, builtin = _load_dist(args.dist)
    eps = args.metric_eps
    if eps is None:
        eps = APPENDIX_E_EPS if builtin else DEFAULT_EPS
    assignment, value = best_deterministic(metric, dist, args.k, eps=eps, limit=args.limit)
    print(f"metric\t{metric_name(metric)}@{args.k}")
    print(f"assignment\t{_fmt_assignment(assignment)}")
    print(f"value\t{value:.6f}")
    if args.randomized:
        mix = best_randomized_vertex_fw(metric, dist, args.k, iters=args.iters, eps=eps, limit=args.limit)
        print(f"randomized_value\t{mix.value:.6f}")
        for w, a in zip(mix.weights, mix.assignments):
            print(f"component\t{w:.6f}\t{_fmt_assignment(a)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# mixed-sweep
# ---------------------------------------------------------------------------


def mixed_sweep(marginals, labels, k, lambdas, inner=F1, cfg=None, eval_marginals=None,
                eval_labels=None):
    """Frank-Wolfe per ``lam`` on ``(1 - lam) * instance precision + lam * macro(inner)``.

    Returns rows ``(lam, instance precision, macro inner)`` computed from the
    expected confusion tensor of each mixture on the evaluation set.
    """
    cfg = cfg or FWConfig()
    ex = marginals if eval_marginals is None else eval_marginals
    ey = labels if eval_labels is None else eval_labels
    provider = empirical_provider(marginals, labels)
    rows = []
    for lam in sorted(lambdas):
        metric = MetricId("mixed", lam=float(lam), inner=inner)
        rclf, _, _ = frank_wolfe(metric, provider, marginals.shape[1], k, cfg)
        C = core.expected_confusion_randomized(rclf, ex, ey)
        rows.append((float(lam), instance_precision(C), macro_value(inner, C, cfg.metric_eps)))
    return rows


def cmd_mixed_sweep(args):
    Y, X = _load_data(args)
    _, (Y2, X2) = split_dataset(Y, X, args.split, seed=args.seed)
    lambdas = [float(s) for s in args.lambdas.split(",") if s.strip()]
    if any(not 0.0 <= lam <= 1.0 for lam in lambdas):
        raise ContractError("lambda values must lie in [0, 1]")
    inner = parse_metric(args.inner)
    rows = mixed_sweep(X2, Y2, args.k, lambdas, inner, _fw_config(args), X, Y)
    header = ("lambda", f"instp@{args.k}", f"macro-{metric_name(inner)}@{args.k}")
    if args.out:
        mio.save_table(header, rows, args.out)
    else:
        print("\t".join(header))
        for row in rows:
            print("\t".join(f"{v:.6f}" for v in row))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args):
    Y = mio.load_labels(args.labels)
    results = {}
    metrics = list(DEFAULT_METRICS) + [metric_name(parse_metric(s)) for s in args.metric or []]
    for path in args.predictions:
        pred = mio.load_predictions(path)
        if pred.shape != Y.shape:
            raise ContractError(f"{path}: predictions {pred.shape} vs labels {Y.shape}")
        k = core._row_budget(pred)
        for metric, value in score_predictions(pred, Y, metrics).items():
            results.setdefault((Path(path).stem, metric_label(metric, k)), []).append(value)
    _emit_report(mio.report_rows(results), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_data(p, required=True):
    p.add_argument("--labels", required=required, help="label file ('n m' header)")
    p.add_argument("--marginals", required=required, help="marginal file ('n m' header, j:p pairs)")
    p.add_argument("--kprime", type=int, default=mio.DEFAULT_KPRIME,
                   help="keep the k' largest marginals per row (default 200)")


def _add_fw(p):
    p.add_argument("--split", default="100", choices=["50", "75", "100"])
    p.add_argument("--init", default="topk", choices=["topk", "random"])
    p.add_argument("--step", default="linesearch", choices=["linesearch", "fixed"])
    p.add_argument("--eps", type=float, default=0.001, help="stop when the step is below eps")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--line-search-iters", type=int, default=60)
    p.add_argument("--metric-eps", type=float, default=DEFAULT_EPS, help="denominator smoothing")


def build_parser():
    parser = argparse.ArgumentParser(prog="macroatk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="apply strategies and report metrics at k")
    _add_data(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--strategy", action="append", required=True,
                   help="topk, macro-recall, bacc, pow[:beta], log or fw:<classifier.json>; repeatable")
    p.add_argument("--metric", action="append", help="extra metric to report (macro-averaged)")
    p.add_argument("--prior-labels", help="labels used to estimate priors (default: --labels)")
    p.add_argument("--prior-smoothing", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampling", default="component", choices=["component", "madow"],
                   help="how randomized classifiers are realized")
    p.add_argument("--predictions-dir", help="write every prediction matrix here")
    p.add_argument("--audit", action="store_true", help="rescore predictions independently")
    p.add_argument("--out", help="report path (TSV, plus a .json mirror)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("fw-train", help="run Frank-Wolfe and save the randomized classifier")
    _add_data(p)
    p.add_argument("--metric", required=True)
    p.add_argument("--k", type=int, required=True)
    _add_fw(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="classifier JSON")
    p.add_argument("--trace", help="trace TSV (default: <out>.trace.tsv)")
    p.set_defaults(func=cmd_fw_train)

    p = sub.add_parser("sample", help="Madow-sample k-hot predictions")
    p.add_argument("--marginals", required=True,
                   help="test marginals (with --classifier) or fractional predictions")
    p.add_argument("--classifier")
    p.add_argument("--k", type=int, help="budget of fractional rows (default: rounded row sum)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle", help="brute-force optimum on a tiny distribution")
    p.add_argument("--metric", default="jaccard")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--dist", help="distribution file or builtin:appendixE-A / builtin:appendixE-B")
    p.add_argument("--metric-eps", type=float, default=None,
                   help=f"denominator smoothing (default {APPENDIX_E_EPS:g} for builtins, {DEFAULT_EPS:g} otherwise)")
    p.add_argument("--randomized", action="store_true", help="also run vertex Frank-Wolfe")
    p.add_argument("--iters", type=int, default=10**4)
    p.add_argument("--limit", type=int, default=10**6)
    p.add_argument("--check-appendix-e", action="store_true",
                   help="verify the macro-Jaccard@2 label-coupling example")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("mixed-sweep", help="trade instance precision against a macro metric")
    _add_data(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambdas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
    p.add_argument("--inner", default="f1")
    _add_fw(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mixed_sweep)

    p = sub.add_parser("report", help="score saved prediction files")
    p.add_argument("--labels", required=True)
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--metric", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SearchSpaceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except (ContractError, MacroAtKError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
