"""Command-line interface: ``ppdepth <subcommand> ...``.

Exit status is 0 on success and 2 on invalid input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings

import numpy as np

from .analysis import (
    LikelihoodClassifier,
    MaxDepthClassifier,
    contour_grid,
    gof_table,
    loo_r_search,
    rank,
)
from .core import TimeDomain, read_dataset, render_dataset
from .depth import (
    CONDITIONAL_KINDS,
    PointProcessDepth,
    load_model,
    save_model,
)
from .exceptions import ValidationError
from .rescale import estimate_intensity, read_intensity, write_intensity
from .simulate import simulate_hpp, simulate_ipp

log = logging.getLogger("ppdepth")


def _seed(args):
    env = os.environ.get("PPDEPTH_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"PPDEPTH_SEED must be an integer, got {env!r}") from None
    return args.seed


def _domain(args):
    if args.t1 is None and args.t2 is None:
        return None
    if args.t1 is None or args.t2 is None:
        raise ValidationError("give both --t1 and --t2")
    return TimeDomain(args.t1, args.t2)


def _open_out(path):
    if path is None or path == "-":
        return _NoClose(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="\n")


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()


def _fmt(x):
    return repr(float(x))


# --------------------------------------------------------------------------


def cmd_simulate(args):
    seed = _seed(args)
    if args.process == "hpp":
        data = simulate_hpp(args.rate, TimeDomain(args.t1, args.t2), args.n, seed)
    else:
        data = simulate_ipp(read_intensity(args.intensity), args.n, seed)
    with _open_out(args.output) as fh:
        fh.write(render_dataset(data))


def cmd_fit(args):
    data = read_dataset(args.data, _domain(args))
    est = PointProcessDepth(
        kind=args.kind, r=args.r, cardinality=args.cardinality, n_components=args.components,
        K=args.K, n_bootstrap=args.B, bins=args.bins, bandwidth=args.bandwidth,
        repair_means=args.repair_means, random_state=_seed(args),
    ).fit(data)
    save_model(est.model_, args.output)
    if args.intensity_out and args.kind == "ts-dirichlet":
        write_intensity(est.model_.conditional.intensity, args.intensity_out)
    log.info("fitted %s model on %d realizations (K=%d)", args.kind, len(data), est.K_)


def _load_for_model(args):
    model = load_model(args.model)
    return model, read_dataset(args.data, model.domain)


def cmd_depth(args):
    model, data = _load_for_model(args)
    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "cardinality", "weight", "conditional_depth", "depth"])
        for i, s in enumerate(data.realizations):
            wt, c, d = model.components(s)
            w.writerow([i, s.cardinality(), _fmt(wt), _fmt(c), _fmt(d)])


def cmd_rank(args):
    model, data = _load_for_model(args)
    report = rank(data, model)
    with _open_out(args.output) as fh:
        fh.write(report.to_csv(top=args.top))


def _classifier_params(args, kind):
    return dict(kind=kind, r=args.r, cardinality=args.cardinality, n_components=args.components,
                K=args.K, n_bootstrap=args.B, bins=args.bins, bandwidth=args.bandwidth,
                repair_means=args.repair_means, force=args.force, random_state=_seed(args))


def cmd_classify(args):
    domain = _domain(args)
    train = read_dataset(args.train, domain)
    test = read_dataset(args.test, domain or train.domain)
    if train.labels is None or test.labels is None:
        raise ValidationError("classify needs labelled train and test files")

    clf = MaxDepthClassifier(**_classifier_params(args, args.kind)).fit(train)
    methods = [(args.kind, clf)]
    if args.baseline == "likelihood":
        methods.append(("likelihood", LikelihoodClassifier(args.bins, args.bandwidth).fit(train)))
    elif args.baseline == "mahalanobis":
        methods.append(("mahalanobis",
                        MaxDepthClassifier(**_classifier_params(args, "mahalanobis")).fit(train)))

    preds = {name: m.predict(test) for name, m in methods}
    truth = list(test.labels)
    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"] + [f"pred_{name}" for name, _ in methods])
        for i, lab in enumerate(truth):
            w.writerow([i, lab] + [preds[name][i] for name, _ in methods])

    out = sys.stdout if args.output not in (None, "-") else sys.stderr
    out.write("method,accuracy\n")
    for name, _ in methods:
        acc = float(np.mean([p == t for p, t in zip(preds[name], truth)]))
        out.write(f"{name},{acc:.4f}\n")

    if args.r_grid:
        grid = [float(x) for x in args.r_grid.split(",") if x.strip()]
        params = _classifier_params(args, args.kind)
        params.pop("r")
        table = loo_r_search(train, grid, **params)
        out.write("r,loo_accuracy\n")
        for r, acc in table.items():
            out.write(f"{r!r},{acc:.4f}\n")


def cmd_gof(args):
    model, data = _load_for_model(args)
    if args.intensity:
        intensity = read_intensity(args.intensity)
    elif model.kind == "ts-dirichlet":
        intensity = model.conditional.intensity
    else:
        intensity = estimate_intensity(data)
    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "cardinality", "conditional_depth", "depth", "ks_statistic", "p_value"])
        for i, k, c, d, stat, p in gof_table(data, model, intensity):
            w.writerow([i, k, _fmt(c), _fmt(d), _fmt(stat), _fmt(p)])


def cmd_contour(args):
    domain = _domain(args) or TimeDomain(0.0, 1.0)
    means = cov = ridge = None
    kind = args.kind
    if args.model:
        model = load_model(args.model)
        domain = model.domain
        cond = model.conditional
        if cond.kind == "sample-dirichlet":
            kind, means = "sample-dirichlet", cond.table
        elif cond.kind == "mahalanobis":
            kind, means, cov, ridge = "mahalanobis", cond.means[2], cond.covariances[2], cond.ridges[2]
        else:
            kind = "hpp"
    grid = contour_grid(kind, args.resolution, domain, means=means, covariance=cov, ridge=ridge)
    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u1", "u2", "depth"])
        for u1, u2, d in grid:
            w.writerow([_fmt(u1), _fmt(u2), _fmt(d)])


# --------------------------------------------------------------------------


def _add_domain(p):
    p.add_argument("--t1", type=float, help="domain start (default: file header)")
    p.add_argument("--t2", type=float, help="domain end (default: file header)")


def _add_fit_options(p):
    p.add_argument("--r", type=float, default=1.0, help="exponent on the cardinality weight")
    p.add_argument("--K", type=int, help="count cap (default: max observed + 5)")
    p.add_argument("--B", type=int, default=10, help="bootstrap repetitions")
    p.add_argument("--bins", type=int, help="intensity histogram bins")
    p.add_argument("--bandwidth", type=float, help="intensity smoothing bandwidth (time units)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--components", type=int, help="Poisson-mixture size (default: BIC)")
    p.add_argument("--repair-means", action="store_true",
                   help="repair non-monotone bootstrap means instead of failing")


def build_parser():
    parser = argparse.ArgumentParser(prog="ppdepth", description="Dirichlet depths for temporal point processes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw Poisson-process realizations")
    simsub = sim.add_subparsers(dest="process", required=True)
    hpp = simsub.add_parser("hpp")
    hpp.add_argument("--rate", type=float, required=True)
    hpp.add_argument("--t1", type=float, default=0.0)
    hpp.add_argument("--t2", type=float, default=1.0)
    ipp = simsub.add_parser("ipp")
    ipp.add_argument("--intensity", required=True, help="two-column (t, intensity) file")
    for p in (hpp, ipp):
        p.add_argument("--n", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--output")
        p.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit a depth model and write it as JSON")
    fit.add_argument("--data", required=True)
    fit.add_argument("--kind", choices=CONDITIONAL_KINDS, default="sample-dirichlet")
    fit.add_argument("--cardinality", choices=("poisson", "empirical", "poisson-mixture"),
                     default="poisson")
    fit.add_argument("--intensity-out", help="also write the estimated intensity (ts-dirichlet)")
    fit.add_argument("-o", "--output", required=True)
    _add_domain(fit)
    _add_fit_options(fit)
    fit.set_defaults(func=cmd_fit)

    dep = sub.add_parser("depth", help="score realizations with a fitted model")
    dep.add_argument("--model", required=True)
    dep.add_argument("--data", required=True)
    dep.add_argument("-o", "--output")
    dep.set_defaults(func=cmd_depth)

    rk = sub.add_parser("rank", help="rank realizations by depth")
    rk.add_argument("--model", required=True)
    rk.add_argument("--data", required=True)
    rk.add_argument("--top", type=int)
    rk.add_argument("-o", "--output")
    rk.set_defaults(func=cmd_rank)

    cl = sub.add_parser("classify", help="maximum-depth classification with baselines")
    cl.add_argument("--train", required=True)
    cl.add_argument("--test", required=True)
    cl.add_argument("--kind", choices=CONDITIONAL_KINDS, default="ts-dirichlet")
    cl.add_argument("--cardinality", choices=("poisson", "empirical", "poisson-mixture"),
                    default="poisson-mixture")
    cl.add_argument("--baseline", choices=("likelihood", "mahalanobis"))
    cl.add_argument("--force", action="store_true", help="never abstain")
    cl.add_argument("--r-grid", help="comma-separated r values for a leave-one-out report")
    cl.add_argument("-o", "--output")
    _add_domain(cl)
    _add_fit_options(cl)
    cl.set_defaults(func=cmd_classify)

    gof = sub.add_parser("gof", help="depth against KS p-value of rescaled times")
    gof.add_argument("--model", required=True)
    gof.add_argument("--data", required=True)
    gof.add_argument("--intensity", help="intensity file for the KS test")
    gof.add_argument("-o", "--output")
    gof.set_defaults(func=cmd_gof)

    ct = sub.add_parser("contour", help="two-event depth over the IET simplex")
    ct.add_argument("--kind", choices=("hpp", "sample-dirichlet", "mahalanobis"), default="hpp")
    ct.add_argument("--model", help="take the k=2 conditional from a fitted model")
    ct.add_argument("--resolution", type=int, default=50)
    ct.add_argument("-o", "--output")
    _add_domain(ct)
    ct.set_defaults(func=cmd_contour)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except (ValidationError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"ppdepth: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
