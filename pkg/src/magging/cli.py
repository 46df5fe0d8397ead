"""Command-line front end.

Subcommands: `simulate` (write a synthetic dataset), `fit` (group, fit,
aggregate), `oracle` (maximin point of a support file), `certify` (check
the aggregation-error bound on a simulated dataset), `figure` (emit tidy
plot data for the two standard experiments).

Exit codes: 0 success (and: bound holds, for certify), 1 bound violated,
2 malformed input or configuration, 3 estimator failure, 4 solver failure.
Data goes to --out (stdout if omitted or "-"); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .aggregate import (
    LEAVEOUT_LOO,
    LEAVEOUT_OOB,
    StackingConfig,
    magging,
    mean_aggregate,
    stacked_aggregate,
)
from .errors import EstimatorError, InputError, MaggingError, SolverError
from .estimators import EstimatorSpec, fit_ensemble, fit_pooled
from .groups import consecutive_blocks, known_groups, random_subsample, rng_from_path
from .oracle import SupportSpec, error_bound_certificate, maximin_point, maximin_point_grid
from .simplex_qp import DEFAULT_TOL
from .simulate import (
    MIXTURE_SCENARIOS,
    SCENARIO_PERIODIC,
    MixtureSimConfig,
    PeriodicSimConfig,
    simulate_mixture,
    simulate_periodic,
)

FIGURE_EXPERIMENTS = ("fig3", "robustness")
FIGURE_MAX_SHOWN_GROUPS = 11


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def parse_estimator_spec(text: str) -> EstimatorSpec:
    parts = text.split(":")
    try:
        if parts[0] == "ols" and len(parts) == 1:
            return EstimatorSpec.ols()
        if parts[0] == "ridge" and len(parts) == 2:
            return EstimatorSpec.ridge(float(parts[1]))
        if parts[0] == "lasso" and len(parts) == 1:
            return EstimatorSpec.lasso()
        if parts[0] == "lasso" and len(parts) == 2:
            return EstimatorSpec.lasso(float(parts[1]))
    except ValueError as e:
        raise InputError(f"bad estimator spec {text!r}: {e}") from e
    raise InputError(
        f"bad estimator spec {text!r}; expected ols, ridge:LAM, or lasso[:LAM]"
    )


def build_grouping(spec: str, n: int, labels, seed: int):
    parts = spec.split(":")
    try:
        if parts[0] == "known" and len(parts) == 1:
            if labels is None:
                raise InputError(
                    "grouping 'known' needs a group column in the input CSV"
                )
            return known_groups(labels)
        if parts[0] == "blocks" and len(parts) == 2:
            return consecutive_blocks(n, int(parts[1]))
        if parts[0] == "subsample" and len(parts) == 2:
            G, m = (int(v) for v in parts[1].split(","))
            return random_subsample(n, G, m, seed=seed)
    except InputError:
        raise
    except ValueError as e:
        raise InputError(f"bad group spec {spec!r}: {e}") from e
    raise InputError(
        f"bad group spec {spec!r}; expected known, blocks:G, or subsample:G,m"
    )


def parse_scheme(text: str, leaveout: str):
    """Scheme token -> callable(ensemble, X, Y, tol) -> AggregationResult."""
    parts = text.split(":")
    if text == "mean":
        return lambda ens, X, Y, tol: mean_aggregate(ens)
    if text == "magging":
        return lambda ens, X, Y, tol: magging(ens, tol=tol)
    if text == "pooled":
        def run_pooled(ens, X, Y, tol):
            from .aggregate import AggregationResult

            theta = fit_pooled(X, Y, ens.spec)
            return AggregationResult(
                theta=theta, weights=np.zeros(0), scheme="pooled"
            )

        return run_pooled
    if parts[0] == "stack":
        try:
            if len(parts) == 2 and parts[1] in ("convex", "sign"):
                cfg = StackingConfig(constraint=parts[1], leaveout=leaveout)
            elif len(parts) == 3 and parts[1] == "ridge":
                cfg = StackingConfig(
                    constraint="ridge", radius=float(parts[2]), leaveout=leaveout
                )
            else:
                raise ValueError("unrecognised stacking variant")
        except ValueError as e:
            raise InputError(f"bad scheme {text!r}: {e}") from e
        return lambda ens, X, Y, tol: stacked_aggregate(ens, Y, cfg, tol=tol)
    raise InputError(
        f"bad scheme {text!r}; expected mean, magging, pooled, stack:convex, "
        "stack:sign, or stack:ridge:S"
    )


def cmd_simulate(args) -> int:
    try:
        if args.scenario == SCENARIO_PERIODIC:
            cfg = PeriodicSimConfig(
                n_per_group=args.n_per_group, G=args.G, dict_size=args.dict_size,
                common_components=args.common_components,
                per_group_components=args.per_group_components,
                noise_sd=args.noise_sd, seed=args.seed,
            )
            out = simulate_periodic(cfg)
        else:
            cfg = MixtureSimConfig(
                n=args.n, p=args.p, G=args.G, scenario=args.scenario,
                noise_sd=args.noise_sd, coefficient_scale=args.coefficient_scale,
                contamination_fraction=args.contamination_fraction, seed=args.seed,
            )
            out = simulate_mixture(cfg)
    except ValueError as e:
        raise InputError(str(e)) from e
    csv_path, meta_path = dataio.save_dataset(out, args.out)
    print(f"wrote {csv_path} and {meta_path}", file=sys.stderr)
    return 0


def _fit_results_csv(results: list[dict]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["scheme", "kind", "index", "value"])
    for res in results:
        for j, v in enumerate(res["weights"]):
            writer.writerow([res["scheme"], "weight", j, dataio.format_float(v)])
        for j, v in enumerate(res["theta"]):
            writer.writerow([res["scheme"], "theta", j, dataio.format_float(v)])
        for name, v in res["diagnostics"].items():
            writer.writerow([res["scheme"], "diagnostic", name, dataio.format_float(v)])
    return buf.getvalue()


def cmd_fit(args) -> int:
    X, Y, labels = dataio.load_table(args.input)
    if args.add_intercept:
        X = dataio.add_intercept_column(X)
    if args.standardize:
        X = dataio.scale_columns(X)
    grouping = build_grouping(args.groups, X.shape[0], labels, args.seed)
    spec = parse_estimator_spec(args.estimator)
    schemes = args.scheme or ["mean", "magging"]
    runners = [(s, parse_scheme(s, args.leaveout)) for s in schemes]
    ens = fit_ensemble(X, Y, grouping, spec)
    results = [runner(ens, X, Y, args.tol).to_json_dict() for _, runner in runners]
    payload = {
        "ensemble": {
            "n": int(X.shape[0]),
            "p": int(X.shape[1]),
            "G": grouping.G,
            "estimator": spec.to_json_dict(),
            "grouping": grouping.to_json_dict(),
        },
        "results": results,
    }
    if args.format == "csv":
        _write_output(_fit_results_csv(results), args.out)
    else:
        _write_output(_json_text(payload), args.out)
    return 0


def cmd_oracle(args) -> int:
    points = dataio.load_matrix(args.support)
    sigma = dataio.load_matrix(args.sigma, expected_cols=points.shape[1])
    try:
        spec = SupportSpec(points=points, sigma=sigma)
    except ValueError as e:
        raise InputError(str(e)) from e
    point, sol = maximin_point(spec, tol=args.tol, return_weights=True)
    report = {
        "maximin": [float(v) for v in point],
        "weights": [float(v) for v in sol.w],
        "sigma_norm_sq": float(sol.objective),
        "gap": float(sol.gap),
    }
    if args.grid_check:
        if spec.p > 3:
            raise InputError("--grid-check needs dimension <= 3")
        grid_point = maximin_point_grid(spec, grid_step=args.grid_step)
        report["grid_maximin"] = [float(v) for v in grid_point]
        report["grid_step"] = args.grid_step
    _write_output(_json_text(report), args.out)
    return 0


def cmd_certify(args) -> int:
    meta_path = args.meta
    data = dataio.load_dataset(args.input, meta_path)
    if data.true_B.size == 0:
        raise InputError("dataset metadata carries no ground-truth coefficients")
    spec = parse_estimator_spec(args.estimator)
    ens = fit_ensemble(data.X, data.Y, data.grouping, spec)
    result = magging(ens, tol=args.tol)
    try:
        support = SupportSpec(points=data.group_truths(), sigma=data.sigma_true)
    except ValueError as e:
        raise InputError(str(e)) from e
    cert = error_bound_certificate(ens, support, result, tol=args.tol)
    _write_output(_json_text(cert.to_json_dict()), args.out)
    return 0 if cert.holds else 1


def _tidy_series_csv(rows: list[tuple]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["series", "t", "value"])
    for series, t, value in rows:
        writer.writerow([series, t, dataio.format_float(value)])
    return buf.getvalue()


def _figure_fig3(seed: int, tol: float) -> str:
    sim = simulate_periodic(PeriodicSimConfig(seed=seed))
    P = sim.config["n_per_group"]
    D = sim.X[:P]
    spec = EstimatorSpec.ols()
    ens = fit_ensemble(sim.X, sim.Y, sim.grouping, spec)
    shown = min(sim.grouping.G, FIGURE_MAX_SHOWN_GROUPS)
    rows: list[tuple] = []
    for t in range(P):
        rows.append(("common_signal", t, sim.common_signal[t]))
    for g in range(shown):
        block = sim.grouping.groups[g]
        for t in range(P):
            rows.append((f"recording_{g + 1:02d}", t, sim.Y[block[t]]))
    estimates = ens.thetas @ D.T
    for g in range(shown):
        for t in range(P):
            rows.append((f"estimate_{g + 1:02d}", t, estimates[g, t]))
    aggregates = [
        ("pooled", fit_pooled(sim.X, sim.Y, spec)),
        ("mean", mean_aggregate(ens).theta),
        ("magging", magging(ens, tol=tol).theta),
    ]
    for name, theta in aggregates:
        curve = D @ theta
        for t in range(P):
            rows.append((name, t, curve[t]))
    return _tidy_series_csv(rows)


def _figure_robustness(seed: int, tol: float) -> str:
    rng = rng_from_path(seed, 7)
    k = 6
    points = np.column_stack(
        [rng.uniform(0.6, 2.5, size=k), rng.uniform(-2.0, 2.0, size=k)]
    )
    sigma = np.eye(2)
    spec = SupportSpec(points=points, sigma=sigma)
    before = maximin_point(spec, tol=tol)
    perp = np.array([-before[1], before[0]])
    preserving = 3.0 * before + 1.5 * perp
    moving = -before
    after_preserving = maximin_point(spec.extended(preserving), tol=tol)
    after_moving = maximin_point(spec.extended(moving), tol=tol)
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["series", "index", "x1", "x2"])

    def emit(series: str, pts: np.ndarray) -> None:
        for j, pt in enumerate(np.atleast_2d(pts)):
            writer.writerow(
                [series, j, dataio.format_float(pt[0]), dataio.format_float(pt[1])]
            )

    emit("support", points)
    emit("maximin_before", before)
    emit("added_preserving", preserving)
    emit("maximin_after_preserving", after_preserving)
    emit("added_moving", moving)
    emit("maximin_after_moving", after_moving)
    return buf.getvalue()


def cmd_figure(args) -> int:
    if args.experiment == "fig3":
        text = _figure_fig3(args.seed, args.tol)
    else:
        text = _figure_robustness(args.seed, args.tol)
    _write_output(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magging",
        description="Maximin aggregation for heterogeneous regression data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a synthetic dataset")
    p_sim.add_argument(
        "--scenario", required=True,
        choices=list(MIXTURE_SCENARIOS) + [SCENARIO_PERIODIC],
    )
    p_sim.add_argument("--n", type=int, default=1000)
    p_sim.add_argument("--p", type=int, default=5)
    p_sim.add_argument("--G", type=int, default=10)
    p_sim.add_argument("--noise-sd", type=float, default=1.0)
    p_sim.add_argument("--coefficient-scale", type=float, default=1.0)
    p_sim.add_argument("--contamination-fraction", type=float, default=0.0)
    p_sim.add_argument("--n-per-group", type=int, default=300)
    p_sim.add_argument("--dict-size", type=int, default=100)
    p_sim.add_argument("--common-components", type=int, default=2)
    p_sim.add_argument("--per-group-components", type=int, default=7)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="output path prefix")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="group, fit, and aggregate a dataset")
    p_fit.add_argument("input", help="dataset CSV (y,x1..xp[,group])")
    p_fit.add_argument("--groups", default="blocks:10",
                       help="known | blocks:G | subsample:G,m")
    p_fit.add_argument("--estimator", default="lasso",
                       help="ols | ridge:LAM | lasso[:LAM]")
    p_fit.add_argument("--scheme", action="append",
                       help="mean | magging | pooled | stack:convex | "
                            "stack:sign | stack:ridge:S (repeatable)")
    p_fit.add_argument("--leaveout", choices=[LEAVEOUT_LOO, LEAVEOUT_OOB],
                       default=LEAVEOUT_LOO)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p_fit.add_argument("--format", choices=["json", "csv"], default="json")
    p_fit.add_argument("--add-intercept", action="store_true")
    p_fit.add_argument("--standardize", action="store_true")
    p_fit.add_argument("--out")
    p_fit.set_defaults(func=cmd_fit)

    p_oracle = sub.add_parser("oracle", help="maximin point of a support file")
    p_oracle.add_argument("support", help="headerless CSV, one point per row")
    p_oracle.add_argument("sigma", help="headerless CSV covariance matrix")
    p_oracle.add_argument("--grid-check", action="store_true",
                          help="cross-check with the grid oracle (p <= 3)")
    p_oracle.add_argument("--grid-step", type=float, default=0.01)
    p_oracle.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p_oracle.add_argument("--out")
    p_oracle.set_defaults(func=cmd_oracle)

    p_cert = sub.add_parser(
        "certify", help="check the aggregation-error bound on simulated data"
    )
    p_cert.add_argument("input", help="dataset CSV or prefix from `simulate`")
    p_cert.add_argument("--meta", help="metadata path (default: <input>.meta.json)")
    p_cert.add_argument("--estimator", default="ols")
    p_cert.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p_cert.add_argument("--out")
    p_cert.set_defaults(func=cmd_certify)

    p_fig = sub.add_parser("figure", help="emit tidy plot data")
    p_fig.add_argument("experiment", choices=list(FIGURE_EXPERIMENTS))
    p_fig.add_argument("--seed", type=int, default=0)
    p_fig.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p_fig.add_argument("--out")
    p_fig.set_defaults(func=cmd_figure)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except EstimatorError as e:
        print(f"estimator error: {e}", file=sys.stderr)
        return 3
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 4
    except MaggingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
