"""``hawkes-uq`` command line interface."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np

from hawkes_uq import io
from hawkes_uq.analytic import summary
from hawkes_uq.errors import ConfigError, HawkesError, NonStationary
from hawkes_uq.experiments import (
    COVERAGE_COLUMNS,
    METHODS,
    ci_reports,
    coverage_table,
    recover_edges,
    run_coverage,
    width_comparison,
)
from hawkes_uq.likelihood import NodeModel, loglik
from hawkes_uq.mle import SolverOptions, fit_all
from hawkes_uq.process import EventSequence, manifest_path, read_events, write_events
from hawkes_uq.simulate import simulate

fmt = io.fmt


def _nodes(text: str | None, D: int):
    if text is None:
        return None
    try:
        nodes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--nodes: expected comma-separated integers, got {text!r}") from None
    bad = [i for i in nodes if not 0 <= i < D]
    if bad:
        raise ConfigError(f"--nodes: {bad} out of range for D={D}")
    return nodes


def _events(args, params, T_cfg) -> EventSequence:
    try:
        if os.path.exists(manifest_path(args.events)):
            seq = read_events(args.events)
        else:
            seq = read_events(args.events, T=T_cfg, D=params.D)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if seq.D != params.D:
        raise ConfigError(f"{args.events}: events have D={seq.D} but config has D={params.D}")
    if args.horizon is not None:
        if not args.horizon > 0:
            raise ConfigError("--horizon must be > 0")
        seq = seq.with_horizon(args.horizon)
    return seq


def _opts(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_iters=args.max_iters)


def _epsilon(eps: float) -> float:
    if not 0 < eps < 1:
        raise ConfigError(f"--epsilon must lie in (0, 1), got {eps}")
    return eps


def _write(obj, path, schema=None):
    if schema is not None:
        io.validate(_jsonable(obj), schema)
    if path is None or path == "-":
        sys.stdout.write(io.dumps(obj))
    else:
        io.write_json(obj, path)


def _jsonable(obj):
    # schemas are checked against what a reader would parse back
    return json.loads(io.dumps(obj))


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    params, T = io.load_config(args.config)
    if args.horizon is not None:
        T = args.horizon
    if params.explosive:
        raise NonStationary(f"branching spectral radius {params.spectral_radius:.6g} >= 1")
    seq = simulate(params, T, args.seed)
    if args.out is None:
        raise ConfigError("--out is required for simulate")
    write_events(seq, args.out)
    print(f"spectral_radius {fmt(params.spectral_radius)}")
    try:
        lam = np.linalg.solve(np.eye(params.D) - params.branching_matrix(), params.mu)
        print("expected_Lambda " + " ".join(fmt(x) for x in lam))
    except np.linalg.LinAlgError:
        pass
    print(f"events {len(seq)}")
    return 0


def cmd_fit(args) -> int:
    params, T = io.load_config(args.config)
    seq = _events(args, params, T)
    nodes = _nodes(args.nodes, params.D)
    A_hat, diags = fit_all(seq, params.mu, params.kernels, _opts(args), nodes=nodes)
    fitted = list(range(params.D)) if nodes is None else nodes
    ll = [None] * params.D
    for i in fitted:
        ll[i] = loglik(NodeModel(i, float(params.mu[i]), A_hat[i], params.kernel_row(i)), seq)
    out = {
        "D": params.D,
        "T": seq.T,
        "nodes": fitted,
        "A_hat": A_hat,
        "loglik": ll,
        "diagnostics": [d.to_dict() for d in diags],
    }
    _write(out, args.out, "fit")
    return 0


def cmd_ci(args) -> int:
    params, T = io.load_config(args.config)
    seq = _events(args, params, T)
    eps = _epsilon(args.epsilon)
    methods = METHODS if args.method == "both" else (args.method,)
    nodes = _nodes(args.nodes, params.D)
    reps = ci_reports(seq, params, eps, methods=methods, nodes=nodes, opts=_opts(args))
    out = {"reports": [io.report_to_dict(reps[m]) for m in methods]}
    if args.method == "both":
        out["width_comparison"] = width_comparison(reps["asymptotic"], reps["concentration"])
    _write(out, args.out, "ci_bundle")
    return 0


def cmd_coverage(args) -> int:
    params, T = io.load_config(args.config)
    if args.horizon is not None:
        T = args.horizon
    eps = _epsilon(args.epsilon)
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    if args.reps < 50:
        print(f"warning: --reps {args.reps} < 50; coverage estimates will be noisy", file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = run_coverage(params, T, args.reps, eps, args.seed, opts=_opts(args))
    rows = coverage_table(results)
    if args.out is None:
        raise ConfigError("--out is required for coverage")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COVERAGE_COLUMNS)
        for r in rows:
            w.writerow([_cell(r[c]) for c in COVERAGE_COLUMNS])
    agg = rows[-1]
    print(
        f"aggregate asym_coverage {fmt(agg['asym_coverage'])} conc_coverage {fmt(agg['conc_coverage'])} "
        f"conc_vector_coverage {fmt(agg['conc_vector_coverage'])} width_ratio {fmt(agg['width_ratio'])}"
    )
    return 0


def _cell(v):
    if isinstance(v, float):
        return "nan" if np.isnan(v) else fmt(v)
    return v


def _load_report(path: str, method: str | None):
    obj = io.read_json(path)
    if "reports" in obj:
        pool = obj["reports"]
        if method not in (None, "both"):
            pool = [r for r in pool if r.get("method") == method]
        if not pool:
            raise ConfigError(f"{path}: no report with method {method!r}")
        # prefer the proposed method when a bundle holds both
        pool = sorted(pool, key=lambda r: r.get("method") != "concentration")
        obj = pool[0]
    return io.report_from_dict(obj)


def cmd_recover(args) -> int:
    rep = _load_report(args.events, args.method)
    truth = io.load_truth(args.truth) if args.truth else None
    if truth is not None and truth.shape != (rep.point.shape[1],) * 2:
        raise ConfigError(f"{args.truth}: truth matrix shape {truth.shape} does not match D={rep.point.shape[1]}")
    _write(recover_edges(rep, truth), args.out, "recover")
    return 0


def cmd_report(args) -> int:
    params, _ = io.load_config(args.config)
    _write(summary(params).to_dict(), args.out, "summary")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hawkes-uq", description="Hawkes network inference with confidence sets")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, config=True, events=False):
        if config:
            sp.add_argument("--config", required=True, help="experiment config JSON")
        if events:
            sp.add_argument("--events", required=True, help="event CSV (time,node)")
        sp.add_argument("--out", default=None, help="output path ('-' or omitted: stdout)")

    def solver(sp):
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iters", type=int, default=10_000)

    sp = sub.add_parser("simulate", help="simulate an event sequence")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=float, default=None, help="override the config T")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="maximum-likelihood estimate of A")
    common(sp, events=True)
    solver(sp)
    sp.add_argument("--nodes", default=None, help="comma-separated node ids")
    sp.add_argument("--horizon", type=float, default=None, help="use only events before this time")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("ci", help="confidence intervals for A")
    common(sp, events=True)
    solver(sp)
    sp.add_argument("--method", choices=["asymptotic", "concentration", "both"], default="both")
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--nodes", default=None)
    sp.add_argument("--horizon", type=float, default=None)
    sp.set_defaults(func=cmd_ci)

    sp = sub.add_parser("coverage", help="Monte-Carlo coverage experiment")
    common(sp)
    solver(sp)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=float, default=None, help="replication length (default: config T)")
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("recover", help="edge list from a CI report")
    sp.add_argument("--events", required=True, help="CI report JSON (output of 'ci')")
    sp.add_argument("--out", default=None)
    sp.add_argument("--truth", default=None, help="config or matrix JSON holding the true A")
    sp.add_argument("--method", choices=["asymptotic", "concentration", "both"], default=None)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("report", help="stationary closed-form summary of a config")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HawkesError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
