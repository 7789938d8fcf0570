"""Fit/CI pipelines shared by the CLI and the Monte-Carlo coverage harness."""

from __future__ import annotations

import math
import warnings

import numpy as np

from hawkes_uq.ci_asymptotic import ConfidenceReport, asymptotic_ci, combine
from hawkes_uq.ci_concentration import concentration_ci, exact_membership
from hawkes_uq.errors import SingularFisher
from hawkes_uq.likelihood import NodeModel, empirical_fisher
from hawkes_uq.mle import fit_node
from hawkes_uq.parallel import parallel_map
from hawkes_uq.simulate import child_seed, simulate

METHODS = ("asymptotic", "concentration")


def _asymptotic_row(seq, i, mu_i, row, alpha_hat, epsilon) -> ConfidenceReport:
    D = seq.D
    fisher = empirical_fisher(NodeModel(i, mu_i, alpha_hat, row), seq)
    try:
        return asymptotic_ci(alpha_hat, fisher, seq.T, epsilon, D, node=i)
    except SingularFisher:
        nan = np.full((1, D), np.nan)
        return ConfidenceReport(
            "asymptotic", epsilon, [i], alpha_hat[None, :], nan, nan.copy(), flags={"singular_fisher": [i]}
        )


def node_reports(seq, params, i, epsilon, methods=METHODS, opts=None, check_endpoints=False):
    """Fit node ``i`` once and build the requested CI reports from the same estimate."""
    row = params.kernel_row(i)
    mu_i = float(params.mu[i])
    alpha_hat, diag = fit_node(seq, i, mu_i, row, opts)
    out = {}
    if "asymptotic" in methods:
        rep = _asymptotic_row(seq, i, mu_i, row, alpha_hat, epsilon)
        rep.diagnostics["fit"] = [diag.to_dict()]
        out["asymptotic"] = rep
    if "concentration" in methods:
        rep = concentration_ci(seq, i, mu_i, row, epsilon, alpha_hat=alpha_hat, check_endpoints=check_endpoints)
        rep.diagnostics["fit"] = [diag.to_dict()]
        out["concentration"] = rep
    return out


def ci_reports(seq, params, epsilon, methods=METHODS, nodes=None, opts=None, check_endpoints=False, workers=None):
    """Per-method reports over the requested nodes (all by default)."""
    nodes = list(range(seq.D)) if nodes is None else list(nodes)
    jobs = [(seq, params, i, epsilon, tuple(methods), opts, check_endpoints) for i in nodes]
    per_node = parallel_map(_node_job, jobs, workers=workers)
    return {m: combine([r[m] for r in per_node]) for m in methods}


def _node_job(job):
    return node_reports(*job)


def width_comparison(asym: ConfidenceReport, conc: ConfidenceReport) -> list[dict]:
    """Concentration minus asymptotic width for every entry both reports cover."""
    out = []
    for r, i in enumerate(asym.rows):
        rc = conc.row(i)
        for j in range(asym.point.shape[1]):
            wa = float(asym.width[r, j])
            wc = float(conc.width[rc, j])
            out.append(
                {
                    "i": int(i),
                    "j": int(j),
                    "asymptotic_width": wa,
                    "concentration_width": wc,
                    "difference": wc - wa,
                    "narrower": bool(wc < wa),
                }
            )
    return out


# --------------------------------------------------------------------------
# coverage


def coverage_replication(params, T, epsilon, seed, r, opts=None) -> dict:
    """One simulated dataset: both CI types for every node, checked against the truth."""
    seq = simulate(params, T, child_seed(seed, r))
    D = params.D
    A = params.A
    res = {
        "rep": r,
        "n_events": len(seq),
        "asym_cover": np.zeros((D, D), bool),
        "conc_cover": np.zeros((D, D), bool),
        "asym_width": np.full((D, D), np.nan),
        "conc_width": np.full((D, D), np.nan),
        "vector_member": np.zeros(D, bool),
        "flags": [],
    }
    for i in range(D):
        row = params.kernel_row(i)
        mu_i = float(params.mu[i])
        reps = node_reports(seq, params, i, epsilon, opts=opts)
        ra, rc = reps["asymptotic"], reps["concentration"]
        res["asym_cover"][i] = ra.covers(A)[0]
        res["conc_cover"][i] = rc.covers(A)[0]
        res["asym_width"][i] = ra.width[0]
        res["conc_width"][i] = rc.width[0]
        res["vector_member"][i] = exact_membership(A[i], seq, i, mu_i, row, epsilon)
        for key, vals in list(ra.flags.items()) + list(rc.flags.items()):
            if vals:
                res["flags"].append(f"{key}@{i}")
    return res


def _coverage_job(job):
    return coverage_replication(*job)


def run_coverage(params, T, n_reps, epsilon, seed, opts=None, workers=None) -> list[dict]:
    if n_reps < 50:
        warnings.warn(f"n_reps={n_reps} is small; coverage estimates will be noisy", stacklevel=2)
    jobs = [(params, T, epsilon, seed, r, opts) for r in range(n_reps)]
    return parallel_map(_coverage_job, jobs, workers=workers)


def _ratio(a, b):
    ok = np.isfinite(a) & np.isfinite(b) & (b > 0)
    return float(np.mean(a[ok] / b[ok])) if np.any(ok) else math.nan


COVERAGE_COLUMNS = [
    "scope",
    "rep",
    "i",
    "j",
    "n",
    "asym_coverage",
    "conc_coverage",
    "conc_vector_coverage",
    "asym_width",
    "conc_width",
    "width_ratio",
    "flags",
]


def coverage_table(results: list[dict]) -> list[dict]:
    """Replication rows, per-entry rows, and one aggregate row."""
    rows = []
    for res in results:
        rows.append(
            {
                "scope": "replication",
                "rep": res["rep"],
                "i": "",
                "j": "",
                "n": res["n_events"],
                "asym_coverage": float(res["asym_cover"].mean()),
                "conc_coverage": float(res["conc_cover"].mean()),
                "conc_vector_coverage": float(res["vector_member"].mean()),
                "asym_width": float(np.nanmean(res["asym_width"])),
                "conc_width": float(np.nanmean(res["conc_width"])),
                "width_ratio": _ratio(res["conc_width"], res["asym_width"]),
                "flags": ";".join(res["flags"]),
            }
        )
    ac = np.array([r["asym_cover"] for r in results])
    cc = np.array([r["conc_cover"] for r in results])
    aw = np.array([r["asym_width"] for r in results])
    cw = np.array([r["conc_width"] for r in results])
    vm = np.array([r["vector_member"] for r in results])
    n = len(results)
    D = ac.shape[1]
    for i in range(D):
        for j in range(D):
            rows.append(
                {
                    "scope": "entry",
                    "rep": "",
                    "i": i,
                    "j": j,
                    "n": n,
                    "asym_coverage": float(ac[:, i, j].mean()),
                    "conc_coverage": float(cc[:, i, j].mean()),
                    "conc_vector_coverage": float(vm[:, i].mean()),
                    "asym_width": float(np.nanmean(aw[:, i, j])) if np.any(np.isfinite(aw[:, i, j])) else math.nan,
                    "conc_width": float(np.nanmean(cw[:, i, j])) if np.any(np.isfinite(cw[:, i, j])) else math.nan,
                    "width_ratio": _ratio(cw[:, i, j], aw[:, i, j]),
                    "flags": "",
                }
            )
    rows.append(
        {
            "scope": "aggregate",
            "rep": "",
            "i": "",
            "j": "",
            "n": n,
            "asym_coverage": float(ac.mean()),
            "conc_coverage": float(cc.mean()),
            "conc_vector_coverage": float(vm.mean()),
            "asym_width": float(np.nanmean(aw)),
            "conc_width": float(np.nanmean(cw)),
            "width_ratio": _ratio(cw.ravel(), aw.ravel()),
            "flags": str(sum(1 for r in results if r["flags"])),
        }
    )
    return rows


# --------------------------------------------------------------------------
# edge recovery


def recover_edges(rep: ConfidenceReport, truth=None) -> dict:
    """Edge ``j -> i`` is declared when the interval for ``A[i, j]`` lies strictly above 0."""
    D = rep.point.shape[1]
    adj = np.zeros((D, D), dtype=int)
    edges = []
    for i, j, _point, lo, hi in rep.entries():
        if np.isfinite(lo) and lo > 0:
            adj[i, j] = 1
            edges.append({"source": int(j), "target": int(i), "lo": float(lo), "hi": float(hi)})
    out = {
        "method": rep.method,
        "level": rep.level,
        "rule": "ci_lower_bound_positive",
        "edges": edges,
        "adjacency": adj.tolist(),
    }
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        non_covered = []
        for i, j, point, lo, hi in rep.entries():
            a = truth[i, j]
            if not (lo <= a <= hi):
                non_covered.append(
                    {"i": int(i), "j": int(j), "lo": float(lo), "hi": float(hi), "point": float(point), "truth": float(a)}
                )
        zero = sum(1 for e in non_covered if e["truth"] == 0.0)
        false_edges = int(sum(adj[i, j] for i in rep.rows for j in range(D) if truth[i, j] == 0))
        tested_zero = int(sum(1 for i in rep.rows for j in range(D) if truth[i, j] == 0))
        out["truth_view"] = {
            "non_covered": non_covered,
            "n_entries": int(len(rep.rows) * D),
            "n_non_covered": len(non_covered),
            "n_non_covered_true_zero": zero,
            "non_covered_true_zero_fraction": (zero / len(non_covered)) if non_covered else None,
            "false_edges": false_edges,
            "true_zero_entries": tested_zero,
        }
    return out
