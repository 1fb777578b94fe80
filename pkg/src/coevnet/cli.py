"""Command-line interface: generate, fit, eval, build-senate, compare.

Every run is deterministic given its arguments, including --seed; output
files are byte-identical across repeats and across COEVNET_THREADS
settings. Usage errors exit 2, runtime failures exit 1 with one JSON error
line on stderr, success exits 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import NumericalError
from .em import (
    FitConfig,
    align_roles,
    apply_role_alignment,
    fit,
    static_baseline_fit,
)
from .estep import EStepConfig
from .generator import GenConfig, benchmark_params, generate_sequence
from .io import (
    build_cosponsorship_network,
    load_edge_sequence,
    load_fit_report,
    load_ground_truth,
    load_scores_csv,
    load_sponsorship_records,
    save_edge_sequence,
    save_fit_report,
    save_ground_truth,
    save_metrics_csv,
)
from .metrics import (
    influence_ranking,
    polarization_series,
    score_correlation,
    trajectory_l2_error,
)


def _cmd_generate(args):
    w = None
    if args.hub is not None:
        w = np.ones((args.n, args.n))
        w[:, args.hub] = args.hub_weight
        np.fill_diagonal(w, 0.0)
    params = benchmark_params(
        args.n,
        args.k,
        b_diag=args.b_diag,
        b_off=args.b_off,
        beta=args.beta,
        eta_sq=args.eta_sq,
        prior_var=args.prior_var,
        rho=args.rho,
        w=w,
    )
    config = GenConfig(
        N=args.n,
        K=args.k,
        T=args.t,
        params=params,
        seed=args.seed,
        peakedness=args.peakedness,
        role_anchored_init=not args.flat_init,
    )
    truth = generate_sequence(config)
    os.makedirs(args.out, exist_ok=True)
    net_path = os.path.join(args.out, "network.tsv")
    truth_path = os.path.join(args.out, "truth.json")
    save_edge_sequence(net_path, truth.network)
    save_ground_truth(truth_path, truth)
    print(f"wrote {net_path}")
    print(f"wrote {truth_path}")
    return 0


def _fit_config(args):
    estep = EStepConfig()
    if args.estep_sweeps is not None:
        estep.max_sweeps = args.estep_sweeps
    if args.estep_tol is not None:
        estep.phi_tol = args.estep_tol
        estep.gamma_tol = args.estep_tol
        estep.sigma_tol = args.estep_tol
    return FitConfig(
        K=args.k,
        restarts=args.restarts,
        max_em_iters=args.max_iters,
        em_tol=args.em_tol,
        seed=args.seed,
        rho=args.rho,
        learn_influence=not args.no_influence,
        estep=estep,
    )


def _cmd_fit(args):
    net = load_edge_sequence(args.network)
    config = _fit_config(args)
    report = static_baseline_fit(net, config) if args.static else fit(net, config)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "fit.json")
    save_fit_report(path, report)
    print(f"wrote {path}")
    print(f"final_elbo={report.elbo_trace[-1]!r} converged={report.converged}")
    return 0


def _polarization_rows(traj, group_size):
    series = polarization_series(traj, group_size)
    rows = []
    prev = None
    for t, gap in enumerate(series):
        if prev is None:
            direction = "-"
        elif gap > prev + 1e-12:
            direction = "up"
        elif gap < prev - 1e-12:
            direction = "down"
        else:
            direction = "flat"
        rows.append((t, float(gap), direction))
        prev = gap
    return rows


def _aligned_error(report, truth_pi):
    per_time = bool(report.flags.get("baseline"))
    perms = align_roles(report.trajectories, truth_pi, per_time=per_time)
    aligned = apply_role_alignment(report.trajectories, perms)
    return trajectory_l2_error(aligned, truth_pi)


def _cmd_eval(args):
    report = load_fit_report(args.report)
    S, N = report.trajectories.shape[0], report.trajectories.shape[1]
    os.makedirs(args.out, exist_ok=True)
    written = []

    group = args.group_size if args.group_size is not None else min(14, N // 2)
    pol_path = os.path.join(args.out, "polarization.csv")
    save_metrics_csv(
        pol_path, ["t", "gap", "direction"], _polarization_rows(report.trajectories, group)
    )
    written.append(pol_path)

    if args.truth is not None:
        truth = load_ground_truth(args.truth)
        if truth["pi"].shape != report.trajectories.shape:
            raise ValueError("truth and report dimensions do not match")
        err = _aligned_error(report, truth["pi"])
        err_path = os.path.join(args.out, "l2_error.csv")
        save_metrics_csv(
            err_path, ["t", "error"], [(t, float(e)) for t, e in enumerate(err)]
        )
        written.append(err_path)

    if args.scores is not None:
        if report.node_labels is None:
            raise ValueError("report carries no node labels; cannot join scores")
        scores = load_scores_csv(args.scores, report.node_labels, S)
        corr = score_correlation(report.trajectories, scores)
        rows = [
            (t, float(r) if np.isfinite(r) else "", int(np.isfinite(scores.values[t]).sum()))
            for t, r in enumerate(corr.per_time)
        ]
        rows.append(("pooled", float(corr.pooled), corr.n_pairs))
        corr_path = os.path.join(args.out, "correlation.csv")
        save_metrics_csv(corr_path, ["t", "r", "n"], rows)
        written.append(corr_path)
        if corr.flipped:
            print("note: role orientation flipped to make pooled r nonnegative")

    if args.network is not None:
        if isinstance(report.params, list):
            raise ValueError("influence ranking needs a dynamic fit, not a baseline")
        net = load_edge_sequence(args.network)
        ranking = influence_ranking(report.params, report.vs, net)
        labels = report.node_labels or [str(i) for i in range(N)]
        rows = [
            (rank, labels[q], float(ranking.scores[q]), float(ranking.beta[q]))
            for rank, q in enumerate(ranking.order)
        ]
        inf_path = os.path.join(args.out, "influence.csv")
        save_metrics_csv(inf_path, ["rank", "node", "score", "beta"], rows)
        written.append(inf_path)

    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_build_senate(args):
    records = load_sponsorship_records(args.records)
    net = build_cosponsorship_network(records, threshold=args.threshold)
    save_edge_sequence(args.out, net)
    n_edges = int(net.snapshots.sum())
    print(f"wrote {args.out}")
    print(f"snapshots={net.T + 1} nodes={net.N} edges={n_edges}")
    return 0


def _cmd_compare(args):
    net = load_edge_sequence(args.network)
    truth = load_ground_truth(args.truth)
    config = _fit_config(args)

    full = fit(net, config)
    base = static_baseline_fit(net, config)
    if truth["pi"].shape != full.trajectories.shape:
        raise ValueError("truth and network dimensions do not match")

    full_err = _aligned_error(full, truth["pi"])
    base_err = _aligned_error(base, truth["pi"])

    os.makedirs(args.out, exist_ok=True)
    save_fit_report(os.path.join(args.out, "full.json"), full)
    save_fit_report(os.path.join(args.out, "baseline.json"), base)
    rows = []
    for t in range(len(full_err)):
        if full_err[t] < base_err[t] - 1e-12:
            winner = "full"
        elif base_err[t] < full_err[t] - 1e-12:
            winner = "baseline"
        else:
            winner = "tie"
        rows.append((t, float(full_err[t]), float(base_err[t]), winner))
    cmp_path = os.path.join(args.out, "comparison.csv")
    save_metrics_csv(cmp_path, ["t", "full_error", "baseline_error", "winner"], rows)
    print(f"wrote {cmp_path}")
    wins = sum(1 for r in rows if r[3] == "full")
    print(f"full model wins {wins} of {len(rows)} steps")
    return 0


def _add_fit_flags(p):
    p.add_argument("--k", type=int, required=True, help="number of roles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--em-tol", type=float, default=1e-6)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--no-influence", action="store_true", help="keep beta and w fixed")
    p.add_argument("--estep-sweeps", type=int, default=None)
    p.add_argument("--estep-tol", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coevnet",
        description="Co-evolving mixed-membership network model: simulate, fit, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a network and save it with its ground truth")
    g.add_argument("--n", type=int, required=True, help="number of nodes")
    g.add_argument("--k", type=int, required=True, help="number of roles")
    g.add_argument("--t", type=int, required=True, help="number of transitions")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--peakedness", type=float, default=0.9)
    g.add_argument("--b-diag", type=float, default=0.9)
    g.add_argument("--b-off", type=float, default=0.1)
    g.add_argument("--beta", type=float, default=0.1)
    g.add_argument("--eta-sq", type=float, default=0.1)
    g.add_argument("--prior-var", type=float, default=3.0)
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--flat-init", action="store_true", help="draw all initial means from one prior")
    g.add_argument("--hub", type=int, default=None, help="give this node a large raw weight")
    g.add_argument("--hub-weight", type=float, default=8.0)
    g.set_defaults(func=_cmd_generate)

    f = sub.add_parser("fit", help="fit the model to an edge-sequence file")
    f.add_argument("--network", required=True)
    f.add_argument("--out", default=".")
    f.add_argument("--static", action="store_true", help="independent per-snapshot fits")
    _add_fit_flags(f)
    f.set_defaults(func=_cmd_fit)

    e = sub.add_parser("eval", help="metric tables from a fit report")
    e.add_argument("--report", required=True)
    e.add_argument("--out", default=".")
    e.add_argument("--truth", default=None, help="ground-truth JSON for trajectory error")
    e.add_argument("--scores", default=None, help="node,time,score CSV for correlation")
    e.add_argument("--network", default=None, help="edge sequence for influence ranking")
    e.add_argument("--group-size", type=int, default=None, help="nodes per polarization group")
    e.set_defaults(func=_cmd_eval)

    b = sub.add_parser("build-senate", help="cosponsorship records to an edge sequence")
    b.add_argument("--records", required=True)
    b.add_argument("--threshold", type=int, default=3)
    b.add_argument("--out", required=True, help="output edge-sequence path")
    b.set_defaults(func=_cmd_build_senate)

    c = sub.add_parser("compare", help="full model vs static baseline on labeled data")
    c.add_argument("--network", required=True)
    c.add_argument("--truth", required=True)
    c.add_argument("--out", default=".")
    _add_fit_flags(c)
    c.set_defaults(func=_cmd_compare)
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, NumericalError) as exc:
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(line, file=sys.stderr)
        return 1


main = cli_main

if __name__ == "__main__":
    sys.exit(main())
