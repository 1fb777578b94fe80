import time

import numpy as np

from coevnet.em import (
    FitConfig, align_roles, apply_role_alignment, fit, static_baseline_fit,
)
from coevnet.estep import EStepConfig
from coevnet.generator import benchmark_config, generate_sequence
from coevnet.metrics import trajectory_l2_error


def aligned_err(report, truth_pi, per_time):
    perms = align_roles(report.trajectories, truth_pi, per_time=per_time)
    aligned = apply_role_alignment(report.trajectories, perms)
    return trajectory_l2_error(aligned, truth_pi)


CAP = dict(max_em_iters=15, estep=EStepConfig(max_sweeps=80))

for beta in (0.1, 0.2):
    for N, b_diag, b_off, eta_sq, pk in (
        (24, 0.8, 0.2, 0.02, 0.9),
        (20, 0.85, 0.15, 0.05, 0.9),
    ):
        t0 = time.time()
        results = []
        for seed in range(5):
            cfg = benchmark_config(
                N=N, K=2, T=7, seed=seed, peakedness=pk,
                b_diag=b_diag, b_off=b_off, beta=beta, eta_sq=eta_sq,
                prior_var=1.0,
            )
            truth = generate_sequence(cfg)
            fc = FitConfig(K=2, restarts=1, seed=0, **CAP)
            full = fit(truth.network, fc)
            base = static_baseline_fit(truth.network, fc)
            fe = aligned_err(full, truth.memberships.pi, per_time=False)
            be = aligned_err(base, truth.memberships.pi, per_time=True)
            wins = int(np.sum(fe <= be))
            results.append(wins)
        print(
            f"beta={beta} N={N} B=({b_diag},{b_off}) eta={eta_sq}: "
            f"wins per seed {results} time={time.time()-t0:.1f}s",
            flush=True,
        )
