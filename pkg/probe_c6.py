import time

import numpy as np

from coevnet.em import FitConfig, align_roles, apply_role_alignment, fit
from coevnet.estep import EStepConfig
from coevnet.generator import benchmark_config, generate_sequence
from coevnet.metrics import trajectory_l2_error

for seed in (7, 0):
    truth = generate_sequence(benchmark_config(N=50, K=3, T=8, seed=seed))
    for restarts, iters, sweeps in ((1, 25, 150), (2, 25, 150)):
        t0 = time.time()
        report = fit(
            truth.network,
            FitConfig(K=3, restarts=restarts, seed=0, max_em_iters=iters,
                      estep=EStepConfig(max_sweeps=sweeps)),
        )
        dt = time.time() - t0
        perms = align_roles(report.trajectories, truth.memberships.pi)
        aligned = apply_role_alignment(report.trajectories, perms)
        err = trajectory_l2_error(aligned, truth.memberships.pi)
        Bh = report.params.B
        dom = all(
            Bh[g, g] > Bh[g, h]
            for g in range(3) for h in range(3) if g != h
        )
        print(
            f"seed={seed} restarts={restarts} iters={iters} sweeps={sweeps} "
            f"time={dt:.1f}s max_err={err.max():.4f} per_t={np.round(err, 3)} "
            f"diag_dom={dom} conv={report.converged} "
            f"estep_conv={report.flags.get('estep_converged')}",
            flush=True,
        )
