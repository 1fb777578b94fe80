import time

import numpy as np

from coevnet.em import FitConfig, fit
from coevnet.estep import EStepConfig
from coevnet.generator import (
    GenConfig, benchmark_params, generate_sequence, two_bloc_config,
)

CAP = dict(max_em_iters=12, estep=EStepConfig(max_sweeps=60))


def design_a(seed):
    """Wide prior spread, tiny transition noise, mixed neighborhoods."""
    params = benchmark_params(
        16, 2, beta=0.05, eta_sq=0.004, prior_var=3.0, b_diag=0.9, b_off=0.4)
    params.beta[0] = 0.9
    return GenConfig(N=16, K=2, T=8, params=params, seed=seed,
                     peakedness=0.9, role_anchored_init=True)


def design_b(seed):
    """Anchored two-bloc tether with one fast follower (node 2)."""
    cfg = two_bloc_config(N=16, T=8, seed=seed, beta=0.05)
    cfg.params.beta[:] = 0.05
    cfg.params.beta[2] = 0.9
    return cfg


for name, make, target in (("A", design_a, 0), ("B", design_b, 2)):
    t0 = time.time()
    hits = 0
    for seed in range(6):
        truth = generate_sequence(make(seed))
        report = fit(truth.network, FitConfig(K=2, restarts=1, seed=0, **CAP))
        top = int(np.argmax(report.params.beta))
        hits += top == target
        b = report.params.beta
        others = np.delete(b, target)
        print(f"  {name} seed={seed} argmax={top} target_beta={b[target]:.3f} "
              f"others_max={others.max():.3f}", flush=True)
    print(f"{name}: {hits}/6 in {time.time()-t0:.1f}s", flush=True)
