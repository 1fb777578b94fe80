import time

import numpy as np

from coevnet.em import FitConfig, fit
from coevnet.estep import EStepConfig
from coevnet.generator import GenConfig, benchmark_params, generate_sequence

fc = FitConfig(K=2, restarts=1, seed=0, max_em_iters=12,
               estep=EStepConfig(max_sweeps=60))


def design_dp(seed):
    N = 40
    params = benchmark_params(N, 2, beta=0.05, eta_sq=0.15, prior_var=1.0,
                              b_diag=0.95, b_off=0.05)
    params.beta[0] = 0.9
    return GenConfig(N=N, K=2, T=10, params=params, seed=seed,
                     peakedness=0.75, role_anchored_init=True)


def design_e(seed):
    N, K = 24, 2
    w = np.zeros((N, N))
    members = np.arange(2, N)
    w[members, members % 2] = 1.0
    params = benchmark_params(N, K, beta=0.05, eta_sq=0.01, prior_var=0.04,
                              b_diag=0.9, b_off=0.1, w=w)
    params.beta[2] = 0.9
    init_means = np.zeros((N, K))
    gap = 3.0
    init_means[members, members % 2] = gap * 0.4
    init_means[0, 0] = gap
    init_means[1, 1] = gap
    return GenConfig(N=N, K=K, T=8, params=params, seed=seed,
                     init_means=init_means)


for name, make, target in (("D'", design_dp, 0), ("E", design_e, 2)):
    t0 = time.time()
    hits = 0
    for seed in range(4):
        truth = generate_sequence(make(seed))
        report = fit(truth.network, fc)
        b = report.params.beta
        top = int(np.argmax(b))
        hits += top == target
        others = np.delete(b, target)
        print(f"  {name} seed={seed} argmax={top} bt={b[target]:.3f} "
              f"omax={others.max():.3f} omed={np.median(others):.3f} "
              f"eta={report.params.sigma_mu.mean():.4f}", flush=True)
    print(f"{name}: {hits}/4 in {time.time()-t0:.1f}s", flush=True)
