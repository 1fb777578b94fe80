import time

import numpy as np

from coevnet.em import FitConfig, fit
from coevnet.estep import EStepConfig
from coevnet.generator import GenConfig, benchmark_params, generate_sequence

CAP = dict(max_em_iters=12, estep=EStepConfig(max_sweeps=60))


def design_c(seed, N=16, pk=0.85, eta=0.05, pv=0.5, bd=0.95, bo=0.05):
    params = benchmark_params(N, 2, beta=0.05, eta_sq=eta, prior_var=pv,
                              b_diag=bd, b_off=bo)
    params.beta[0] = 0.9
    return GenConfig(N=N, K=2, T=8, params=params, seed=seed,
                     peakedness=pk, role_anchored_init=True)


print("=== design C variants ===", flush=True)
for pk, eta, pv in ((0.85, 0.05, 0.5), (0.8, 0.1, 1.0)):
    t0 = time.time()
    hits = 0
    for seed in range(6):
        truth = generate_sequence(design_c(seed, pk=pk, eta=eta, pv=pv))
        report = fit(truth.network, FitConfig(K=2, restarts=1, seed=0, **CAP))
        top = int(np.argmax(report.params.beta))
        hits += top == 0
        b = report.params.beta
        print(f"  pk={pk} eta={eta} pv={pv} seed={seed} argmax={top} "
              f"b0={b[0]:.3f} omax={np.delete(b, 0).max():.3f} "
              f"omed={np.median(np.delete(b, 0)):.3f}", flush=True)
    print(f"pk={pk} eta={eta} pv={pv}: {hits}/6 in {time.time()-t0:.1f}s",
          flush=True)
