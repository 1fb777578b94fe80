import time

import numpy as np

from coevnet.core import ModelParams
from coevnet.em import FitConfig, fit
from coevnet.estep import EStepConfig
from coevnet.generator import GenConfig, benchmark_params, generate_sequence, hub_config
from coevnet.metrics import influence_ranking


def outlier_config(N=16, K=2, T=8, seed=0, eta_sq=0.02):
    params = benchmark_params(N, K, beta=0.05, eta_sq=eta_sq, prior_var=1.0)
    params.beta[0] = 0.9
    return GenConfig(N=N, K=K, T=T, params=params, seed=seed,
                     peakedness=0.9, role_anchored_init=True)


CAP = dict(max_em_iters=12, estep=EStepConfig(max_sweeps=60))

print("=== C8a: beta outlier ===", flush=True)
t0 = time.time()
hits = 0
for seed in range(10):
    truth = generate_sequence(outlier_config(seed=seed))
    report = fit(truth.network, FitConfig(K=2, restarts=1, seed=0, **CAP))
    top = int(np.argmax(report.params.beta))
    hits += top == 0
    print(f"  seed={seed} argmax={top} beta0={report.params.beta[0]:.3f} "
          f"others_max={np.delete(report.params.beta, 0).max():.3f}", flush=True)
print(f"C8a: {hits}/10 in {time.time()-t0:.1f}s", flush=True)

print("=== C8b: hub ranking ===", flush=True)
t0 = time.time()
hits = 0
for seed in range(10):
    truth = generate_sequence(hub_config(seed=seed))
    report = fit(truth.network, FitConfig(K=2, restarts=1, seed=0, **CAP))
    rank = influence_ranking(report.params, report.vs, truth.network)
    hits += int(rank.order[0]) == 0
    print(f"  seed={seed} top={int(rank.order[0])} "
          f"score_hub={rank.scores[0]:.2f} score_max_other={np.delete(rank.scores, 0).max():.2f}",
          flush=True)
print(f"C8b: {hits}/10 in {time.time()-t0:.1f}s", flush=True)
