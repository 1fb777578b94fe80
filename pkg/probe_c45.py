import time

import numpy as np

from coevnet.em import FitConfig, fit
from coevnet.estep import EStepConfig
from coevnet.generator import benchmark_config, generate_sequence

for iters, sweeps in ((20, 400), (15, 200)):
    total = 0.0
    ok = 0
    worst_resid = 0.0
    worst_grad = 0.0
    for seed in range(10):
        truth = generate_sequence(benchmark_config(N=20, K=2, T=5, seed=seed))
        t0 = time.time()
        report = fit(
            truth.network,
            FitConfig(K=2, restarts=1, seed=0, max_em_iters=iters,
                      estep=EStepConfig(max_sweeps=sweeps)),
        )
        dt = time.time() - t0
        total += dt
        trace = np.asarray(report.elbo_trace)
        mono = bool(np.all(np.diff(trace) >= -1e-8))
        conv = bool(report.flags.get("estep_converged"))
        resid = float(report.flags.get("max_sigma_resid"))
        grad = float(report.flags.get("max_gamma_grad"))
        worst_resid = max(worst_resid, resid)
        worst_grad = max(worst_grad, grad)
        ok += mono and conv and resid < 1e-10 and grad < 1e-6
        print(f"  seed={seed} t={dt:.1f}s mono={mono} conv={conv} "
              f"resid={resid:.2e} grad={grad:.2e}", flush=True)
    print(f"iters={iters} sweeps={sweeps}: {ok}/10 ok, total={total:.1f}s "
          f"worst resid={worst_resid:.2e} grad={worst_grad:.2e}", flush=True)
