"""M-step: exact coordinate maximizers of the bound over model parameters.

Role compatibility, transition variances, and the initial prior all have
closed forms. Susceptibility and raw influence weights have no closed form
because the weights enter through a per-neighborhood renormalization, so they
are raised by projected gradient ascent with a backtracking line search on
the transition term (the only part of the bound they touch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import VAR_FLOOR
from .elbo import (
    elbo_grad_influence,
    transition_moments,
    transition_structure,
    transition_term,
)


@dataclass
class MStepConfig:
    influence_step: float = 1e-2
    influence_iters: int = 100
    influence_min_step: float = 1e-12
    w_floor: float = 1e-10
    var_floor: float = VAR_FLOOR
    learn_weights: bool = True


def update_B(Y, vs, rho=0.0, prev_B=None, flags=None):
    """Role-compatibility update from expected pair statistics.

    Each cell is the expected link rate between the two roles, corrected for
    the sparsity scale (1 - rho) and clipped into [0, 1]. Cells whose
    expected pair mass is zero keep their previous value (recorded in
    ``flags`` when a dict is passed).
    """
    Y = np.asarray(Y)
    N = Y.shape[1]
    mask = ~np.eye(N, dtype=bool)
    sel = (slice(None), mask)
    num = np.einsum(
        "tm,tmg,tmh->gh",
        Y.astype(float)[sel],
        vs.phi_send[sel],
        vs.phi_recv[sel],
    )
    den = np.einsum("tmg,tmh->gh", vs.phi_send[sel], vs.phi_recv[sel])
    K = num.shape[0]
    if prev_B is None:
        prev_B = np.full((K, K), 0.5)
    zero = den <= 0.0
    B = np.where(zero, prev_B, num / np.where(zero, 1.0, den) / (1.0 - rho))
    if flags is not None and np.any(zero):
        flags["b_zero_cells"] = [tuple(ix) for ix in np.argwhere(zero)]
    return np.clip(B, 0.0, 1.0)


def update_eta(vs, params, Y, floor=VAR_FLOOR):
    """Transition variances: mean expected squared residual per component,
    averaged over the transitions that actually occurred, floored.

    ``floor`` defaults to the numerical floor; raising it regularizes fits
    where flexible trajectories would otherwise chase the transition model
    into a variance-collapse optimum."""
    Y = np.asarray(Y)
    if Y.shape[0] < 2:
        raise ValueError("need at least one transition to update variances")
    wts, bs = transition_structure(Y, params.w, params.beta)
    _, R, vsum = transition_moments(vs.gamma, vs.sigma, wts, bs)
    T, N = R.shape[0], R.shape[1]
    eta = (R**2 + vsum).sum(axis=(0, 1)) / (N * T)
    return np.maximum(eta, floor)


def update_prior(vs):
    """Initial prior: sample mean of the step-0 means and the matching
    per-component second moment (exact Gaussian MLE under q), floored."""
    alpha0 = vs.gamma[0].mean(axis=0)
    A = ((vs.gamma[0] - alpha0) ** 2 + vs.sigma[0] ** 2).mean(axis=0)
    return alpha0, np.maximum(A, VAR_FLOOR)


def _project(beta, w, w_floor):
    # Snapping sub-floor weights to zero keeps structural zeros intact; a
    # floor that lifted them would flip empty neighborhoods into active ones
    # and change the objective discontinuously.
    beta = np.clip(beta, 0.0, 1.0)
    w = np.where(w < w_floor, 0.0, w)
    np.fill_diagonal(w, 0.0)
    return beta, w


def rescale_weights(w, Y):
    """Fix the per-node scale freedom: weights over each node's union of
    ever-active neighbors sum to the size of that union. Renormalized
    weights, and hence the bound, are unchanged."""
    w = w.copy()
    union = np.asarray(Y).max(axis=0) > 0
    for p in range(w.shape[0]):
        act = union[p]
        total = w[p, act].sum()
        if act.any() and total > 0.0:
            w[p, act] *= act.sum() / total
    return w


def update_influence(Y, vs, params, config=None):
    """Projected gradient ascent on the transition term over (beta, w).

    Every accepted step increases the bound; the returned weights are
    rescaled to the documented per-node convention afterwards, which leaves
    the bound untouched.
    """
    cfg = config or MStepConfig()
    Y = np.asarray(Y)
    if Y.shape[0] < 2:
        return params.beta.copy(), params.w.copy()

    gamma, sigma = vs.gamma, vs.sigma
    beta = params.beta.copy()
    w = params.w.copy()
    work = params.copy()

    def objective(b, ww):
        wts, bs = transition_structure(Y, ww, b)
        return transition_term(gamma, sigma, wts, bs, params.sigma_mu)

    current = objective(beta, w)
    step = cfg.influence_step
    for _ in range(cfg.influence_iters):
        work.beta, work.w = beta, w
        dbeta, dw = elbo_grad_influence(Y, vs, work)
        gnorm = max(np.abs(dbeta).max(), np.abs(dw).max())
        if gnorm < 1e-12:
            break
        improved = False
        while step >= cfg.influence_min_step:
            cand_beta, cand_w = _project(beta + step * dbeta, w + step * dw, cfg.w_floor)
            val = objective(cand_beta, cand_w)
            if val > current + 1e-14 * abs(current):
                beta, w, current = cand_beta, cand_w, val
                step *= 1.5
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return beta, rescale_weights(w, Y)
