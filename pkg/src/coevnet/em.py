"""Variational EM driver: restarts, coordinate updates, role alignment.

A fit alternates a monotone E-step (see ``estep``) with exact or
line-searched M-step coordinate updates (see ``mstep``), so the bound trace
is non-decreasing along every chain. Restart chains differ only in their
jittered spectral initialization; the winner is the chain with the highest
final bound, ties broken toward the lowest chain index, and its roles are
permuted to best match chain 0 so that reruns with more restarts stay
comparable.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DynamicNetwork, ModelParams, NumericalError
from .elbo import VariationalState, elbo
from .estep import EStepConfig, run_estep
from .mstep import MStepConfig, update_B, update_eta, update_influence, update_prior

MAX_ALIGN_ROLES = 8


@dataclass
class FitConfig:
    K: int
    restarts: int = 5
    max_em_iters: int = 100
    em_tol: float = 1e-6
    seed: int = 0
    rho: float = 0.0
    learn_influence: bool = True
    estep: EStepConfig = field(default_factory=EStepConfig)
    mstep: MStepConfig = field(default_factory=MStepConfig)
    init_jitter: float = 0.25
    init_beta: float = 0.5
    init_eta_sq: float = 0.5
    init_prior_var: float = 1.0
    init_B_diag: float = 0.6
    init_B_off: float = 0.3
    align_restarts: bool = True

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("need at least two roles")
        if self.restarts < 1:
            raise ValueError("need at least one restart chain")
        if min(self.em_tol, self.init_jitter) < 0.0:
            raise ValueError("tolerances must be nonnegative")


@dataclass
class ChainInit:
    params: ModelParams
    gamma: np.ndarray
    sigma: float = 0.5


@dataclass
class ChainResult:
    chain: int
    params: ModelParams
    state: VariationalState
    elbo_trace: list
    converged: bool
    n_iters: int
    estep_converged: bool
    max_sigma_resid: float
    max_gamma_grad: float
    flags: dict


@dataclass
class FitReport:
    params: object
    vs: object
    trajectories: np.ndarray
    elbo_trace: list
    converged: bool
    n_iters: int
    chain: int
    flags: dict
    node_labels: list = None

    @property
    def n_roles(self):
        return self.trajectories.shape[2]


def _kmeans_labels(points, k, n_iters=50):
    """Plain Lloyd clustering with deterministic farthest-first seeding;
    empty clusters are reseeded at the currently worst-fit point."""
    n = points.shape[0]
    centers = [points[int(np.argmax((points**2).sum(axis=1)))]]
    for _ in range(1, k):
        d2 = np.min([((points - c) ** 2).sum(axis=1) for c in centers], axis=0)
        centers.append(points[int(np.argmax(d2))])
    centers = np.array(centers)
    labels = np.full(n, -1)
    for _ in range(n_iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        new = d2.argmin(axis=1)
        for j in range(k):
            if not np.any(new == j):
                new[int(np.argmax(d2[np.arange(n), new]))] = j
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([points[labels == j].mean(axis=0) for j in range(k)])
    return labels


def spectral_init(Y, n_roles, rng, jitter=0.25):
    """Initial membership logits from spectral clustering of the
    time-averaged symmetrized adjacency: nodes are embedded by the top
    eigenvectors, clustered, and given a logit bump toward their cluster's
    role, replicated across steps with independent jitter."""
    Y = np.asarray(Y, dtype=float)
    S, N = Y.shape[0], Y.shape[1]
    avg = Y.mean(axis=0)
    sym = 0.5 * (avg + avg.T)
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(-np.abs(vals))[: min(n_roles, N)]
    emb = vecs[:, order] * np.sqrt(np.abs(vals[order]))[None, :]
    labels = _kmeans_labels(emb, n_roles)
    base = np.full((N, n_roles), -1.0)
    base[np.arange(N), labels] = 1.0
    gamma = np.tile(base, (S, 1, 1))
    return gamma + rng.normal(0.0, jitter, size=gamma.shape)


def default_chain_init(Y, config, chain):
    """Deterministic per-chain initialization: jittered spectral logits plus
    neutral parameter guesses. The salt keeps chain streams disjoint from
    generator streams built on the same seed."""
    Y = np.asarray(Y)
    N, K = Y.shape[1], config.K
    rng = np.random.default_rng([config.seed, 2147483587, chain])
    gamma = spectral_init(Y, K, rng, config.init_jitter)
    B = np.full((K, K), config.init_B_off)
    np.fill_diagonal(B, config.init_B_diag)
    w = np.ones((N, N))
    np.fill_diagonal(w, 0.0)
    params = ModelParams(
        B=B,
        beta=np.full(N, config.init_beta),
        w=w,
        sigma_mu=np.full(K, config.init_eta_sq),
        alpha0=np.zeros(K),
        A=np.full(K, config.init_prior_var),
        rho=config.rho,
    )
    return ChainInit(params=params, gamma=gamma, sigma=0.5)


def run_chain(Y, config, init=None, chain=0):
    """One EM chain. The trace interleaves post-E and post-M bound values;
    both kinds of step only ever raise the bound, so the trace is
    non-decreasing up to accumulated rounding."""
    Y = np.asarray(Y)
    if init is None:
        init = default_chain_init(Y, config, chain)
    params = init.params.copy()
    vs = VariationalState.from_gamma(init.gamma, init.sigma)

    trace = []
    flags = {}
    converged = False
    last = None
    res = None
    for it in range(config.max_em_iters):
        res = run_estep(Y, vs, params, config.estep)
        vs = res.vs
        trace.append(res.final_elbo)

        params.B = update_B(Y, vs, rho=params.rho, prev_B=params.B, flags=flags)
        params.alpha0, params.A = update_prior(vs)
        if Y.shape[0] > 1:
            params.sigma_mu = update_eta(vs, params, Y, floor=config.mstep.var_floor)
            if config.learn_influence:
                params.beta, params.w = update_influence(Y, vs, params, config.mstep)
        val = elbo(Y, vs, params, validate=False)
        trace.append(val)
        if last is not None and abs(val - last) <= config.em_tol * (1.0 + abs(last)):
            converged = True
            last = val
            break
        last = val

    return ChainResult(
        chain=chain,
        params=params,
        state=vs,
        elbo_trace=trace,
        converged=converged,
        n_iters=len(trace) // 2,
        estep_converged=res.converged,
        max_sigma_resid=res.max_sigma_resid,
        max_gamma_grad=res.max_gamma_grad,
        flags=flags,
    )


def _chain_worker(payload):
    """Runs one chain; numerical blowups come back as (chain, message) so
    the driver can report them without losing the surviving chains."""
    Y, config, chain = payload
    try:
        return run_chain(Y, config, chain=chain)
    except NumericalError as exc:
        return (chain, str(exc))


def _thread_count():
    raw = os.environ.get("COEVNET_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError("COEVNET_THREADS must be an integer") from exc
    return max(1, n)


def role_permutations(n_roles):
    if n_roles > MAX_ALIGN_ROLES:
        raise ValueError(f"role alignment supports at most {MAX_ALIGN_ROLES} roles")
    return list(itertools.permutations(range(n_roles)))


def best_role_permutation(traj, ref):
    """Permutation of the last axis of ``traj`` minimizing total squared
    distance to ``ref``. First minimizer in lexicographic order wins."""
    traj = np.asarray(traj)
    ref = np.asarray(ref)
    best, best_err = None, np.inf
    for perm in role_permutations(traj.shape[-1]):
        err = float(((traj[..., perm] - ref) ** 2).sum())
        if err < best_err:
            best, best_err = perm, err
    return best


def permute_params(params, perm):
    out = params.copy()
    idx = list(perm)
    out.B = out.B[np.ix_(idx, idx)]
    out.sigma_mu = out.sigma_mu[idx]
    out.alpha0 = out.alpha0[idx]
    out.A = out.A[idx]
    return out


def permute_state(vs, perm):
    idx = list(perm)
    return VariationalState(
        gamma=vs.gamma[..., idx],
        sigma=vs.sigma[..., idx],
        phi_send=vs.phi_send[..., idx],
        phi_recv=vs.phi_recv[..., idx],
        zeta=vs.zeta.copy(),
    )


def align_roles(trajectories, reference, per_time=False):
    """Role permutation(s) matching ``trajectories`` to ``reference``:
    one global permutation, or one per time step."""
    if per_time:
        return [
            best_role_permutation(trajectories[t], reference[t])
            for t in range(trajectories.shape[0])
        ]
    return best_role_permutation(trajectories, reference)


def apply_role_alignment(trajectories, perms):
    """Applies a global permutation, or a per-step list of them."""
    traj = np.asarray(trajectories)
    if isinstance(perms, list):
        return np.stack([traj[t][..., list(p)] for t, p in enumerate(perms)])
    return traj[..., list(perms)]


def fit(network, config):
    """Full variational EM fit with restarts.

    Chains run serially, or in separate processes when COEVNET_THREADS asks
    for more than one worker; chains are independently seeded, so the result
    is byte-identical either way.
    """
    if isinstance(network, DynamicNetwork):
        net = network
    else:
        net = DynamicNetwork(np.asarray(network))
    net.validate()
    Y = net.snapshots

    payloads = [(Y, config, c) for c in range(config.restarts)]
    threads = _thread_count()
    outcomes = None
    if threads > 1 and config.restarts > 1:
        try:
            with ProcessPoolExecutor(max_workers=min(threads, config.restarts)) as pool:
                outcomes = list(pool.map(_chain_worker, payloads))
        except OSError:
            outcomes = None
    if outcomes is None:
        outcomes = [_chain_worker(p) for p in payloads]

    results = [o for o in outcomes if isinstance(o, ChainResult)]
    failures = {c: msg for c, msg in ((o[0], o[1]) for o in outcomes if isinstance(o, tuple))}
    if not results:
        raise NumericalError("all restart chains diverged", state=failures)

    best = results[0]
    for res in results[1:]:
        if res.elbo_trace[-1] > best.elbo_trace[-1]:
            best = res

    params, state = best.params, best.state
    ref = results[0]
    aligned = False
    if config.align_restarts and best.chain != ref.chain and config.K <= MAX_ALIGN_ROLES:
        perm = best_role_permutation(
            state.trajectories(), ref.state.trajectories()
        )
        if perm != tuple(range(config.K)):
            params = permute_params(params, perm)
            state = permute_state(state, perm)
            aligned = True

    flags = dict(best.flags)
    flags.update(
        chain_elbos=[float(r.elbo_trace[-1]) for r in results],
        estep_converged=best.estep_converged,
        max_sigma_resid=best.max_sigma_resid,
        max_gamma_grad=best.max_gamma_grad,
        aligned_to_chain0=aligned,
    )
    if failures:
        flags["diverged_chains"] = failures
    return FitReport(
        params=params,
        vs=state,
        trajectories=state.trajectories(),
        elbo_trace=[float(v) for v in best.elbo_trace],
        converged=best.converged,
        n_iters=best.n_iters,
        chain=best.chain,
        flags=flags,
        node_labels=list(net.node_labels) if net.node_labels is not None else None,
    )


def static_baseline_fit(network, config):
    """Independent single-snapshot fits, one per time step.

    Time coupling is removed entirely, so roles at different steps live in
    arbitrary relative orientations; evaluation against a reference should
    align each step separately. Parameters are returned as a per-step list.
    """
    if isinstance(network, DynamicNetwork):
        net = network
    else:
        net = DynamicNetwork(np.asarray(network))
    net.validate()
    Y = net.snapshots
    S = Y.shape[0]

    reports = []
    for t in range(S):
        sub = replace(
            config,
            seed=config.seed + 7919 * (t + 1),
            learn_influence=False,
            init_beta=0.0,
        )
        reports.append(fit(Y[t : t + 1], sub))

    traj = np.concatenate([r.trajectories for r in reports], axis=0)
    gamma = np.concatenate([r.vs.gamma for r in reports], axis=0)
    sigma = np.concatenate([r.vs.sigma for r in reports], axis=0)
    phi_s = np.concatenate([r.vs.phi_send for r in reports], axis=0)
    phi_r = np.concatenate([r.vs.phi_recv for r in reports], axis=0)
    zeta = np.concatenate([r.vs.zeta for r in reports], axis=0)
    state = VariationalState(
        gamma=gamma, sigma=sigma, phi_send=phi_s, phi_recv=phi_r, zeta=zeta
    )
    return FitReport(
        params=[r.params for r in reports],
        vs=state,
        trajectories=traj,
        elbo_trace=[sum(r.elbo_trace[-1] for r in reports)],
        converged=all(r.converged for r in reports),
        n_iters=max(r.n_iters for r in reports),
        chain=0,
        flags={
            "baseline": True,
            "snapshot_elbos": [float(r.elbo_trace[-1]) for r in reports],
        },
        node_labels=list(net.node_labels) if net.node_labels is not None else None,
    )
