"""Forward simulation of co-evolving memberships and links.

A run produces T+1 snapshots. Memberships start from a Gaussian prior over
natural parameters, each snapshot is sampled from the current memberships
through role-compatibility probabilities, and each transition blends a node's
parameters with the weighted mean of its realized out-neighbors before adding
Gaussian drift.

All randomness flows through a single seed: the per-phase generators are
spawned from one ``SeedSequence``, so a run is reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DynamicNetwork,
    MembershipState,
    ModelParams,
    RoleIndicators,
    normalized_weights,
    softmax_from_natural,
)


@dataclass
class GenConfig:
    """Simulation settings.

    ``peakedness`` is the target top-role mass of the initial memberships and
    must exceed 1/K. When ``role_anchored_init`` is set, initial prior means
    are block-structured: node p is anchored to role ``p mod K`` with the
    anchor height chosen so the noise-free softmax hits ``peakedness``.
    Otherwise every node draws around ``params.alpha0``. An explicit
    ``init_means`` array (N, K) overrides both.
    """

    N: int
    K: int
    T: int
    params: ModelParams
    seed: int = 0
    peakedness: float = 0.9
    role_anchored_init: bool = False
    init_means: np.ndarray = None

    def validate(self):
        if self.N < 2 or self.K < 2 or self.T < 0:
            raise ValueError("need N >= 2, K >= 2, T >= 0")
        if not (1.0 / self.K) < self.peakedness < 1.0:
            raise ValueError("peakedness must lie in (1/K, 1)")
        self.params.validate()
        if self.params.n_nodes != self.N or self.params.n_roles != self.K:
            raise ValueError("params dimensions must match N, K")
        if self.init_means is not None:
            self.init_means = np.asarray(self.init_means, dtype=float)
            if self.init_means.shape != (self.N, self.K):
                raise ValueError("init_means must be (N, K)")
            if not np.all(np.isfinite(self.init_means)):
                raise ValueError("init_means must be finite")
        return self


@dataclass
class GroundTruth:
    """Everything a simulation produced: trajectories, draws, and links."""

    memberships: MembershipState
    indicators: RoleIndicators
    network: DynamicNetwork
    config: GenConfig = field(default=None, repr=False)

    def validate(self):
        S, N, K = self.memberships.mu.shape
        if self.network.snapshots.shape != (S, N, N):
            raise ValueError("network shape inconsistent with memberships")
        if self.indicators.z_send.shape != (S, N, N, K):
            raise ValueError("indicator shape inconsistent with memberships")
        self.network.validate()
        self.indicators.validate()
        return self


def role_anchor_height(K, peakedness):
    """Logit height that puts ``peakedness`` mass on the anchored role."""
    return float(np.log((K - 1) * peakedness / (1.0 - peakedness)))


def initial_means(config):
    """Per-node prior means used by :func:`sample_initial_state`."""
    p = config.params
    if config.init_means is not None:
        return np.asarray(config.init_means, dtype=float)
    if not config.role_anchored_init:
        return np.tile(p.alpha0, (config.N, 1))
    height = role_anchor_height(config.K, config.peakedness)
    means = np.zeros((config.N, config.K))
    means[np.arange(config.N), np.arange(config.N) % config.K] = height
    return means


def sample_initial_state(config, rng=None):
    """Draw mu^0, one row per node, Gaussian around the configured means."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    means = initial_means(config)
    noise = rng.standard_normal((config.N, config.K))
    return means + np.sqrt(config.params.A) * noise


def step_memberships(state_t, Y_t, params, seed):
    """One transition: blend each node with its realized out-neighborhood.

    ``state_t`` is the (N, K) natural-parameter matrix at step t and ``Y_t``
    the snapshot sampled from it. Nodes without active out-neighbors keep
    their own mean (pure self-transition). ``seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state_t = np.asarray(state_t, dtype=float)
    wt, b_eff = normalized_weights(Y_t, params.w, params.beta)
    blend = (1.0 - b_eff)[:, None] * state_t + b_eff[:, None] * (wt @ state_t)
    noise = rng.standard_normal(state_t.shape)
    return blend + np.sqrt(params.sigma_mu) * noise


def sample_snapshot(state_t, params, seed):
    """Sample one snapshot plus the per-pair role draws.

    For every ordered pair (p, q), p != q, the sender role comes from p's
    memberships, the receiver role from q's, and the link fires with
    probability (1 - rho) * B[sender, receiver].

    Returns ``(Y, z_send, z_recv)`` with Y of dtype uint8 and one-hot
    indicator arrays of shape (N, N, K).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pi = softmax_from_natural(np.asarray(state_t, dtype=float))
    N, K = pi.shape
    cum = np.cumsum(pi, axis=1)
    # Draw order is fixed: sender roles, receiver roles, link coins.
    u_send = rng.random((N, N))
    u_recv = rng.random((N, N))
    u_link = rng.random((N, N))
    # Sender role depends on the row node, receiver role on the column node.
    roles_send = (u_send[:, :, None] > cum[:, None, :]).sum(axis=-1)
    roles_recv = (u_recv[:, :, None] > cum[None, :, :]).sum(axis=-1)
    prob = (1.0 - params.rho) * params.B[roles_send, roles_recv]
    Y = (u_link < prob).astype(np.uint8)
    np.fill_diagonal(Y, 0)
    eye = np.eye(K, dtype=np.uint8)
    return Y, eye[roles_send], eye[roles_recv]


def generate_sequence(config):
    """Run the full forward process and return a :class:`GroundTruth`."""
    config.validate()
    ss = np.random.SeedSequence(config.seed)
    children = ss.spawn(2 * config.T + 2)
    rngs = [np.random.default_rng(c) for c in children]

    mus = [sample_initial_state(config, rngs[0])]
    Ys, zs_send, zs_recv = [], [], []
    for t in range(config.T + 1):
        Y, zs, zr = sample_snapshot(mus[t], config.params, rngs[1 + 2 * t])
        Ys.append(Y)
        zs_send.append(zs)
        zs_recv.append(zr)
        if t < config.T:
            mus.append(step_memberships(mus[t], Y, config.params, rngs[2 + 2 * t]))

    truth = GroundTruth(
        memberships=MembershipState(np.stack(mus)),
        indicators=RoleIndicators(np.stack(zs_send), np.stack(zs_recv)),
        network=DynamicNetwork(np.stack(Ys)),
        config=config,
    )
    return truth.validate()


# ---------------------------------------------------------------------------
# Benchmark configurations


def benchmark_params(
    N,
    K,
    b_diag=0.9,
    b_off=0.1,
    beta=0.1,
    eta_sq=0.1,
    prior_var=3.0,
    rho=0.0,
    w=None,
):
    """Homogeneous parameters with a diagonally weighted compatibility matrix."""
    B = np.full((K, K), b_off)
    np.fill_diagonal(B, b_diag)
    if w is None:
        w = np.ones((N, N))
        np.fill_diagonal(w, 0.0)
    return ModelParams(
        B=B,
        beta=np.full(N, float(beta)),
        w=w,
        sigma_mu=np.full(K, float(eta_sq)),
        alpha0=np.zeros(K),
        A=np.full(K, float(prior_var)),
        rho=rho,
    )


def benchmark_config(N=50, K=3, T=8, seed=0, peakedness=0.9, **param_kwargs):
    """Synthetic recovery benchmark: role-anchored start, diagonal B."""
    params = benchmark_params(N, K, **param_kwargs)
    return GenConfig(
        N=N, K=K, T=T, params=params, seed=seed,
        peakedness=peakedness, role_anchored_init=True,
    )


def two_bloc_config(
    N=28,
    T=7,
    seed=0,
    peakedness=0.6,
    anchor_peakedness=0.95,
    beta=0.2,
    eta_sq=0.004,
    b_diag=0.9,
    b_off=0.05,
    prior_var=0.1,
):
    """Two-role polarization setting: two blocs, one fixed opinion leader each.

    Nodes alternate blocs by parity. Nodes 0 and 1 lead blocs 0 and 1: they
    start at ``anchor_peakedness``, have zero susceptibility, and are the
    only weighted neighbor of their bloc's members. A member therefore
    drifts toward its leader whenever the link to it fired and holds
    position otherwise, so the bloc separation widens as the run proceeds.
    Ordinary members start at ``peakedness``.
    """
    if N < 6 or N % 2:
        raise ValueError("need an even N of at least 6")
    K = 2
    blocs = np.arange(N) % K
    w = np.zeros((N, N))
    w[np.arange(2, N), blocs[2:]] = 1.0
    params = benchmark_params(
        N, K, b_diag=b_diag, b_off=b_off, beta=beta, eta_sq=eta_sq,
        prior_var=prior_var, w=w,
    )
    params.beta[:2] = 0.0
    means = np.zeros((N, K))
    means[np.arange(N), blocs] = role_anchor_height(K, peakedness)
    means[0, 0] = role_anchor_height(K, anchor_peakedness)
    means[1, 1] = role_anchor_height(K, anchor_peakedness)
    return GenConfig(
        N=N, K=K, T=T, params=params, seed=seed,
        peakedness=peakedness, init_means=means,
    )


def hub_config(N=16, K=2, T=6, seed=0, hub=0, hub_weight=8.0, beta=0.3, **kwargs):
    """Benchmark with one node whose influence weight dominates all others."""
    w = np.ones((N, N))
    w[:, hub] = hub_weight
    np.fill_diagonal(w, 0.0)
    return benchmark_config(N=N, K=K, T=T, seed=seed, w=w, beta=beta, **kwargs)
