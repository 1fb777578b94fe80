"""Evidence lower bound for the co-evolving network model.

The variational family factorizes completely: a diagonal Gaussian
``Normal(gamma_p^t, diag(sigma_p^t ** 2))`` per node and step, and one
multinomial per ordered pair and side (sender / receiver) with parameters
``phi``. The intractable log-normalizer of the logistic-normal memberships,
``log sum_k exp(mu_k)``, is replaced by its first-order upper bound anchored
at an auxiliary scalar ``zeta_p^t``:

    log sum_k exp(mu_k) <= log(zeta) - 1 + (1 / zeta) * sum_k exp(mu_k)

which holds for every positive zeta with equality at zeta = sum exp(mu_k).
Taking expectations leaves ``exp(gamma + sigma^2 / 2)`` terms. Each node's
normalizer appears once per indicator drawn from its memberships, i.e.
2(N-1) times per step (sender side in N-1 pairs, receiver side in N-1).

The bound therefore is a true lower bound on log evidence for any valid
state, and every quantity here is an explicit function of (Y, vs, params).
The derivations behind each term live in docs/math.md.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import normalized_weights, softmax_from_natural

LOG_2PI = float(np.log(2.0 * np.pi))
# phi entries are clamped only inside logs; the arrays themselves stay exact.
PHI_LOG_FLOOR = 1e-300


@dataclass
class VariationalState:
    """Variational parameters over a (T+1)-snapshot network.

    gamma : (S, N, K) Gaussian means of the natural parameters.
    sigma : (S, N, K) Gaussian standard deviations (diagonal).
    phi_send : (S, N, N, K) role posterior of the sender in pair (p, q).
    phi_recv : (S, N, N, K) role posterior of the receiver in pair (p, q).
    zeta : (S, N) positive normalizer anchors.

    Diagonal entries of the phi arrays are unused and kept uniform.
    """

    gamma: np.ndarray
    sigma: np.ndarray
    phi_send: np.ndarray
    phi_recv: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.phi_send = np.asarray(self.phi_send, dtype=float)
        self.phi_recv = np.asarray(self.phi_recv, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)

    @property
    def shape(self):
        return self.gamma.shape

    @classmethod
    def from_gamma(cls, gamma, sigma=0.5):
        """Uniform pair posteriors, given means, exact zeta."""
        gamma = np.asarray(gamma, dtype=float)
        S, N, K = gamma.shape
        sig = np.full((S, N, K), float(sigma)) if np.isscalar(sigma) else np.asarray(sigma)
        phi = np.full((S, N, N, K), 1.0 / K)
        return cls(
            gamma=gamma.copy(),
            sigma=sig.copy(),
            phi_send=phi.copy(),
            phi_recv=phi.copy(),
            zeta=zeta_optimum(gamma, sig),
        )

    def validate(self, atol=1e-10):
        S, N, K = self.gamma.shape
        if self.sigma.shape != (S, N, K):
            raise ValueError("sigma shape mismatch")
        if self.phi_send.shape != (S, N, N, K) or self.phi_recv.shape != (S, N, N, K):
            raise ValueError("phi shape mismatch")
        if self.zeta.shape != (S, N):
            raise ValueError("zeta shape mismatch")
        for arr in (self.gamma, self.sigma, self.phi_send, self.phi_recv, self.zeta):
            if not np.all(np.isfinite(arr)):
                raise ValueError("variational state must be finite")
        if np.any(self.sigma <= 0.0) or np.any(self.zeta <= 0.0):
            raise ValueError("sigma and zeta must be positive")
        off = ~np.eye(N, dtype=bool)
        for phi in (self.phi_send, self.phi_recv):
            if np.any(phi < -atol):
                raise ValueError("phi entries must be nonnegative")
            sums = phi.sum(axis=-1)[:, off]
            if np.any(np.abs(sums - 1.0) > atol):
                raise ValueError("phi rows must sum to one")
        return self

    def copy(self):
        return VariationalState(
            gamma=self.gamma.copy(),
            sigma=self.sigma.copy(),
            phi_send=self.phi_send.copy(),
            phi_recv=self.phi_recv.copy(),
            zeta=self.zeta.copy(),
        )

    def trajectories(self):
        """Posterior membership estimate: softmax of gamma with the
        second-moment correction sigma^2 / 2 added to each component."""
        return softmax_from_natural(self.gamma + 0.5 * self.sigma**2)


def zeta_optimum(gamma, sigma):
    """The anchor that makes the normalizer bound tight: sum exp(gamma + sigma^2/2)."""
    x = gamma + 0.5 * np.asarray(sigma) ** 2
    m = x.max(axis=-1, keepdims=True)
    return np.exp(m[..., 0]) * np.exp(x - m).sum(axis=-1)


def transition_structure(Y, w, beta):
    """Per-transition renormalized weights and effective susceptibility.

    Returns ``(wts, bs)`` with shapes (T, N, N) and (T, N); entry j describes
    the transition from snapshot j to j+1 (driven by the links at j).
    """
    Y = np.asarray(Y)
    T = Y.shape[0] - 1
    wts = np.zeros((T,) + Y.shape[1:])
    bs = np.zeros((T, Y.shape[1]))
    for j in range(T):
        wts[j], bs[j] = normalized_weights(Y[j], w, beta)
    return wts, bs


def transition_moments(gamma, sigma, wts, bs):
    """Expected means and residuals of every transition under q.

    Returns ``(m, R, vsum)``: the predicted means for snapshots 1..T, the
    mean residuals gamma[1:] - m, and the per-component variance load
    (own next + own carried + neighborhood carried).
    """
    g_prev, s_prev = gamma[:-1], sigma[:-1]
    nb_mean = np.einsum("tpq,tqk->tpk", wts, g_prev)
    m = (1.0 - bs)[..., None] * g_prev + bs[..., None] * nb_mean
    R = gamma[1:] - m
    v_prev = s_prev**2
    vsum = (
        sigma[1:] ** 2
        + ((1.0 - bs) ** 2)[..., None] * v_prev
        + (bs**2)[..., None] * np.einsum("tpq,tqk->tpk", wts**2, v_prev)
    )
    return m, R, vsum


def _pair_sums(phi_send, phi_recv):
    """Sum pair posteriors onto nodes: sender rows, receiver columns."""
    S, N, _, K = phi_send.shape
    diag = np.arange(N)
    send = phi_send.sum(axis=2) - phi_send[:, diag, diag, :]
    recv = phi_recv.sum(axis=1) - phi_recv[:, diag, diag, :]
    return send, recv


def _link_term(Y, phi_send, phi_recv, B_eff):
    logB = np.log(B_eff)
    log1mB = np.log1p(-B_eff)
    on = np.einsum("tpqg,gh,tpqh->tpq", phi_send, logB, phi_recv)
    offv = np.einsum("tpqg,gh,tpqh->tpq", phi_send, log1mB, phi_recv)
    N = Y.shape[1]
    mask = ~np.eye(N, dtype=bool)
    Yf = Y.astype(float)
    vals = Yf * on + (1.0 - Yf) * offv
    return float(vals[:, mask].sum())


def _bound_term(gamma, sigma, zeta):
    """Per-node expected normalizer bound, summed; carries the 2(N-1) count."""
    N = gamma.shape[1]
    x = np.exp(gamma + 0.5 * sigma**2 - np.log(zeta)[..., None]).sum(axis=-1)
    per_node = np.log(zeta) - 1.0 + x
    return -2.0 * (N - 1) * float(per_node.sum())


def transition_term(gamma, sigma, wts, bs, sigma_mu):
    """Expected log transition density, summed over all transitions."""
    if gamma.shape[0] <= 1:
        return 0.0
    _, R, vsum = transition_moments(gamma, sigma, wts, bs)
    inv = 1.0 / sigma_mu
    quad = ((R**2 + vsum) * inv).sum()
    T, N = R.shape[0], R.shape[1]
    const = -0.5 * T * N * float((LOG_2PI + np.log(sigma_mu)).sum())
    return const - 0.5 * float(quad)


def elbo(Y, vs, params, validate=True):
    """Evidence lower bound for snapshots ``Y`` under state ``vs``.

    Any valid state gives a true lower bound on log p(Y); the bound is
    invariant to simultaneous role relabeling of (gamma, sigma, phi, B,
    alpha0, A, sigma_mu).
    """
    Y = np.asarray(Y)
    if validate:
        params.validate()
        vs.validate()
        S, N, K = vs.gamma.shape
        if Y.shape != (S, N, N):
            raise ValueError("network shape inconsistent with state")
        if params.n_nodes != N or params.n_roles != K:
            raise ValueError("params dimensions inconsistent with state")

    gamma, sigma, zeta = vs.gamma, vs.sigma, vs.zeta
    N = gamma.shape[1]

    # Initial Gaussian prior.
    d0 = gamma[0] - params.alpha0
    prior = -0.5 * float(
        ((d0**2 + sigma[0] ** 2) / params.A + LOG_2PI + np.log(params.A)).sum()
    )

    # Transition chain.
    wts, bs = transition_structure(Y, params.w, params.beta)
    trans = transition_term(gamma, sigma, wts, bs, params.sigma_mu)

    # Indicator priors: linear part plus the bounded normalizer.
    send_sums, recv_sums = _pair_sums(vs.phi_send, vs.phi_recv)
    zlin = float((gamma * (send_sums + recv_sums)).sum())
    bound = _bound_term(gamma, sigma, zeta)

    # Link likelihood.
    link = _link_term(Y, vs.phi_send, vs.phi_recv, params.effective_B())

    # Entropies.
    ent_gauss = 0.5 * float((LOG_2PI + 1.0 + 2.0 * np.log(sigma)).sum())
    mask = ~np.eye(N, dtype=bool)
    ent_pairs = 0.0
    for phi in (vs.phi_send, vs.phi_recv):
        sel = phi[:, mask, :]
        ent_pairs -= float((sel * np.log(np.clip(sel, PHI_LOG_FLOOR, None))).sum())

    return prior + trans + zlin + bound + link + ent_gauss + ent_pairs


def elbo_gamma_grad_all(Y, vs, params):
    """Gradient of :func:`elbo` with respect to every gamma entry, (S, N, K)."""
    Y = np.asarray(Y)
    gamma, sigma, zeta = vs.gamma, vs.sigma, vs.zeta
    S, N, K = gamma.shape
    inv_eta = 1.0 / params.sigma_mu

    grad = np.zeros_like(gamma)
    grad[0] -= (gamma[0] - params.alpha0) / params.A

    if S > 1:
        wts, bs = transition_structure(Y, params.w, params.beta)
        _, R, _ = transition_moments(gamma, sigma, wts, bs)
        Rsc = R * inv_eta
        grad[1:] -= Rsc
        grad[:-1] += (1.0 - bs)[..., None] * Rsc
        # Influence of each node on the transitions of those who link to it.
        grad[:-1] += np.einsum("tp,tps,tpk->tsk", bs, wts, Rsc)

    send_sums, recv_sums = _pair_sums(vs.phi_send, vs.phi_recv)
    grad += send_sums + recv_sums
    grad -= 2.0 * (N - 1) * np.exp(gamma + 0.5 * sigma**2 - np.log(zeta)[..., None])
    return grad


def elbo_grad_gamma(Y, vs, params, p, t):
    """Gradient of the bound for one node's mean at one step, shape (K,)."""
    return elbo_gamma_grad_all(Y, vs, params)[t, p]


def elbo_grad_influence(Y, vs, params):
    """Gradients of the bound with respect to susceptibility and raw weights.

    Returns ``(dbeta, dw)`` of shapes (N,) and (N, N). Raw weights enter only
    through their renormalization over each active out-neighborhood, so the
    gradient of any weight that is never on an active link is zero, and a
    lone neighbor's weight has zero gradient (scale is absorbed).
    """
    Y = np.asarray(Y)
    gamma, sigma = vs.gamma, vs.sigma
    S, N, K = gamma.shape
    dbeta = np.zeros(N)
    dw = np.zeros((N, N))
    if S <= 1:
        return dbeta, dw

    inv_eta = 1.0 / params.sigma_mu
    wts, bs = transition_structure(Y, params.w, params.beta)
    _, R, _ = transition_moments(gamma, sigma, wts, bs)

    for j in range(S - 1):
        raw = Y[j] * params.w
        D = raw.sum(axis=1)
        active = D > 0.0
        wt, b = wts[j], bs[j]
        g_prev = gamma[j]
        nb_mean = wt @ g_prev
        Rsc = R[j] * inv_eta
        vsc_row = (sigma[j] ** 2 * inv_eta).sum(axis=1)  # (N,)
        sw2 = (wt**2) @ vsc_row

        # Susceptibility: mean shift plus the variance trade-off.
        mean_part = (Rsc * (nb_mean - g_prev)).sum(axis=1)
        var_part = (1.0 - b) * (sigma[j] ** 2 * inv_eta).sum(axis=1) - b * sw2
        dbeta += np.where(active, mean_part + var_part, 0.0)

        # Raw weights, chain rule through the renormalization.
        term1 = Rsc @ g_prev.T - (Rsc * nb_mean).sum(axis=1)[:, None]
        term2 = wt * vsc_row[None, :] - sw2[:, None]
        scale = np.where(active, b / np.where(active, D, 1.0), 0.0)
        dw += Y[j] * (scale[:, None] * term1 - (b * scale)[:, None] * term2)

    return dbeta, dw
