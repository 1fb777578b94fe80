"""Core types and deterministic primitives for the co-evolving network model.

The model couples two processes on a directed graph over N nodes and K roles:

* each node p carries a natural-parameter vector mu_p^t whose softmax image
  pi_p^t is its mixed-membership distribution over roles;
* directed links at step t are drawn from role-compatibility probabilities,
  and the realized links pull the natural parameters of linked nodes together
  at the next step (influence).

Everything here is a pure function of its inputs; sampling lives in
:mod:`coevnet.generator` and inference in the estep/mstep/em modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Link probabilities are clamped away from {0, 1} before any log.
PROB_CLAMP = 1e-9

# Floor for transition / prior variances, keeps Gaussians non-degenerate.
VAR_FLOOR = 1e-6


class EmptyNeighborhoodError(ValueError):
    """Raised when a node has no active out-neighbors to average over."""


class NumericalError(RuntimeError):
    """Raised when an iterative solver fails beyond recovery; carries state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


def softmax_from_natural(mu):
    """Map natural parameters to membership probabilities.

    Rows (last axis) of ``mu`` are logit vectors; the result has the same
    shape with the last axis summing to one. Max-shifted, safe for large
    entries.
    """
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)):
        raise ValueError("natural parameters must be finite")
    shifted = mu - mu.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def normalized_weights(Y_t, w, beta):
    """Renormalized influence weights and effective susceptibility.

    Parameters
    ----------
    Y_t : (N, N) array
        Adjacency at one step, Y_t[p, q] = 1 when p links to q (q can then
        influence p).
    w : (N, N) array
        Raw nonnegative weights, w[p, q] = weight node p puts on q.
    beta : (N,) array
        Susceptibility per node, in [0, 1].

    Returns
    -------
    wt : (N, N) array
        Row-normalized weights over the active out-neighborhood, so each row
        sums to 1 where the node has neighbors and to 0 otherwise.
    b_eff : (N,) array
        beta where the neighborhood is non-empty, 0 otherwise (the node then
        performs a pure self-transition).
    """
    raw = np.asarray(Y_t, dtype=float) * np.asarray(w, dtype=float)
    denom = raw.sum(axis=1)
    active = denom > 0.0
    wt = np.zeros_like(raw)
    wt[active] = raw[active] / denom[active, None]
    b_eff = np.where(active, beta, 0.0)
    return wt, b_eff


def neighborhood_mean(mu_all, Y_t, w, p):
    """Weight-renormalized mean of the natural parameters of p's out-neighbors.

    Raises :class:`EmptyNeighborhoodError` when p has no out-links at this
    step (or all active weights are zero); callers fall back to a pure
    self-transition in that case.
    """
    mu_all = np.asarray(mu_all, dtype=float)
    row = np.asarray(Y_t, dtype=float)[p] * np.asarray(w, dtype=float)[p]
    denom = row.sum()
    if denom <= 0.0:
        raise EmptyNeighborhoodError(f"node {p} has no active out-neighbors")
    return (row / denom) @ mu_all


def influence_mean(mu_p, mu_S, beta_p):
    """Convex blend (1 - beta) * own + beta * neighborhood."""
    if not 0.0 <= beta_p <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return (1.0 - beta_p) * np.asarray(mu_p, dtype=float) + beta_p * np.asarray(
        mu_S, dtype=float
    )


def marginal_link_prob(pi_p, pi_q, B, rho=0.0):
    """Link probability with role indicators summed out.

    Equals (1 - rho) * pi_p @ B @ pi_q, the exact marginal of the draw
    ``z_send ~ Mult(pi_p), z_recv ~ Mult(pi_q), y ~ Bern((1-rho) * B[s, r])``.
    """
    pi_p = np.asarray(pi_p, dtype=float)
    pi_q = np.asarray(pi_q, dtype=float)
    return float((1.0 - rho) * pi_p @ np.asarray(B, dtype=float) @ pi_q)


def transition_log_density(mu_next, mu_p, mu_S, beta_p, sigma_mu):
    """Log density of one step of the natural-parameter chain.

    ``sigma_mu`` holds the per-component transition variances. The density is
    a diagonal Gaussian centered at the influence blend.
    """
    sigma_mu = np.asarray(sigma_mu, dtype=float)
    if np.any(sigma_mu <= 0.0):
        raise ValueError("transition variances must be positive")
    r = np.asarray(mu_next, dtype=float) - influence_mean(mu_p, mu_S, beta_p)
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * sigma_mu) + r * r / sigma_mu))


@dataclass
class ModelParams:
    """Static parameters of the generative process.

    Attributes
    ----------
    B : (K, K) array of role-compatibility probabilities in [0, 1].
    beta : (N,) susceptibility per node, in [0, 1].
    w : (N, N) raw nonnegative influence weights, w[p, q] = weight p puts on
        q; only entries on realized links matter after renormalization.
    sigma_mu : (K,) transition variances (diagonal of the step covariance).
    alpha0 : (K,) prior mean of the initial natural parameters.
    A : (K,) prior variances (diagonal).
    rho : sparsity dial; link probabilities are scaled by (1 - rho).
    """

    B: np.ndarray
    beta: np.ndarray
    w: np.ndarray
    sigma_mu: np.ndarray
    alpha0: np.ndarray
    A: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.sigma_mu = np.asarray(self.sigma_mu, dtype=float)
        self.alpha0 = np.asarray(self.alpha0, dtype=float)
        self.A = np.asarray(self.A, dtype=float)

    @property
    def n_roles(self):
        return self.B.shape[0]

    @property
    def n_nodes(self):
        return self.beta.shape[0]

    def validate(self):
        K, N = self.n_roles, self.n_nodes
        if self.B.shape != (K, K):
            raise ValueError("B must be square")
        if np.any(self.B < 0.0) or np.any(self.B > 1.0):
            raise ValueError("B entries must lie in [0, 1]")
        if np.any(self.beta < 0.0) or np.any(self.beta > 1.0):
            raise ValueError("beta entries must lie in [0, 1]")
        if self.w.shape != (N, N):
            raise ValueError("w must be N x N")
        if np.any(self.w < 0.0):
            raise ValueError("influence weights must be nonnegative")
        for name in ("sigma_mu", "alpha0", "A"):
            arr = getattr(self, name)
            if arr.shape != (K,):
                raise ValueError(f"{name} must have length K")
        if np.any(self.sigma_mu <= 0.0) or np.any(self.A <= 0.0):
            raise ValueError("variances must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        return self

    def copy(self):
        return ModelParams(
            B=self.B.copy(),
            beta=self.beta.copy(),
            w=self.w.copy(),
            sigma_mu=self.sigma_mu.copy(),
            alpha0=self.alpha0.copy(),
            A=self.A.copy(),
            rho=self.rho,
        )

    def effective_B(self):
        """(1 - rho)-scaled compatibility, clamped away from {0, 1}."""
        return np.clip((1.0 - self.rho) * self.B, PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass
class MembershipState:
    """Natural parameters for all nodes across steps, shape (T+1, N, K)."""

    mu: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.ndim != 3:
            raise ValueError("mu must be (steps, nodes, roles)")

    @property
    def pi(self):
        """Membership probabilities, softmax of mu along roles."""
        return softmax_from_natural(self.mu)

    @property
    def n_steps(self):
        return self.mu.shape[0] - 1


@dataclass
class DynamicNetwork:
    """Binary directed snapshots, shape (T+1, N, N), zero diagonal."""

    snapshots: np.ndarray
    node_labels: list = field(default=None)

    def __post_init__(self):
        self.snapshots = np.asarray(self.snapshots)
        if self.snapshots.ndim != 3 or self.snapshots.shape[1] != self.snapshots.shape[2]:
            raise ValueError("snapshots must be (steps, N, N)")
        if self.node_labels is None:
            self.node_labels = [str(i) for i in range(self.snapshots.shape[1])]

    @property
    def N(self):
        return self.snapshots.shape[1]

    @property
    def T(self):
        return self.snapshots.shape[0] - 1

    def validate(self):
        vals = np.unique(self.snapshots)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("snapshots must be binary")
        if np.any(self.snapshots.diagonal(axis1=1, axis2=2) != 0):
            raise ValueError("self-links are not allowed")
        if len(self.node_labels) != self.N:
            raise ValueError("label count must match N")
        return self

    def out_degrees(self, t):
        return np.asarray(self.snapshots[t]).sum(axis=1)


@dataclass
class RoleIndicators:
    """One-hot role draws per ordered pair: z_send from the sender's
    memberships, z_recv from the receiver's. Shape (T+1, N, N, K); the
    diagonal is unused."""

    z_send: np.ndarray
    z_recv: np.ndarray

    def validate(self):
        for z in (self.z_send, self.z_recv):
            z = np.asarray(z)
            if z.ndim != 4:
                raise ValueError("indicators must be (steps, N, N, K)")
            off = ~np.eye(z.shape[1], dtype=bool)
            sums = z.sum(axis=-1)[:, off]
            if not np.all(sums == 1):
                raise ValueError("indicators must be one-hot off the diagonal")
        return self
