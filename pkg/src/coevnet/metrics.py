"""Evaluation metrics: trajectory error, polarization, external-score
correlation, and influence rankings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elbo import transition_structure


@dataclass
class ScoreSeries:
    """Per-node external scores over time; NaN marks a missing entry."""

    values: np.ndarray
    node_labels: list = None

    def validate(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("scores must be (steps, nodes)")
        finite = v[np.isfinite(v)]
        if finite.size and (finite.min() < -1e-9 or finite.max() > 1.0 + 1e-9):
            raise ValueError("scores must lie in [0, 1]")


@dataclass
class CorrelationReport:
    per_time: np.ndarray
    pooled: float
    flipped: bool
    n_pairs: int


@dataclass
class InfluenceReport:
    scores: np.ndarray
    order: np.ndarray
    beta: np.ndarray
    beta_order: np.ndarray


def trajectory_l2_error(inferred, truth, t=None):
    """Mean (over nodes) Euclidean distance between membership rows at step
    ``t``, or the whole per-step series when ``t`` is omitted. Callers align
    roles first."""
    inf = np.asarray(inferred, dtype=float)
    ref = np.asarray(truth, dtype=float)
    if inf.shape != ref.shape:
        raise ValueError(f"shape mismatch: {inf.shape} vs {ref.shape}")
    per_step = np.sqrt(((inf - ref) ** 2).sum(axis=2)).mean(axis=1)
    if t is None:
        return per_step
    return float(per_step[t])


def polarization_series(trajectories, group_size):
    """Separation along the second role: mean role-1 weight of the top
    ``group_size`` nodes minus the bottom ``group_size``, groups re-selected
    at every step. With two roles the value is unchanged by relabeling."""
    traj = np.asarray(trajectories, dtype=float)
    S, N = traj.shape[0], traj.shape[1]
    if group_size < 1 or 2 * group_size > N:
        raise ValueError("group_size must satisfy 1 <= 2*group_size <= nodes")
    out = np.empty(S)
    for t in range(S):
        ranked = np.sort(traj[t, :, 1])
        out[t] = ranked[-group_size:].mean() - ranked[:group_size].mean()
    return out


def _pearson(x, y):
    x = x - x.mean()
    y = y - y.mean()
    denom = np.sqrt((x**2).sum() * (y**2).sum())
    if denom <= 0.0:
        return np.nan
    return float((x * y).sum() / denom)


def score_correlation(trajectories, scores):
    """Pearson correlation between role-1 weight and an external score.

    Role identity is arbitrary, so when the pooled correlation comes out
    negative the sign is flipped everywhere and reported as flipped.
    Steps with fewer than three scored nodes give NaN.
    """
    traj = np.asarray(trajectories, dtype=float)
    vals = scores.values if isinstance(scores, ScoreSeries) else np.asarray(scores)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != traj.shape[:2]:
        raise ValueError(f"scores shape {vals.shape} != {traj.shape[:2]}")

    ok = np.isfinite(vals)
    pooled_x = traj[:, :, 1][ok]
    pooled_y = vals[ok]
    if pooled_x.size < 3:
        raise ValueError("need at least three scored entries overall")
    pooled = _pearson(pooled_x, pooled_y)

    per_time = np.full(traj.shape[0], np.nan)
    for t in range(traj.shape[0]):
        m = ok[t]
        if m.sum() >= 3:
            per_time[t] = _pearson(traj[t, m, 1], vals[t, m])

    flipped = bool(np.isfinite(pooled) and pooled < 0.0)
    if flipped:
        pooled = -pooled
        per_time = -per_time
    return CorrelationReport(
        per_time=per_time, pooled=pooled, flipped=flipped, n_pairs=int(ok.sum())
    )


def influence_ranking(params, vs, Y):
    """Total influence exerted by each node: its renormalized weight on each
    follower's transition, scaled by the follower's susceptibility, summed
    over followers and transition steps. Descending order; ties keep the
    lower node index first. The variational state is accepted alongside the
    fitted parameters so callers can pass a fit report's pieces directly;
    the score depends on the parameters and the observed links."""
    del vs
    Y = np.asarray(Y.snapshots if hasattr(Y, "snapshots") else Y)
    if Y.shape[0] < 2:
        raise ValueError("influence requires at least one transition")
    wts, bs = transition_structure(Y, params.w, params.beta)
    scores = np.einsum("tp,tpq->q", bs, wts)
    order = np.argsort(-scores, kind="stable")
    beta = params.beta.copy()
    beta_order = np.argsort(-beta, kind="stable")
    return InfluenceReport(scores=scores, order=order, beta=beta, beta_order=beta_order)
