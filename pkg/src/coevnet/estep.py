"""Variational E-step: blockwise ascent on the evidence lower bound.

Each cycle refreshes the blocks in dependency order: pair posteriors to
their mutual fixed point per step, normalizer anchors to their closed form,
Gaussian variances to their exact separable optimum, and finally all means
at once. The mean update is a damped Newton step on the bound with the
anchors profiled out (they are maximized in closed form, so the profiled
objective equals the bound at the refreshed anchors); its system couples
each node's chain across time exactly, which is what the bound's strongest
curvature direction is, and treats cross-node coupling as diagonal. The
system is solved per node and role by the Thomas algorithm.

Every update either maximizes the bound exactly over its block or is a
backtracked ascent step, so the bound is non-decreasing throughout; this is
what makes the outer EM trace monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NumericalError
from .elbo import (
    VariationalState,
    elbo as bound_value,
    elbo_gamma_grad_all,
    transition_structure,
)


@dataclass
class EStepConfig:
    phi_tol: float = 1e-8
    gamma_tol: float = 1e-8
    sigma_tol: float = 1e-8
    max_inner_iters: int = 500
    damping: float = 1.0
    max_sweeps: int = 400
    phi_cycle_passes: int = 8
    grad_tol: float = 5e-7
    sigma_resid_tol: float = 5e-11
    track_objective: bool = False

    def __post_init__(self):
        if min(self.phi_tol, self.gamma_tol, self.sigma_tol) <= 0.0:
            raise ValueError("tolerances must be positive")
        if min(self.max_inner_iters, self.max_sweeps, self.phi_cycle_passes) < 1:
            raise ValueError("iteration caps must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class EStepResult:
    vs: VariationalState
    converged: bool
    sweeps: int
    max_gamma_grad: float
    max_sigma_resid: float
    final_elbo: float
    n_damping_events: int = 0
    objective_trace: list = field(default_factory=list)


def _pair_log_weights(B_eff):
    return np.log(B_eff), np.log1p(-B_eff)


def _softmax_1d(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def _softmax_last(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def update_phi_pair(gamma_p_t, gamma_q_t, y, B_eff, config=None):
    """Mutual fixed point of one ordered pair's role posteriors.

    ``gamma_p_t`` parametrizes the sender side, ``gamma_q_t`` the receiver
    side, and ``y`` is the observed link. Returns ``(phi_send, phi_recv)``.
    """
    cfg = config or EStepConfig()
    logB, log1mB = _pair_log_weights(np.asarray(B_eff, dtype=float))
    L = y * logB + (1 - y) * log1mB
    K = L.shape[0]
    phi_send = np.full(K, 1.0 / K)
    phi_recv = np.full(K, 1.0 / K)
    for _ in range(cfg.max_inner_iters):
        new_send = _softmax_1d(np.asarray(gamma_p_t, dtype=float) + L @ phi_recv)
        new_recv = _softmax_1d(np.asarray(gamma_q_t, dtype=float) + new_send @ L)
        delta = max(np.abs(new_send - phi_send).max(), np.abs(new_recv - phi_recv).max())
        phi_send, phi_recv = new_send, new_recv
        if delta < cfg.phi_tol:
            break
    return phi_send, phi_recv


class _Sweeper:
    """Workspace shared by all block updates of one E-step run."""

    def __init__(self, Y, vs, params, config):
        self.Y = np.asarray(Y)
        self.Yf = self.Y.astype(float)
        self.params = params
        self.cfg = config
        self.vs = vs.copy()
        S, N, K = self.vs.gamma.shape
        self.S, self.N, self.K = S, N, K
        self.two_nm1 = 2.0 * (N - 1)
        self.logB, self.log1mB = _pair_log_weights(params.effective_B())
        self.inv_eta = 1.0 / params.sigma_mu
        self.inv_A = 1.0 / params.A
        self.wts, self.bs = transition_structure(Y, params.w, params.beta)
        self.wtsT = self.wts.transpose(0, 2, 1)
        self.C = self._precision_coeffs()
        self.logzeta = np.log(self.vs.zeta)
        self.n_damping_events = 0

    def _precision_coeffs(self):
        """Quadratic curvature carried by each (t, p, k): prior, own chain
        links, and appearances in other nodes' transitions."""
        S, N, K = self.S, self.N, self.K
        C = np.zeros((S, N, K))
        C[0] += self.inv_A
        if S > 1:
            C[1:] += self.inv_eta
            for j in range(S - 1):
                own = (1.0 - self.bs[j]) ** 2
                nbr = np.einsum("q,qp->p", self.bs[j] ** 2, self.wts[j] ** 2)
                C[j] += (own + nbr)[:, None] * self.inv_eta
        return C

    # -- pair posteriors ------------------------------------------------------

    def phi_pass(self):
        """One alternating send/recv refresh for all pairs at every step.

        Each softmax is the exact optimum of its side given the other, so
        every pass raises the bound."""
        vs = self.vs
        y = self.Yf[..., None]
        recv = vs.phi_recv
        logits = vs.gamma[:, :, None, :] + y * (recv @ self.logB.T) + (1.0 - y) * (
            recv @ self.log1mB.T
        )
        send = _softmax_last(logits)
        logits = vs.gamma[:, None, :, :] + y * (send @ self.logB) + (1.0 - y) * (
            send @ self.log1mB
        )
        recv = _softmax_last(logits)
        d = np.arange(self.N)
        send[:, d, d, :] = 1.0 / self.K
        recv[:, d, d, :] = 1.0 / self.K
        delta = max(
            np.abs(send - vs.phi_send).max(), np.abs(recv - vs.phi_recv).max()
        )
        vs.phi_send = send
        vs.phi_recv = recv
        return delta

    def phi_fixed_point(self):
        """Alternate passes until quiet or the per-cycle budget runs out; the
        budget keeps early cycles cheap, and warm starts make late cycles
        settle in one or two passes."""
        delta = np.inf
        for _ in range(min(self.cfg.phi_cycle_passes, self.cfg.max_inner_iters)):
            delta = self.phi_pass()
            if delta < self.cfg.phi_tol:
                break
        return delta

    # -- variances ------------------------------------------------------------

    def sigma_solve(self, t):
        """Exact blockwise maximum over the step-t standard deviations.

        In the variance u = sigma^2 the stationarity condition reads
        ``C * u + G * u * exp(u / 2) = 1`` with C the precision load and
        ``G = 2(N-1) exp(gamma) / zeta``; the left side grows from 0, so the
        root is unique and bracketed by (0, 1 / C].
        """
        vs = self.vs
        C = self.C[t]
        G = self.two_nm1 * np.exp(vs.gamma[t] - self.logzeta[t][:, None])
        hi = 1.0 / C
        lo = np.zeros_like(hi)
        u = np.minimum(vs.sigma[t] ** 2, 0.5 * hi)
        for _ in range(80):
            e = np.exp(0.5 * u)
            h = C * u + G * u * e - 1.0
            if np.all(np.abs(h) < 1e-14):
                break
            lo = np.where(h < 0.0, u, lo)
            hi = np.where(h > 0.0, u, hi)
            hp = C + G * e * (1.0 + 0.5 * u)
            step = u - h / hp
            u = np.where((step > lo) & (step < hi), step, 0.5 * (lo + hi))
        if np.any(u <= 0.0) or not np.all(np.isfinite(u)):
            raise NumericalError("variance solve left the feasible region", state=u)
        new = np.sqrt(u)
        delta = np.abs(new - vs.sigma[t]).max()
        vs.sigma[t] = new
        return delta

    def sigma_residual_max(self):
        """Largest absolute residual of the variance fixed point, measured in
        the equation's natural units (transition variance over u)."""
        vs = self.vs
        u = vs.sigma**2
        G = self.two_nm1 * np.exp(vs.gamma - self.logzeta[..., None])
        h = self.C * u + G * u * np.exp(0.5 * u) - 1.0
        scale = np.maximum(self.params.sigma_mu, self.params.A).max()
        return float(np.abs(h / u).max() * scale)

    # -- means ----------------------------------------------------------------

    def _phi_sums_t(self, t):
        vs = self.vs
        d = np.arange(self.N)
        send = vs.phi_send[t].sum(axis=1) - vs.phi_send[t][d, d, :]
        recv = vs.phi_recv[t].sum(axis=0) - vs.phi_recv[t][d, d, :]
        return send + recv

    def _phi_sums_all(self):
        return np.stack([self._phi_sums_t(t) for t in range(self.S)])

    def _gamma_grad_t(self, t, phi_sums):
        vs = self.vs
        gamma_t = vs.gamma[t]
        if t == 0:
            grad = -(gamma_t - self.params.alpha0) * self.inv_A
        else:
            j = t - 1
            m = (1.0 - self.bs[j])[:, None] * vs.gamma[j] + self.bs[j][:, None] * (
                self.wts[j] @ vs.gamma[j]
            )
            grad = -(gamma_t - m) * self.inv_eta
        if t < self.S - 1:
            m = (1.0 - self.bs[t])[:, None] * gamma_t + self.bs[t][:, None] * (
                self.wts[t] @ gamma_t
            )
            rf = (vs.gamma[t + 1] - m) * self.inv_eta
            grad += (1.0 - self.bs[t])[:, None] * rf
            grad += (self.bs[t][:, None] * self.wts[t]).T @ rf
        bound = self.two_nm1 * np.exp(
            gamma_t + 0.5 * vs.sigma[t] ** 2 - self.logzeta[t][:, None]
        )
        grad += phi_sums - bound
        return grad, bound

    def _transition_map(self, j, arr):
        return (1.0 - self.bs[j])[:, None] * arr + self.bs[j][:, None] * (
            self.wts[j] @ arr
        )

    def _transition_map_all(self, arr):
        """Transition operator applied to all steps at once; ``arr`` holds one
        (N, K) slab per transition."""
        return (1.0 - self.bs)[..., None] * arr + self.bs[..., None] * (
            self.wts @ arr
        )

    def _chain_residuals(self):
        gamma = self.vs.gamma
        if self.S < 2:
            return None
        return gamma[1:] - self._transition_map_all(gamma[:-1])

    def _quad_delta(self, d, chain_res=None):
        """Change of the prior and transition terms under a move ``d`` of all
        means, written as cross plus square so tiny moves are resolved far
        below the scale of the terms themselves. The residuals depend only on
        the current means, so callers probing many step sizes pass them in."""
        gamma = self.vs.gamma
        r0 = gamma[0] - self.params.alpha0
        val = -float(((r0 * d[0] + 0.5 * d[0] ** 2) * self.inv_A).sum())
        if self.S > 1:
            r = self._chain_residuals() if chain_res is None else chain_res
            dr = d[1:] - self._transition_map_all(d[:-1])
            val -= float(((r * dr + 0.5 * dr**2) * self.inv_eta).sum())
        return val

    def _gamma_delta(self, step, damp, phi_all, sm, chain_res=None):
        """Exact change of the profiled objective under ``damp * step``.

        Every term is evaluated in difference form, so the result's rounding
        error scales with the move rather than with the objective; this is
        what lets the ascent verify steps whose gain sits far below the
        objective's own evaluation noise."""
        d = damp * step
        val = float((phi_all * d).sum())
        a = d.max(axis=-1, keepdims=True)
        lse_delta = np.log((sm * np.exp(d - a)).sum(axis=-1)) + a[..., 0]
        val -= self.two_nm1 * float(lse_delta.sum())
        return val + self._quad_delta(d, chain_res)

    def _gamma_grad_profiled(self, phi_all):
        """Gradient of the profiled objective at the current means, plus the
        softmax entering its curvature."""
        vs = self.vs
        gamma = vs.gamma
        x = gamma + 0.5 * vs.sigma**2
        sm = _softmax_last(x)
        grad = np.zeros_like(gamma)
        grad[0] = -(gamma[0] - self.params.alpha0) * self.inv_A
        if self.S > 1:
            rsc = self._chain_residuals() * self.inv_eta
            grad[1:] -= rsc
            grad[:-1] += (1.0 - self.bs)[..., None] * rsc
            grad[:-1] += self.wtsT @ (self.bs[..., None] * rsc)
        grad += phi_all - self.two_nm1 * sm
        return grad, sm

    def _chain_blocks(self, sm):
        """Per-(step, node) role blocks of the Newton system: exact chain
        precision on the diagonal plus the profiled-anchor curvature, which
        must be kept as a full block because it vanishes along uniform role
        shifts; a diagonal approximation would charge those near-flat modes
        phantom curvature and stall the ascent."""
        S, N, K = self.S, self.N, self.K
        eye = np.eye(K)
        D = self.C[..., None] * eye
        D += self.two_nm1 * (sm[..., None] * eye - sm[..., :, None] * sm[..., None, :])
        if S > 1:
            off = -(1.0 - self.bs)[..., None] * self.inv_eta
        else:
            off = np.zeros((0, N, K))
        return D, off

    def _block_factor(self, D, off):
        """Forward elimination of the per-node block chain system; returns
        the inverted pivots and couplers for repeated solves."""
        S = D.shape[0]
        invs = [np.linalg.inv(D[0])]
        cps = []
        for t in range(1, S):
            cps.append(invs[-1] * off[t - 1][:, None, :])
            Dh = D[t] - off[t - 1][:, :, None] * cps[-1]
            invs.append(np.linalg.inv(Dh))
        return invs, cps, off

    def _block_solve(self, factors, rhs):
        invs, cps, off = factors
        S = rhs.shape[0]
        x = np.empty_like(rhs)
        xp = [np.matmul(invs[0], rhs[0][..., None])[..., 0]]
        for t in range(1, S):
            b = rhs[t] - off[t - 1] * xp[t - 1]
            xp.append(np.matmul(invs[t], b[..., None])[..., 0])
        x[S - 1] = xp[S - 1]
        for t in range(S - 2, -1, -1):
            x[t] = xp[t] - np.matmul(cps[t], x[t + 1][..., None])[..., 0]
        if not np.all(np.isfinite(x)):
            raise NumericalError("mean system lost definiteness", state=x)
        return x

    def _hess_apply(self, v, sm):
        """Product of the profiled objective's exact negative Hessian with a
        direction, including the cross-node transition couplings that the
        chain preconditioner drops."""
        out = np.empty_like(v)
        out[0] = v[0] * self.inv_A
        if self.S > 1:
            rv = (v[1:] - self._transition_map_all(v[:-1])) * self.inv_eta
            out[1:] = rv
            out[:-1] -= (1.0 - self.bs)[..., None] * rv
            out[:-1] -= self.wtsT @ (self.bs[..., None] * rv)
        sv = (sm * v).sum(axis=-1, keepdims=True)
        out += self.two_nm1 * (sm * v - sm * sv)
        return out

    def _newton_direction(self, grad, sm):
        """Conjugate-gradient solve of the Newton system, preconditioned by
        the per-node chain factorization. The system is positive definite,
        so the returned direction is an ascent direction; the solve is run
        only until the residual is a small fraction of the gradient, which
        is all a damped Newton step needs."""
        factors = self._block_factor(*self._chain_blocks(sm))
        gmax = np.abs(grad).max()
        target = max(min(0.1, np.sqrt(gmax)) * gmax, 1e-18)
        x = np.zeros_like(grad)
        r = grad.copy()
        z = self._block_solve(factors, r)
        p = z.copy()
        rz = float(np.vdot(r, z))
        for _ in range(200):
            Hp = self._hess_apply(p, sm)
            pHp = float(np.vdot(p, Hp))
            if pHp <= 0.0:
                break
            alpha = rz / pHp
            x += alpha * p
            r -= alpha * Hp
            if np.abs(r).max() < target:
                break
            z = self._block_solve(factors, r)
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        if not np.all(np.isfinite(x)) or float(np.vdot(grad, x)) <= 0.0:
            return self._block_solve(factors, grad)
        return x

    def gamma_global(self):
        """Damped Newton ascent on all means jointly.

        Directions come from a conjugate-gradient solve of the exact Newton
        system, which is positive definite because the prior anchors step 0
        and every transition contributes a positive semidefinite block.
        Steps are backtracked on the profiled objective, whose increase is
        an increase of the bound once the anchors are refreshed at the end.
        """
        vs = self.vs
        cfg = self.cfg
        phi_all = self._phi_sums_all()
        total = 0.0
        for _ in range(cfg.max_inner_iters):
            grad, sm = self._gamma_grad_profiled(phi_all)
            gmax = np.abs(grad).max()
            if gmax < 0.25 * cfg.grad_tol:
                break
            step = self._newton_direction(grad, sm)
            cres = self._chain_residuals()
            damp = cfg.damping
            accepted = False
            for _ in range(60):
                if self._gamma_delta(step, damp, phi_all, sm, cres) >= 0.0:
                    vs.gamma = vs.gamma + damp * step
                    accepted = True
                    if damp < cfg.damping:
                        self.n_damping_events += 1
                    break
                damp *= 0.5
            if not accepted:
                self.n_damping_events += 1
                break
            moved = damp * float(np.abs(step).max())
            total = max(total, moved)
            if moved < 1e-16 * (1.0 + float(np.abs(vs.gamma).max())):
                break
        self.zeta_refresh()
        return total

    def gamma_grad_max(self):
        grads = elbo_gamma_grad_all(self.Y, self.vs, self.params)
        return float(np.abs(grads).max())

    # -- normalizer anchors -----------------------------------------------------

    def zeta_update(self, t):
        vs = self.vs
        x = vs.gamma[t] + 0.5 * vs.sigma[t] ** 2
        m = x.max(axis=-1)
        logz = m + np.log(np.exp(x - m[:, None]).sum(axis=-1))
        delta = np.abs(np.exp(logz) - vs.zeta[t]).max()
        vs.zeta[t] = np.exp(logz)
        self.logzeta[t] = logz
        return delta

    def zeta_refresh(self):
        return max(self.zeta_update(t) for t in range(self.S))

    # -- driver -----------------------------------------------------------------

    def cycle(self, trace=None):
        """One full refresh of every block, in dependency order. Returns the
        largest movement of each block."""
        d_phi = self.phi_fixed_point()
        if trace is not None:
            trace.append(("phi", -1, self.objective()))
        self.zeta_refresh()
        if trace is not None:
            trace.append(("zeta", -1, self.objective()))
        d_sig = 0.0
        for t in range(self.S):
            d_sig = max(d_sig, self.sigma_solve(t))
            if trace is not None:
                trace.append(("sigma", t, self.objective()))
        d_gam = self.gamma_global()
        if trace is not None:
            trace.append(("gamma", -1, self.objective()))
        return d_phi, d_sig, d_gam

    def objective(self):
        return bound_value(self.Y, self.vs, self.params, validate=False)

    def run(self):
        cfg = self.cfg
        trace = [] if cfg.track_objective else None
        converged = False
        sweeps = 0
        for sweeps in range(1, cfg.max_sweeps + 1):
            d_phi, d_sig, d_gam = self.cycle(trace)
            if d_phi >= cfg.phi_tol or d_sig >= cfg.sigma_tol:
                continue
            if d_gam >= cfg.gamma_tol and self.gamma_grad_max() >= cfg.grad_tol:
                continue
            if (
                self.sigma_residual_max() < cfg.sigma_resid_tol
                and self.gamma_grad_max() < cfg.grad_tol
            ):
                converged = True
                break
            if max(d_phi, d_sig, d_gam) < 1e-15:
                break
        return EStepResult(
            vs=self.vs,
            converged=converged,
            sweeps=sweeps,
            max_gamma_grad=self.gamma_grad_max(),
            max_sigma_resid=self.sigma_residual_max(),
            final_elbo=self.objective(),
            n_damping_events=self.n_damping_events,
            objective_trace=trace or [],
        )


def solve_sigma(p, t, k, vs, params, Y):
    """Standard deviation solving the variance fixed point for one entry."""
    sweeper = _Sweeper(Y, vs, params, EStepConfig())
    sweeper.sigma_solve(t)
    return float(sweeper.vs.sigma[t, p, k])


def update_gamma(p, t, vs, params, Y, config=None):
    """Newton solve of one node's step-t mean, all else held fixed.

    Within a single node and step the slice objective's curvature is exactly
    the precision load plus the anchored exponential term, so the undamped
    step converges quadratically; candidate moves are still checked in
    difference form and halved if they would lower the slice."""
    cfg = config or EStepConfig()
    sweeper = _Sweeper(Y, vs, params, cfg)
    phi_sums = sweeper._phi_sums_t(t)

    def slice_delta(d_p):
        d = np.zeros_like(sweeper.vs.gamma)
        d[t, p] = d_p
        val = float((phi_sums[p] * d_p).sum())
        scale = np.exp(
            sweeper.vs.gamma[t, p]
            + 0.5 * sweeper.vs.sigma[t, p] ** 2
            - sweeper.logzeta[t, p]
        )
        val -= sweeper.two_nm1 * float((scale * np.expm1(d_p)).sum())
        return val + sweeper._quad_delta(d)

    for _ in range(cfg.max_inner_iters):
        grad, bound = sweeper._gamma_grad_t(t, phi_sums)
        if np.abs(grad[p]).max() < 0.5 * cfg.grad_tol:
            break
        step = grad[p] / (sweeper.C[t][p] + bound[p])
        damp = cfg.damping
        for _ in range(60):
            if slice_delta(damp * step) >= 0.0:
                sweeper.vs.gamma[t, p] += damp * step
                break
            damp *= 0.5
    return sweeper.vs.gamma[t, p].copy()


def update_zeta(p, t, vs):
    """Closed-form anchor: the expected total exponentiated membership."""
    x = vs.gamma[t, p] + 0.5 * vs.sigma[t, p] ** 2
    m = x.max()
    return float(np.exp(m) * np.exp(x - m).sum())


def run_estep(Y, vs, params, config=None):
    """Run block-ascent cycles to convergence; see :class:`EStepResult`."""
    cfg = config or EStepConfig()
    params.validate()
    vs.validate()
    return _Sweeper(Y, vs, params, cfg).run()
