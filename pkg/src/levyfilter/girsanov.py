"""Likelihood weights and reference-measure drivers.

Under the reference measure the observation is driftless, its Brownian
driver is recoverable from the recorded Y path, and observation jumps
arrive at the full dominating rate.  The weight that carries expectations
back to the physical measure factorizes per step into

    brownian:     h . dWtilde - |h|^2 dt / 2      (reference parameterization)
    jump:         log lam at each accepted observation jump
    compensator:  (1 - lam) nu2(U) dt

and the inverse weight (physical parameterization) into the negatives
with the Brownian part written against the physical W.  Both exponentials
are mean-one martingales, which the batch samplers below make testable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvertibilityError, ModelViolationError
from .rng import substream


def _bmatvec(A, v):
    """Matrix-vector product with optional leading batch dimensions."""
    A = np.asarray(A, float)
    v = np.asarray(v, float)
    if A.ndim == 2:
        return v @ A.T
    return np.einsum("...ij,...j->...i", A, v)


@dataclass
class LikelihoodPath:
    """Cumulative inverse log-weight along one path, with its decomposition."""

    t: np.ndarray
    brownian: np.ndarray
    jump: np.ndarray
    compensator: np.ndarray

    @property
    def log_lambda_inverse(self):
        return self.brownian + self.jump + self.compensator

    @property
    def log_lambda(self):
        return -self.log_lambda_inverse


def log_lambda_inverse(record, spec):
    """Inverse likelihood weight accumulated along a simulated PathRecord.

    The jump part changes only at accepted observation-jump steps; the
    Brownian and compensator parts accumulate on continuous steps with
    left-endpoint coefficient evaluation and the record's frozen marks.
    """
    K = len(record.t) - 1
    brown = np.zeros(K + 1)
    jump = np.zeros(K + 1)
    comp = np.zeros(K + 1)
    dt_all = record.dt()
    for k in range(K):
        db, dj, dc = 0.0, 0.0, 0.0
        t = record.t[k]
        x = record.X[k]
        if record.step_kind[k] == 0:
            dt = dt_all[k]
            h = np.asarray(spec.h(t, x, record.Y[k]), float)
            db = -float(h @ record.dW[k]) - 0.5 * float(h @ h) * dt
            if spec.nu2.rate > 0.0:
                lam_bar = float(np.mean(spec.lam_marks(t, x, record.marks2)))
                dc = -dt * spec.nu2.rate * (1.0 - lam_bar)
        elif record.step_kind[k] == 2 and record.step_accepted[k]:
            u = record.step_mark[k, :spec.nu2.dim]
            lam = float(spec.lam(t, x, u))
            if not (0.0 < lam < 1.0) or not np.isfinite(lam):
                raise ModelViolationError(
                    f"intensity ratio {lam!r} outside (0,1) at t={t:g}")
            dj = -np.log(lam)
        brown[k + 1] = brown[k] + db
        jump[k + 1] = jump[k] + dj
        comp[k + 1] = comp[k] + dc
    return LikelihoodPath(record.t.copy(), brown, jump, comp)


@dataclass
class ReferenceDrivers:
    """Observation-measurable drivers on the observation grid.

    ``dW[k]`` is the reconstructed reference Brownian increment over step
    k (zero on jump steps); jump steps carry exactly one event each.
    """

    t: np.ndarray
    dW: np.ndarray
    event_steps: np.ndarray
    events: list
    rate2: float
    marks2: np.ndarray

    def dt(self):
        return np.diff(self.t)

    def is_jump_step(self):
        out = np.zeros(len(self.t) - 1, bool)
        out[self.event_steps] = True
        return out

    def step_event(self):
        return {int(k): e for e, k in zip(self.events, self.event_steps)}


def reconstruct_reference_drivers(obs, spec):
    """Invert the reference observation dynamics for the Brownian driver.

    Per continuous step:  dW = obs_sigma(t, Y_t)^{-1} (dY + dt * int f2 nu2),
    using the record's frozen marks for the compensator; jump steps (zero
    length, one event) contribute dW = 0.  Raises InvertibilityError with
    the condition number when obs_sigma is singular.
    """
    K = len(obs.t) - 1
    m = obs.Y.shape[1]
    dW = np.zeros((K, m))
    dt_all = obs.dt()
    jump_steps = set(int(k) for k in obs.event_steps)
    for k in range(K):
        if k in jump_steps:
            continue
        t = obs.t[k]
        y = obs.Y[k]
        dt = dt_all[k]
        comp = spec.obs_jump_drift_reference(t, y, obs.marks2)
        rhs = (obs.Y[k + 1] - y) + dt * comp
        sig = np.asarray(spec.obs_sigma(t, y), float)
        try:
            dW[k] = np.linalg.solve(sig, rhs)
        except np.linalg.LinAlgError as exc:
            raise InvertibilityError(
                f"observation diffusion singular at t={t:g} "
                f"(condition number {np.linalg.cond(sig):.3e})") from exc
    return ReferenceDrivers(obs.t.copy(), dW, np.asarray(obs.event_steps, int),
                            list(obs.events), spec.nu2.rate, obs.marks2)


def resynthesize_observation(drivers, spec, y0):
    """Re-integrate the reference observation dynamics from its drivers.

    Returns the (K+1, m) node values; with drivers reconstructed from an
    ObservationRecord this reproduces its Y path up to float roundoff.
    """
    K = len(drivers.t) - 1
    m = drivers.dW.shape[1]
    Y = np.empty((K + 1, m))
    Y[0] = np.asarray(y0, float).reshape(m)
    dt_all = drivers.dt()
    ev = drivers.step_event()
    for k in range(K):
        t = drivers.t[k]
        y = Y[k]
        if k in ev:
            Y[k + 1] = y + np.asarray(spec.f2(t, y, ev[k].mark), float).reshape(m)
        else:
            dt = dt_all[k]
            comp = spec.obs_jump_drift_reference(t, y, drivers.marks2)
            sig = np.asarray(spec.obs_sigma(t, y), float)
            Y[k + 1] = y + sig @ drivers.dW[k] - dt * comp
    return Y


def write_likelihood_csv(lik, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "log_lambda_inverse", "brownian", "jump", "compensator"])
        tot = lik.log_lambda_inverse
        for k in range(len(lik.t)):
            w.writerow([format(v, ".17g") for v in
                        (lik.t[k], tot[k], lik.brownian[k], lik.jump[k],
                         lik.compensator[k])])


# --- batch martingale samplers ----------------------------------------------

def _apply_jumps(spec, rng_counts, rng_marks, t, rate, nu, state, fn, dt,
                 weight=None, lam_state=None):
    """Apply Poisson(rate*dt) jumps per batch row; optionally weight by lam."""
    R = state.shape[0]
    counts = rng_counts.poisson(rate * dt, size=R)
    cmax = int(counts.max()) if R else 0
    for j in range(1, cmax + 1):
        mask = counts >= j
        nm = int(mask.sum())
        u = np.asarray(nu.sampler(rng_marks, nm), float).reshape(nm, nu.dim)
        if weight is not None:
            lamv = np.asarray(spec.lam(t, lam_state[mask], u), float)
            if np.any(~np.isfinite(lamv)) or np.any(lamv <= 0.0) or np.any(lamv >= 1.0):
                raise ModelViolationError(
                    f"intensity ratio outside (0,1) at t={t:g}")
            weight[mask] += np.log(lamv)
        state[mask] += np.asarray(fn(t, state[mask], u), float)
    return state, weight


def sample_reference_log_weights(spec, grid, n_paths, x0_sampler, y0, rng_seed):
    """Log-weights log Lambda_T over independent reference-measure paths.

    The per-step weight factors are exact likelihood ratios of the
    discretized transition laws, so mean(exp(logw)) estimates 1 without a
    time-discretization bias when lam is mark-independent (mark-dependent
    lam adds an O(1/sqrt(mark_budget)) compensator error).
    """
    R = int(n_paths)
    n, m = spec.n, spec.m
    X = np.asarray(x0_sampler(substream(rng_seed, "x0"), R), float).reshape(R, n)
    Y = np.broadcast_to(np.asarray(y0, float).reshape(m), (R, m)).copy()
    logw = np.zeros(R)
    marks1 = spec.nu1.frozen_marks(spec.mark_budget)
    marks2 = spec.nu2.frozen_marks(spec.mark_budget)
    rng_g = substream(rng_seed, "brownian")
    rng_c = substream(rng_seed, "jump-counts")
    rng_u = substream(rng_seed, "jump-marks")
    nodes = grid.nodes()
    dt = grid.dt
    q = spec.indep_dim()
    sq = np.sqrt(dt)
    for k in range(grid.n_steps):
        t = nodes[k]
        dW = rng_g.standard_normal((R, m)) * sq
        dXi = rng_g.standard_normal((R, q)) * sq
        hv = np.asarray(spec.h(t, X, Y), float).reshape(R, m)
        logw += np.einsum("rm,rm->r", hv, dW) - 0.5 * np.sum(hv * hv, axis=1) * dt
        if spec.nu2.rate > 0.0:
            lam_bar = np.mean(spec.lam_marks(t, X, marks2), axis=-1)
            logw += dt * spec.nu2.rate * (1.0 - lam_bar)
        coup = spec.coupling(t, X)
        drift = (np.asarray(spec.b1(t, X), float)
                 - np.einsum("...nm,...m->...n", coup, hv)
                 - spec.signal_jump_drift(t, X, marks1))
        Xn = (X + drift * dt + np.einsum("...nm,...m->...n", coup, dW)
              + np.einsum("...nq,...q->...n", spec.indep_factor(t, X), dXi))
        comp2 = spec.obs_jump_drift_reference(t, Y, marks2)
        Yn = Y + _bmatvec(spec.obs_sigma(t, Y), dW) - dt * comp2
        X_left = X
        if spec.nu2.rate > 0.0:
            Yn, logw = _apply_jumps(spec, rng_c, rng_u, t, spec.nu2.rate,
                                    spec.nu2, Yn, spec.f2, dt,
                                    weight=logw, lam_state=X_left)
        if spec.nu1.rate > 0.0:
            Xn, _ = _apply_jumps(spec, rng_c, rng_u, t, spec.nu1.rate,
                                 spec.nu1, Xn, spec.f1, dt)
        X, Y = Xn, Yn
    return logw


def sample_model_log_inverse_weights(spec, grid, n_paths, x0_sampler, y0, rng_seed):
    """Inverse log-weights log Lambda_T^{-1} over physical-measure paths."""
    R = int(n_paths)
    n, m, d = spec.n, spec.m, spec.d
    X = np.asarray(x0_sampler(substream(rng_seed, "x0"), R), float).reshape(R, n)
    Y = np.broadcast_to(np.asarray(y0, float).reshape(m), (R, m)).copy()
    logw = np.zeros(R)
    marks1 = spec.nu1.frozen_marks(spec.mark_budget)
    marks2 = spec.nu2.frozen_marks(spec.mark_budget)
    rng_g = substream(rng_seed, "brownian")
    rng_c = substream(rng_seed, "jump-counts")
    rng_u = substream(rng_seed, "jump-marks")
    rng_a = substream(rng_seed, "thinning")
    nodes = grid.nodes()
    dt = grid.dt
    sq = np.sqrt(dt)
    for k in range(grid.n_steps):
        t = nodes[k]
        dW = rng_g.standard_normal((R, m)) * sq
        dB = rng_g.standard_normal((R, d)) * sq
        hv = np.asarray(spec.h(t, X, Y), float).reshape(R, m)
        logw += -np.einsum("rm,rm->r", hv, dW) - 0.5 * np.sum(hv * hv, axis=1) * dt
        if spec.nu2.rate > 0.0:
            lam_bar = np.mean(spec.lam_marks(t, X, marks2), axis=-1)
            logw -= dt * spec.nu2.rate * (1.0 - lam_bar)
        b1v = np.asarray(spec.b1(t, X), float)
        comp1 = spec.signal_jump_drift(t, X, marks1)
        s1 = np.asarray(spec.sigma1(t, X), float)
        b2v = np.asarray(spec.b2(t, X, Y), float)
        comp2 = spec.obs_jump_drift_reference(t, Y, marks2)
        if spec.variant == "sensor":
            Xn = X + (b1v - comp1) * dt + np.einsum("...nm,...m->...n", s1, dW)
            Yn = Y + (b2v - comp2) * dt + dW @ spec.mix_w.T + dB @ spec.mix_b.T
        else:
            s0 = np.asarray(spec.sigma0(t, X), float)
            Xn = (X + (b1v - comp1) * dt
                  + np.einsum("...nd,...d->...n", s0, dB)
                  + np.einsum("...nm,...m->...n", s1, dW))
            Yn = Y + (b2v - comp2) * dt + _bmatvec(spec.sigma2(t, Y), dW)
        X_left = X
        if spec.nu2.rate > 0.0:
            counts = rng_c.poisson(spec.nu2.rate * dt, size=R)
            cmax = int(counts.max())
            for j in range(1, cmax + 1):
                mask = counts >= j
                nm = int(mask.sum())
                u = np.asarray(spec.nu2.sampler(rng_u, nm), float).reshape(nm, spec.nu2.dim)
                lamv = np.asarray(spec.lam(t, X_left[mask], u), float)
                if np.any(~np.isfinite(lamv)) or np.any(lamv <= 0.0) or np.any(lamv >= 1.0):
                    raise ModelViolationError(
                        f"intensity ratio outside (0,1) at t={t:g}")
                acc = rng_a.uniform(size=nm) < lamv
                sel = np.flatnonzero(mask)[acc]
                if sel.size:
                    logw[sel] -= np.log(lamv[acc])
                    Yn[sel] += np.asarray(spec.f2(t, Yn[sel], u[acc]), float)
        if spec.nu1.rate > 0.0:
            Xn, _ = _apply_jumps(spec, rng_c, rng_u, t, spec.nu1.rate,
                                 spec.nu1, Xn, spec.f1, dt)
        X, Y = Xn, Yn
    return logw
