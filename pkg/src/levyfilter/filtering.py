"""Weighted-particle conditional distributions on an observation record.

The cloud propagates signal dynamics under the reference measure (shared
reconstructed Brownian driver, per-particle independent noise and signal
jumps) while each particle accumulates the likelihood weight.  Cloud
averages of the weights give the unnormalized conditional distribution;
softmax-normalized averages give the conditional law itself.  Residual
assemblers check both against their defining evolution equations using
moments recorded at every node during the run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ModelViolationError
from .girsanov import reconstruct_reference_drivers
from .model import generator_values
from .rng import substream


def _logsumexp(a):
    m = np.max(a)
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(a - m)))


def effective_sample_size(logw):
    """(sum w)^2 / sum w^2, computed stably in log space."""
    m = np.max(logw)
    if not np.isfinite(m):
        return 0.0
    e = np.exp(logw - m)
    s = e.sum()
    return float(s * s / np.sum(e * e))


@dataclass
class ParticleCloud:
    """Particle locations with unnormalized log-weights."""

    x: np.ndarray
    logw: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, float))
        self.logw = np.asarray(self.logw, float).reshape(self.x.shape[0])

    @property
    def n_particles(self):
        return self.x.shape[0]

    def log_mass(self):
        """log of the mean unnormalized weight (zero for a fresh cloud)."""
        return float(_logsumexp(self.logw) - np.log(self.n_particles))

    def normalized_weights(self):
        m = np.max(self.logw)
        e = np.exp(self.logw - m)
        return e / e.sum()

    def ess(self):
        return effective_sample_size(self.logw)

    def copy(self):
        return ParticleCloud(self.x.copy(), self.logw.copy())


def normalize_cloud(cloud):
    """Shift log-weights so the mean weight is one; no-op when it already is."""
    shift = cloud.log_mass()
    if shift == 0.0:
        return cloud
    return ParticleCloud(cloud.x, cloud.logw - shift)


def _values(F, x):
    fn = getattr(F, "value", F)
    return np.asarray(fn(x), float).reshape(x.shape[0])


def estimate_moment(cloud, F, normalized=True):
    """Cloud moment of F: conditional mean, or unnormalized when requested."""
    vals = _values(F, cloud.x)
    m = np.max(cloud.logw)
    e = np.exp(cloud.logw - m)
    if normalized:
        return float(np.dot(e, vals) / e.sum())
    return float(np.exp(m) * np.dot(e, vals) / cloud.n_particles)


def resample(cloud, rng):
    """Systematic resampling preserving the total unnormalized mass."""
    N = cloud.n_particles
    w = cloud.normalized_weights()
    edges = np.cumsum(w)
    edges[-1] = 1.0
    points = (rng.uniform() + np.arange(N)) / N
    idx = np.searchsorted(edges, points, side="right")
    idx = np.minimum(idx, N - 1)
    logw = np.full(N, cloud.log_mass())
    return ParticleCloud(cloud.x[idx], logw)


@dataclass(frozen=True)
class ResamplePolicy:
    """Resample when ESS falls below ess_fraction * N (0 disables)."""

    ess_fraction: float = 0.5

    def should_fire(self, cloud):
        if self.ess_fraction <= 0.0:
            return False
        return cloud.ess() < self.ess_fraction * cloud.n_particles


@dataclass
class GainTerms:
    """Per-node ingredients of the observation-driven correction terms."""

    pi_F: float
    pi_h: np.ndarray
    grad_coup: np.ndarray
    f_h: np.ndarray

    def zakai_gain(self):
        return self.grad_coup + self.f_h

    def ks_gain(self):
        return self.grad_coup + self.f_h - self.pi_F * self.pi_h


def gain_terms(spec, cloud, t, y, F):
    """Conditional-moment gain ingredients for one test function."""
    w = cloud.normalized_weights()
    x = cloud.x
    vals = _values(F, x)
    hv = np.asarray(spec.h(t, x, y), float).reshape(x.shape[0], spec.m)
    grad = np.asarray(F.grad(x), float).reshape(x.shape[0], spec.n)
    coup = spec.coupling(t, x)
    if coup.ndim == 2:
        coup = np.broadcast_to(coup, (x.shape[0],) + coup.shape)
    gc = np.einsum("Nn,Nnm->Nm", grad, coup)
    return GainTerms(
        pi_F=float(w @ vals),
        pi_h=w @ hv,
        grad_coup=w @ gc,
        f_h=w @ (vals[:, None] * hv),
    )


@dataclass
class FunctionSummary:
    """Node-indexed conditional moments for one test function."""

    name: str
    pi_F: np.ndarray
    pi_LF: np.ndarray
    grad_coup: np.ndarray
    f_h: np.ndarray
    pi_F_lambar: np.ndarray
    jump_D: np.ndarray
    zakai_jump: np.ndarray


@dataclass
class FilterTrajectory:
    """Filter output on the observation grid: masses, moments, drivers."""

    t: np.ndarray
    dt: np.ndarray
    dW: np.ndarray
    is_jump: np.ndarray
    log_mass: np.ndarray
    ess: np.ndarray
    pi_h: np.ndarray
    pi_lambar: np.ndarray
    rate2: float
    summaries: dict
    n_particles: int
    rng_seed: int
    resampled: np.ndarray
    clouds: list | None = None
    event_count: np.ndarray | None = None

    def summary(self, name):
        return self.summaries[name]

    def mass(self):
        return np.exp(self.log_mass)


def zakai_filter(spec, obs, n_particles, prior_sampler, rng_seed, *,
                 test_functions=(), resample_policy=ResamplePolicy(),
                 store_clouds=False, mass_floor=1e-300):
    """Propagate a weighted cloud along an observation record.

    Per continuous step every particle follows the reference-measure signal
    dynamics driven by the shared reconstructed Brownian increment plus its
    own independent noise and compensated jumps, and its log-weight gains
    h.dW - |h|^2 dt/2 + rate2 (1 - lambda_bar) dt.  Observation-jump steps
    multiply weights by lambda(t, x-, u).  Node moments for the requested
    test functions are recorded before each step (left-endpoint convention)
    so the residual assemblers can telescope them afterwards.
    """
    drivers = reconstruct_reference_drivers(obs, spec)
    N = int(n_particles)
    n, m = spec.n, spec.m
    K = len(obs.t) - 1
    x = np.asarray(prior_sampler(substream(rng_seed, "prior"), N), float).reshape(N, n)
    logw = np.zeros(N)
    marks1 = spec.nu1.frozen_marks(spec.mark_budget)
    marks2 = obs.marks2
    rng_b = substream(rng_seed, "particle-brownian")
    rng_c = substream(rng_seed, "particle-jump-counts")
    rng_u = substream(rng_seed, "particle-jump-marks")
    q = spec.indep_dim()
    ev = drivers.step_event()
    dt_all = drivers.dt()

    funcs = list(test_functions)
    names = [F.name for F in funcs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate test function names")
    log_mass = np.zeros(K + 1)
    ess_arr = np.zeros(K + 1)
    pi_h = np.zeros((K + 1, m))
    pi_lambar = np.ones(K + 1)
    resampled = np.zeros(K + 1, bool)
    summ = {
        name: FunctionSummary(
            name=name,
            pi_F=np.zeros(K + 1), pi_LF=np.zeros(K + 1),
            grad_coup=np.zeros((K + 1, m)), f_h=np.zeros((K + 1, m)),
            pi_F_lambar=np.zeros(K + 1),
            jump_D=np.zeros(K), zakai_jump=np.zeros(K))
        for name in names
    }
    clouds = [] if store_clouds else None
    event_count = np.zeros(K + 1)

    def record_node(k, t, y):
        mass = _logsumexp(logw) - np.log(N)
        if not np.isfinite(mass) or mass < np.log(mass_floor):
            raise DegeneracyError(
                f"unnormalized mass collapsed at t={t:g} (log mass {mass:.3g})")
        log_mass[k] = mass
        ess_arr[k] = effective_sample_size(logw)
        wmax = np.max(logw)
        e = np.exp(logw - wmax)
        w = e / e.sum()
        hv = np.asarray(spec.h(t, x, y), float).reshape(N, m)
        pi_h[k] = w @ hv
        if spec.nu2.rate > 0.0:
            lam_bar = np.mean(spec.lam_marks(t, x, marks2), axis=-1)
            pi_lambar[k] = float(w @ lam_bar)
        else:
            lam_bar = None
        per_f = {}
        for F in funcs:
            s = summ[F.name]
            vals = _values(F, x)
            s.pi_F[k] = float(w @ vals)
            gv, _ = generator_values(spec, F, t, x, marks1)
            s.pi_LF[k] = float(w @ gv)
            grad = np.asarray(F.grad(x), float).reshape(N, n)
            coup = spec.coupling(t, x)
            if coup.ndim == 2:
                coup = np.broadcast_to(coup, (N,) + coup.shape)
            s.grad_coup[k] = w @ np.einsum("Nn,Nnm->Nm", grad, coup)
            s.f_h[k] = w @ (vals[:, None] * hv)
            if lam_bar is None:
                s.pi_F_lambar[k] = s.pi_F[k]
            else:
                s.pi_F_lambar[k] = float(w @ (vals * lam_bar))
            per_f[F.name] = vals
        if store_clouds:
            clouds.append(ParticleCloud(x.copy(), logw.copy()))
        return w, per_f

    for k in range(K):
        t = obs.t[k]
        y = obs.Y[k]
        cloud_now = ParticleCloud(x, logw)
        if k > 0 and resample_policy.should_fire(cloud_now):
            new = resample(cloud_now, substream(rng_seed, f"resample-{k}"))
            x, logw = new.x, new.logw
            resampled[k] = True
        w, per_f = record_node(k, t, y)
        event_count[k + 1] = event_count[k]
        if k in ev:
            u = ev[k].mark
            lam = np.asarray(spec.lam(t, x, u), float).reshape(N)
            if np.any(~np.isfinite(lam)) or np.any(lam <= 0.0) or np.any(lam >= 1.0):
                raise ModelViolationError(
                    f"intensity ratio outside (0,1) at t={t:g}")
            b = float(w @ lam)
            if b < spec.iota:
                raise ModelViolationError(
                    f"conditional intensity {b:.3g} below floor {spec.iota:g} "
                    f"at t={t:g}")
            mass_left = np.exp(log_mass[k])
            for F in funcs:
                s = summ[F.name]
                a = float(w @ (per_f[F.name] * lam))
                s.jump_D[k] = a / b - s.pi_F[k]
                s.zakai_jump[k] = mass_left * (a - s.pi_F[k])
            logw = logw + np.log(lam)
            event_count[k + 1] += 1.0
        else:
            dt = dt_all[k]
            dW = drivers.dW[k]
            hv = np.asarray(spec.h(t, x, y), float).reshape(N, m)
            logw = logw + hv @ dW - 0.5 * np.sum(hv * hv, axis=1) * dt
            if spec.nu2.rate > 0.0:
                lam_bar = np.mean(spec.lam_marks(t, x, marks2), axis=-1)
                logw = logw + dt * spec.nu2.rate * (1.0 - lam_bar)
            coup = spec.coupling(t, x)
            if coup.ndim == 2:
                coup = np.broadcast_to(coup, (N,) + coup.shape)
            drift = (np.asarray(spec.b1(t, x), float).reshape(N, n)
                     - np.einsum("Nnm,Nm->Nn", coup, hv)
                     - spec.signal_jump_drift(t, x, marks1))
            indep = spec.indep_factor(t, x)
            if indep.ndim == 2:
                indep = np.broadcast_to(indep, (N,) + indep.shape)
            dB = rng_b.standard_normal((N, q)) * np.sqrt(dt)
            x = (x + drift * dt + coup @ dW
                 + np.einsum("Nnq,Nq->Nn", indep, dB))
            if spec.nu1.rate > 0.0:
                counts = rng_c.poisson(spec.nu1.rate * dt, size=N)
                cmax = int(counts.max())
                for j in range(1, cmax + 1):
                    mask = counts >= j
                    nm = int(mask.sum())
                    # marks come from the frozen sample, so the compensator
                    # in the drift is exact for the jump law the cloud follows
                    u1 = marks1[rng_u.integers(0, len(marks1), nm)]
                    x[mask] += np.asarray(spec.f1(t, x[mask], u1), float)
    record_node(K, obs.t[K], obs.Y[K])

    return FilterTrajectory(
        t=obs.t.copy(), dt=dt_all, dW=drivers.dW, is_jump=drivers.is_jump_step(),
        log_mass=log_mass, ess=ess_arr, pi_h=pi_h, pi_lambar=pi_lambar,
        rate2=spec.nu2.rate, summaries=summ, n_particles=N, rng_seed=rng_seed,
        resampled=resampled, clouds=clouds, event_count=event_count)


def ks_residual(traj, name):
    """Defect of the normalized moment path against its evolution equation.

    Returns the cumulative residual at every node; the value at node k is
    pi_k(F) - pi_0(F) minus the discretized drift, innovation-gain, and
    compensated-jump terms accumulated over steps 0..k-1.
    """
    s = traj.summaries[name]
    K = len(traj.t) - 1
    res = np.zeros(K + 1)
    cum = 0.0
    for k in range(K):
        if traj.is_jump[k]:
            inc = s.jump_D[k]
        else:
            dt = traj.dt[k]
            dw_bar = traj.dW[k] - traj.pi_h[k] * dt
            gain = s.grad_coup[k] + s.f_h[k] - s.pi_F[k] * traj.pi_h[k]
            inc = s.pi_LF[k] * dt + float(gain @ dw_bar)
            if traj.rate2 > 0.0:
                inc -= dt * traj.rate2 * (
                    s.pi_F_lambar[k] - s.pi_F[k] * traj.pi_lambar[k])
        cum += inc
        res[k + 1] = s.pi_F[k + 1] - s.pi_F[0] - cum
    return res


def zakai_residual(traj, name):
    """Defect of the unnormalized moment path against its evolution equation."""
    s = traj.summaries[name]
    K = len(traj.t) - 1
    mass = traj.mass()
    res = np.zeros(K + 1)
    cum = 0.0
    for k in range(K):
        if traj.is_jump[k]:
            inc = s.zakai_jump[k]
        else:
            dt = traj.dt[k]
            gain = s.grad_coup[k] + s.f_h[k]
            inc = mass[k] * (s.pi_LF[k] * dt + float(gain @ traj.dW[k]))
            if traj.rate2 > 0.0:
                inc -= dt * traj.rate2 * mass[k] * (s.pi_F_lambar[k] - s.pi_F[k])
        cum += inc
        res[k + 1] = mass[k + 1] * s.pi_F[k + 1] - mass[0] * s.pi_F[0] - cum
    return res


@dataclass
class InnovationRecord:
    """Innovation increments and compensated observation-jump count."""

    t: np.ndarray
    dW_bar: np.ndarray
    continuous: np.ndarray
    jump_compensated: np.ndarray


def innovation_process(traj):
    """Observation drivers with the filter's predictions removed.

    On continuous steps dW_bar = dW - pi(h) dt, a Brownian increment under
    the physical law when the filter is consistent; the compensated count
    subtracts rate2 * pi(lambda_bar) dt from the running jump count.
    """
    K = len(traj.t) - 1
    dW_bar = np.zeros_like(traj.dW)
    cont = ~traj.is_jump
    comp = np.zeros(K + 1)
    for k in range(K):
        if cont[k]:
            dW_bar[k] = traj.dW[k] - traj.pi_h[k] * traj.dt[k]
            comp[k + 1] = comp[k] - traj.rate2 * traj.pi_lambar[k] * traj.dt[k]
        else:
            comp[k + 1] = comp[k] + 1.0
    return InnovationRecord(traj.t.copy(), dW_bar, cont, comp)


def pathwise_uniqueness_probe(spec, obs, n_particles, prior_sampler,
                              seed_a, seed_b, functions=None):
    """Sup distance between two filter runs over a probe moment family.

    Equal seeds must return exactly zero; independent seeds measure the
    cloud-to-cloud spread of the conditional moments.
    """
    from .testfuncs import coordinate, quadratic

    if functions is None:
        functions = [coordinate(i, spec.n) for i in range(spec.n)]
        functions.append(quadratic(spec.n))
    kw = dict(test_functions=functions)
    ta = zakai_filter(spec, obs, n_particles, prior_sampler, seed_a, **kw)
    tb = zakai_filter(spec, obs, n_particles, prior_sampler, seed_b, **kw)
    dist = 0.0
    for F in functions:
        dist = max(dist, float(np.max(np.abs(
            ta.summaries[F.name].pi_F - tb.summaries[F.name].pi_F))))
    return dist


def write_trajectory_csv(traj, path):
    names = list(traj.summaries)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t", "log_mass", "ess", "resampled"]
        header += [f"pi_h_{l}" for l in range(traj.pi_h.shape[1])]
        header += ["pi_lambda_bar"]
        header += [f"pi_{name}" for name in names]
        w.writerow(header)
        for k in range(len(traj.t)):
            row = [format(traj.t[k], ".17g"), format(traj.log_mass[k], ".17g"),
                   format(traj.ess[k], ".17g"), int(traj.resampled[k])]
            row += [format(v, ".17g") for v in traj.pi_h[k]]
            row += [format(traj.pi_lambar[k], ".17g")]
            row += [format(traj.summaries[name].pi_F[k], ".17g")
                    for name in names]
            w.writerow(row)
