"""Finite-activity jump streams: sampling, thinning, compensator quadrature.

Candidate events are drawn from a dominating Poisson measure (rate *
mark-law); observation-channel events are then kept with the
state-dependent probability ``lam(t, x, u)``.  The accepted stream has
compensator ``lam(t, x, u) dt nu2(du)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelViolationError, NumericOverflowError
from .rng import substream


@dataclass
class JumpEvent:
    t: float
    mark: np.ndarray
    channel: str = "signal"       # "signal" or "observation"
    accepted: bool = True

    def __post_init__(self):
        self.mark = np.atleast_1d(np.asarray(self.mark, float))


@dataclass
class JumpStream:
    """Time-sorted event list plus the bookkeeping needed to regenerate it."""

    events: list
    t0: float
    t1: float
    rate: float
    seed: int = 0
    channel: str = "signal"

    def __post_init__(self):
        ts = [e.t for e in self.events]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("jump events must be time-sorted")
        for e in self.events:
            if not (self.t0 <= e.t <= self.t1):
                raise ValueError(f"event time {e.t} outside [{self.t0}, {self.t1}]")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def times(self):
        return np.array([e.t for e in self.events])

    def marks(self):
        if not self.events:
            return np.zeros((0, 1))
        return np.stack([e.mark for e in self.events])

    def accepted(self):
        return JumpStream([e for e in self.events if e.accepted],
                         self.t0, self.t1, self.rate, self.seed, self.channel)


def sample_poisson_stream(nu, t0, t1, rng_seed, channel="signal"):
    """Draw one realization of the dominating Poisson stream of ``nu``.

    Event count is Poisson(rate * (t1 - t0)), event times are uniform on
    [t0, t1) and sorted, marks are independent draws from the mark law.
    Identical seeds produce bit-identical streams.
    """
    t0, t1 = float(t0), float(t1)
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    if nu.rate < 0.0 or not np.isfinite(nu.rate):
        raise ValueError(f"invalid stream rate {nu.rate}")
    rng = substream(rng_seed, "poisson", channel)
    if nu.rate == 0.0 or t1 == t0:
        return JumpStream([], t0, t1, nu.rate, int(rng_seed), channel)
    count = int(rng.poisson(nu.rate * (t1 - t0)))
    times = np.sort(rng.uniform(t0, t1, size=count))
    marks = np.asarray(nu.sampler(rng, count), float).reshape(count, nu.dim)
    events = [JumpEvent(float(t), u, channel=channel) for t, u in zip(times, marks)]
    return JumpStream(events, t0, t1, nu.rate, int(rng_seed), channel)


def thin_by_lambda(candidates, spec, x_lookup, rng_seed):
    """Thin a candidate stream by the acceptance probability lam(t, x(t-), u).

    ``x_lookup(t)`` must return the left limit of the signal path at t.
    Returns the accepted stream; the rejected candidates are dropped.
    Raises ModelViolationError when lam leaves (0, 1), reporting (t, x, u).
    """
    rng = substream(rng_seed, "thinning")
    kept = []
    for ev in candidates:
        x = np.asarray(x_lookup(ev.t), float)
        lam = float(spec.lam(ev.t, x, ev.mark))
        if not (0.0 < lam < 1.0) or not np.isfinite(lam):
            raise ModelViolationError(
                f"acceptance probability {lam!r} outside (0,1) at "
                f"t={ev.t:g}, x={x}, u={ev.mark}")
        if rng.uniform() < lam:
            kept.append(JumpEvent(ev.t, ev.mark, channel=ev.channel, accepted=True))
    return JumpStream(kept, candidates.t0, candidates.t1, candidates.rate,
                      int(rng_seed), candidates.channel)


def compensator_integral(spec, g, x_lookup, t0, t1, step, marks=None, mark_seed=None):
    """Time-trapezoid, mark-Monte-Carlo quadrature of

        int_{t0}^{t1} int g(t, u) lam(t, x(t-), u) nu2(du) dt.

    ``marks`` defaults to the spec's frozen mark sample.  Deterministic for
    fixed inputs; non-finite integrands raise NumericOverflowError.
    """
    t0, t1 = float(t0), float(t1)
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    if spec.nu2.rate == 0.0 or t1 == t0:
        return 0.0
    if marks is None:
        marks = spec.nu2.frozen_marks(spec.mark_budget, mark_seed)
    steps = max(1, int(np.ceil((t1 - t0) / float(step))))
    ts = np.linspace(t0, t1, steps + 1)
    vals = np.empty(steps + 1)
    for i, t in enumerate(ts):
        x = np.asarray(x_lookup(t), float)
        gv = np.asarray(g(t, marks), float).reshape(marks.shape[0])
        lamv = np.asarray(spec.lam(t, x[None, :], marks), float).reshape(marks.shape[0])
        vals[i] = spec.nu2.rate * np.mean(gv * lamv)
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmax(~np.isfinite(vals)))
        raise NumericOverflowError(
            f"compensator integrand not finite at t={ts[bad]:g}")
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(vals, ts))


# --- columnar serialization -------------------------------------------------

def write_stream(stream, path):
    """Write a jump stream as a columnar CSV: t, channel, accepted, mark_*."""
    dim = stream.marks().shape[1] if len(stream) else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["# t0", f"{stream.t0:.17g}", "t1", f"{stream.t1:.17g}",
                    "rate", f"{stream.rate:.17g}", "seed", str(stream.seed),
                    "channel", stream.channel])
        w.writerow(["t", "channel", "accepted"] + [f"mark_{i}" for i in range(dim)])
        for ev in stream:
            w.writerow([f"{ev.t:.17g}", ev.channel, int(ev.accepted)]
                       + [f"{v:.17g}" for v in ev.mark])


def read_stream(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    meta = {head[i].lstrip("# "): head[i + 1] for i in range(0, len(head) - 1, 2)}
    events = []
    for row in rows[2:]:
        if not row:
            continue
        t = float(row[0])
        channel = row[1]
        accepted = bool(int(row[2]))
        mark = np.array([float(v) for v in row[3:]])
        events.append(JumpEvent(t, mark, channel=channel, accepted=accepted))
    return JumpStream(events, float(meta["t0"]), float(meta["t1"]),
                      float(meta["rate"]), int(meta["seed"]), meta["channel"])
