"""Path simulation: grid refinement, jump handling, moments, serialization."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyfilter.errors import (ConfigError, DivergenceError,
                               ModelViolationError)
from levyfilter.families import build_family
from levyfilter.simulate import (TimeGrid, coarsen_observation,
                                 project_observation, read_observation,
                                 read_path, simulate_path, write_observation,
                                 write_path)

# --- independent oracles ------------------------------------------------------

def euler_ou_moments(a, var_rate, x0, dt, n_steps):
    """Exact mean/variance of the Euler chain x' = (1+a dt) x + noise.

    The simulated chain is Gaussian with these moments exactly, so the only
    discrepancy left in a Monte Carlo check is sampling error.
    """
    g = 1.0 + a * dt
    mean = x0 * g**n_steps
    var = var_rate * dt * (g ** (2 * n_steps) - 1.0) / (g**2 - 1.0)
    return mean, var


def busy_scenario():
    """Mixed family with boosted jump rates so every step kind occurs."""
    return build_family("mixed", {"rate1": 3.0, "rate2": 4.0, "lam0": 0.2})


# --- time grid ----------------------------------------------------------------

def test_time_grid_basics():
    g = TimeGrid(0.0, 2.0, 8)
    assert g.dt == pytest.approx(0.25)
    nodes = g.nodes()
    assert nodes[0] == 0.0 and nodes[-1] == 2.0 and len(nodes) == 9
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 10)


# --- path structure -----------------------------------------------------------

def test_simulation_deterministic_in_seed():
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 50)
    r1 = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 42)
    r2 = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 42)
    for name in ("t", "X", "Y", "dB", "dW"):
        assert np.array_equal(getattr(r1, name), getattr(r2, name)), name
    r3 = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 43)
    assert not np.array_equal(r3.X, r1.X)


def test_refined_grid_duplicates_every_event_node():
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 7)
    n_events = len(rec.signal_jumps) + len(rec.obs_candidates)
    assert n_events > 0
    assert len(rec.t) == grid.n_steps + 1 + 2 * n_events
    assert np.array_equal(rec.t[rec.base_mask], grid.nodes())
    dt = rec.dt()
    events = rec.step_kind != 0
    assert np.all(dt[events] == 0.0)
    assert np.all(dt[~events] > 0.0)
    assert np.all(rec.dB[events] == 0.0)
    assert np.all(rec.dW[events] == 0.0)


def test_signal_jump_steps_apply_f1_exactly():
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 7)
    ks = rec.event_steps(1)
    assert len(ks) > 0
    for k in ks:
        u = rec.step_mark[k, :scen.spec.nu1.dim]
        jump = np.asarray(scen.spec.f1(rec.t[k], rec.X[k], u), float).reshape(-1)
        assert np.array_equal(rec.X[k + 1], rec.X[k] + jump)
        assert np.array_equal(rec.Y[k + 1], rec.Y[k])


def test_observation_jump_steps_apply_f2_only_when_accepted():
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 11)
    acc = rec.event_steps(2, accepted_only=True)
    rej = np.setdiff1d(rec.event_steps(2), acc)
    assert len(acc) > 0 and len(rej) > 0
    for k in acc:
        u = rec.step_mark[k, :scen.spec.nu2.dim]
        jump = np.asarray(scen.spec.f2(rec.t[k], rec.Y[k], u), float).reshape(-1)
        assert np.array_equal(rec.Y[k + 1], rec.Y[k] + jump)
        assert np.array_equal(rec.X[k + 1], rec.X[k])
    for k in rej:
        assert np.array_equal(rec.Y[k + 1], rec.Y[k])
        assert np.array_equal(rec.X[k + 1], rec.X[k])


def test_x_lookup_returns_left_limit_at_jumps():
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 7)
    lookup = rec.x_lookup()
    k = rec.event_steps(1)[0]
    assert np.array_equal(lookup(rec.t[k]), rec.X[k])
    assert not np.array_equal(rec.X[k + 1], rec.X[k])
    # mid-step query resolves to the step's left node
    cont = np.flatnonzero(rec.step_kind == 0)[0]
    mid = 0.5 * (rec.t[cont] + rec.t[cont + 1])
    assert np.array_equal(lookup(mid), rec.X[cont])


# --- moments ------------------------------------------------------------------

def test_signal_moments_match_euler_chain():
    scen = build_family("linear_gaussian",
                        {"prior_mean": 1.0, "prior_std": 0.0})
    p = scen.params
    grid = TimeGrid(0.0, 1.0, 50)
    R = 400
    xT = np.array([
        simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0,
                      9000 + r).X[-1, 0]
        for r in range(R)])
    mean, var = euler_ou_moments(p["a"], p["s0"] ** 2 + p["s1"] ** 2, 1.0,
                                 grid.dt, grid.n_steps)
    assert abs(xT.mean() - mean) <= 3 * np.sqrt(var / R)
    assert abs(xT.var(ddof=1) - var) <= 3 * var * np.sqrt(2.0 / (R - 1))


# --- failure modes ------------------------------------------------------------

def test_divergence_guard_raises():
    scen = build_family("linear_gaussian",
                        {"prior_mean": 5.0, "prior_std": 0.0})
    grid = TimeGrid(0.0, 1.0, 10)
    with pytest.raises(DivergenceError):
        simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 1,
                      max_norm=1.0)


def test_out_of_range_intensity_raises_during_simulation():
    scen = build_family("jump_only", {"rate2": 20.0})
    bad = replace(scen.spec, lam=lambda t, x, u: np.full(
        np.broadcast(np.asarray(x)[..., 0], np.asarray(u)[..., 0]).shape, 1.5))
    grid = TimeGrid(0.0, bad.T, 20)
    with pytest.raises(ModelViolationError):
        simulate_path(bad, grid, scen.prior_sampler, scen.y0, 3)


# --- observation projection ---------------------------------------------------

def test_projection_keeps_base_nodes_and_accepted_jumps_bitwise():
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 11)
    obs = project_observation(rec)
    n_acc = sum(1 for e in rec.obs_candidates if e.accepted)
    assert len(obs.events) == n_acc > 0
    assert len(obs.t) == grid.n_steps + 1 + 2 * n_acc
    # base-node values are copied bitwise
    base_in_obs = np.isin(obs.t, grid.nodes())
    assert np.array_equal(obs.Y[base_in_obs], rec.Y[rec.base_mask])
    # each event step is a zero-length step whose post node moved by f2
    for ev, k in zip(obs.events, obs.event_steps):
        assert obs.t[k] == obs.t[k + 1] == ev.t
        jump = np.asarray(scen.spec.f2(ev.t, obs.Y[k], ev.mark),
                          float).reshape(-1)
        assert np.array_equal(obs.Y[k + 1], obs.Y[k] + jump)
    # rejected candidate times are stripped
    rejected = [e.t for e in rec.obs_candidates if not e.accepted]
    assert rejected and not np.isin(rejected, obs.t).any()
    # signal-jump nodes are stripped
    sig_times = rec.signal_jumps.times()
    assert len(sig_times) and not np.isin(sig_times, obs.t).any()


def test_coarsening_preserves_surviving_nodes_and_events():
    scen = build_family("jump_only", {"rate2": 6.0})
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 23)
    obs = project_observation(rec)
    assert len(obs.events) > 0
    half = coarsen_observation(obs, 2)
    assert half.base_grid.n_steps == 20
    assert len(half.events) == len(obs.events)
    # every coarse node value appears bitwise in the fine record
    for j, tq in enumerate(half.t):
        i = np.flatnonzero(obs.t == tq)
        assert i.size > 0
        assert any(np.array_equal(half.Y[j], obs.Y[ii]) for ii in i)
    # jump times and marks are untouched
    assert np.array_equal(np.array([e.t for e in half.events]),
                          np.array([e.t for e in obs.events]))
    # event steps are zero-length on the coarse grid too
    for ev, k in zip(half.events, half.event_steps):
        assert half.t[k] == half.t[k + 1] == ev.t


def test_coarsening_identity_and_validation():
    scen = build_family("jump_only", {"rate2": 6.0})
    grid = TimeGrid(0.0, scen.spec.T, 40)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 23)
    obs = project_observation(rec)
    same = coarsen_observation(obs, 1)
    assert np.array_equal(same.t, obs.t)
    assert np.array_equal(same.Y, obs.Y)
    assert np.array_equal(same.event_steps, obs.event_steps)
    with pytest.raises(ConfigError):
        coarsen_observation(obs, 3)      # 40 steps do not split into 3
    with pytest.raises(ConfigError):
        coarsen_observation(obs, 0)


# --- serialization ------------------------------------------------------------

def test_path_roundtrip_csv(tmp_path):
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 30)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 5)
    p = tmp_path / "path.csv"
    write_path(rec, p)
    back = read_path(p)
    for name in ("t", "X", "Y", "dB", "dW", "base_mask", "step_kind",
                 "step_accepted", "step_mark", "marks1", "marks2"):
        assert np.array_equal(getattr(back, name), getattr(rec, name)), name
    assert back.seed == rec.seed
    assert back.base_grid == rec.base_grid
    assert np.array_equal(back.signal_jumps.times(), rec.signal_jumps.times())
    assert np.array_equal(back.obs_candidates.marks(),
                          rec.obs_candidates.marks())
    assert [e.accepted for e in back.obs_candidates] == \
        [e.accepted for e in rec.obs_candidates]


def test_observation_roundtrip_csv(tmp_path):
    scen = busy_scenario()
    grid = TimeGrid(0.0, scen.spec.T, 30)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, 5)
    obs = project_observation(rec)
    p = tmp_path / "obs.csv"
    write_observation(obs, p)
    back = read_observation(p)
    assert np.array_equal(back.t, obs.t)
    assert np.array_equal(back.Y, obs.Y)
    assert np.array_equal(back.event_steps, obs.event_steps)
    assert np.array_equal(back.marks2, obs.marks2)
    assert back.source_seed == obs.source_seed
    assert np.array_equal(np.array([e.t for e in back.events]),
                          np.array([e.t for e in obs.events]))
    assert np.array_equal(np.stack([e.mark for e in back.events]),
                          np.stack([e.mark for e in obs.events]))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_refined_grid_invariants_property(seed):
    scen = build_family("mixed", {"rate1": 2.0, "rate2": 2.0})
    grid = TimeGrid(0.0, scen.spec.T, 20)
    rec = simulate_path(scen.spec, grid, scen.prior_sampler, scen.y0, seed)
    n_events = len(rec.signal_jumps) + len(rec.obs_candidates)
    assert len(rec.t) == grid.n_steps + 1 + 2 * n_events
    dt = rec.dt()
    assert np.all(dt >= 0.0)
    assert np.array_equal(dt == 0.0, rec.step_kind != 0)
    assert np.all(np.isfinite(rec.X)) and np.all(np.isfinite(rec.Y))
    obs = project_observation(rec)
    assert np.array_equal(obs.t[np.isin(obs.t, grid.nodes())], grid.nodes())
