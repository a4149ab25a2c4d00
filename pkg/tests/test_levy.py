"""Jump streams: sampling, thinning, compensator quadrature, serialization."""

from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyfilter.errors import ModelViolationError
from levyfilter.levy import (JumpEvent, JumpStream, compensator_integral,
                             read_stream, sample_poisson_stream,
                             thin_by_lambda, write_stream)
from levyfilter.model import LevyMeasureSpec

# --- independent oracles ------------------------------------------------------
# Constant-in-time integrands make the time-trapezoid rule exact, so these
# follow from rate * lam * g * (t1 - t0) by hand:
#   rate=2, lam=0.5, g=1,  [0, 3]  ->  3.0
#   rate=2, lam=0.5, g=t,  [0, 3]  ->  2*0.5*3^2/2 = 4.5   (trapezoid exact
#                                                            for linear g)
COMP_CONST_EXPECTED = 3.0
COMP_LINEAR_EXPECTED = 4.5


def const_lam(level):
    def lam(t, x, u):
        shape = np.broadcast(np.asarray(x)[..., 0], np.asarray(u)[..., 0]).shape
        return np.full(shape, level)
    return lam


def lam_spec(level, rate=2.0):
    return SimpleNamespace(lam=const_lam(level),
                           nu2=LevyMeasureSpec.uniform(0.0, 1.0, rate),
                           mark_budget=64)


# --- Poisson stream sampling --------------------------------------------------

def test_stream_deterministic_in_seed():
    nu = LevyMeasureSpec.gaussian(0.0, 1.0, rate=3.0)
    s1 = sample_poisson_stream(nu, 0.0, 2.0, 11)
    s2 = sample_poisson_stream(nu, 0.0, 2.0, 11)
    assert np.array_equal(s1.times(), s2.times())
    assert np.array_equal(s1.marks(), s2.marks())
    s3 = sample_poisson_stream(nu, 0.0, 2.0, 12)
    assert len(s3) != len(s1) or not np.array_equal(s3.times(), s1.times())


def test_stream_times_sorted_and_in_window():
    nu = LevyMeasureSpec.uniform(-1.0, 1.0, rate=20.0)
    s = sample_poisson_stream(nu, 0.5, 3.5, 7)
    t = s.times()
    assert np.all(np.diff(t) >= 0.0)
    assert np.all((t >= 0.5) & (t < 3.5))
    assert s.marks().shape == (len(s), 1)


def test_stream_channel_label_and_seed_stored():
    nu = LevyMeasureSpec.uniform(0.0, 1.0, rate=5.0)
    s = sample_poisson_stream(nu, 0.0, 1.0, 99, channel="observation")
    assert s.channel == "observation"
    assert s.seed == 99
    assert all(e.channel == "observation" for e in s)
    # channel label also decorrelates the draw
    s2 = sample_poisson_stream(nu, 0.0, 1.0, 99, channel="signal")
    assert len(s2) != len(s) or not np.array_equal(s2.times(), s.times())


def test_stream_count_matches_poisson_mean():
    nu = LevyMeasureSpec.uniform(0.0, 1.0, rate=4.0)
    counts = [len(sample_poisson_stream(nu, 0.0, 2.5, 1000 + r))
              for r in range(400)]
    mean = 4.0 * 2.5
    se = np.sqrt(mean / 400)
    assert abs(np.mean(counts) - mean) <= 3 * se


def test_stream_degenerate_cases():
    assert len(sample_poisson_stream(LevyMeasureSpec.none(), 0.0, 1.0, 1)) == 0
    nu = LevyMeasureSpec.uniform(0.0, 1.0, rate=5.0)
    assert len(sample_poisson_stream(nu, 1.0, 1.0, 1)) == 0
    with pytest.raises(ValueError):
        sample_poisson_stream(nu, 1.0, 0.0, 1)


# --- thinning -----------------------------------------------------------------

def test_thinning_acceptance_fraction():
    nu = LevyMeasureSpec.uniform(0.0, 1.0, rate=50.0)
    cand = sample_poisson_stream(nu, 0.0, 10.0, 5)
    spec = lam_spec(0.3)
    kept = thin_by_lambda(cand, spec, lambda t: np.array([0.0]), 6)
    frac = len(kept) / len(cand)
    se = np.sqrt(0.3 * 0.7 / len(cand))
    assert abs(frac - 0.3) <= 3 * se
    assert all(e.accepted for e in kept)


def test_thinning_deterministic_and_subset():
    nu = LevyMeasureSpec.gaussian(0.0, 1.0, rate=30.0)
    cand = sample_poisson_stream(nu, 0.0, 5.0, 21)
    spec = lam_spec(0.5)
    k1 = thin_by_lambda(cand, spec, lambda t: np.array([0.0]), 8)
    k2 = thin_by_lambda(cand, spec, lambda t: np.array([0.0]), 8)
    assert np.array_equal(k1.times(), k2.times())
    assert set(k1.times()).issubset(set(cand.times()))


def test_thinning_rejects_out_of_range_lambda():
    nu = LevyMeasureSpec.uniform(0.0, 1.0, rate=50.0)
    cand = sample_poisson_stream(nu, 0.0, 2.0, 5)
    assert len(cand) > 0
    for bad in (1.5, 0.0, float("nan")):
        spec = lam_spec(bad)
        with pytest.raises(ModelViolationError):
            thin_by_lambda(cand, spec, lambda t: np.array([0.0]), 6)


def test_thinning_queries_state_at_event_times():
    nu = LevyMeasureSpec.uniform(0.0, 1.0, rate=20.0)
    cand = sample_poisson_stream(nu, 0.0, 2.0, 31)
    queried = []

    def lookup(t):
        queried.append(t)
        return np.array([0.0])

    thin_by_lambda(cand, lam_spec(0.5), lookup, 6)
    assert queried == [e.t for e in cand]


# --- compensator quadrature ---------------------------------------------------

def test_compensator_integral_constant_exact():
    spec = lam_spec(0.5, rate=2.0)
    got = compensator_integral(spec, lambda t, u: np.ones(u.shape[0]),
                               lambda t: np.array([0.0]), 0.0, 3.0, 0.5)
    assert got == pytest.approx(COMP_CONST_EXPECTED, abs=1e-12)


def test_compensator_integral_linear_time_exact():
    spec = lam_spec(0.5, rate=2.0)
    got = compensator_integral(spec, lambda t, u: np.full(u.shape[0], t),
                               lambda t: np.array([0.0]), 0.0, 3.0, 0.25)
    assert got == pytest.approx(COMP_LINEAR_EXPECTED, abs=1e-12)


def test_compensator_integral_degenerate():
    spec = lam_spec(0.5, rate=0.0)
    spec.nu2 = LevyMeasureSpec.none()
    assert compensator_integral(spec, lambda t, u: np.ones(u.shape[0]),
                                lambda t: np.array([0.0]), 0.0, 3.0, 0.5) == 0.0
    spec = lam_spec(0.5)
    assert compensator_integral(spec, lambda t, u: np.ones(u.shape[0]),
                                lambda t: np.array([0.0]), 1.0, 1.0, 0.5) == 0.0


def test_compensator_integral_state_dependence():
    # lam depends on x through the lookup; x(t) = t makes lam(t) = t/10,
    # so the integral of g=1 against rate=2 over [0, 3] is 2 * 9/20 = 0.9
    def lam(t, x, u):
        shape = np.broadcast(np.asarray(x)[..., 0], np.asarray(u)[..., 0]).shape
        return np.broadcast_to(np.asarray(x)[..., 0] / 10.0, shape)

    spec = SimpleNamespace(lam=lam, nu2=LevyMeasureSpec.uniform(0, 1, 2.0),
                           mark_budget=64)
    got = compensator_integral(spec, lambda t, u: np.ones(u.shape[0]),
                               lambda t: np.array([t]), 0.0, 3.0, 0.01)
    assert got == pytest.approx(0.9, abs=1e-12)


# --- stream container + serialization -----------------------------------------

def test_jumpstream_validates_ordering_and_window():
    ev = [JumpEvent(0.5, 1.0), JumpEvent(0.2, 2.0)]
    with pytest.raises(ValueError):
        JumpStream(ev, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        JumpStream([JumpEvent(2.0, 1.0)], 0.0, 1.0, 1.0)


def test_accepted_filters_rejected_events():
    ev = [JumpEvent(0.1, 1.0, accepted=True),
          JumpEvent(0.4, 2.0, accepted=False),
          JumpEvent(0.9, 3.0, accepted=True)]
    s = JumpStream(ev, 0.0, 1.0, 3.0)
    acc = s.accepted()
    assert [e.t for e in acc] == [0.1, 0.9]


def test_stream_roundtrip_csv(tmp_path):
    nu = LevyMeasureSpec.gaussian(0.5, 1.5, rate=10.0, dim=2)
    s = sample_poisson_stream(nu, 0.0, 3.0, 77, channel="observation")
    assert len(s) > 0
    path = tmp_path / "stream.csv"
    write_stream(s, path)
    back = read_stream(path)
    assert np.array_equal(back.times(), s.times())
    assert np.array_equal(back.marks(), s.marks())
    assert (back.t0, back.t1, back.rate, back.seed, back.channel) == \
        (s.t0, s.t1, s.rate, s.seed, s.channel)


def test_empty_stream_roundtrip(tmp_path):
    s = JumpStream([], 0.0, 2.0, 0.0, seed=4)
    path = tmp_path / "empty.csv"
    write_stream(s, path)
    back = read_stream(path)
    assert len(back) == 0
    assert (back.t0, back.t1, back.rate) == (0.0, 2.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), rate=st.floats(0.5, 20.0))
def test_stream_roundtrip_property(tmp_path_factory, seed, rate):
    nu = LevyMeasureSpec.uniform(-2.0, 2.0, rate=rate)
    s = sample_poisson_stream(nu, 0.0, 1.0, seed)
    path = tmp_path_factory.mktemp("streams") / "s.csv"
    write_stream(s, path)
    back = read_stream(path)
    assert np.array_equal(back.times(), s.times())
    assert np.array_equal(back.marks(), s.marks()) or len(s) == 0
