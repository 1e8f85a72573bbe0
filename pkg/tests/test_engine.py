import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringrec import (DelayVector, DomainError, LinearRamp, RingParams,
                     SampledHistory, crossing_times, find_sync_solutions,
                     integrate, order_parameter, pick_reference)
from ringrec.engine import _integrate_arrays

TWO_PI = 2 * math.pi


def _stable_ref(params):
    return pick_reference(find_sync_solutions(params), "nearest")


def test_exact_sync_state_is_preserved():
    # the collective state y_j = W*t solves the system exactly; over 100*tau
    # the integrator may only accumulate roundoff
    params = RingParams(n=5, omega=2.0, kappa=1.0, tau=1.0)
    ref = _stable_ref(params)
    traj = integrate(params, DelayVector.homogeneous(5, 1.0),
                     LinearRamp(ref.omega_sync, np.zeros(5)), 100.0, 0.01)
    dev = np.abs(traj.phases - ref.omega_sync * traj.times[:, None]).max()
    assert dev < 1e-8


def test_zero_coupling_gives_free_rotation():
    # kappa -> 0 decouples the units: y_j(t) = y_j(0) + omega*t exactly
    offsets = np.array([[0.3, -0.2, 0.1]])
    res = _integrate_arrays(1.5, 0.0, np.full((1, 3), 2.0),
                            (np.full((1, 3), 0.7), offsets), None, 10.0, 0.01,
                            record="full")
    expected = 0.7 * (res["times"][:, None] - offsets[0]) \
        + (1.5 - 0.7) * res["times"][:, None]
    assert np.abs(res["Y"][:, 0, :] - expected).max() < 1e-12


def test_heterogeneous_crossings_follow_pattern():
    # delays encoding P=(2,1,...,1): oscillator 1 fires at 2 + k*period
    from ringrec import Pattern, encode_pattern, probe_history
    params = RingParams(n=10, omega=1.0, kappa=1.0, tau=3.0)
    values = np.ones(10)
    values[0] = 2.0
    enc = encode_pattern(params, Pattern(values))
    traj = integrate(params, enc.delays, probe_history(enc, enc.pattern),
                     25.0, 0.01)
    period = TWO_PI / enc.omega_ref.omega_sync
    c0 = traj.crossings[0]
    assert len(c0) >= 1
    k = np.round((c0 - 2.0) / period)
    assert np.abs(c0 - (2.0 + k * period)).max() < 1e-6


def test_order_parameter_extremes():
    assert order_parameter(np.zeros(7)) == pytest.approx(1.0, abs=1e-15)
    spread = TWO_PI * np.arange(8) / 8
    assert order_parameter(spread) == pytest.approx(0.0, abs=1e-12)


def test_order_parameter_two_phases():
    # |e^{i0} + e^{i pi/2}| / 2 = sqrt(2)/2, from direct complex evaluation
    r = order_parameter(np.array([0.0, math.pi / 2]))
    assert r == pytest.approx(0.7071067811865476, abs=1e-14)


@given(st.floats(-50, 50))
@settings(max_examples=30)
def test_order_parameter_global_shift_invariant(shift):
    rng = np.random.default_rng(3)
    x = rng.uniform(0, TWO_PI, 11)
    assert order_parameter(x + shift) == pytest.approx(order_parameter(x),
                                                       abs=1e-9)


def test_order_parameter_requires_two():
    with pytest.raises(DomainError):
        order_parameter(np.array([1.0]))


def _make_traj(times, phases):
    from ringrec import Trajectory
    phases = np.asarray(phases, dtype=float)
    derivs = np.gradient(phases, times, axis=0)
    return Trajectory(times=np.asarray(times, float), phases=phases,
                      derivs=derivs, step=float(times[1] - times[0]))


def test_crossing_times_linear_phase():
    t = np.linspace(0, 10, 2001)
    W = 2.0
    traj = _make_traj(t, np.outer(W * t, np.ones(2)))
    for c in crossing_times(traj, TWO_PI):
        expected = np.arange(1, 4) * TWO_PI / W
        assert np.abs(np.asarray(c) - expected[:len(c)]).max() < 1e-9


def test_crossing_times_shifted_phase():
    # y_j = W*(t - p_j) fires at p_j, p_j + 2*pi/W, ... (the 2*pi level is
    # taken mod 2*pi, so passing 0 upward counts)
    t = np.linspace(0, 30, 6001)
    W, shifts = 1.0, np.array([0.5, 2.0])
    traj = _make_traj(t, W * (t[:, None] - shifts))
    cr = crossing_times(traj, TWO_PI)
    for j, c in enumerate(cr):
        k = np.arange(0, len(c))
        assert np.abs(c - (shifts[j] + TWO_PI * k / W)).max() < 1e-9


def test_crossing_times_non_monotone_counts_upward_only():
    # brute-force oracle on a wiggly synthetic series
    t = np.linspace(0, 40, 8001)
    y = 0.8 * t + 1.4 * np.sin(1.7 * t)
    traj = _make_traj(t, y[:, None])
    got = crossing_times(traj, TWO_PI)[0]
    # oracle: dense scan for upward passages of 2*pi*k
    tf = np.linspace(0, 40, 2_000_001)
    yf = 0.8 * tf + 1.4 * np.sin(1.7 * tf)
    lev = (yf - TWO_PI) / TWO_PI
    ups = np.nonzero((np.floor(lev[1:]) > np.floor(lev[:-1]))
                     & (yf[1:] > yf[:-1]))[0]
    count_oracle = int(np.sum(np.floor(lev[1:])[ups] - np.floor(lev[:-1])[ups]))
    assert len(got) == count_oracle
    assert np.all(np.diff(got) > 0)


def test_step_halving_fourth_order():
    params = RingParams(n=4, omega=2.0, kappa=1.0, tau=1.0)
    ref = _stable_ref(params)
    offs = np.array([0.3, 0.0, -0.25, 0.1])
    init = LinearRamp(ref.omega_sync, offs)
    delays = DelayVector.homogeneous(4, 1.0)

    def run(h):
        return integrate(params, delays, init, 20.0, h).phases

    y_ref = run(0.05 / 8)
    e1 = np.abs(run(0.05)[:, :] - y_ref[::8][:401]).max()
    e2 = np.abs(run(0.025)[:, :] - y_ref[::4][:801]).max()
    assert 10.0 < e1 / e2 < 24.0


def test_perturbation_of_stable_state_decays():
    params = RingParams(n=6, omega=1.0, kappa=1.0, tau=3.0)
    ref = _stable_ref(params)
    offs = np.zeros(6)
    offs[2] = 0.1
    traj = integrate(params, DelayVector.homogeneous(6, 3.0),
                     LinearRamp(ref.omega_sync, offs), 90.0, 0.01)
    assert traj.order_param[-1] >= traj.order_param[0]
    assert traj.order_param[-1] > 0.9999


def test_step_refusal():
    params = RingParams(n=3, omega=1.0, kappa=1.0, tau=1.0)
    init = LinearRamp(1.0, np.zeros(3))
    with pytest.raises(DomainError):
        integrate(params, DelayVector.homogeneous(3, 1.0), init, 5.0, 0.3)
    # 0.25 == tau/4 is allowed
    integrate(params, DelayVector.homogeneous(3, 1.0), init, 2.0, 0.25)


def test_integrate_validation():
    params = RingParams(n=3, omega=1.0, kappa=1.0, tau=1.0)
    init = LinearRamp(1.0, np.zeros(3))
    with pytest.raises(DomainError):
        integrate(params, DelayVector.homogeneous(4, 1.0), init, 5.0, 0.01)
    with pytest.raises(DomainError):
        integrate(params, DelayVector.homogeneous(3, 1.0), init, -1.0, 0.01)
    with pytest.raises(DomainError):
        LinearRamp(math.nan, np.zeros(3))


def test_integrate_deterministic():
    params = RingParams(n=4, omega=1.0, kappa=1.0, tau=2.0)
    ref = _stable_ref(params)
    init = LinearRamp(ref.omega_sync, np.array([0.1, 0.0, -0.2, 0.3]))
    a = integrate(params, DelayVector.homogeneous(4, 2.0), init, 30.0, 0.01)
    b = integrate(params, DelayVector.homogeneous(4, 2.0), init, 30.0, 0.01)
    assert np.array_equal(a.phases, b.phases)
    assert np.array_equal(a.order_param, b.order_param)


def test_sampled_history_matches_ramp():
    params = RingParams(n=3, omega=1.0, kappa=1.0, tau=1.0)
    ref = _stable_ref(params)
    offs = np.array([0.2, -0.1, 0.0])
    grid = np.linspace(-1.5, 0.0, 301)
    sampled = SampledHistory(grid, ref.omega_sync * (grid[:, None] - offs))
    ramp = LinearRamp(ref.omega_sync, offs)
    ta = integrate(params, DelayVector.homogeneous(3, 1.0), sampled, 10.0, 0.01)
    tb = integrate(params, DelayVector.homogeneous(3, 1.0), ramp, 10.0, 0.01)
    assert np.abs(ta.phases - tb.phases).max() < 1e-6


def test_time_shift_equivalence_small():
    # shifted-ring trajectory, shifted back, solves the homogeneous ring
    # started with per-oscillator staggered release
    params = RingParams(n=12, omega=1.0, kappa=1.0, tau=3.0)
    ref = _stable_ref(params)
    W = ref.omega_sync
    h = 0.01
    rng = np.random.default_rng(5)
    pats = rng.integers(0, 151, 12).astype(float) * h  # lattice-aligned
    delta = rng.uniform(-0.1, 0.1, 12)
    delays = 3.0 - (np.roll(pats, -1) - pats)
    assert (delays > 0).all()
    pmax = float(pats.max())
    t_end = 40.0
    het = integrate(params, DelayVector(delays),
                    LinearRamp(W, pats + delta), t_end + pmax, h)
    hom = integrate(params, DelayVector.homogeneous(12, 3.0),
                    LinearRamp(W, pmax + delta), t_end + pmax, h,
                    release_times=pmax - pats)
    lag = np.round((pmax - pats) / h).astype(int)
    i0 = int(round(pmax / h))
    n_t = het.phases.shape[0]
    err = 0.0
    for j in range(12):
        a = het.phases[i0 - lag[j]:n_t - lag[j], j]
        b = hom.phases[i0:, j]
        m = min(len(a), len(b))
        err = max(err, np.abs(a[:m] - b[:m]).max())
    assert err < 1e-6


def test_trajectory_eval_and_csv_and_json():
    params = RingParams(n=3, omega=1.0, kappa=1.0, tau=1.0)
    ref = _stable_ref(params)
    traj = integrate(params, DelayVector.homogeneous(3, 1.0),
                     LinearRamp(ref.omega_sync, np.array([0.1, 0.0, -0.1])),
                     5.0, 0.01)
    # Hermite evaluation reproduces stored nodes and is smooth in between
    assert np.abs(traj.phase_at(traj.times[50]) - traj.phases[50]).max() < 1e-12
    mid = traj.phase_at(traj.times[50] + 0.005)
    assert np.all(np.abs(mid - traj.phases[50]) < 0.1)
    buf = io.StringIO()
    traj.to_csv(buf, stride=100, params_comment="check=1")
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("#") and lines[1] == "t,x_1,x_2,x_3,r"
    assert len(lines) == 2 + math.ceil(len(traj.times) / 100)
    crossings = json.loads(traj.crossings_json())
    assert len(crossings) == 3


def test_trajectory_invariants():
    params = RingParams(n=5, omega=1.0, kappa=1.0, tau=2.0)
    ref = _stable_ref(params)
    offs = np.array([0.5, -0.4, 0.2, 0.0, 0.9])
    traj = integrate(params, DelayVector.homogeneous(5, 2.0),
                     LinearRamp(ref.omega_sync, offs), 40.0, 0.01)
    # unwrapped phases move by less than pi per default-sized step
    assert np.abs(np.diff(traj.phases, axis=0)).max() < math.pi
    assert np.all((traj.order_param >= 0) & (traj.order_param <= 1 + 1e-12))
    for c in traj.crossings:
        assert np.all(np.diff(c) > 0)


def test_release_times_hold_oscillators_on_ramp():
    params = RingParams(n=4, omega=1.0, kappa=1.0, tau=2.0)
    ref = _stable_ref(params)
    offs = np.array([0.4, 0.1, -0.3, 0.0])
    release = np.array([1.0, 0.0, 0.5, 0.0])
    traj = integrate(params, DelayVector.homogeneous(4, 2.0),
                     LinearRamp(ref.omega_sync, offs), 10.0, 0.01,
                     release_times=release)
    for j, rel in enumerate(release):
        k = int(round(rel / 0.01))
        ramp = ref.omega_sync * (traj.times[:k + 1] - offs[j])
        assert np.abs(traj.phases[:k + 1, j] - ramp).max() < 1e-12
