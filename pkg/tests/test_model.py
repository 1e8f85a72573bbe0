import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ringrec import DomainError, RingParams, sync_residual, wrap_phase
from ringrec.model import SyncSolution

TWO_PI = 2 * math.pi


def test_wrap_phase_identity():
    assert wrap_phase(0.0) == 0.0


def test_wrap_phase_full_turn():
    assert wrap_phase(TWO_PI) == 0.0


def test_wrap_phase_seven_pi():
    # 7*pi = 3 full turns + pi
    assert wrap_phase(7 * math.pi) == pytest.approx(math.pi, abs=1e-12)


def test_wrap_phase_range():
    xs = np.linspace(-50, 50, 1001)
    w = wrap_phase(xs)
    assert np.all(w >= 0) and np.all(w < TWO_PI)


@given(st.floats(-1e5, 1e5), st.integers(-1000, 1000))
def test_wrap_phase_periodic(x, k):
    a = wrap_phase(x)
    b = wrap_phase(x + TWO_PI * k)
    d = abs(a - b)
    d = min(d, TWO_PI - d)
    # the only inexactness is forming x + 2*pi*k in floating point
    assert d <= 4e-16 * (abs(x) + TWO_PI * abs(k) + 1)


def test_wrap_phase_rejects_nonfinite():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(DomainError):
            wrap_phase(bad)


def test_sync_residual_tau_zero_is_identity_gap():
    p = RingParams(n=3, omega=2.0, kappa=1.0, tau=0.0)
    assert sync_residual(p, 2.0) == 0.0


def test_sync_residual_odd_origin():
    p = RingParams(n=3, omega=0.0, kappa=3.0, tau=10.0)
    assert sync_residual(p, 0.0) == 0.0


def test_sync_residual_direct_value():
    # f(2) = 2 - 2 + 1*sin(2*20) = sin(40); reference value from a
    # 40-digit evaluation
    p = RingParams(n=3, omega=2.0, kappa=1.0, tau=20.0)
    assert sync_residual(p, 2.0) == pytest.approx(0.7451131604793488, abs=1e-15)


@given(st.floats(-10, 10))
def test_sync_residual_odd_symmetry_when_omega_zero(w):
    p = RingParams(n=2, omega=0.0, kappa=2.5, tau=4.0)
    assert sync_residual(p, -w) == pytest.approx(-sync_residual(p, w), abs=1e-12)


def test_ring_params_validation():
    with pytest.raises(DomainError):
        RingParams(n=1, omega=1.0, kappa=1.0, tau=1.0)
    with pytest.raises(DomainError):
        RingParams(n=2, omega=1.0, kappa=0.0, tau=1.0)
    with pytest.raises(DomainError):
        RingParams(n=2, omega=1.0, kappa=-1.0, tau=1.0)
    with pytest.raises(DomainError):
        RingParams(n=2, omega=1.0, kappa=1.0, tau=-0.5)
    with pytest.raises(DomainError):
        RingParams(n=2, omega=math.nan, kappa=1.0, tau=1.0)


def test_ring_params_json_roundtrip():
    p = RingParams(n=7, omega=1.5, kappa=0.25, tau=12.0)
    q = RingParams.from_json(p.to_json())
    assert p == q
    assert json.loads(p.to_json()) == {"n": 7, "omega": 1.5, "kappa": 0.25,
                                       "tau": 12.0}


def test_sync_solution_invariants_enforced():
    with pytest.raises(AssertionError):
        SyncSolution(omega_sync=1.0, stiffness=0.5, stable=False, residual=0.0)
    with pytest.raises(AssertionError):
        SyncSolution(omega_sync=1.0, stiffness=0.5, stable=True, residual=1e-6)
    s = SyncSolution(omega_sync=1.0, stiffness=-0.5, stable=False, residual=0.0)
    assert not s.stable
