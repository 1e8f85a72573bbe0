"""Ring model basics: parameters, phase arithmetic, synchrony residual.

The network is a unidirectional ring of ``n`` identical phase oscillators.
Oscillator ``j`` is driven by oscillator ``j+1 (mod n)`` through a
sine coupling of strength ``kappa`` delayed by ``tau``:

    dx_j/dt = omega + kappa * sin(x_{j+1}(t - tau) - x_j(t))

A synchronous state ``x_j(t) = W*t`` exists whenever ``W`` solves
``W = omega - kappa*sin(W*tau)``; :func:`sync_residual` evaluates the defect
of a candidate ``W``.  Phases are kept as unwrapped reals everywhere and only
reduced to ``[0, 2*pi)`` for display or crossing logic so that crossing
counts stay well defined.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

TWO_PI = 2.0 * math.pi

#: Absolute residual tolerance for refined synchronous frequencies.
RESIDUAL_TOL = 1e-12

#: A phase is a plain float; canonical representatives live in [0, 2*pi).
Phase = float


@dataclass(frozen=True)
class RingParams:
    """Parameters ``(n, omega, kappa, tau)`` of the homogeneous ring.

    The coupling topology is implicit: unit ``j`` listens to unit
    ``j+1 (mod n)`` and to nothing else.
    """

    n: int
    omega: float
    kappa: float
    tau: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        for name in ("omega", "kappa", "tau"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v)):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.kappa <= 0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")
        if self.tau < 0:
            raise DomainError(f"tau must be >= 0, got {self.tau}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "tau", float(self.tau))

    def to_dict(self) -> dict:
        return {"n": self.n, "omega": self.omega, "kappa": self.kappa, "tau": self.tau}

    @classmethod
    def from_dict(cls, d: dict) -> "RingParams":
        try:
            return cls(n=int(d["n"]), omega=float(d["omega"]),
                       kappa=float(d["kappa"]), tau=float(d["tau"]))
        except KeyError as e:
            raise DomainError(f"missing ring parameter field: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RingParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SyncSolution:
    """One synchronous frequency with its stability classification.

    ``stiffness`` is ``K = kappa*cos(omega_sync*tau)``; the solution is
    linearly stable exactly when ``K > 0``.  ``degenerate`` marks a merged
    double root found at a fold, where the residual tolerance is waived.
    """

    omega_sync: float
    stiffness: float
    stable: bool
    residual: float
    degenerate: bool = False

    def __post_init__(self):
        assert self.stable == (self.stiffness > 0), \
            "stability flag must equal sign(stiffness) > 0"
        assert self.degenerate or self.residual <= RESIDUAL_TOL, \
            f"residual {self.residual} above tolerance {RESIDUAL_TOL}"


def wrap_phase(x):
    """Reduce a phase (scalar or array) to its representative in [0, 2*pi).

    ``wrap_phase(x + 2*pi*k) == wrap_phase(x)`` up to the rounding of the
    argument itself.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("wrap_phase requires finite input")
    out = np.mod(x, TWO_PI)
    # mod can return 2*pi itself when x is a tiny negative number
    out = np.where(out >= TWO_PI, out - TWO_PI, out)
    return float(out) if out.ndim == 0 else out


def sync_residual(params: RingParams, omega_sync):
    """Defect ``f(W) = W - omega + kappa*sin(W*tau)`` of a candidate frequency.

    Zeros of ``f`` over ``[omega - kappa, omega + kappa]`` are the
    synchronous frequencies of the ring.  Accepts a scalar or an array.
    """
    w = np.asarray(omega_sync, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("omega_sync must be finite")
    out = w - params.omega + params.kappa * np.sin(w * params.tau)
    return float(out) if out.ndim == 0 else out


def sync_residual_slope(params: RingParams, omega_sync):
    """Derivative ``f'(W) = 1 + kappa*tau*cos(W*tau)`` of the residual."""
    w = np.asarray(omega_sync, dtype=float)
    out = 1.0 + params.kappa * params.tau * np.cos(w * params.tau)
    return float(out) if out.ndim == 0 else out
