"""Encode firing-time patterns as per-edge delay vectors.

A pattern is a vector of N firing times.  Shifting oscillator ``j`` by
``p_j`` turns the homogeneous ring into one with per-edge delays

    tau_j = tau - (p_{j+1} - p_j)        (index cyclic: p_{N+1} = p_1)

whose stable periodic orbit crosses ``2*pi`` exactly at the times ``p_j``
(mod the orbit period).  Encoding is therefore pure arithmetic: N
subtractions, no dynamics.  All delays stay nonnegative whenever
``tau >= max_j (p_{j+1} - p_j)``, which :func:`min_base_delay` computes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .analysis import SolutionSet, find_sync_solutions
from .engine import DelayVector, LinearRamp
from .exceptions import DomainError
from .model import RESIDUAL_TOL, RingParams, SyncSolution, sync_residual


@dataclass(frozen=True)
class Pattern:
    """N firing times (arbitrary finite reals, in time units)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise DomainError("pattern must be a nonempty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise DomainError("pattern values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.size

    def to_json(self) -> str:
        return json.dumps([float(v) for v in self.values])

    @classmethod
    def from_json(cls, text: str) -> "Pattern":
        return cls(np.asarray(json.loads(text), dtype=float))


@dataclass(frozen=True)
class Encoding:
    """A pattern written into a ring: delays plus the reference frequency."""

    params: RingParams
    delays: DelayVector
    omega_ref: SyncSolution
    pattern: Pattern

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_ref.omega_sync

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "omega_ref": self.omega_ref.omega_sync,
            "delays": [float(d) for d in self.delays.delays],
            "pattern": [float(p) for p in self.pattern.values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Encoding":
        params = RingParams.from_dict(d["params"])
        pattern = Pattern(np.asarray(d["pattern"], dtype=float))
        w = float(d["omega_ref"])
        stiff = params.kappa * math.cos(w * params.tau)
        ref = SyncSolution(omega_sync=w, stiffness=stiff, stable=stiff > 0,
                           residual=abs(sync_residual(params, w)))
        enc = encode(params, pattern, ref)
        stored = np.asarray(d["delays"], dtype=float)
        if not np.allclose(stored, enc.delays.delays, atol=1e-9):
            raise DomainError("stored delays are inconsistent with the pattern")
        return enc

    @classmethod
    def from_json(cls, text: str) -> "Encoding":
        return cls.from_dict(json.loads(text))


def cyclic_forward_differences(pattern: Pattern) -> np.ndarray:
    return np.roll(pattern.values, -1) - pattern.values


def min_base_delay(pattern: Pattern) -> float:
    """Smallest base delay for which every encoded delay is >= 0."""
    return float(cyclic_forward_differences(pattern).max())


def encode(params: RingParams, pattern: Pattern, omega_ref: SyncSolution) -> Encoding:
    """Compute the delay vector carrying ``pattern`` at frequency ``omega_ref``.

    Raises if any delay would be negative, naming the smallest admissible
    base delay, or if ``omega_ref`` is not a stable synchronous frequency of
    ``params``.
    """
    if pattern.n != params.n:
        raise DomainError(f"pattern has {pattern.n} entries, ring has {params.n}")
    if not omega_ref.stable:
        raise DomainError("omega_ref must be a stable synchronous solution")
    if abs(sync_residual(params, omega_ref.omega_sync)) > RESIDUAL_TOL:
        raise DomainError("omega_ref is not a synchronous frequency of these parameters")
    if not (params.omega - params.kappa <= omega_ref.omega_sync
            <= params.omega + params.kappa):
        raise DomainError("omega_ref outside [omega - kappa, omega + kappa]")
    delays = params.tau - cyclic_forward_differences(pattern)
    if np.any(delays < 0):
        raise DomainError(
            f"base delay tau={params.tau} too small for this pattern; "
            f"smallest admissible tau is {min_base_delay(pattern)}")
    return Encoding(params=params, delays=DelayVector(delays),
                    omega_ref=omega_ref, pattern=pattern)


def probe_history(encoding: Encoding, probe: Pattern) -> LinearRamp:
    """Initial history ``y_j(t) = omega_ref * (t - q_j)`` for a probe ``q``."""
    if probe.n != encoding.params.n:
        raise DomainError(f"probe has {probe.n} entries, ring has {encoding.params.n}")
    return LinearRamp(slope=encoding.omega_ref.omega_sync, offsets=probe.values)


def pick_reference(solutions: SolutionSet, rule="nearest") -> SyncSolution:
    """Choose the reference frequency among the stable solutions.

    ``rule`` is ``'nearest'`` (stable root closest to the free-running
    frequency omega; the default), ``'fastest'`` (largest stable root, which
    maximizes the phase contrast of a given time perturbation), or a number,
    matched against the stable roots.
    """
    stable = solutions.stable
    if not stable:
        raise DomainError("no stable synchronous solution to encode against")
    if rule == "nearest":
        return min(stable, key=lambda s: abs(s.omega_sync - solutions.params.omega))
    if rule == "fastest":
        return max(stable, key=lambda s: s.omega_sync)
    try:
        target = float(rule)
    except (TypeError, ValueError):
        raise DomainError(f"unknown reference rule {rule!r}")
    best = min(stable, key=lambda s: abs(s.omega_sync - target))
    if abs(best.omega_sync - target) > 1e-6:
        raise DomainError(
            f"no stable solution near {target}; stable frequencies are "
            f"{[round(s.omega_sync, 6) for s in stable]}")
    return best


def encode_pattern(params: RingParams, pattern: Pattern, reference="nearest") -> Encoding:
    """One-call encoding: solve for the stable frequencies, pick one, encode."""
    sols = find_sync_solutions(params)
    return encode(params, pattern, pick_reference(sols, reference))
