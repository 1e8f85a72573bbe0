"""Fixed-step integrator for the ring with per-edge transmission delays.

The system advanced here is

    dy_j/dt = omega + kappa * sin(y_{j+1}(t - tau_j) - y_j(t))

with one delay per edge.  The scheme is the classical 4th-order one-step
method; delayed values are read from the stored solution through cubic
Hermite interpolation (values and derivatives at the two bracketing nodes).
Because the step is fixed, every delay has a constant integer lag plus a
constant fractional offset, so the interpolation weights are computed once.

Steps must satisfy ``step <= min positive delay / 4``: stage times then look
at least three completed nodes into the past and no extrapolation can occur.
History before t=0 comes from the initial function, sampled onto the same
node grid (exactly, for linear ramps).  The node at t=0 carries the initial
function's slope on the history side and the right-hand side's value on the
integration side, so interpolation on either side of 0 uses the correct
derivative.

``release_times`` optionally keeps selected oscillators on their initial
ramp until a given node: until release an oscillator's value and stored
slope are those of its ramp.  This realizes exactly the staggered
prescription under which a ring with encoded per-edge delays and the
homogeneous ring are images of each other under per-oscillator time shifts.

A single integration is sequential; independent integrations share nothing
and may run in parallel.  Batched variants (state shape ``(B, n)``) back the
experiment sweeps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, IntegrationError
from .model import TWO_PI, RingParams

#: Default integration step: min(min positive delay / 20, 0.01).
DEFAULT_STEP_CAP = 0.01


@dataclass(frozen=True)
class DelayVector:
    """Per-edge delays ``tau_j >= 0``; ``max()`` sets the history horizon."""

    delays: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        if d.ndim != 1 or d.size == 0:
            raise DomainError("delays must be a nonempty 1-d vector")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise DomainError("delays must be finite and >= 0")
        object.__setattr__(self, "delays", d)

    @classmethod
    def homogeneous(cls, n: int, tau: float) -> "DelayVector":
        return cls(np.full(int(n), float(tau)))

    def __len__(self):
        return self.delays.size

    def max(self) -> float:
        return float(self.delays.max())


@dataclass(frozen=True)
class LinearRamp:
    """History ``y_j(t) = slope_j * (t - offsets_j)`` on ``t <= 0``.

    ``slope`` may be a scalar (one collective frequency) or per-oscillator.
    """

    slope: object
    offsets: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        if off.ndim != 1 or off.size == 0 or not np.all(np.isfinite(off)):
            raise DomainError("offsets must be a finite 1-d vector")
        sl = np.broadcast_to(np.asarray(self.slope, dtype=float), off.shape).copy()
        if not np.all(np.isfinite(sl)):
            raise DomainError("slope must be finite")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "slope", sl)

    @property
    def n(self):
        return self.offsets.size

    def values_at(self, t):
        t = np.asarray(t, dtype=float)
        return self.slope * (t[..., None] - self.offsets)

    def slopes_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.slope, t.shape + self.offsets.shape)


@dataclass(frozen=True)
class SampledHistory:
    """History given on a grid of times ``<= 0``; interpolated linearly.

    The grid should cover ``[-(max delay + 2*step), 0]``; queries outside the
    grid are clamped to the end samples.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("times must be strictly increasing with >= 2 samples")
        if np.any(t > 1e-12):
            raise DomainError("history times must be <= 0")
        if v.shape != (t.size,) and (v.ndim != 2 or v.shape[0] != t.size):
            raise DomainError("values must be shaped (len(times), n)")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DomainError("history samples must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v if v.ndim == 2 else v[:, None])

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return -float(self.times[0])

    def values_at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.n))
        for j in range(self.n):
            out[:, j] = np.interp(t, self.times, self.values[:, j])
        return out

    def slopes_at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.n))
        grads = np.gradient(self.values, self.times, axis=0)
        for j in range(self.n):
            out[:, j] = np.interp(t, self.times, grads[:, j])
        return out


@dataclass
class Trajectory:
    """Sampled solution of one integration.

    ``phases`` are unwrapped; ``crossings`` lists, per oscillator, the times
    at which the unwrapped phase passes ``2*pi`` (mod ``2*pi``) upward;
    ``order_param`` is ``|mean_j exp(i y_j)|`` per sample.
    """

    times: np.ndarray
    phases: np.ndarray
    derivs: np.ndarray
    step: float
    order_param: np.ndarray = None
    crossings: list = field(default_factory=list)

    def __post_init__(self):
        if self.order_param is None:
            self.order_param = order_parameter_series(self.phases)
        if not self.crossings:
            self.crossings = crossing_times(self, TWO_PI)

    @property
    def n(self):
        return self.phases.shape[1]

    def phase_at(self, t, j=None):
        """Cubic Hermite evaluation of the stored solution at times ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.times[-1] + 1e-9):
            raise DomainError("phase_at: time outside the stored range")
        h = self.step
        i = np.clip(np.floor(t / h).astype(int), 0, len(self.times) - 2)
        th = (t - self.times[i]) / h
        t2, t3 = th * th, th * th * th
        h00 = 2 * t3 - 3 * t2 + 1
        h01 = -2 * t3 + 3 * t2
        g10 = h * (t3 - 2 * t2 + th)
        g11 = h * (t3 - t2)
        cols = slice(None) if j is None else j
        y0 = self.phases[i, cols]
        y1 = self.phases[i + 1, cols]
        m0 = self.derivs[i, cols]
        m1 = self.derivs[i + 1, cols]
        if j is None and np.ndim(th) > 0:
            h00, h01, g10, g11 = (np.expand_dims(a, -1) for a in (h00, h01, g10, g11))
        return h00 * y0 + h01 * y1 + g10 * m0 + g11 * m1

    def to_csv(self, fh, stride: int = 1, params_comment: str = None):
        """Write ``t, x_1..x_n, r`` rows; ``stride`` subsamples."""
        if stride < 1:
            raise DomainError("stride must be >= 1")
        if params_comment:
            fh.write(f"# {params_comment}\n")
        cols = ["t"] + [f"x_{j + 1}" for j in range(self.n)] + ["r"]
        fh.write(",".join(cols) + "\n")
        for i in range(0, len(self.times), stride):
            row = [repr(float(self.times[i]))]
            row += [repr(float(v)) for v in self.phases[i]]
            row.append(repr(float(self.order_param[i])))
            fh.write(",".join(row) + "\n")

    def crossings_json(self) -> str:
        return json.dumps([[float(t) for t in c] for c in self.crossings])


def order_parameter(phases) -> float:
    """Modulus of the mean unit phasor, ``|mean_j exp(i x_j)| in [0, 1]``."""
    x = np.asarray(phases, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("order_parameter expects >= 2 phases")
    return float(np.abs(np.mean(np.exp(1j * x))))


def order_parameter_series(phases) -> np.ndarray:
    """Order parameter per row of a ``(samples, n)`` phase array."""
    x = np.asarray(phases, dtype=float)
    return np.abs(np.mean(np.exp(1j * x), axis=-1))


def crossing_times(trajectory: Trajectory, level: float):
    """Per-oscillator times of upward crossings of ``level`` mod ``2*pi``.

    A crossing is counted whenever the unwrapped phase moves up through
    ``level + 2*pi*k`` for any integer ``k``; the instant is located by
    linear interpolation between the bracketing samples (O(step^2)).
    Downward passages are ignored.
    """
    t = trajectory.times
    out = []
    for j in range(trajectory.n):
        y = trajectory.phases[:, j]
        a = (y[:-1] - level) / TWO_PI
        b = (y[1:] - level) / TWO_PI
        up = y[1:] > y[:-1]
        counts = np.where(up, np.floor(b) - np.floor(a), 0).astype(int)
        counts = np.clip(counts, 0, None)
        times = []
        for i in np.nonzero(counts > 0)[0]:
            lo = math.floor(a[i])
            for m in range(1, counts[i] + 1):
                lv = level + TWO_PI * (lo + m)
                times.append(t[i] + (t[i + 1] - t[i]) * (lv - y[i]) / (y[i + 1] - y[i]))
        out.append(np.asarray(times))
    return out


def default_step(delays: DelayVector) -> float:
    pos = delays.delays[delays.delays > 0]
    if pos.size == 0:
        return DEFAULT_STEP_CAP
    return min(float(pos.min()) / 20.0, DEFAULT_STEP_CAP)


def integrate(params: RingParams, delays: DelayVector, init, t_end: float,
              step: float = None, release_times=None,
              record_order_param: bool = True) -> Trajectory:
    """Advance the ring from ``init`` to at least ``t_end``; full recording.

    ``init`` is a :class:`LinearRamp` or :class:`SampledHistory` over the
    history horizon.  The returned :class:`Trajectory` samples every node of
    the uniform step grid (the final node is the first one ``>= t_end``).
    Deterministic for fixed inputs.
    """
    if not isinstance(delays, DelayVector):
        delays = DelayVector(np.asarray(delays, dtype=float))
    if len(delays) != params.n:
        raise DomainError(f"expected {params.n} delays, got {len(delays)}")
    if init.n != params.n:
        raise DomainError(f"history covers {init.n} oscillators, ring has {params.n}")
    if t_end <= 0:
        raise DomainError("t_end must be > 0")
    if step is None:
        step = default_step(delays)
    if step <= 0:
        raise DomainError("step must be > 0")
    pos = delays.delays[delays.delays > 0]
    if pos.size and step > float(pos.min()) / 4.0:
        raise DomainError(
            f"step {step} exceeds min positive delay / 4 = {float(pos.min()) / 4.0}; "
            "delayed stage values would need extrapolation")

    rel = None
    if release_times is not None:
        rel = np.asarray(release_times, dtype=float)
        if rel.shape != (params.n,) or np.any(rel < 0) or not np.all(np.isfinite(rel)):
            raise DomainError("release_times must be n finite values >= 0")

    res = _integrate_arrays(
        params.omega, params.kappa,
        delays.delays[None, :], init, None if rel is None else rel[None, :],
        t_end, step, record="full", record_r=record_order_param)
    traj = Trajectory(times=res["times"], phases=res["Y"][:, 0, :],
                      derivs=res["F"][:, 0, :], step=step,
                      order_param=res["r"][:, 0] if record_order_param else None)
    return traj


def _n_steps(t_end, h):
    k = t_end / h
    return int(round(k)) if abs(round(k) - k) < 1e-9 else int(math.ceil(k))


def _hermite_weights(theta, h):
    t2 = theta * theta
    t3 = t2 * theta
    return (2 * t3 - 3 * t2 + 1, -2 * t3 + 3 * t2,
            h * (t3 - 2 * t2 + theta), h * (t3 - t2))


def _integrate_arrays(omega, kappa, delays, init, release, t_end, h,
                      record="full", record_r=False, tail=0, r_tail=None):
    """Batched core; ``delays`` and ``release`` are (B, n) or broadcastable.

    ``init`` is a history object (shared across the batch) or a tuple
    ``(slopes, offsets)`` of (B, n) arrays describing per-batch ramps.
    ``record='full'`` returns Y and F for every node; ``record='tail'``
    returns the last ``tail + 1`` node values only.  ``record_r`` adds the
    order-parameter series (the full series, or only its last ``r_tail + 1``
    samples when ``r_tail`` is given).
    """
    if isinstance(init, tuple):
        slopes, offsets = (np.asarray(a, dtype=float) for a in init)
        B, N = offsets.shape
        slopes = np.broadcast_to(slopes, (B, N))
        ramp = True
    else:
        N = init.n
        B = 1 if np.ndim(delays) < 2 else np.asarray(delays).shape[0]
        ramp = isinstance(init, LinearRamp)
        if ramp:
            slopes = np.broadcast_to(init.slope, (B, N))
            offsets = np.broadcast_to(init.offsets, (B, N))
    delays = np.broadcast_to(np.asarray(delays, dtype=float), (B, N))
    n_steps = _n_steps(t_end, h)
    max_lag = int(math.ceil(delays.max() / h)) if delays.max() > 0 else 0
    S = max_lag + 4
    src = (np.arange(N) + 1) % N
    bi = np.arange(B)[:, None]
    sj = np.broadcast_to(src[None, :], (B, N))

    # history prefix: nodes at t = -(S - p)*h for p = 0..S (last one is t=0)
    t_pre = -(S - np.arange(S + 1)) * h
    if ramp:
        Yp = slopes[None] * (t_pre[:, None, None] - offsets[None])
        Fp = np.broadcast_to(slopes, (S + 1, B, N)).copy()
    else:
        tq = np.clip(t_pre, init.times[0], 0.0)
        Yp = np.broadcast_to(init.values_at(tq)[:, None, :], (S + 1, B, N)).copy()
        Fp = np.broadcast_to(init.slopes_at(tq)[:, None, :], (S + 1, B, N)).copy()
    if not np.all(np.isfinite(Yp)):
        raise DomainError("initial history evaluates to non-finite values")

    full = record == "full"
    if full:
        Y = np.empty((n_steps + 1, B, N))
        F = np.empty((n_steps + 1, B, N))
        R = n_steps + 1
    else:
        R = max(S + 2, tail + 2)
        Y = np.empty((R, B, N))
        F = np.empty((R, B, N))
    r_series = None
    rR = 0
    if record_r:
        rR = n_steps + 1 if r_tail is None else min(r_tail + 1, n_steps + 1)
        r_series = np.empty((rR, B))

    rel_steps = None
    if release is not None:
        rel_steps = np.rint(np.broadcast_to(np.asarray(release, float), (B, N)) / h)

    stage_cache = {}
    for c in (0.0, 0.5, 1.0):
        q = c - delays / h
        base = np.floor(q + 1e-12).astype(np.int64)
        theta = q - base
        stage_cache[c] = (base,) + _hermite_weights(theta, h)
    zero_delay = delays == 0.0
    any_zero = bool(zero_delay.any())

    def read_delayed(n, c, ystage):
        base, h00, h01, g10, g11 = stage_cache[c]
        i0 = n + base
        neg = i0 < 0
        i0p = np.where(neg, 0, i0)
        if not full:
            i0p = i0p % R
            i1p = (i0p + 1) % R
        else:
            i1p = i0p + 1
        vals = (h00 * Y[i0p, bi, sj] + h01 * Y[i1p, bi, sj]
                + g10 * F[i0p, bi, sj] + g11 * F[i1p, bi, sj])
        if neg.any():
            p0 = np.where(neg, S + i0, 0)
            vneg = (h00 * Yp[p0, bi, sj] + h01 * Yp[p0 + 1, bi, sj]
                    + g10 * Fp[p0, bi, sj] + g11 * Fp[p0 + 1, bi, sj])
            vals = np.where(neg, vneg, vals)
        if any_zero:
            vals = np.where(zero_delay, ystage[:, src], vals)
        return vals

    def rhs(y, d):
        return omega + kappa * np.sin(d - y)

    y = Yp[S].copy()
    half = 0.5 * h
    sixth = h / 6.0
    row = 0
    Y[0] = y
    f0 = rhs(y, read_delayed(0, 0.0, y))
    if rel_steps is not None:
        f0 = np.where(rel_steps > 0, slopes, f0)
    F[0] = f0
    if record_r:
        r_series[0 % rR] = np.abs(np.mean(np.exp(1j * y), axis=1))

    for n in range(n_steps):
        k1 = F[row]
        y2 = y + half * k1
        k2 = rhs(y2, read_delayed(n, 0.5, y2))
        y3 = y + half * k2
        k3 = rhs(y3, read_delayed(n, 0.5, y3))
        y4 = y + h * k3
        d4 = read_delayed(n, 1.0, y4)
        k4 = rhs(y4, d4)
        ynew = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if rel_steps is not None:
            held = rel_steps > n + 1 - 1e-9
            if held.any():
                ynew = np.where(held, slopes * ((n + 1) * h - offsets), ynew)
        if any_zero:
            d4 = np.where(zero_delay, ynew[:, src], d4)
        fnew = rhs(ynew, d4)
        if rel_steps is not None:
            still_held = rel_steps > n + 1 + 1e-9
            if still_held.any():
                fnew = np.where(still_held, slopes, fnew)
        row = n + 1 if full else (n + 1) % R
        Y[row] = ynew
        F[row] = fnew
        y = ynew
        if record_r:
            r_series[(n + 1) % rR] = np.abs(np.mean(np.exp(1j * ynew), axis=1))
        if (n + 1) % 256 == 0 and not np.all(np.isfinite(ynew)):
            raise IntegrationError(f"non-finite state at t = {(n + 1) * h}")
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t = {n_steps * h}")

    out = {"times": np.arange(n_steps + 1) * h, "final": y}
    if record_r:
        if r_tail is None:
            out["r"] = r_series
        else:
            idx = np.arange(n_steps + 1 - rR, n_steps + 1)
            out["r_tail"] = r_series[idx % rR]
            out["r_tail_times"] = idx * h
    if full:
        out["Y"], out["F"] = Y, F
    elif tail > 0:
        k = min(tail + 1, n_steps + 1)
        rows = (np.arange(n_steps + 1 - k, n_steps + 1)) % R
        out["tail"] = Y[rows]
        out["tail_times"] = np.arange(n_steps + 1 - k, n_steps + 1) * h
    return out
