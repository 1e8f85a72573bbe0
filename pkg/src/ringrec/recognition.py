"""Recognition protocol: evolve a probe, measure the order parameter, threshold.

A probe pattern ``q`` against an encoding of pattern ``p`` is judged by how
fast the ring relaxes back to collective synchrony.  In back-shifted
coordinates this is the homogeneous ring started from the ramp history with
offsets ``delta = q - p``, so that is what gets integrated; the score is the
order parameter ``r`` averaged over a short window ending at the stop time
``T``, and the probe is accepted when the score reaches the threshold.

The stop time and threshold are the only learned quantities:
:func:`calibrate` grid-searches them on labeled probes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .codec import Encoding, Pattern
from .engine import DelayVector, _integrate_arrays, _n_steps, default_step
from .exceptions import DomainError

#: Scores closer than this are a tie.
TIE_TOL = 1e-9


class DecisionValue(IntEnum):
    PATTERN_1 = -1
    NONE = 0
    PATTERN_2 = 1


@dataclass(frozen=True)
class RecognitionConfig:
    """Stop time ``t_horizon``, threshold and score-averaging window.

    ``window=None`` resolves, at evaluation time, to one period of the
    encoding's reference frequency; ``window=0`` scores the instantaneous
    order parameter at the stop time.
    """

    t_horizon: float
    threshold: float = 0.9
    window: float = None

    def __post_init__(self):
        if not self.t_horizon > 0:
            raise DomainError("t_horizon must be > 0")
        if not 0 < self.threshold <= 1:
            raise DomainError("threshold must be in (0, 1]")
        if self.window is not None and not 0 <= self.window < self.t_horizon:
            raise DomainError("window must satisfy 0 <= window < t_horizon")

    def to_dict(self):
        return {"t_horizon": self.t_horizon, "threshold": self.threshold,
                "window": self.window}

    @classmethod
    def from_dict(cls, d):
        return cls(t_horizon=float(d["t_horizon"]), threshold=float(d["threshold"]),
                   window=None if d.get("window") is None else float(d["window"]))


class RecognitionResult(NamedTuple):
    score: float
    accepted: bool


@dataclass(frozen=True)
class Decision:
    """Two-class outcome: -1 first pattern, +1 second, 0 neither."""

    value: int
    scores: tuple
    tie: bool = False

    def __post_init__(self):
        r1, r2 = self.scores
        assert self.value in (-1, 0, 1)


def _auto_window(t_horizon: float, window, encoding: Encoding) -> float:
    if window is not None:
        return window
    return min(encoding.period, 0.5 * t_horizon)


def _resolve_window(cfg: RecognitionConfig, encoding: Encoding) -> float:
    return _auto_window(cfg.t_horizon, cfg.window, encoding)


def order_param_series(encoding: Encoding, deltas: np.ndarray, t_end: float,
                       step: float = None):
    """Order-parameter series of the back-shifted dynamics for a batch.

    ``deltas`` has shape (B, n): per-probe offsets ``q - p``.  Returns
    ``(times, r)`` with ``r`` of shape (samples, B).
    """
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    params = encoding.params
    if deltas.shape[1] != params.n:
        raise DomainError("delta width must equal the ring size")
    hom = DelayVector.homogeneous(params.n, params.tau)
    if step is None:
        step = default_step(hom)
    slopes = np.full_like(deltas, encoding.omega_ref.omega_sync)
    res = _integrate_arrays(params.omega, params.kappa, hom.delays[None, :],
                            (slopes, deltas), None, t_end, step,
                            record="tail", record_r=True, tail=0)
    return res["times"], res["r"]


def windowed_scores(encoding: Encoding, deltas: np.ndarray, t_stop: float,
                    window: float = None, step: float = None) -> np.ndarray:
    """Mean order parameter over ``[t_stop - window, t_stop]`` for a batch.

    Only the needed tail of the order-parameter series is kept in memory, so
    long horizons with many probes stay cheap.  Matches scoring a full
    series with :func:`_window_score` sample for sample.
    """
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    params = encoding.params
    if deltas.shape[1] != params.n:
        raise DomainError("delta width must equal the ring size")
    hom = DelayVector.homogeneous(params.n, params.tau)
    if step is None:
        step = default_step(hom)
    w = _auto_window(t_stop, window, encoding)
    n_steps = _n_steps(t_stop, step)
    i1 = min(int(math.ceil((t_stop - 1e-9) / step)), n_steps)
    i0 = max(0, min(int(math.ceil((t_stop - w - 1e-9) / step)), i1))
    slopes = np.full_like(deltas, encoding.omega_ref.omega_sync)
    res = _integrate_arrays(params.omega, params.kappa, hom.delays[None, :],
                            (slopes, deltas), None, t_stop, step,
                            record="tail", record_r=True, tail=0,
                            r_tail=n_steps - i0)
    r = res["r_tail"]
    return np.mean(r[:i1 - i0 + 1], axis=0)


def _window_score(times, r_col, t_stop, window):
    i1 = int(np.searchsorted(times, t_stop - 1e-9))
    i1 = min(i1, len(times) - 1)
    i0 = int(np.searchsorted(times, t_stop - window - 1e-9))
    i0 = min(i0, i1)
    return float(np.mean(r_col[i0:i1 + 1]))


def recognize(encoding: Encoding, probe: Pattern, cfg: RecognitionConfig,
              step: float = None, similarity: str = "order_parameter") -> RecognitionResult:
    """Score a probe against an encoding and threshold it.

    The default similarity is the windowed mean of the order parameter over
    ``[T - window, T]``.  ``similarity='cross_correlation'`` instead scores
    the best cyclic-lag normalized cross-correlation between the probe's
    emitted crossing sequence after ``T`` and the stored pattern.
    """
    if probe.n != encoding.params.n:
        raise DomainError("probe length must equal the ring size")
    delta = probe.values - encoding.pattern.values
    if similarity == "order_parameter":
        score = float(windowed_scores(encoding, delta[None, :], cfg.t_horizon,
                                      cfg.window, step)[0])
    elif similarity == "cross_correlation":
        score = _cross_correlation_score(encoding, delta, cfg, step)
    else:
        raise DomainError(f"unknown similarity {similarity!r}")
    return RecognitionResult(score=score, accepted=score >= cfg.threshold)


def _cross_correlation_score(encoding: Encoding, delta, cfg, step):
    """Best cyclic-lag correlation of emitted crossing times with the pattern.

    The back-shifted system is run a little past ``T``; each oscillator's
    first crossing after ``T`` plus its stored shift ``p_j`` is the emitted
    firing sequence, compared with the pattern after centering.
    """
    params = encoding.params
    hom = DelayVector.homogeneous(params.n, params.tau)
    h = default_step(hom) if step is None else step
    t_run = cfg.t_horizon + 2.0 * encoding.period
    from .engine import LinearRamp, integrate  # local import avoids cycle at module load
    traj = integrate(params, hom,
                     LinearRamp(encoding.omega_ref.omega_sync, delta),
                     t_run, h, record_order_param=False)
    seq = np.empty(params.n)
    for j, c in enumerate(traj.crossings):
        after = c[c > cfg.t_horizon]
        if after.size == 0:
            return 0.0
        seq[j] = after[0] + encoding.pattern.values[j]
    p = encoding.pattern.values
    sc = seq - seq.mean()
    best = -1.0
    for lag in range(params.n):
        pl = np.roll(p, lag)
        pc = pl - pl.mean()
        den = math.sqrt(float(np.dot(sc, sc) * np.dot(pc, pc)))
        if den == 0.0:
            continue
        best = max(best, float(np.dot(sc, pc)) / den)
    return max(0.0, best)


def classify(enc1: Encoding, enc2: Encoding, probe: Pattern,
             cfg: RecognitionConfig, step: float = None,
             similarity: str = "order_parameter") -> Decision:
    """Two-class decision: recognize against both encodings, take the argmax.

    Returns value -1 (first), +1 (second) or 0 when neither score reaches
    the threshold; an exact tie with both above threshold is 0 with the
    ``tie`` flag set.  The two recognitions run concurrently.
    """
    if enc1.params.n != enc2.params.n:
        raise DomainError("encodings must share the ring size")
    with ThreadPoolExecutor(max_workers=2) as pool:
        f1 = pool.submit(recognize, enc1, probe, cfg, step, similarity)
        f2 = pool.submit(recognize, enc2, probe, cfg, step, similarity)
        r1, r2 = f1.result().score, f2.result().score
    return _decide(r1, r2, cfg.threshold)


def _decide(r1: float, r2: float, threshold: float) -> Decision:
    if max(r1, r2) < threshold:
        return Decision(value=0, scores=(r1, r2))
    if abs(r1 - r2) < TIE_TOL:
        return Decision(value=0, scores=(r1, r2), tie=True)
    return Decision(value=-1 if r1 > r2 else 1, scores=(r1, r2))


def calibrate(encodings, labeled_probes, t_grid, theta_grid,
              step: float = None) -> RecognitionConfig:
    """Grid-search the stop time and threshold on labeled probes.

    ``encodings`` is a pair; ``labeled_probes`` yields ``(Pattern, label)``
    with labels -1 (first encoding), +1 (second) or 0 (should be rejected).
    Accuracy over the probes is maximized; ties break toward the smaller
    stop time, then the larger threshold.  Each (probe, encoding) pair is
    integrated once to the largest stop time; earlier stop times are scored
    from the same series, which matches separate runs exactly because the
    scheme is a fixed-step one.
    """
    encodings = list(encodings)
    if len(encodings) != 2:
        raise DomainError("calibrate expects exactly two encodings")
    probes = list(labeled_probes)
    t_grid = sorted(float(t) for t in t_grid)
    theta_grid = sorted(float(t) for t in theta_grid)
    if not (probes and t_grid and theta_grid):
        raise DomainError("calibrate requires nonempty probes and grids")
    for _, label in probes:
        if int(label) not in (-1, 0, 1):
            raise DomainError(f"labels must be -1, 0 or +1, got {label!r}")
    if any(t <= 0 for t in t_grid):
        raise DomainError("stop times must be > 0")
    if any(not 0 < th <= 1 for th in theta_grid):
        raise DomainError("thresholds must be in (0, 1]")

    t_max = t_grid[-1]
    n = encodings[0].params.n
    series = []
    for enc in encodings:
        if enc.params.n != n:
            raise DomainError("encodings must share the ring size")
        deltas = np.stack([q.values - enc.pattern.values for q, _ in probes])
        times, r = order_param_series(enc, deltas, t_max, step)
        series.append((times, r))

    labels = np.asarray([int(lbl) for _, lbl in probes])
    best = None
    for t_stop in t_grid:
        scores = np.empty((len(probes), 2))
        for k, (times, r) in enumerate(series):
            window = _resolve_window(RecognitionConfig(t_horizon=t_stop),
                                     encodings[k])
            for i in range(len(probes)):
                scores[i, k] = _window_score(times, r[:, i], t_stop, window)
        for theta in reversed(theta_grid):
            decided = np.array([_decide(s1, s2, theta).value
                                for s1, s2 in scores])
            acc = float(np.mean(decided == labels))
            if best is None or acc > best[0] + 1e-12:
                best = (acc, t_stop, theta)
    acc, t_stop, theta = best
    return RecognitionConfig(t_horizon=t_stop, threshold=theta)
