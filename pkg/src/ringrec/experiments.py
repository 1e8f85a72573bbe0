"""Scripted, seed-deterministic experiment sweeps with CSV output.

Four named experiments are provided:

* ``PerturbationMap`` -- single-site perturbations of the step pattern
  ``(2, 1, ..., 1)``: a grid over (site, size) of the relaxation score.
* ``BasinMap`` -- two-oscillator ring, grid of initial slope pairs, each
  classified by its asymptotic collective frequency.
* ``SineDiscrimination`` -- two encoded sine tones, a swept probe tone, and
  the thresholded two-class decision track.
* ``SpeechSurrogate`` -- two-class recognition accuracy over seeded
  multi-tone "words" with additive noise (a stand-in corpus; real speech
  recordings are out of scope).

Every CSV starts with a comment line carrying the full parameter set, then a
header row.  Identical seeds produce byte-identical files; sweeps are
chunked and the chunks may be distributed over worker threads without
affecting the output.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .analysis import find_sync_solutions
from .audio import AudioClip, MultiTone, Sine, power_spectrum, synthesize, to_pattern
from .codec import Pattern, encode_pattern
from .engine import DelayVector, _integrate_arrays
from .exceptions import DomainError
from .model import RingParams
from .recognition import RecognitionConfig, _decide, _resolve_window, \
    _window_score, calibrate, order_param_series, windowed_scores

EXPERIMENT_NAMES = ("PerturbationMap", "BasinMap", "SineDiscrimination",
                    "SpeechSurrogate")

#: Cells per work unit; fixed so thread count cannot change results.
CHUNK = 256


@dataclass(frozen=True)
class ExperimentSpec:
    """Which experiment, parameter overrides, and the seed."""

    name: str
    overrides: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise DomainError(
                f"unknown experiment {self.name!r}; choose from {EXPERIMENT_NAMES}")


def run_experiment(spec: ExperimentSpec, out_dir, threads: int = 1) -> dict:
    """Run one experiment, write its CSV(s) under ``out_dir``, return a report."""
    os.makedirs(out_dir, exist_ok=True)
    fn = {"PerturbationMap": _perturbation_map,
          "BasinMap": _basin_map,
          "SineDiscrimination": _sine_discrimination,
          "SpeechSurrogate": _speech_surrogate}[spec.name]
    report = fn(spec, out_dir, max(1, int(threads)))
    report = {"experiment": spec.name, "seed": spec.seed, **report}
    report_path = os.path.join(out_dir, f"{_snake(spec.name)}_report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    report["report_path"] = report_path
    return report


def _snake(name):
    out = []
    for ch in name:
        if ch.isupper() and out:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _write_csv(path, params: dict, header, rows):
    with open(path, "w") as fh:
        blurb = " ".join(f"{k}={params[k]}" for k in sorted(params))
        fh.write(f"# params: {blurb}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _chunked(n_items, fn, threads, chunk=CHUNK):
    spans = [(a, min(a + chunk, n_items)) for a in range(0, n_items, chunk)]
    if threads <= 1 or len(spans) == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def _ov(overrides, key, default):
    return overrides.get(key, default)


# ---------------------------------------------------------------------------
# PerturbationMap

def _perturbation_map(spec, out_dir, threads):
    ov = spec.overrides
    n = int(_ov(ov, "n", 50))
    omega = float(_ov(ov, "omega", 1.0))
    kappa = float(_ov(ov, "kappa", 1.0))
    tau = float(_ov(ov, "tau", 3.0))
    t_end = float(_ov(ov, "t_end", 900.0))
    step = float(_ov(ov, "step", 0.01))
    reference = _ov(ov, "reference", "nearest")
    eps_values = np.asarray(_ov(ov, "eps", np.linspace(0.0, 2.0, 41)), dtype=float)
    sites = np.asarray(_ov(ov, "sites", np.arange(1, n + 1)), dtype=int)

    params = RingParams(n=n, omega=omega, kappa=kappa, tau=tau)
    base = np.ones(n)
    base[0] = 2.0
    enc = encode_pattern(params, Pattern(base), reference)

    cells = [(int(j), float(e)) for j in sites for e in eps_values]
    deltas = np.zeros((len(cells), n))
    for i, (j, e) in enumerate(cells):
        deltas[i, j - 1] = e

    def work(a, b):
        return windowed_scores(enc, deltas[a:b], t_end, step=step)

    scores = np.concatenate(_chunked(len(cells), work, threads))
    meta = {"experiment": "PerturbationMap", "n": n, "omega": omega,
            "kappa": kappa, "tau": tau, "t_end": t_end, "step": step,
            "omega_ref": enc.omega_ref.omega_sync, "seed": spec.seed,
            "pattern": "(2,1,...,1)"}
    rows = [(j, e, float(s)) for (j, e), s in zip(cells, scores)]
    path = os.path.join(out_dir, "perturbation_map.csv")
    _write_csv(path, meta, ("site", "eps", "score"), rows)
    return {"csv": path, "params": {k: v for k, v in meta.items()},
            "n_cells": len(cells)}


# ---------------------------------------------------------------------------
# BasinMap

def _basin_map(spec, out_dir, threads):
    ov = spec.overrides
    n = 2
    omega = float(_ov(ov, "omega", 2.0))
    kappa = float(_ov(ov, "kappa", 1.0))
    tau = float(_ov(ov, "tau", 20.0))
    t_end = float(_ov(ov, "t_end", 50000.0 if ov.get("full_scale") else 5000.0))
    step = float(_ov(ov, "step", 0.01))
    grid_n = int(_ov(ov, "grid", 21))
    freq_window = float(_ov(ov, "freq_window", 50.0))

    params = RingParams(n=n, omega=omega, kappa=kappa, tau=tau)
    sols = find_sync_solutions(params)
    sync_freqs = np.array([s.omega_sync for s in sols])
    sync_stable = np.array([s.stable for s in sols])

    axis = np.linspace(omega - kappa, omega + kappa, grid_n)
    pairs = [(float(a), float(b)) for a in axis for b in axis]
    slopes = np.asarray(pairs)
    offsets = np.zeros_like(slopes)
    delays = DelayVector.homogeneous(n, tau).delays[None, :]
    tail = int(math.ceil(freq_window / step))

    def work(a, b):
        res = _integrate_arrays(omega, kappa, delays,
                                (slopes[a:b], offsets[a:b]), None,
                                t_end, step, record="tail", tail=tail)
        seg = res["tail"]
        tt = res["tail_times"]
        span = tt[-1] - tt[0]
        return (seg[-1] - seg[0]) / span  # (b-a, n) mean frequency over window

    # two-oscillator cells are tiny; wide chunks amortize per-step overhead
    freq = np.concatenate(_chunked(len(pairs), work, threads, chunk=1024))
    cell_freq = freq.mean(axis=1)
    nearest = np.argmin(np.abs(cell_freq[:, None] - sync_freqs[None, :]), axis=1)

    meta = {"experiment": "BasinMap", "n": n, "omega": omega, "kappa": kappa,
            "tau": tau, "t_end": t_end, "step": step, "grid": grid_n,
            "freq_window": freq_window, "seed": spec.seed,
            "n_solutions": len(sols), "n_stable": sols.n_stable}
    rows = []
    for (a, b), f, k in zip(pairs, cell_freq, nearest):
        rows.append((a, b, float(f), float(sync_freqs[k]), int(sync_stable[k])))
    path = os.path.join(out_dir, "basin_map.csv")
    _write_csv(path, meta,
               ("omega1_init", "omega2_init", "freq", "nearest_omega",
                "nearest_stable"), rows)
    return {"csv": path, "params": meta, "n_cells": len(pairs),
            "n_solutions": len(sols), "n_stable": sols.n_stable}


# ---------------------------------------------------------------------------
# SineDiscrimination

#: Band layout that centers 5 Hz and 15 Hz in their bands (width 10/31 Hz).
SINE_BANDS = {"sample_rate": 80.0, "fft_size": 4096, "n_sites": 64,
              "cutoff_hz": 640.0 / 31.0, "beta": 0.5}


def _tone_pattern(freq, sample_rate, fft_size, cutoff_hz, n_sites, tau, beta):
    clip = synthesize(Sine(freq), duration=fft_size / sample_rate,
                      sample_rate=sample_rate)
    spec = power_spectrum(clip, fft_size, cutoff_hz)
    return to_pattern(spec, n_sites, tau, beta)


def _sine_discrimination(spec, out_dir, threads):
    ov = spec.overrides
    omega = float(_ov(ov, "omega", 1.0))
    kappa = float(_ov(ov, "kappa", 1.0))
    tau = float(_ov(ov, "tau", 3.0))
    t_end = float(_ov(ov, "t_end", 50.0))
    step = float(_ov(ov, "step", 0.01))
    reference = _ov(ov, "reference", "fastest")
    f1 = float(_ov(ov, "f1", 5.0))
    f2 = float(_ov(ov, "f2", 15.0))
    probes = np.asarray(_ov(ov, "probes", np.round(np.arange(4.0, 16.0001, 0.05), 6)),
                        dtype=float)
    fs = float(_ov(ov, "sample_rate", SINE_BANDS["sample_rate"]))
    nfft = int(_ov(ov, "fft_size", SINE_BANDS["fft_size"]))
    cutoff = float(_ov(ov, "cutoff_hz", SINE_BANDS["cutoff_hz"]))
    n_sites = int(_ov(ov, "n_sites", SINE_BANDS["n_sites"]))
    beta = float(_ov(ov, "beta", SINE_BANDS["beta"]))

    params = RingParams(n=n_sites, omega=omega, kappa=kappa, tau=tau)

    def pat(freq):
        return _tone_pattern(freq, fs, nfft, cutoff, n_sites, tau, beta)

    enc1 = encode_pattern(params, pat(f1), reference)
    enc2 = encode_pattern(params, pat(f2), reference)

    # learning phase: pin the threshold on a small labeled set
    cal_set = [(pat(f1), -1), (pat(f2), 1)]
    for f_bad in (f1 - 0.5, f1 + 0.5, 0.5 * (f1 + f2), f2 - 0.5, f2 + 0.5):
        cal_set.append((pat(f_bad), 0))
    theta_grid = np.round(np.arange(0.50, 0.9996, 0.0005), 6)
    cfg = calibrate((enc1, enc2), cal_set, t_grid=[t_end],
                    theta_grid=theta_grid, step=step)

    probe_patterns = np.stack([pat(f).values for f in probes])
    rows = []

    def work(a, b):
        s1 = windowed_scores(enc1, probe_patterns[a:b] - enc1.pattern.values,
                             t_end, step=step)
        s2 = windowed_scores(enc2, probe_patterns[a:b] - enc2.pattern.values,
                             t_end, step=step)
        return np.stack([s1, s2], axis=1)

    scores = np.concatenate(_chunked(len(probes), work, threads))
    decisions = [
        _decide(float(r1), float(r2), cfg.threshold).value
        for r1, r2 in scores]
    for f, (r1, r2), d in zip(probes, scores, decisions):
        rows.append((float(f), float(r1), float(r2), int(d)))

    meta = {"experiment": "SineDiscrimination", "omega": omega, "kappa": kappa,
            "tau": tau, "t_end": t_end, "step": step, "f1": f1, "f2": f2,
            "sample_rate": fs, "fft_size": nfft, "cutoff_hz": cutoff,
            "n_sites": n_sites, "beta": beta, "threshold": cfg.threshold,
            "omega_ref": enc1.omega_ref.omega_sync, "seed": spec.seed}
    path = os.path.join(out_dir, "sine_discrimination.csv")
    _write_csv(path, meta, ("freq", "score_1", "score_2", "decision"), rows)
    return {"csv": path, "params": meta, "threshold": cfg.threshold,
            "decisions": {repr(float(f)): int(d)
                          for f, d in zip(probes, decisions)}}


# ---------------------------------------------------------------------------
# SpeechSurrogate

def _speech_surrogate(spec, out_dir, threads):
    ov = spec.overrides
    omega = float(_ov(ov, "omega", 1.0))
    kappa = float(_ov(ov, "kappa", 1.0))
    tau = float(_ov(ov, "tau", 3.0))
    step = float(_ov(ov, "step", 0.01))
    reference = _ov(ov, "reference", "fastest")
    n_tasks = int(_ov(ov, "tasks", 10))
    n_takes = int(_ov(ov, "takes", 6))
    snr_db = float(_ov(ov, "snr_db", 20.0))
    fs = float(_ov(ov, "sample_rate", 8000.0))
    nfft = int(_ov(ov, "fft_size", 4096))
    cutoff = float(_ov(ov, "cutoff_hz", 3600.0))
    n_sites = int(_ov(ov, "n_sites", 64))
    beta = float(_ov(ov, "beta", 0.5))
    tones_per_word = int(_ov(ov, "tones_per_word", 3))
    t_grid = list(_ov(ov, "t_grid", (12.5, 25.0, 50.0)))
    theta_grid = np.round(np.arange(0.50, 0.9996, 0.0005), 6)

    params = RingParams(n=n_sites, omega=omega, kappa=kappa, tau=tau)
    rng = np.random.default_rng(spec.seed)
    duration = nfft / fs

    def draw_word_tones():
        while True:
            f = np.sort(rng.uniform(300.0, 3400.0, tones_per_word))
            if np.all(np.diff(f) >= 200.0):
                return f

    def render_take(tones, take_seed):
        take_rng = np.random.default_rng(take_seed)
        amps = take_rng.uniform(0.6, 1.0, len(tones))
        jitter = take_rng.uniform(-2.0, 2.0, len(tones))
        clip = synthesize(MultiTone(tuple(zip(tones + jitter, amps))),
                          duration, fs)
        sig_power = float(np.mean(clip.samples ** 2))
        noise = take_rng.normal(
            0.0, math.sqrt(sig_power / 10 ** (snr_db / 10.0)),
            clip.samples.size)
        x = clip.samples + noise
        peak = float(np.abs(x).max())
        if peak > 0.98:
            x = x * (0.98 / peak)
        return AudioClip(sample_rate=fs, samples=x)

    def pat(clip):
        return to_pattern(power_spectrum(clip, nfft, cutoff), n_sites, tau, beta)

    tasks = []
    for ti in range(n_tasks):
        while True:
            tones = [draw_word_tones(), draw_word_tones()]
            gap = np.abs(tones[0][:, None] - tones[1][None, :]).min()
            if gap >= 150.0:
                break
        takes = [[pat(render_take(tones[w], spec.seed * 7919 + ti * 101 + w * 13 + k))
                  for k in range(n_takes)] for w in range(2)]
        enc = tuple(encode_pattern(params, takes[w][0], reference) for w in range(2))
        tasks.append((enc, takes))

    # pooled learning phase on take 1 of every word of every task
    t_max = max(t_grid)
    cal_scores = []  # (task, word) -> series pair
    for enc, takes in tasks:
        for w in range(2):
            probe = takes[w][1]
            pair = []
            for e in enc:
                times, r = order_param_series(
                    e, (probe.values - e.pattern.values)[None, :], t_max, step)
                pair.append((times, r[:, 0]))
            cal_scores.append((w, enc, pair))

    best = None
    for t_stop in sorted(t_grid):
        labeled = []
        for w, enc, pair in cal_scores:
            sc = []
            for k, (times, r) in enumerate(pair):
                cfg0 = RecognitionConfig(t_horizon=t_stop)
                sc.append(_window_score(times, r, t_stop,
                                        _resolve_window(cfg0, enc[k])))
            labeled.append((sc[0], sc[1], -1 if w == 0 else 1))
        for theta in theta_grid[::-1]:
            hits = sum(int(_decide(s1, s2, theta).value == lbl)
                       for s1, s2, lbl in labeled)
            acc = hits / len(labeled)
            if best is None or acc > best[0] + 1e-12:
                best = (acc, t_stop, float(theta))
    cal_acc, t_stop, theta = best
    cfg = RecognitionConfig(t_horizon=t_stop, threshold=theta)

    rows = []
    hits = trials = 0
    for ti, (enc, takes) in enumerate(tasks):
        for w in range(2):
            truth = -1 if w == 0 else 1
            for k in range(2, n_takes):
                probe = takes[w][k]
                s = [windowed_scores(e, (probe.values - e.pattern.values)[None, :],
                                     t_stop, step=step)[0] for e in enc]
                d = _decide(float(s[0]), float(s[1]), theta).value
                ok = int(d == truth)
                hits += ok
                trials += 1
                rows.append((ti, w + 1, k, float(s[0]), float(s[1]), int(d),
                             truth, ok))

    accuracy = hits / trials if trials else 0.0
    ci = binomtest(hits, trials).proportion_ci(confidence_level=0.95)
    meta = {"experiment": "SpeechSurrogate", "omega": omega, "kappa": kappa,
            "tau": tau, "step": step, "tasks": n_tasks, "takes": n_takes,
            "snr_db": snr_db, "sample_rate": fs, "fft_size": nfft,
            "cutoff_hz": cutoff, "n_sites": n_sites, "beta": beta,
            "tones_per_word": tones_per_word, "t_stop": t_stop,
            "threshold": theta, "seed": spec.seed}
    path = os.path.join(out_dir, "speech_surrogate.csv")
    _write_csv(path, meta,
               ("task", "word", "take", "score_1", "score_2", "decision",
                "truth", "correct"), rows)
    return {"csv": path, "params": meta, "accuracy": accuracy,
            "ci95": [float(ci.low), float(ci.high)],
            "calibration_accuracy": cal_acc,
            "t_stop": t_stop, "threshold": theta, "trials": trials}
