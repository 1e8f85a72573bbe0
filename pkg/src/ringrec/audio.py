"""Audio ingestion: WAV loading, power spectra, firing-time patterns.

The chain is: load (or synthesize) a clip, take the squared modulus of its
FFT with a rectangular window, drop everything above a cutoff frequency,
average the remaining bins into N contiguous bands, then map the band powers
affinely onto firing times so that the largest cyclic forward difference is
``beta * tau``.  Every encoded delay then stays at least ``(1 - beta) * tau``
above zero.  Patterns built this way depend on the spectrum only, so clips
that differ by overall gain or start time produce (nearly) the same pattern.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .codec import Pattern
from .exceptions import AudioFormatError, DomainError

#: Default truncation frequency for speech-band material.
DEFAULT_CUTOFF_HZ = 4000.0


@dataclass(frozen=True)
class AudioClip:
    """Mono samples in [-1, 1] at a fixed rate."""

    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be > 0")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise DomainError("samples must be a nonempty 1-d array")
        if not np.all(np.isfinite(s)):
            raise DomainError("samples must be finite")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class SpectralPattern:
    """One-sided power spectrum with a retained upper bin."""

    bin_hz: float
    power: np.ndarray
    cutoff_bin: int

    def __post_init__(self):
        p = np.asarray(self.power, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0):
            raise DomainError("power must be a nonnegative 1-d array")
        if not 0 <= self.cutoff_bin <= p.size - 1:
            raise DomainError("cutoff_bin must index into the power array")
        object.__setattr__(self, "power", p)


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM RIFF/WAVE file (stereo is averaged to mono).

    Samples are scaled by 1/32768.  Raises :class:`AudioFormatError` for a
    malformed header, an unsupported codec, truncated data, or an empty
    data chunk -- never a partial clip.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise AudioFormatError(f"{path}: truncated {cid!r} chunk")
        if cid == b"fmt ":
            if size < 16:
                raise AudioFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise AudioFormatError(f"{path}: missing fmt or data chunk")
    codec, channels, rate, _, block_align, bits = fmt
    if codec != 1 or bits != 16:
        raise AudioFormatError(
            f"{path}: unsupported codec (format {codec}, {bits}-bit); "
            "only 16-bit PCM is handled")
    if channels not in (1, 2):
        raise AudioFormatError(f"{path}: {channels} channels unsupported")
    if len(data) == 0:
        raise AudioFormatError(f"{path}: empty data chunk")
    if len(data) % (2 * channels) != 0:
        raise AudioFormatError(f"{path}: data length not a whole number of frames")
    raw = np.frombuffer(data, dtype="<i2").astype(float) / 32768.0
    if channels == 2:
        raw = raw.reshape(-1, 2).mean(axis=1)
    return AudioClip(sample_rate=float(rate), samples=raw)


def save_wav(path, clip: AudioClip):
    """Write a clip as mono 16-bit PCM (test-fixture helper)."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2").tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    rate = int(round(clip.sample_rate))
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(pcm))
    with open(path, "wb") as fh:
        fh.write(hdr + pcm)


def fft_radix2(x) -> np.ndarray:
    """Radix-2 decimation-in-time transform of a power-of-two length signal."""
    a = np.asarray(x, dtype=complex)
    n = a.size
    if n == 0 or n & (n - 1):
        raise DomainError(f"length {n} is not a power of two")
    rev = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) * (n >> 1))
    a = a[rev]
    half = 1
    while half < n:
        w = np.exp(-1j * np.pi * np.arange(half) / half)
        a = a.reshape(-1, 2 * half)
        t = a[:, half:] * w
        a[:, half:] = a[:, :half] - t
        a[:, :half] += t
        a = a.reshape(-1)
        half *= 2
    return a


def ifft_radix2(spectrum) -> np.ndarray:
    X = np.asarray(spectrum, dtype=complex)
    return np.conj(fft_radix2(np.conj(X))) / X.size


def power_spectrum(clip: AudioClip, fft_size: int,
                   cutoff_hz: float = DEFAULT_CUTOFF_HZ) -> SpectralPattern:
    """Squared FFT magnitudes of the first ``fft_size`` samples.

    Rectangular window; bins 0..fft_size/2 are kept and ``cutoff_hz`` marks
    the retained upper bin (clamped to the Nyquist bin).
    """
    if fft_size <= 0 or fft_size & (fft_size - 1):
        raise DomainError(f"fft_size must be a power of two, got {fft_size}")
    if fft_size > clip.samples.size:
        raise DomainError(
            f"fft_size {fft_size} exceeds clip length {clip.samples.size}")
    spec = fft_radix2(clip.samples[:fft_size])
    power = np.abs(spec[:fft_size // 2 + 1]) ** 2
    bin_hz = clip.sample_rate / fft_size
    cutoff_bin = min(power.size - 1, int(math.floor(cutoff_hz / bin_hz)))
    if cutoff_bin < 0:
        raise DomainError("cutoff below the first bin")
    return SpectralPattern(bin_hz=bin_hz, power=power, cutoff_bin=cutoff_bin)


def band_edges(n_bins: int, n_bands: int) -> np.ndarray:
    """Balanced contiguous band boundaries: edge_i = round(i * n_bins / n_bands)."""
    return np.rint(np.arange(n_bands + 1) * (n_bins / n_bands)).astype(int)


def to_pattern(spec: SpectralPattern, n: int, tau: float, beta: float) -> Pattern:
    """Map band powers onto firing times.

    Power above the cutoff bin is discarded (a crude denoise), the rest is
    averaged into ``n`` contiguous bands, and the band values are scaled and
    shifted so the largest cyclic forward difference equals ``beta * tau``
    (every encoded delay then stays >= (1-beta)*tau).  A constant spectrum
    maps to the constant zero pattern; an all-zero spectrum is an error.
    """
    if not 0 < beta < 1:
        raise DomainError("beta must be in (0, 1)")
    if n < 2 or n > spec.cutoff_bin + 1:
        raise DomainError(f"n must be in [2, cutoff_bin + 1], got {n}")
    kept = spec.power[:spec.cutoff_bin + 1]
    if not np.any(kept > 0):
        raise DomainError("all-zero spectrum has no pattern")
    edges = band_edges(kept.size, n)
    v = np.array([kept[edges[i]:edges[i + 1]].mean() for i in range(n)])
    diffs = np.roll(v, -1) - v
    span = float(diffs.max())
    if span <= 0:
        return Pattern(np.zeros(n))
    scale = beta * tau / span
    values = scale * (v - v.min())
    pattern = Pattern(values)
    from .codec import min_base_delay
    assert abs(min_base_delay(pattern) - beta * tau) <= 1e-9 * max(1.0, beta * tau)
    return pattern


def waveform_pattern(clip: AudioClip, size: int, n: int, tau: float,
                     beta: float) -> Pattern:
    """Pattern straight from the waveform (no FFT): band-average the first
    ``size`` samples and scale as in :func:`to_pattern`.

    Escape hatch only; unlike spectral patterns it is sensitive to signal
    timing, and no recognition accuracy is implied.
    """
    if size > clip.samples.size:
        raise DomainError("size exceeds clip length")
    if not 0 < beta < 1:
        raise DomainError("beta must be in (0, 1)")
    x = clip.samples[:size]
    edges = band_edges(size, n)
    v = np.array([x[edges[i]:edges[i + 1]].mean() for i in range(n)])
    diffs = np.roll(v, -1) - v
    span = float(diffs.max())
    if span <= 0:
        return Pattern(np.zeros(n))
    return Pattern(beta * tau / span * (v - v.min()))


@dataclass(frozen=True)
class Sine:
    freq: float


@dataclass(frozen=True)
class MultiTone:
    tones: tuple  # of (freq, amplitude)


@dataclass(frozen=True)
class NoisySine:
    freq: float
    snr_db: float


def synthesize(kind, duration: float, sample_rate: float, seed: int = 0) -> AudioClip:
    """Deterministic test signals: sines, chords, and noisy sines.

    Frequencies at or above the Nyquist rate are refused.  Noise comes from
    a generator seeded with ``seed``.
    """
    if duration <= 0 or sample_rate <= 0:
        raise DomainError("duration and sample_rate must be > 0")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    if isinstance(kind, Sine):
        _check_alias(kind.freq, sample_rate)
        x = np.sin(2 * np.pi * kind.freq * t)
    elif isinstance(kind, MultiTone):
        if not kind.tones:
            raise DomainError("MultiTone requires at least one tone")
        x = np.zeros(n)
        for f, amp in kind.tones:
            _check_alias(f, sample_rate)
            x += amp * np.sin(2 * np.pi * f * t)
        peak = np.abs(x).max()
        if peak > 0.95:
            x *= 0.95 / peak
    elif isinstance(kind, NoisySine):
        _check_alias(kind.freq, sample_rate)
        x = 0.7 * np.sin(2 * np.pi * kind.freq * t)
        sig_power = 0.5 * 0.7 ** 2
        noise_std = math.sqrt(sig_power / (10 ** (kind.snr_db / 10.0)))
        x = x + np.random.default_rng(seed).normal(0.0, noise_std, n)
        peak = np.abs(x).max()
        if peak > 0.98:
            x *= 0.98 / peak
    else:
        raise DomainError(f"unknown signal kind {kind!r}")
    return AudioClip(sample_rate=sample_rate, samples=x)


def _check_alias(freq, sample_rate):
    if freq >= sample_rate / 2:
        raise DomainError(
            f"frequency {freq} Hz aliases at sample rate {sample_rate} Hz")
