"""Estimator-style front end so the recognizer composes with sklearn tooling.

``SpectralPatternTransformer`` turns audio clips into firing-time pattern
rows; ``RingPatternClassifier`` stores one encoding per class at ``fit`` time
and predicts by running the recognition dynamics.  Both follow the
fit/transform/predict and ``get_params`` conventions, so they can sit inside
pipelines, grid searches and cross-validation like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .audio import AudioClip, power_spectrum, to_pattern
from .codec import Pattern, encode_pattern
from .exceptions import DomainError
from .model import RingParams
from .recognition import RecognitionConfig, _decide, order_param_series, _window_score, _resolve_window


class SpectralPatternTransformer(TransformerMixin, BaseEstimator):
    """Audio clips -> one firing-time pattern row per clip.

    Parameters mirror the ingestion chain: FFT size, cutoff frequency,
    number of ring sites, base delay and the amplitude fraction ``beta``.
    Stateless; ``fit`` only validates.
    """

    def __init__(self, n_sites=64, fft_size=4096, cutoff_hz=4000.0,
                 base_delay=3.0, beta=0.5):
        self.n_sites = n_sites
        self.fft_size = fft_size
        self.cutoff_hz = cutoff_hz
        self.base_delay = base_delay
        self.beta = beta

    def fit(self, X, y=None):
        self._validate_clips(X)
        return self

    def transform(self, X):
        clips = self._validate_clips(X)
        rows = []
        for clip in clips:
            spec = power_spectrum(clip, self.fft_size, self.cutoff_hz)
            rows.append(to_pattern(spec, self.n_sites, self.base_delay,
                                   self.beta).values)
        return np.asarray(rows)

    @staticmethod
    def _validate_clips(X):
        clips = []
        for item in X:
            if isinstance(item, AudioClip):
                clips.append(item)
            elif isinstance(item, tuple) and len(item) == 2:
                samples, rate = item
                clips.append(AudioClip(sample_rate=float(rate),
                                       samples=np.asarray(samples, dtype=float)))
            else:
                raise DomainError(
                    "X must contain AudioClip objects or (samples, rate) pairs")
        if not clips:
            raise DomainError("X must be nonempty")
        return clips


class RingPatternClassifier(ClassifierMixin, BaseEstimator):
    """Two-class recognizer over firing-time patterns.

    ``fit`` encodes the per-class mean pattern into one ring each;
    ``predict`` scores a probe against both rings and returns the class with
    the larger relaxation score.  ``predict_outcome`` additionally applies
    the acceptance threshold and reports -1/0/+1 (0 = rejected by both).
    """

    def __init__(self, omega=1.0, kappa=1.0, tau=3.0, t_horizon=50.0,
                 threshold=0.9, window=None, step=None, reference="nearest"):
        self.omega = omega
        self.kappa = kappa
        self.tau = tau
        self.t_horizon = t_horizon
        self.threshold = threshold
        self.window = window
        self.step = step
        self.reference = reference

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        classes = np.unique(y)
        if classes.size != 2:
            raise DomainError(
                f"exactly two classes are supported, got {classes.size}")
        params = RingParams(n=X.shape[1], omega=self.omega, kappa=self.kappa,
                            tau=self.tau)
        self.classes_ = classes
        self.encodings_ = tuple(
            encode_pattern(params, Pattern(X[y == c].mean(axis=0)),
                           self.reference)
            for c in classes)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "encodings_"):
            raise NotFittedError("fit must be called before predicting")

    def score_samples(self, X):
        """Relaxation scores, shape (n_samples, 2), one column per class."""
        self._check_fitted()
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        cfg = RecognitionConfig(t_horizon=self.t_horizon,
                                threshold=self.threshold, window=self.window)
        out = np.empty((X.shape[0], 2))
        for k, enc in enumerate(self.encodings_):
            deltas = X - enc.pattern.values
            times, r = order_param_series(enc, deltas, cfg.t_horizon, self.step)
            w = _resolve_window(cfg, enc)
            for i in range(X.shape[0]):
                out[i, k] = _window_score(times, r[:, i], cfg.t_horizon, w)
        return out

    def decision_function(self, X):
        s = self.score_samples(X)
        return s[:, 1] - s[:, 0]

    def predict(self, X):
        s = self.score_samples(X)
        return self.classes_[(s[:, 1] > s[:, 0]).astype(int)]

    def predict_outcome(self, X):
        """Thresholded decisions: -1 first class, +1 second, 0 neither."""
        s = self.score_samples(X)
        return np.array([_decide(r1, r2, self.threshold).value
                         for r1, r2 in s])
