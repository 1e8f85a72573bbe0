"""Delay-coupled oscillator ring: analysis, pattern encoding, recognition."""

from .analysis import (Bifurcation, BifurcationKind, BranchPoint, CharRoot,
                       SolutionSet, characteristic_roots, count_bounds,
                       find_bifurcations, find_sync_solutions, trace_branch)
from .audio import (AudioClip, MultiTone, NoisySine, Sine, SpectralPattern,
                    fft_radix2, ifft_radix2, load_wav, power_spectrum,
                    save_wav, synthesize, to_pattern)
from .codec import (Encoding, Pattern, encode, encode_pattern, min_base_delay,
                    pick_reference, probe_history)
from .engine import (DelayVector, LinearRamp, SampledHistory, Trajectory,
                     crossing_times, default_step, integrate, order_parameter,
                     order_parameter_series)
from .estimators import RingPatternClassifier, SpectralPatternTransformer
from .exceptions import (AudioFormatError, DomainError, IntegrationError,
                         RingrecError)
from .experiments import EXPERIMENT_NAMES, ExperimentSpec, run_experiment
from .model import (RingParams, SyncSolution, sync_residual, wrap_phase)
from .recognition import (Decision, DecisionValue, RecognitionConfig,
                          RecognitionResult, calibrate, classify, recognize,
                          windowed_scores)

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "AudioFormatError", "Bifurcation", "BifurcationKind",
    "BranchPoint", "CharRoot", "Decision", "DecisionValue", "DelayVector",
    "DomainError", "EXPERIMENT_NAMES", "Encoding", "ExperimentSpec",
    "IntegrationError", "LinearRamp", "MultiTone", "NoisySine", "Pattern",
    "RecognitionConfig", "RecognitionResult", "RingParams",
    "RingPatternClassifier", "RingrecError", "SampledHistory", "Sine",
    "SolutionSet", "SpectralPattern", "SpectralPatternTransformer",
    "SyncSolution", "Trajectory", "calibrate", "characteristic_roots",
    "classify", "count_bounds", "crossing_times", "default_step", "encode",
    "encode_pattern", "fft_radix2", "find_bifurcations",
    "find_sync_solutions", "ifft_radix2", "integrate", "load_wav",
    "min_base_delay", "order_parameter", "order_parameter_series",
    "pick_reference", "power_spectrum", "probe_history", "recognize",
    "run_experiment", "save_wav", "sync_residual", "synthesize",
    "to_pattern", "trace_branch", "windowed_scores", "wrap_phase",
]
