"""Acceptance criteria, one test per criterion, each timed against its budget.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.
"""

import contextlib
import io
import math
import time

import numpy as np

from ringrec import (DelayVector, ExperimentSpec, LinearRamp, Pattern,
                     RecognitionConfig, RingParams, characteristic_roots,
                     encode_pattern, find_bifurcations, find_sync_solutions,
                     integrate, pick_reference, probe_history, recognize,
                     run_experiment, sync_residual, trace_branch)
from ringrec.analysis import BifurcationKind
from ringrec.cli import main
from ringrec.engine import _integrate_arrays


@contextlib.contextmanager
def _criterion(number, label, budget_s):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - t0
        assert elapsed < budget_s, \
            f"runtime {elapsed:.2f}s over {budget_s}s budget"
        ok = True
    finally:
        if ok:
            print(f"[acceptance] criterion {number} ({label}): "
                  f"PASS ({elapsed:.2f}s)")
        else:
            print(f"[acceptance] criterion {number} ({label}): FAIL")


def test_criterion_1_solution_census():
    with _criterion(1, "solution census 13/7", 1.0):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main(["analyze", "--omega", "2", "--kappa", "1",
                         "--tau", "20"])
        assert code == 0
        rows = buf.getvalue().splitlines()[2:]
        assert len(rows) == 13
        assert sum(1 for r in rows if r.endswith(",1")) == 7
        params = RingParams(n=2, omega=2.0, kappa=1.0, tau=20.0)
        sols = find_sync_solutions(params)
        assert len(sols) == 13 and sols.n_stable == 7
        for s in sols:
            assert abs(sync_residual(params, s.omega_sync)) <= 1e-12


def test_criterion_2_count_bounds_suite():
    # Lemma-2 property; the guaranteed lower bound is the integer floor of
    # kappa*tau/pi - 1/2 (interval alignment can cost one period; see the
    # decisions ledger for a counterexample to the unrounded form)
    with _criterion(2, "stability count bounds", 10.0):
        rng = np.random.default_rng(20260810)
        raw_holds = 0
        for _ in range(50):
            kappa = float(rng.uniform(0.2, 3.0))
            kt = float(rng.uniform(math.pi / 2 * 1.02, 100.0))
            tau = kt / kappa
            omega = float(rng.uniform(0.0, 4.0))
            sols = find_sync_solutions(RingParams(n=2, omega=omega,
                                                  kappa=kappa, tau=tau))
            lower = kt / math.pi - 0.5
            upper = kt / math.pi + 1.5
            assert sols.n_stable >= math.floor(lower)
            assert sols.n_unstable >= math.floor(lower)
            assert sols.n_stable <= upper
            assert sols.n_unstable <= upper
            raw_holds += int(sols.n_stable >= lower and sols.n_unstable >= lower)
        print(f"  (unrounded lower bound held for {raw_holds}/50 draws)", end=" ")


def test_criterion_3_bifurcation_conditions():
    with _criterion(3, "bifurcation conditions and convergence", 5.0):
        bifs = find_bifurcations(2.0, 1.0, (0.0, 20.0))
        assert bifs
        for b in bifs:
            K = math.cos(b.omega_sync * b.tau)
            if b.kind is BifurcationKind.FOLD:
                assert abs(b.tau * K + 1.0) < 1e-10
            else:
                assert abs(K) < 1e-10
        pts = trace_branch(2.0, 1.0, (0.01, 60.0), 0.01)
        for p in pts[::5]:
            assert abs(p.tau * (2.0 - math.sin(p.s)) - p.s) \
                <= 1e-12 * max(1.0, p.s)
            assert abs(p.omega_sync - p.s / p.tau) <= 1e-12 * p.omega_sync
        # each fold and its adjacent transcritical approach each other
        ordered = sorted(bifs, key=lambda b: b.s)
        gaps = []
        for i, b in enumerate(ordered):
            if b.kind is BifurcationKind.FOLD:
                near = [abs(b.tau - o.tau) for j, o in enumerate(ordered)
                        if abs(i - j) == 1
                        and o.kind is BifurcationKind.TRANSCRITICAL]
                if near:
                    gaps.append(min(near))
        assert len(gaps) >= 6
        assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))


def test_criterion_4_spectral_bounds():
    with _criterion(4, "characteristic-root bounds", 10.0):
        params = RingParams(n=2, omega=2.0, kappa=1.0, tau=20.0)
        sols = find_sync_solutions(params)
        region = (-5.0, 5.0, -10.0, 10.0)
        worst = min(sols, key=lambda s: s.stiffness)
        roots = characteristic_roots(params, worst, region)
        bound = -2.0 * worst.stiffness
        positive = [r for r in roots if r.mu.real > 0]
        assert positive
        for r in positive:
            assert r.mu.real <= bound + 1e-9
        for s in sols.stable:
            for r in characteristic_roots(params, s, region):
                assert r.mu.real <= 1e-9 or abs(r.mu) <= 1e-12


def test_criterion_5_time_shift_equivalence():
    with _criterion(5, "time-shift equivalence oracle", 30.0):
        params = RingParams(n=50, omega=1.0, kappa=1.0, tau=3.0)
        W = pick_reference(find_sync_solutions(params), "nearest").omega_sync
        h = 0.01
        rng = np.random.default_rng(20260810)
        B, N = 10, 50
        # random firing times on the step lattice so the staggered release
        # of the homogeneous image lands exactly on nodes
        pats = rng.integers(0, 151, (B, N)).astype(float) * h
        deltas = rng.uniform(-1.0, 1.0, (B, N)) * 0.1
        delays = params.tau - (np.roll(pats, -1, axis=1) - pats)
        assert (delays > 0).all()
        pmax = float(pats.max())
        t_end = 90.0
        slopes = np.full((B, N), W)
        het = _integrate_arrays(params.omega, params.kappa, delays,
                                (slopes, pats + deltas), None,
                                t_end + pmax, h, record="full")
        release = np.round((pmax - pats) / h) * h
        hom = _integrate_arrays(params.omega, params.kappa,
                                np.full((B, N), params.tau),
                                (slopes, pmax + deltas), release,
                                t_end + pmax, h, record="full")
        lag = np.round((pmax - pats) / h).astype(int)
        i0 = int(round(pmax / h))
        n_t = het["Y"].shape[0]
        err = 0.0
        for b in range(B):
            for j in range(N):
                a = het["Y"][i0 - lag[b, j]:n_t - lag[b, j], b, j]
                c = hom["Y"][i0:, b, j]
                m = min(len(a), len(c))
                err = max(err, float(np.abs(a[:m] - c[:m]).max()))
        assert err < 1e-6, f"max phase difference {err:.3e}"


def test_criterion_6_roundtrip_encoding():
    with _criterion(6, "round-trip encoding and perturbation", 30.0):
        params = RingParams(n=50, omega=1.0, kappa=1.0, tau=3.0)
        values = np.ones(50)
        values[0] = 2.0
        enc = encode_pattern(params, Pattern(values))
        period = 2 * math.pi / enc.omega_ref.omega_sync
        traj = integrate(params, enc.delays,
                         probe_history(enc, enc.pattern),
                         5 * params.tau + 2 * period, 0.01)
        for j, c in enumerate(traj.crossings):
            assert len(c) >= 1
            k = np.round((np.asarray(c) - values[j]) / period)
            assert np.abs(c - (values[j] + k * period)).max() < 1e-6
        probe = values.copy()
        probe[0] += 0.05
        cfg = RecognitionConfig(t_horizon=900.0, threshold=0.999)
        res = recognize(enc, Pattern(probe), cfg)
        assert res.score >= 0.999
        assert res.accepted


def test_criterion_7_sine_discrimination(tmp_path):
    with _criterion(7, "sine discrimination with calibrated threshold", 120.0):
        probes = [4.5, 4.95, 5.05, 5.5, 10.0, 14.95, 15.05, 15.5]
        rep = run_experiment(ExperimentSpec("SineDiscrimination",
                                            {"probes": probes}, seed=0),
                             tmp_path)
        d = rep["decisions"]
        assert d["4.95"] == -1 and d["5.05"] == -1
        assert d["14.95"] == 1 and d["15.05"] == 1
        assert d["4.5"] == 0 and d["5.5"] == 0 and d["10.0"] == 0
        assert d["15.5"] == 0


def test_criterion_8_speech_surrogate(tmp_path):
    with _criterion(8, "synthetic two-class word accuracy", 300.0):
        rep = run_experiment(ExperimentSpec("SpeechSurrogate", {}, seed=0),
                             tmp_path)
        assert rep["trials"] == 80  # 10 tasks x 2 words x 4 held-out takes
        assert rep["accuracy"] >= 0.75, rep
        print(f"  (accuracy {rep['accuracy']:.3f}, "
              f"95% CI [{rep['ci95'][0]:.3f}, {rep['ci95'][1]:.3f}])", end=" ")


def test_criterion_9_integrator_order():
    with _criterion(9, "step-halving error ratio", 10.0):
        params = RingParams(n=4, omega=2.0, kappa=1.0, tau=1.0)
        ref = pick_reference(find_sync_solutions(params), "nearest")
        init = LinearRamp(ref.omega_sync, np.array([0.3, 0.0, -0.25, 0.1]))
        delays = DelayVector.homogeneous(4, 1.0)

        def phases(h):
            return integrate(params, delays, init, 20.0, h).phases

        y_ref = phases(0.05 / 8)
        e1 = np.abs(phases(0.05) - y_ref[::8][:401]).max()
        e2 = np.abs(phases(0.025) - y_ref[::4][:801]).max()
        ratio = e1 / e2
        assert 12.0 <= ratio <= 20.0, f"ratio {ratio:.2f}"


def test_criterion_10_experiment_determinism(tmp_path):
    with _criterion(10, "seeded experiments byte-identical", 120.0):
        overrides = {"n": 10, "t_end": 60.0, "eps": [0.0, 0.4, 1.1],
                     "sites": [1, 4, 10]}
        r1 = run_experiment(ExperimentSpec("PerturbationMap", overrides, 7),
                            tmp_path / "p1")
        r2 = run_experiment(ExperimentSpec("PerturbationMap", overrides, 7),
                            tmp_path / "p2")
        assert open(r1["csv"], "rb").read() == open(r2["csv"], "rb").read()
        s1 = run_experiment(ExperimentSpec("SpeechSurrogate", {"tasks": 1}, 3),
                            tmp_path / "s1")
        s2 = run_experiment(ExperimentSpec("SpeechSurrogate", {"tasks": 1}, 3),
                            tmp_path / "s2")
        assert open(s1["csv"], "rb").read() == open(s2["csv"], "rb").read()
