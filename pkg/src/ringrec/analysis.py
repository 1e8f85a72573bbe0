"""Synchronous-solution analysis for the delayed ring.

Three related jobs live here:

* :func:`find_sync_solutions` locates every root of
  ``f(W) = W - omega + kappa*sin(W*tau)`` in ``[omega-kappa, omega+kappa]``
  by dense bracketing plus bisection/Newton refinement, and classifies each
  root through the sign of the stiffness ``K = kappa*cos(W*tau)``.
* :func:`trace_branch` / :func:`find_bifurcations` follow the parametric
  solution family ``tau(s) = s/(omega - kappa*sin(s))``, ``W(s) = s/tau(s)``
  and pick out the stability-exchange points: transcritical at ``K = 0`` and
  folds at ``tau*K = -1``.
* :func:`characteristic_roots` solves the factorized characteristic equation
  ``mu + K - K*exp(-mu*tau)*e_n = 0`` (``e_n`` the n-th root of unity) by
  vectorized Newton iteration from a grid of seeds.

Everything is a pure function of immutable inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DomainError
from .model import (RESIDUAL_TOL, RingParams, SyncSolution, sync_residual,
                    sync_residual_slope)

#: Characteristic roots closer than this are treated as one root.
ROOT_DEDUP_TOL = 1e-7

#: Residual bound for accepted characteristic roots.
CHAR_RESIDUAL_TOL = 1e-9

#: Refined bifurcations must satisfy their defining condition below this.
BIF_CONDITION_TOL = 1e-10

#: Pole guard for the branch parametrization denominator.
POLE_TOL = 1e-9

_MAX_NEWTON_SEEDS = 8_000_000


@dataclass(frozen=True)
class SolutionSet:
    """All synchronous solutions of one parameter set, ordered by frequency."""

    params: RingParams
    solutions: tuple
    n_stable: int
    n_unstable: int

    def __post_init__(self):
        sols = self.solutions
        assert self.n_stable + self.n_unstable == len(sols)
        degenerate = any(s.degenerate for s in sols)
        for a, b in zip(sols, sols[1:]):
            assert b.omega_sync >= a.omega_sync
            if not (a.degenerate and b.degenerate):
                assert b.omega_sync - a.omega_sync > RESIDUAL_TOL, \
                    "solutions must be separated by more than the refinement tolerance"
        p = self.params
        if 2 * p.kappa * p.tau > math.pi and not degenerate:
            # worst-case interval alignment can cost one full period, so the
            # guaranteed integer bound is the floor of kappa*tau/pi - 1/2
            lower = math.floor(p.kappa * p.tau / math.pi - 0.5)
            upper = p.kappa * p.tau / math.pi + 1.5
            assert lower <= self.n_stable <= upper, \
                f"stable count {self.n_stable} outside [{lower}, {upper}]"
            assert lower <= self.n_unstable <= upper, \
                f"unstable count {self.n_unstable} outside [{lower}, {upper}]"

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    @property
    def stable(self):
        return tuple(s for s in self.solutions if s.stable)

    @property
    def unstable(self):
        return tuple(s for s in self.solutions if not s.stable)


class BifurcationKind(Enum):
    TRANSCRITICAL = "transcritical"
    FOLD = "fold"


@dataclass(frozen=True)
class BranchPoint:
    """One sample of the parametric solution branch."""

    s: float
    tau: float
    omega_sync: float
    stiffness: float
    stable: bool


@dataclass(frozen=True)
class Bifurcation:
    """A stability-exchange point on the branch.

    ``degenerate`` is set on folds when ``omega`` sits on the excluded
    resonance ``omega = pi*l*kappa`` (odd ``l``) where the fold analysis
    does not apply.
    """

    kind: BifurcationKind
    tau: float
    omega_sync: float
    s: float
    degenerate: bool = False


@dataclass(frozen=True)
class CharRoot:
    """A characteristic exponent on root-of-unity branch ``branch_index``."""

    branch_index: int
    mu: complex
    residual: float

    def __post_init__(self):
        assert self.residual < CHAR_RESIDUAL_TOL


def _bisect(f, a, b, fa, fb, iters=90):
    """Plain bisection on a bracketing interval; returns the midpoint."""
    for _ in range(iters):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        fm = f(m)
        if fm == 0.0:
            return m
        if (fa < 0) == (fm < 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def _refine_root(params: RingParams, a, b, fa, fb):
    """Bisection then a Newton polish of one bracketed root of the residual."""
    f = lambda w: sync_residual(params, w)
    w = _bisect(f, a, b, fa, fb)
    for _ in range(6):
        fw = f(w)
        if abs(fw) <= 0.25 * RESIDUAL_TOL:
            break
        fp = sync_residual_slope(params, w)
        if fp == 0.0:
            break
        step = fw / fp
        if abs(step) > (b - a):
            break
        w -= step
    return w


def _make_solution(params: RingParams, w, degenerate=False):
    w = float(w)
    stiff = params.kappa * math.cos(w * params.tau)
    return SyncSolution(
        omega_sync=w,
        stiffness=stiff,
        stable=stiff > 0,
        residual=abs(sync_residual(params, w)),
        degenerate=degenerate,
    )


def scan_step(params: RingParams) -> float:
    """Bracketing grid step used by the root scan.

    One root can sit in every half period ``pi/tau`` of the sine term; the
    step oversamples that spacing eight-fold (and additionally caps at
    ``kappa/64``) so near-tangent pairs are still separated or flagged.
    """
    if params.tau == 0.0:
        return params.kappa / 64.0
    return min(math.pi / (8.0 * params.tau * max(1.0, params.kappa * params.tau)),
               params.kappa / 64.0)


def find_sync_solutions(params: RingParams) -> SolutionSet:
    """Locate every synchronous frequency in ``[omega-kappa, omega+kappa]``.

    Sign changes of the residual on the scan grid are refined by bisection
    plus Newton to an absolute residual of at most ``1e-12``.  Grid points
    where both ``|f|`` and ``|f'|`` are small (a near-tangent pair that never
    produces a sign change) are inspected separately: a genuine double root
    is reported as two merged solutions flagged ``degenerate``.
    """
    if params.tau < 0:
        raise DomainError("tau must be >= 0")
    if params.tau == 0.0:
        # f collapses to W - omega: the free-running frequency, always stable.
        return SolutionSet(params, (_make_solution(params, params.omega),), 1, 0)

    lo, hi = params.omega - params.kappa, params.omega + params.kappa
    step = scan_step(params)
    n = int(math.ceil((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n)
    fv = sync_residual(params, grid)

    roots = []
    bracketed = np.zeros(n, dtype=bool)
    sign = np.sign(fv)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        roots.append(_refine_root(params, grid[i], grid[i + 1], fv[i], fv[i + 1]))
        bracketed[i] = bracketed[i + 1] = True
    for i in np.nonzero(fv == 0.0)[0]:
        roots.append(float(grid[i]))
        bracketed[i] = True

    solutions = [_make_solution(params, w) for w in sorted(roots)]

    # Near-tangency sweep: grid points that sit close to an extremum of f
    # with tiny |f| but no adjacent sign change.
    ktau2 = params.kappa * params.tau ** 2
    f_tol = 0.5 * ktau2 * step ** 2 + 1e3 * RESIDUAL_TOL
    fp_tol = 2.0 * ktau2 * step
    fpv = sync_residual_slope(params, grid)
    suspects = np.nonzero((np.abs(fv) <= f_tol) & (np.abs(fpv) <= fp_tol)
                          & ~bracketed)[0]
    seen_extrema = []
    for i in suspects:
        w = _locate_extremum(params, grid[i], step)
        if w is None or not (lo <= w <= hi):
            continue
        if any(abs(w - e) <= step for e in seen_extrema):
            continue
        seen_extrema.append(w)
        fw = sync_residual(params, w)
        if abs(fw) <= max(1e-10, 1e3 * RESIDUAL_TOL):
            solutions.extend([_make_solution(params, w, degenerate=True)] * 2)
        else:
            # extremum overshoots zero: two genuine roots missed by the grid
            for a, b in ((w - step, w), (w, w + step)):
                fa, fb = sync_residual(params, a), sync_residual(params, b)
                if np.sign(fa) * np.sign(fb) < 0:
                    solutions.append(
                        _make_solution(params, _refine_root(params, a, b, fa, fb)))

    solutions.sort(key=lambda s: s.omega_sync)
    solutions = _dedup_solutions(solutions)
    n_stable = sum(1 for s in solutions if s.stable)
    return SolutionSet(params, tuple(solutions), n_stable, len(solutions) - n_stable)


def _locate_extremum(params: RingParams, w0, step):
    """Newton on f' from w0; returns the extremum location or None."""
    w = float(w0)
    for _ in range(60):
        fp = sync_residual_slope(params, w)
        fpp = -params.kappa * params.tau ** 2 * math.sin(w * params.tau)
        if fpp == 0.0:
            return None
        d = fp / fpp
        w -= d
        if abs(d) < 1e-14:
            return w
        if abs(w - w0) > 4 * step:
            return None
    return None


def _dedup_solutions(solutions):
    out = []
    for s in solutions:
        if out and not (s.degenerate and out[-1].degenerate) \
                and s.omega_sync - out[-1].omega_sync <= 10 * RESIDUAL_TOL:
            continue
        out.append(s)
    return out


def count_bounds(params: RingParams):
    """Lower bound ``kappa*tau/pi - 1/2`` on both stability counts.

    Returns ``(lower, check)``.  ``check`` compares the counts against
    ``floor(lower)``: an adversarial alignment of the stability intervals
    with ``[omega - kappa, omega + kappa]`` can cost one full period, so the
    integer floor is what a count is guaranteed to reach (and does, for every
    parameter set; the unrounded value is exceeded only up to alignment).
    Requires ``2*kappa*tau > pi``.
    """
    if 2 * params.kappa * params.tau <= math.pi:
        raise DomainError("count_bounds requires 2*kappa*tau > pi")
    lower = params.kappa * params.tau / math.pi - 0.5
    sols = find_sync_solutions(params)
    check = sols.n_stable >= math.floor(lower) and sols.n_unstable >= math.floor(lower)
    return lower, check


def trace_branch(omega: float, kappa: float, s_range, ds: float):
    """Sample the parametric branch ``tau(s) = s/(omega - kappa*sin(s))``.

    Points with ``tau(s) <= 0`` or with the denominator within ``1e-9`` of a
    pole are dropped, which splits the returned list into disjoint segments
    (detectable through gaps in ``s``).  Each retained point carries the
    stiffness and stability of the solution it represents.
    """
    if ds <= 0:
        raise DomainError("ds must be > 0")
    s_lo, s_hi = float(s_range[0]), float(s_range[1])
    if not s_hi > s_lo:
        raise DomainError("empty s range")
    s = np.arange(s_lo, s_hi + 0.5 * ds, ds)
    den = omega - kappa * np.sin(s)
    keep = np.abs(den) >= POLE_TOL
    s, den = s[keep], den[keep]
    tau = s / den
    keep = tau > 0
    s, tau = s[keep], tau[keep]
    omega_sync = s / tau
    stiff = kappa * np.cos(omega_sync * tau)
    return [BranchPoint(float(si), float(ti), float(wi), float(ki), bool(ki > 0))
            for si, ti, wi, ki in zip(s, tau, omega_sync, stiff)]


def find_bifurcations(omega: float, kappa: float, tau_range, ds: float = 1e-3):
    """Transcritical and fold points of the branch with ``tau`` in range.

    Candidates come from sign changes along the branch parameter ``s``:
    of ``K(s) = kappa*cos(s)`` for transcritical points and of
    ``G(s) = s*kappa*cos(s) + omega - kappa*sin(s)`` (the numerator of
    ``tau*K + 1``) for folds.  Each is refined by bisection until the
    defining condition is below ``1e-10``.  Folds at the excluded resonance
    ``omega = pi*l*kappa`` (odd ``l``) are flagged degenerate, not resolved.
    """
    if kappa == 0:
        raise DomainError("kappa must be nonzero")
    tau_lo, tau_hi = float(tau_range[0]), float(tau_range[1])
    if not tau_hi > tau_lo:
        raise DomainError("empty tau range")
    if tau_hi <= 0:
        return []
    s_max = tau_hi * (abs(omega) + abs(kappa)) + 1.0

    out = []

    def consider(s_star, kind):
        den = omega - kappa * math.sin(s_star)
        if abs(den) < POLE_TOL:
            return
        tau = s_star / den
        if not (tau > 0 and tau_lo <= tau <= tau_hi):
            return
        w = s_star / tau
        k_val = kappa * math.cos(w * tau)
        if kind is BifurcationKind.TRANSCRITICAL:
            ok = abs(k_val) < BIF_CONDITION_TOL
            degenerate = False
        else:
            ok = abs(tau * k_val + 1.0) < BIF_CONDITION_TOL
            degenerate = _fold_resonance(omega, kappa)
        if ok:
            out.append(Bifurcation(kind, tau, w, s_star, degenerate))

    # transcritical: zeros of cos(s) on s > 0
    m = 0
    while True:
        s_star = math.pi * (m + 0.5)
        if s_star > s_max:
            break
        consider(s_star, BifurcationKind.TRANSCRITICAL)
        m += 1

    # folds: zeros of G(s); G is continuous across poles of tau(s)
    s = np.arange(ds, s_max, ds)
    G = s * kappa * np.cos(s) + omega - kappa * np.sin(s)
    sign = np.sign(G)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        g = lambda x: x * kappa * math.cos(x) + omega - kappa * math.sin(x)
        s_star = _bisect(g, float(s[i]), float(s[i + 1]), float(G[i]), float(G[i + 1]))
        consider(s_star, BifurcationKind.FOLD)

    out.sort(key=lambda b: (b.tau, b.s))
    return out


def _fold_resonance(omega, kappa):
    l = round(omega / (math.pi * kappa))
    return l % 2 == 1 and abs(omega - math.pi * l * kappa) <= 1e-8 * max(1.0, abs(omega))


def characteristic_roots(params: RingParams, sol: SyncSolution, region,
                         pitch: float = None, newton_iters: int = None):
    """Characteristic exponents of a synchronous solution inside a rectangle.

    ``region`` is ``(re_min, re_max, im_min, im_max)``.  For every branch
    index ``n`` the equation ``mu + K - K*exp(-mu*tau)*e_n = 0`` is solved by
    Newton iteration started from a uniform grid of seeds (pitch at most
    ``min(pi/(2*tau), |K|)/4``); converged values are deduplicated at
    ``1e-7`` and kept when their residual is below ``1e-9``.  The trivial
    root ``mu = 0`` is always reported on branch 0.  Seeds whose iteration
    does not settle are surfaced through a single ``RuntimeWarning`` naming
    the unresolved subcells.

    The default iteration budget grows with ``tau * region width``: far to
    the left of the root band the Newton step degenerates to ``+1/tau`` per
    iteration, so deep seeds need about ``tau * distance`` steps to drift in.
    """
    re_min, re_max, im_min, im_max = (float(v) for v in region)
    if not (re_max > re_min and im_max > im_min):
        raise DomainError("region must be a nonempty rectangle")
    if not math.isfinite(re_min + re_max + im_min + im_max):
        raise DomainError("region must be bounded")
    if sol.residual > RESIDUAL_TOL and not sol.degenerate:
        raise DomainError("solution residual above tolerance")

    K, tau, N = sol.stiffness, params.tau, params.n
    roots = []

    if tau == 0.0 or K == 0.0:
        # closed forms: tau=0 gives mu = K*(e_n - 1); K=0 gives mu = 0 only
        for n in range(N):
            e_n = np.exp(2j * np.pi * n / N)
            mu = complex(K * (e_n - 1.0)) if tau == 0.0 else 0.0 + 0.0j
            if _in_region(mu, re_min, re_max, im_min, im_max):
                res = abs(mu + K - K * np.exp(-mu * tau) * e_n)
                roots.append(CharRoot(n, mu, float(res)))
        return _finalize_roots(roots, K)

    if pitch is None:
        pitch = min(math.pi / (2.0 * tau), abs(K)) / 4.0
    if pitch <= 0:
        raise DomainError("pitch must be > 0")
    n_re = int(math.ceil((re_max - re_min) / pitch)) + 1
    n_im = int(math.ceil((im_max - im_min) / pitch)) + 1
    if n_re * n_im > _MAX_NEWTON_SEEDS:
        raise DomainError(
            f"seed grid of {n_re * n_im} points exceeds the {_MAX_NEWTON_SEEDS} cap; "
            "shrink the region or pass a coarser pitch")
    re = np.linspace(re_min, re_max, n_re)
    im = np.linspace(im_min, im_max, n_im)
    if newton_iters is None:
        newton_iters = 120
    g_tol = 1e-12 * max(1.0, abs(K))
    # Far left of the root band |tau*K*exp(-mu*tau)| ~ O(1) the Newton step
    # degenerates to +1/tau per iteration.  Every root satisfies
    # tau*|mu + K| <= tau*(|K| + |region|), so iterates may be confined to the
    # right of the line where the exponential term is e^3 times that bound
    # without losing any root; seeds and strays get clamped onto it.
    bound = tau * (abs(K) + math.hypot(max(abs(re_min), abs(re_max)) + abs(K),
                                       max(abs(im_min), abs(im_max))))
    re_clamp = (math.log(tau * abs(K)) - math.log(bound) - 3.0) / tau

    unresolved = []
    for n in range(N):
        e_n = np.exp(2j * np.pi * n / N)
        # for a real unity factor the spectrum is conjugation-symmetric:
        # iterate the upper half only and reflect
        symmetric = abs(e_n.imag) < 1e-15 and im_min < 0 <= im_max
        im_n = im[im >= -1e-12] if symmetric else im
        seeds = (re[:, None] + 1j * im_n[None, :]).ravel()
        mu = seeds.copy()
        np.copyto(mu, re_clamp + 1j * mu.imag, where=mu.real < re_clamp)
        # Seeds far to the right of the root band lose their imaginary part
        # in one step (the exponential term vanishes there) and can then
        # cycle forever between the clamp line, the root band and the far
        # right without ever converging: the real axis carries no root when
        # the unity factor flips the sign of K.  Entering from the clamp
        # line at fixed imaginary part converges instead, so deep-right
        # seeds start there too, and stragglers are restarted there (pushed
        # half a cell off the invariant, possibly rootless, real axis).
        re_collapse = (math.log(tau * abs(K)) + 3.0) / tau
        if re_collapse > re_clamp:
            np.copyto(mu, re_clamp + 1j * mu.imag, where=mu.real > re_collapse)
        converged = np.zeros(mu.shape, dtype=bool)
        off_axis = 0.5 * pitch
        for attempt in range(2):
            active = ~converged
            with np.errstate(over="ignore", invalid="ignore"):
                for _ in range(newton_iters):
                    idx = np.flatnonzero(active)
                    if idx.size == 0:
                        break
                    m = mu[idx]
                    E = K * np.exp(-m * tau) * e_n
                    g = m + K - E
                    m_new = m - g / (1.0 + tau * E)
                    bad = ~np.isfinite(m_new)
                    m_new = np.where(m_new.real < re_clamp,
                                     re_clamp + 1j * m_new.imag, m_new)
                    done = ~bad & ((np.abs(m_new - m) < 1e-13)
                                   | (np.abs(g) < g_tol))
                    mu[idx] = np.where(bad, m, m_new)
                    converged[idx[done]] = True
                    active[idx[bad | done]] = False
            if converged.all() or attempt == 1:
                break
            retry = np.flatnonzero(~converged)
            im_r = seeds[retry].imag
            im_r = np.where(np.abs(im_r) < off_axis,
                            np.copysign(off_axis, im_r + off_axis / 2), im_r)
            mu[retry] = re_clamp + 1j * im_r
        failed = ~converged
        extra_roots = np.empty(0, dtype=complex)
        if failed.any():
            # a cell certainly holds no root when |mu + K| and |K e^{-mu tau}|
            # cannot meet anywhere inside it; that certifies the rootless
            # far-right cells whose seeds cycle instead of converging
            cells = seeds[failed]
            half_diag = pitch * math.sqrt(0.5)
            dist = np.abs(cells + K)
            expo_max = abs(K) * np.exp(-(cells.real - half_diag) * tau)
            expo_min = abs(K) * np.exp(-(cells.real + half_diag) * tau)
            empty = ((dist - half_diag > expo_max)
                     | (dist + half_diag < expo_min))
            failed_idx = np.flatnonzero(failed)
            still = failed_idx[~empty]
            if still.size:
                # last resort: four corner seeds per undecided cell
                corners = (seeds[still][:, None]
                           + 0.5 * pitch * np.array([1 + 1j, 1 - 1j,
                                                     -1 + 1j, -1 - 1j]))
                got, ok_cells = _newton_corner_pass(
                    corners, K, tau, e_n, re_clamp, g_tol, newton_iters)
                extra_roots = got
                still = still[~ok_cells]
            if still.size:
                unresolved.append((n, seeds[still][:3], int(still.size)))
        m = mu[converged]
        if extra_roots.size:
            m = np.concatenate([m, extra_roots])
        if symmetric:
            m = np.concatenate([m, np.conj(m)])
        res = np.abs(m + K - K * np.exp(-m * tau) * e_n)
        m = m[res < CHAR_RESIDUAL_TOL]
        m = m[(m.real >= re_min - 1e-9) & (m.real <= re_max + 1e-9)
              & (m.imag >= im_min - 1e-9) & (m.imag <= im_max + 1e-9)]
        for mu_k in _dedup_complex(m):
            roots.append(CharRoot(n, complex(mu_k),
                                  float(abs(mu_k + K - K * np.exp(-mu_k * tau) * e_n))))
        if n == 0 and _in_region(0j, re_min, re_max, im_min, im_max):
            roots = [r for r in roots if not (r.branch_index == 0 and abs(r.mu) <= ROOT_DEDUP_TOL)]
            roots.append(CharRoot(0, 0j, 0.0))

    if unresolved:
        total = sum(c for _, _, c in unresolved)
        examples = "; ".join(f"branch {n}: near {list(np.round(s, 3))}"
                             for n, s, _ in unresolved[:3])
        warnings.warn(
            f"characteristic_roots: {total} seed subcells unresolved ({examples})",
            RuntimeWarning, stacklevel=2)
    return _finalize_roots(roots, K)


def _newton_corner_pass(corners, K, tau, e_n, re_clamp, g_tol, iters):
    """Plain Newton on a small (cells, 4) block of corner seeds.

    Returns the converged values and, per cell, whether any corner settled.
    """
    mu = corners.astype(complex)
    done = np.zeros(mu.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iters):
            if done.all():
                break
            E = K * np.exp(-mu * tau) * e_n
            g = mu + K - E
            m_new = mu - g / (1.0 + tau * E)
            bad = ~np.isfinite(m_new)
            m_new = np.where(m_new.real < re_clamp,
                             re_clamp + 1j * m_new.imag, m_new)
            step_done = ~bad & ((np.abs(m_new - mu) < 1e-13)
                                | (np.abs(g) < g_tol))
            mu = np.where(bad | done, mu, m_new)
            done |= step_done
    return mu[done], done.any(axis=1)


def _in_region(mu, re_min, re_max, im_min, im_max):
    return (re_min - 1e-9 <= mu.real <= re_max + 1e-9
            and im_min - 1e-9 <= mu.imag <= im_max + 1e-9)


def _dedup_complex(values):
    if len(values) == 0:
        return []
    # converged iterates agree to ~1e-13, so a coarse lattice collapse leaves
    # only a handful of representatives for the exact pass
    lattice = np.round(values / (0.25 * ROOT_DEDUP_TOL))
    _, first = np.unique(lattice, return_index=True)
    vals = values[np.sort(first)]
    vals = vals[np.lexsort((vals.imag, vals.real))]
    out = []
    for z in vals:
        if all(abs(z - w) > ROOT_DEDUP_TOL for w in out):
            out.append(z)
    return out


def _finalize_roots(roots, K):
    if K < 0:
        for r in roots:
            assert not (r.mu.real > 0) or r.mu.real <= -2.0 * K + 1e-9, \
                "positive characteristic exponent beyond the -2K bound"
    roots.sort(key=lambda r: (r.branch_index, r.mu.imag, r.mu.real))
    return roots
