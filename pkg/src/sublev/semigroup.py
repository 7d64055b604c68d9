"""Evolution of translation-invariant families on grids.

One linear factor is advanced spectrally: pad the box, subtract the common
edge constant, taper the outer 10% of the padded box, multiply the transform
by exp(-dt q(xi)) and restore the constant through its exact killing decay.
A sup-of-factors (Nisio) step takes the pointwise maximum over the control
family.  The data is expected to be (near) constant near the box edges;
a boundary-band monitor raises PaddingInsufficient when transported mass
reaches the pad.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import maximum_filter1d

from .errors import PaddingInsufficient
from .functions import ClosedForm, smoothstep7
from .generator import envelope_field
from .grids import GridFunction, SemigroupTrajectory
from .triplets import CharacteristicFamily, LevyTriplet, levy_khintchine_symbol

LEAK_TOL = 1e-6
TAPER_FRACTION = 0.10
BAND_FRACTION = 0.05


def worker_count() -> int:
    """Worker cap from SUBLEV_THREADS; defaults to serial execution."""
    raw = os.environ.get("SUBLEV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _taper(m: int) -> np.ndarray:
    L = max(2, int(round(TAPER_FRACTION * m)))
    w = np.ones(m)
    ramp = smoothstep7(np.arange(L) / L)
    w[:L] = ramp
    w[m - L:] = ramp[::-1]
    return w


class _SpectralStepper:
    """exp(dt*A) for one triplet on a fixed grid layout, multiplier cached."""

    def __init__(self, triplet: LevyTriplet, grid: GridFunction, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.triplet = triplet
        self.dt = float(dt)
        self.dim = grid.dim
        n, h = grid.n, grid.h
        pad = n // 2
        m = sfft.next_fast_len(n + 2 * pad)
        self.pad_left = pad
        self.pad_right = m - n - pad
        self.m = m
        xi = 2.0 * np.pi * np.fft.fftfreq(m, d=h)
        if self.dim == 1:
            q = levy_khintchine_symbol(triplet, xi)
            self.mult = np.exp(-self.dt * q)
            self.window = _taper(m)
        else:
            XI = np.stack(np.meshgrid(xi, xi, indexing="ij"), axis=-1)
            q = levy_khintchine_symbol(triplet, XI)
            self.mult = np.exp(-self.dt * q)
            w = _taper(m)
            self.window = w[:, None] * w[None, :]
        self.const_decay = float(np.exp(-self.dt * triplet.c))
        band = max(1, int(round(BAND_FRACTION * m)))
        self.band = band

    def _edge_constant(self, v: np.ndarray) -> float:
        if self.dim == 1:
            return 0.5 * (v[0] + v[-1])
        ring = np.concatenate([v[0, :], v[-1, :], v[1:-1, 0], v[1:-1, -1]])
        return float(np.mean(ring))

    def _band_max(self, g: np.ndarray) -> float:
        b = self.band
        if self.dim == 1:
            return float(max(np.max(np.abs(g[:b])), np.max(np.abs(g[-b:]))))
        edge = np.concatenate([
            np.abs(g[:b, :]).ravel(), np.abs(g[-b:, :]).ravel(),
            np.abs(g[:, :b]).ravel(), np.abs(g[:, -b:]).ravel(),
        ])
        return float(np.max(edge))

    def __call__(self, f: GridFunction) -> GridFunction:
        v = f.values
        K = self._edge_constant(v)
        widths = [(self.pad_left, self.pad_right)] * self.dim
        padded = np.pad(v, widths, mode="edge") - K
        interior_scale = float(np.max(np.abs(v - K)))
        g = padded * self.window
        if self.dim == 1:
            out = sfft.ifft(sfft.fft(g) * self.mult).real
        else:
            out = sfft.ifft2(sfft.fft2(g) * self.mult).real
        ref = max(interior_scale, 1e-300)
        if self._band_max(out) > LEAK_TOL * ref:
            raise PaddingInsufficient(
                "mass reached the padded boundary band; enlarge the box or "
                "window the data")
        sl = tuple(slice(self.pad_left, self.pad_left + f.n)
                   for _ in range(self.dim))
        return f.with_values(out[sl] + K * self.const_decay)


def linear_levy_step(triplet: LevyTriplet, f: GridFunction, dt: float) -> GridFunction:
    """One spectral step exp(dt*A) of a single constant-coefficient factor."""
    return _SpectralStepper(triplet, f, dt)(f)


def _family_steppers(family: CharacteristicFamily, f: GridFunction,
                     dt: float) -> list[_SpectralStepper]:
    if not family.translation_invariant:
        raise ValueError("grid evolution needs a translation-invariant family")
    probe = np.zeros(family.dim)
    return [_SpectralStepper(family.at(th, probe), f, dt)
            for th in family.index_set]


def _nisio_apply(steppers, f: GridFunction) -> tuple[GridFunction, np.ndarray]:
    workers = worker_count()
    if workers > 1 and len(steppers) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stepped = list(pool.map(lambda s: s(f), steppers))
    else:
        stepped = [s(f) for s in steppers]
    stacked = np.stack([g.values for g in stepped])
    argmax = np.argmax(stacked, axis=0)
    best = np.take_along_axis(stacked, argmax[None, ...], axis=0)[0]
    return f.with_values(best), argmax


def nisio_step(family: CharacteristicFamily, f: GridFunction,
               dt: float) -> tuple[GridFunction, np.ndarray]:
    """Pointwise maximum of the per-control linear steps; the returned field
    holds the index (into the family's index set) attaining it, first index
    winning ties."""
    return _nisio_apply(_family_steppers(family, f, dt), f)


def evolve(family: CharacteristicFamily, f: GridFunction, t: float,
           n_steps: int) -> SemigroupTrajectory:
    """Iterate the sup-of-linear-steps scheme to time t, recording every frame."""
    if t <= 0:
        raise ValueError("t must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    dt = t / n_steps
    steppers = _family_steppers(family, f, dt)
    frames = [f]
    argmax_fields = []
    cur = f
    for _ in range(n_steps):
        cur, am = _nisio_apply(steppers, cur)
        frames.append(cur)
        argmax_fields.append(am)
    times = dt * np.arange(n_steps + 1)
    return SemigroupTrajectory(times, frames, family.name, dt, argmax_fields)


def drift_uncertainty_exact(f: GridFunction, t: float) -> GridFunction:
    """x -> sup over |s| <= t of f(x+s), d=1.

    Sliding-window maximum over the grid with two sub-grid refinements: the
    exact window endpoints f(x +/- t) enter by interpolation, and interior
    discrete maxima are lifted to the vertex of the local quadratic fit.
    Queries beyond the box clamp to the edge values.
    """
    if f.dim != 1:
        raise ValueError("drift_uncertainty_exact is 1-d")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return f
    v, h = f.values, f.h
    nodes = f.nodes()

    vc = v.copy()
    a, b, c = v[:-2], v[1:-1], v[2:]
    den = c - 2.0 * b + a
    concave = den < 0.0
    inside = np.abs(a - c) <= 2.0 * np.abs(den)
    corr = np.zeros_like(b)
    np.divide((c - a) ** 2, 8.0 * (2.0 * b - a - c), out=corr,
              where=concave & inside)
    vc[1:-1] = b + np.where(concave & inside, corr, 0.0)

    w = int(np.floor(t / h + 1e-12))
    if w > 0:
        m = maximum_filter1d(vc, size=2 * w + 1, mode="nearest")
    else:
        m = v.copy()
    right = np.interp(np.clip(nodes + t, f.lo, f.hi), nodes, v)
    left = np.interp(np.clip(nodes - t, f.lo, f.hi), nodes, v)
    return f.with_values(np.maximum.reduce([m, v, right, left]))


def estimate_generator(semigroup, f: GridFunction, x, t_list):
    """Difference quotients (S_t f(x) - f(x))/t with Richardson extrapolation.

    ``semigroup`` is any closure (GridFunction, t) -> GridFunction;
    ``t_list`` must decrease geometrically.  Returns (slopes, limit).
    """
    ts = np.asarray(t_list, dtype=float)
    if ts.size < 2 or np.any(np.diff(ts) >= 0):
        raise ValueError("t_list must be decreasing with at least two entries")
    fx = f(x)
    slopes = np.array([(semigroup(f, t)(x) - fx) / t for t in ts])
    r = ts[0] / ts[1]
    level1 = (r * slopes[1:] - slopes[:-1]) / (r - 1.0)
    if level1.size >= 2:
        r2 = r * r
        level2 = (r2 * level1[1:] - level1[:-1]) / (r2 - 1.0)
        limit = float(level2[-1])
    else:
        limit = float(level1[-1])
    return slopes, limit


@dataclass
class DynkinReport:
    lower: float
    middle: float
    upper: float
    passed: bool
    strict: bool
    tol: float


def _sandwich_parts(family, f_grid, g_plus, g_minus, t, x, n_steps):
    traj_f = evolve(family, f_grid, t, n_steps)
    middle = float(traj_f.frames[-1](x) - f_grid(x))
    up = evolve(family, g_plus, t, n_steps).values_at(x)
    dn = evolve(family, g_minus, t, n_steps).values_at(x)
    dt = t / n_steps
    upper = float(np.trapz(up, dx=dt))
    lower = float(-np.trapz(dn, dx=dt))
    return lower, middle, upper


def dynkin_sandwich_check(family: CharacteristicFamily, f: ClosedForm, t: float,
                          x, lo: float, hi: float, n: int,
                          quadrature_n: int = 64) -> DynkinReport:
    """Bracket T_t f(x) - f(x) between -int_0^t T_s(env(-f))(x) ds and
    int_0^t T_s(env(f))(x) ds, with a Richardson-pair scheme tolerance.

    ``strict`` reports both gaps exceeding 10x the tolerance.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return DynkinReport(0.0, 0.0, 0.0, True, False, 0.0)
    grid = f.on_grid(lo, hi, n)
    g_plus, _ = envelope_field(family, f, grid)
    g_minus, _ = envelope_field(family, -f, grid)
    coarse = max(4, quadrature_n // 2)
    l1, m1, u1 = _sandwich_parts(family, grid, g_plus, g_minus, t, x, quadrature_n)
    l0, m0, u0 = _sandwich_parts(family, grid, g_plus, g_minus, t, x, coarse)
    scale = max(1.0, abs(m1), abs(u1), abs(l1))
    tol = 2.0 * max(abs(l1 - l0), abs(m1 - m0), abs(u1 - u0)) + 1e-8 * scale
    passed = (l1 - tol <= m1 <= u1 + tol)
    strict = (m1 - l1 > 10.0 * tol) and (u1 - m1 > 10.0 * tol)
    return DynkinReport(l1, m1, u1, passed, strict, tol)


@dataclass
class SlopeBoundsReport:
    rows: list
    passed: bool
    tol: float


def slope_bounds_check(family: CharacteristicFamily, f: ClosedForm, t_grid,
                       x, lo: float, hi: float, n: int,
                       dt: float = 1.0 / 64) -> SlopeBoundsReport:
    """Check -T_t(env(-f))(x) <= forward slope of T_t f(x) <= T_t(env(f))(x)
    along a grid of times, with scheme tolerance from a Richardson pair plus
    a finite-difference drift allowance."""
    ts = np.sort(np.asarray(t_grid, dtype=float))
    if ts.size == 0 or ts[0] < 0:
        raise ValueError("t_grid must be nonnegative")
    grid = f.on_grid(lo, hi, n)
    g_plus, _ = envelope_field(family, f, grid)
    g_minus, _ = envelope_field(family, -f, grid)
    t_end = float(ts[-1]) + 2.0 * dt
    n_steps = int(np.ceil(t_end / dt))
    t_end = n_steps * dt
    traj = evolve(family, grid, t_end, n_steps)
    traj2 = evolve(family, grid, t_end, 2 * n_steps)
    up = evolve(family, g_plus, t_end, n_steps).values_at(x)
    dn = evolve(family, g_minus, t_end, n_steps).values_at(x)
    series = traj.values_at(x)
    series2 = traj2.values_at(x)
    bound_rate = max(np.max(np.abs(np.diff(up))), np.max(np.abs(np.diff(dn)))) / dt

    rows = []
    tol_global = 0.0
    for t in ts:
        k = int(round(t / dt))
        slope = (series[k + 1] - series[k]) / dt
        slope_fine = (series2[2 * k + 1] - series2[2 * k]) / (dt / 2.0)
        tol = (2.0 * abs(slope - slope_fine) + dt * bound_rate
               + 1e-7 * (1.0 + abs(slope)))
        lo_b, hi_b = -dn[k], up[k]
        ok = (lo_b - tol <= slope <= hi_b + tol)
        rows.append({"t": float(k * dt), "slope": float(slope),
                     "lower": float(lo_b), "upper": float(hi_b),
                     "tol": float(tol), "ok": bool(ok)})
        tol_global = max(tol_global, tol)
    return SlopeBoundsReport(rows, all(r["ok"] for r in rows), tol_global)


@dataclass
class FavardReport:
    env_sup: float
    measured_sup: float
    rel_err: float
    ratios: list
    pairwise_ok: bool
    pairwise_slack: float
    passed: bool


def lipschitz_favard_check(family: CharacteristicFamily, f: ClosedForm, t_grid,
                           lo: float, hi: float, n: int, semigroup=None,
                           rtol: float = 0.05,
                           pair_tol: float | None = None) -> FavardReport:
    """Compare the grid sup of |env(f)| with the measured sup over t of
    ||T_t f - f||_inf / t, and check the pairwise time-Lipschitz bound.

    ``semigroup`` is a closure (GridFunction, t) -> GridFunction; by default
    the sup-of-spectral-steps evolution with 32 steps per call is used.
    """
    ts = np.sort(np.asarray(t_grid, dtype=float))
    if ts.size == 0 or ts[0] <= 0:
        raise ValueError("t_grid must be positive")
    grid = f.on_grid(lo, hi, n)
    env, _ = envelope_field(family, f, grid)
    env_sup = float(np.max(np.abs(env.values)))
    if semigroup is None:
        semigroup = lambda g, t: evolve(family, g, t, 32).frames[-1]
    frames = [semigroup(grid, t) for t in ts]
    ratios = [float(np.max(np.abs(fr.values - grid.values)) / t)
              for fr, t in zip(frames, ts)]
    measured = max(ratios)
    rel = abs(measured - env_sup) / max(env_sup, 1e-300)
    if pair_tol is None:
        pair_tol = 1e-6 * (1.0 + env_sup)
    slack = 0.0
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            gap = float(np.max(np.abs(frames[i].values - frames[j].values)))
            slack = max(slack, gap - env_sup * abs(ts[j] - ts[i]))
    pairwise_ok = slack <= pair_tol
    return FavardReport(env_sup, measured, rel, ratios, pairwise_ok,
                        slack, rel <= rtol and pairwise_ok)


def frame_lipschitz_constants(traj: SemigroupTrajectory) -> np.ndarray:
    """||F_{k+1} - F_k||_inf / dt along the trajectory; non-increasing for
    data in the Favard class."""
    vals = np.stack([f.values for f in traj.frames])
    return np.max(np.abs(np.diff(vals, axis=0)), axis=tuple(range(1, vals.ndim))) / traj.dt
