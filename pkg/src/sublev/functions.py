"""Test functions the generator acts on.

Two flavours: :class:`ClosedForm` (callable value/gradient/Hessian with
stated sup-norms, all verified by sampling) and :class:`Sampled` (a grid
function with finite-difference derivative access).  Closed-form callables
use the point convention ``(..., d) -> (...)`` so batched evaluation over
atoms and grid nodes stays vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .grids import GridFunction

NORM_SLACK = 1e-9


# Degree-7 smoothstep: s(0)=0, s(1)=1, zero 1st..3rd derivatives at both ends.
def smoothstep7(t):
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def smoothstep7_d1(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 140.0 * t**3 * (1.0 - t) ** 3, 0.0)


def smoothstep7_d2(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 420.0 * t**2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t), 0.0)


def plateau(r, inner: float, outer: float):
    """Radial profile equal to 1 for r <= inner, 0 for r >= outer, degree-7
    smoothstep in between."""
    return 1.0 - smoothstep7((np.asarray(r, dtype=float) - inner) / (outer - inner))


@dataclass(frozen=True)
class ClosedForm:
    """Smooth function with explicit derivatives and stated sup-norms.

    ``sup_gradient`` bounds the Euclidean norm of the gradient and
    ``sup_hessian`` the Frobenius norm of the Hessian; the three stated
    norms are upper bounds, checked by sampling in :func:`verified`.
    """

    value: Callable
    gradient: Callable
    hessian: Callable
    sup_value: float
    sup_gradient: float
    sup_hessian: float
    dim: int = 1

    @property
    def cb2_norm(self) -> float:
        return self.sup_value + self.sup_gradient + self.sup_hessian

    def __neg__(self) -> "ClosedForm":
        return ClosedForm(
            lambda p: -self.value(p),
            lambda p: -self.gradient(p),
            lambda p: -self.hessian(p),
            self.sup_value, self.sup_gradient, self.sup_hessian, self.dim,
        )

    def __add__(self, other: "ClosedForm") -> "ClosedForm":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return ClosedForm(
            lambda p: self.value(p) + other.value(p),
            lambda p: self.gradient(p) + other.gradient(p),
            lambda p: self.hessian(p) + other.hessian(p),
            self.sup_value + other.sup_value,
            self.sup_gradient + other.sup_gradient,
            self.sup_hessian + other.sup_hessian,
            self.dim,
        )

    def __rmul__(self, a: float) -> "ClosedForm":
        a = float(a)
        return ClosedForm(
            lambda p: a * self.value(p),
            lambda p: a * self.gradient(p),
            lambda p: a * self.hessian(p),
            abs(a) * self.sup_value,
            abs(a) * self.sup_gradient,
            abs(a) * self.sup_hessian,
            self.dim,
        )

    def __mul__(self, other) -> "ClosedForm":
        if not isinstance(other, ClosedForm):
            return NotImplemented
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        f, g = self, other

        def val(p):
            return f.value(p) * g.value(p)

        def grad(p):
            return (f.gradient(p) * g.value(p)[..., None]
                    + f.value(p)[..., None] * g.gradient(p))

        def hess(p):
            gf, gg = f.gradient(p), g.gradient(p)
            cross = gf[..., :, None] * gg[..., None, :]
            return (f.hessian(p) * g.value(p)[..., None, None]
                    + f.value(p)[..., None, None] * g.hessian(p)
                    + cross + np.swapaxes(cross, -1, -2))

        return ClosedForm(
            val, grad, hess,
            f.sup_value * g.sup_value,
            f.sup_gradient * g.sup_value + f.sup_value * g.sup_gradient,
            (f.sup_hessian * g.sup_value + f.sup_value * g.sup_hessian
             + 2.0 * f.sup_gradient * g.sup_gradient),
            f.dim,
        )

    def on_grid(self, lo: float, hi: float, n: int,
                extension: str = "constant") -> GridFunction:
        axis = np.linspace(lo, hi, n)
        if self.dim == 1:
            vals = self.value(axis[:, None])
        else:
            X, Y = np.meshgrid(axis, axis, indexing="ij")
            vals = self.value(np.stack([X, Y], axis=-1))
        return GridFunction(lo, hi, np.asarray(vals, dtype=float), extension)


def verified(cf: ClosedForm, box: tuple[float, float] = (-20.0, 20.0),
             n: int = 2001) -> ClosedForm:
    """Check the stated norms against sampled maxima; raises on understatement."""
    lo, hi = box
    axis = np.linspace(lo, hi, n if cf.dim == 1 else max(101, n // 16))
    if cf.dim == 1:
        pts = axis[:, None]
    else:
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([X, Y], axis=-1).reshape(-1, 2)
    v = np.max(np.abs(cf.value(pts)))
    g = np.max(np.linalg.norm(cf.gradient(pts), axis=-1))
    H = cf.hessian(pts)
    h = np.max(np.sqrt(np.sum(np.abs(H) ** 2, axis=(-2, -1))))
    for sampled, stated, label in ((v, cf.sup_value, "value"),
                                   (g, cf.sup_gradient, "gradient"),
                                   (h, cf.sup_hessian, "hessian")):
        if sampled > stated + NORM_SLACK:
            raise ValueError(
                f"stated sup-{label} {stated} understates sampled max {sampled}")
    return cf


def from_univariate(f, fp, fpp, sup_f: float, sup_fp: float, sup_fpp: float,
                    check: bool = True) -> ClosedForm:
    """Lift scalar callables f, f', f'' into the (..., 1) point convention."""
    cf = ClosedForm(
        lambda p: f(p[..., 0]),
        lambda p: fp(p[..., 0])[..., None],
        lambda p: fpp(p[..., 0])[..., None, None],
        sup_f, sup_fp, sup_fpp, 1,
    )
    return verified(cf) if check else cf


def constant_fn(level: float, dim: int = 1) -> ClosedForm:
    def grad(p):
        return np.zeros(p.shape)

    def hess(p):
        return np.zeros(p.shape[:-1] + (dim, dim))

    return ClosedForm(
        lambda p: np.full(p.shape[:-1], float(level)),
        grad, hess, abs(float(level)), 0.0, 0.0, dim,
    )


def gaussian_bump(center=0.0, width: float = 1.0, amplitude: float = 1.0,
                  dim: int = 1) -> ClosedForm:
    """a * exp(-|x-c|^2 / (2 w^2)); its max sits exactly at the center."""
    c = np.broadcast_to(np.atleast_1d(np.asarray(center, dtype=float)), (dim,)).copy()
    w = float(width)
    a = float(amplitude)

    def val(p):
        u = (p - c) / w
        return a * np.exp(-0.5 * np.sum(u * u, axis=-1))

    def grad(p):
        u = (p - c) / w
        return val(p)[..., None] * (-u / w)

    def hess(p):
        u = (p - c) / w
        eye = np.eye(dim)
        outer = u[..., :, None] * u[..., None, :]
        return val(p)[..., None, None] * (outer - eye) / w**2

    # Radial extrema: |f| at u=0, |grad| at |u|=1, Frobenius Hessian at u=0.
    return ClosedForm(val, grad, hess,
                      abs(a),
                      abs(a) / w * np.exp(-0.5),
                      abs(a) * np.sqrt(dim) / w**2,
                      dim)


def sin_window(freq: float = 1.0, inner: float = 3.0, outer: float = 6.0) -> ClosedForm:
    """sin(freq*x) under a smooth radial plateau window, d=1."""
    om = float(freq)
    width = outer - inner

    def W(x):
        return plateau(np.abs(x), inner, outer)

    def Wp(x):
        return -smoothstep7_d1((np.abs(x) - inner) / width) / width * np.sign(x)

    def Wpp(x):
        return -smoothstep7_d2((np.abs(x) - inner) / width) / width**2

    f = lambda x: np.sin(om * x) * W(x)
    fp = lambda x: om * np.cos(om * x) * W(x) + np.sin(om * x) * Wp(x)
    fpp = lambda x: (-om**2 * np.sin(om * x) * W(x)
                     + 2 * om * np.cos(om * x) * Wp(x)
                     + np.sin(om * x) * Wpp(x))
    mw1 = 2.1875 / width          # max |smoothstep7'| = 140/64
    mw2 = 7.52 / width**2         # max |smoothstep7''|, slight headroom
    return from_univariate(f, fp, fpp,
                           1.0, om + mw1, om**2 + 2 * om * mw1 + mw2)


def smoothed_ramp(scale: float = 1.0) -> ClosedForm:
    """Antiderivative of exp(-(x/s)^2): bounded, with f' peaking strictly at 0."""
    from scipy.special import erf

    s = float(scale)
    f = lambda x: 0.5 * np.sqrt(np.pi) * s * erf(x / s)
    fp = lambda x: np.exp(-((x / s) ** 2))
    fpp = lambda x: -2.0 * x / s**2 * np.exp(-((x / s) ** 2))
    return from_univariate(f, fp, fpp,
                           0.5 * np.sqrt(np.pi) * s, 1.0,
                           np.sqrt(2.0) * np.exp(-0.5) / s)


def plateau_bump(inner: float, outer: float | None = None, dim: int = 1) -> ClosedForm:
    """Radial plateau: 1 on B(0, inner), 0 off B(0, outer), smooth annulus."""
    outer = 2.0 * inner if outer is None else outer
    width = outer - inner

    def radial(p):
        return np.linalg.norm(p, axis=-1)

    def val(p):
        return plateau(radial(p), inner, outer)

    def grad(p):
        r = radial(p)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, p / np.maximum(r, 1e-300)[..., None], 0.0)
        dp = -smoothstep7_d1((r - inner) / width) / width
        return dp[..., None] * unit

    def hess(p):
        r = radial(p)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, p / np.maximum(r, 1e-300)[..., None], 0.0)
        dp = -smoothstep7_d1((r - inner) / width) / width
        dpp = -smoothstep7_d2((r - inner) / width) / width**2
        eye = np.eye(dim)
        outerm = unit[..., :, None] * unit[..., None, :]
        rad = np.where(r > 0, dp / np.maximum(r, 1e-300), 0.0)
        return dpp[..., None, None] * outerm + rad[..., None, None] * (eye - outerm)

    return ClosedForm(val, grad, hess,
                      1.0, 2.1875 / width + 1e-9,
                      (7.52 / width**2 + 2.1875 / (width * max(inner, 1e-9)))
                      * np.sqrt(dim) + 1e-6,
                      dim)


def piecewise_plateau_profile(x):
    """The ramp-and-plateau datum: equals -x on [-2,-1], lives in [0,1] on
    [-1,1], equals 1 on [1/2,2], and decays smoothly to 0 outside [-3.5,3].

    C^2 everywhere; every junction matches value, slope and (zero) curvature.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)

    m = (x >= -3.5) & (x < -2.0)            # quintic rise 0 -> 2, slope -1 at -2
    t = (x[m] + 3.5) / 1.5
    out[m] = t**3 * (26.0 - 40.5 * t + 16.5 * t**2)

    m = (x >= -2.0) & (x < -1.0)
    out[m] = -x[m]

    m = (x >= -1.0) & (x < 0.5)             # dip from 1 back to 1, stays in [0,1]
    t = (x[m] + 1.0) / 1.5
    out[m] = 1.0 - 1.5 * (t - 6.0 * t**3 + 8.0 * t**4 - 3.0 * t**5)

    m = (x >= 0.5) & (x <= 2.0)
    out[m] = 1.0

    m = (x > 2.0) & (x < 3.0)
    out[m] = 1.0 - smoothstep7(x[m] - 2.0)
    return out


@dataclass(frozen=True)
class Sampled:
    """Grid function with second-order finite-difference derivatives (d=1).

    Derivative stencils are central in the interior; at the box edges they
    are one-sided under the strict policy and use a constant ghost value
    otherwise.
    """

    grid: GridFunction

    def __post_init__(self):
        if self.grid.dim != 1:
            raise ValueError("Sampled test functions support d=1 only")
        v, h = self.grid.values, self.grid.h
        d1 = np.empty_like(v)
        d2 = np.empty_like(v)
        d1[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        d2[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
        if self.grid.extension == "strict":
            d1[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
            d1[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
            d2[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
            d2[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
        else:
            d1[0] = (v[1] - v[0]) / (2 * h)
            d1[-1] = (v[-1] - v[-2]) / (2 * h)
            d2[0] = (v[1] - v[0]) / h**2
            d2[-1] = (v[-2] - v[-1]) / h**2
        g = self.grid
        object.__setattr__(self, "_d1", GridFunction(g.lo, g.hi, d1, g.extension))
        object.__setattr__(self, "_d2", GridFunction(g.lo, g.hi, d2, g.extension))

    @property
    def dim(self) -> int:
        return 1

    def value(self, p):
        return self.grid(np.asarray(p)[..., 0])

    def gradient(self, p):
        return np.asarray(self._d1(np.asarray(p)[..., 0]))[..., None]

    def hessian(self, p):
        return np.asarray(self._d2(np.asarray(p)[..., 0]))[..., None, None]


TestFunction = Union[ClosedForm, Sampled]
