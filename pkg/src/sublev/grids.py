"""Uniformly sampled functions on symmetric boxes.

A :class:`GridFunction` carries values on a uniform node-centered grid over
``[lo, hi]^d`` (d = 1 or 2, same bounds and node count per axis), together
with an extension policy describing how to evaluate it outside the box:
``constant`` clamps the query point to the box, ``strict`` raises.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SampledOutOfDomain

EXTENSIONS = ("constant", "strict")

MIN_NODES = 8


@dataclass(frozen=True)
class GridFunction:
    lo: float
    hi: float
    values: np.ndarray
    extension: str = "constant"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim not in (1, 2):
            raise ValueError("values must be 1-d or 2-d")
        if vals.ndim == 2 and vals.shape[0] != vals.shape[1]:
            raise ValueError("2-d grids must be square (same n per axis)")
        if vals.shape[0] < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes per axis")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        if not self.hi > self.lo:
            raise ValueError("box must satisfy hi > lo")
        if self.extension not in EXTENSIONS:
            raise ValueError(f"unknown extension policy {self.extension!r}")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return np.linspace(self.lo, self.hi, self.n)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.lo, self.hi, values, self.extension)

    def same_layout(self, other: "GridFunction") -> bool:
        return (
            self.dim == other.dim
            and self.n == other.n
            and self.lo == other.lo
            and self.hi == other.hi
        )

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _clamp(self, x: np.ndarray) -> np.ndarray:
        if self.extension == "strict":
            if np.any(x < self.lo - 1e-12) or np.any(x > self.hi + 1e-12):
                raise SampledOutOfDomain(
                    f"point outside [{self.lo}, {self.hi}] under strict policy"
                )
        return np.clip(x, self.lo, self.hi)

    def __call__(self, x) -> np.ndarray | float:
        """Multilinear interpolation at one point or an array of points.

        1-d grids accept scalars or arrays of coordinates; 2-d grids accept a
        point of shape (2,) or a batch of shape (..., 2).
        """
        if self.dim == 1:
            pts = self._clamp(np.asarray(x, dtype=float))
            out = np.interp(pts, self.nodes(), self.values)
            return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[-1] != 2:
            raise ValueError("2-d grid expects points of shape (..., 2)")
        pts = self._clamp(pts)
        u = (pts - self.lo) / self.h
        i0 = np.clip(np.floor(u).astype(int), 0, self.n - 2)
        frac = u - i0
        fx, fy = frac[..., 0], frac[..., 1]
        ix, iy = i0[..., 0], i0[..., 1]
        v = self.values
        out = (
            v[ix, iy] * (1 - fx) * (1 - fy)
            + v[ix + 1, iy] * fx * (1 - fy)
            + v[ix, iy + 1] * (1 - fx) * fy
            + v[ix + 1, iy + 1] * fx * fy
        )
        return float(out[0]) if single else out

    @staticmethod
    def sample(fn, lo: float, hi: float, n: int, dim: int = 1,
               extension: str = "constant") -> "GridFunction":
        """Sample a callable on the grid. ``fn`` must accept (..., d) points
        for dim 2 and plain coordinate arrays for dim 1."""
        axis = np.linspace(lo, hi, n)
        if dim == 1:
            vals = np.asarray(fn(axis), dtype=float)
        else:
            X, Y = np.meshgrid(axis, axis, indexing="ij")
            pts = np.stack([X, Y], axis=-1)
            vals = np.asarray(fn(pts), dtype=float)
        return GridFunction(lo, hi, vals, extension)


@dataclass
class SemigroupTrajectory:
    """Time-indexed frames of an evolved grid function.

    ``argmax_fields[k]`` holds, per node, the index of the control attaining
    the pointwise maximum in the step from ``times[k]`` to ``times[k+1]``.
    """

    times: np.ndarray
    frames: list
    family_id: str = ""
    dt: float = 0.0
    argmax_fields: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.frames):
            raise ValueError("times and frames must align")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise ValueError("trajectory must start at t=0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def frame_at(self, t: float):
        """Frame whose time matches t (within half a step)."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 0.5 * self.dt + 1e-12:
            raise ValueError(f"no frame near t={t}")
        return self.frames[k]

    def values_at(self, x) -> np.ndarray:
        """Time series of the trajectory at a fixed point."""
        return np.array([f(x) for f in self.frames])
