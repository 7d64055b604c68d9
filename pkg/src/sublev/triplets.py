"""Levy characteristics, jump measures and symbol evaluation.

A characteristic quadruple (c, b, Q, nu) encodes one continuous negative
definite function

    q(xi) = c - i b.xi + (1/2) xi.Q xi
            + sum_j w_j (1 - exp(i y_j.xi) + i y_j.xi 1_{0<|y_j|<1}),

with the compensator indicator taken on the OPEN interval (0, 1): atoms with
|y| = 1 exactly are not compensated.  Jump measures are finite atomic
measures; densities enter as pre-quadratured weighted nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-12


def _as_points(arr, dim: int | None) -> np.ndarray:
    pts = np.asarray(arr, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, dim or 1)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


@dataclass(frozen=True)
class JumpMeasure:
    """Finite atomic jump measure, optionally augmented with quadrature nodes
    standing in for a density."""

    atoms: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density_nodes: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    density_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        atoms = _as_points(self.atoms, None)
        nodes = _as_points(self.density_nodes, atoms.shape[1])
        w_at = np.asarray(self.weights, dtype=float).ravel()
        w_no = np.asarray(self.density_weights, dtype=float).ravel()
        if atoms.shape[0] != w_at.size or nodes.shape[0] != w_no.size:
            raise ValueError("locations and weights must align")
        if atoms.size and nodes.size and atoms.shape[1] != nodes.shape[1]:
            raise ValueError("atoms and density nodes must share a dimension")
        for pts, name in ((atoms, "atom"), (nodes, "density node")):
            if pts.size and np.any(np.linalg.norm(pts, axis=1) == 0.0):
                raise ValueError(f"{name} at the origin is not allowed")
        for w, name in ((w_at, "atom"), (w_no, "density")):
            if w.size and np.any(w <= 0.0):
                raise ValueError(f"{name} weights must be strictly positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w_at)
        object.__setattr__(self, "density_nodes", nodes)
        object.__setattr__(self, "density_weights", w_no)
        mass = float(np.sum(self._all_weights() * np.minimum(1.0, self._norms() ** 2)))
        if not np.isfinite(mass):
            raise ValueError("Levy mass integral must be finite")
        object.__setattr__(self, "_levy_mass", mass)

    def _all_points(self) -> np.ndarray:
        if self.density_nodes.size == 0:
            return self.atoms
        if self.atoms.size == 0:
            return self.density_nodes
        return np.vstack([self.atoms, self.density_nodes])

    def _all_weights(self) -> np.ndarray:
        return np.concatenate([self.weights, self.density_weights])

    def _norms(self) -> np.ndarray:
        pts = self._all_points()
        if pts.size == 0:
            return np.zeros(0)
        return np.linalg.norm(pts, axis=1)

    @property
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(locations, weights) of every atom and quadrature node."""
        return self._all_points(), self._all_weights()

    @property
    def levy_mass(self) -> float:
        """Cached value of the integral of min{1, |y|^2}."""
        return self._levy_mass

    @property
    def dim(self) -> int:
        pts = self._all_points()
        return pts.shape[1] if pts.size else 1

    def total_mass_beyond(self, radius: float) -> float:
        """Mass of {|y| > radius} (strict inequality)."""
        pts, w = self.support
        if pts.size == 0:
            return 0.0
        return float(np.sum(w[np.linalg.norm(pts, axis=1) > radius]))

    @staticmethod
    def empty(dim: int = 1) -> "JumpMeasure":
        return JumpMeasure(np.zeros((0, dim)), np.zeros(0))

    @staticmethod
    def from_atoms(locations, weights) -> "JumpMeasure":
        return JumpMeasure(np.asarray(locations, dtype=float), np.asarray(weights, dtype=float))

    def union(self, other: "JumpMeasure") -> "JumpMeasure":
        """Superposition of the two measures (atoms and nodes concatenated)."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")

        def stack(a, b):
            if a.size == 0 and b.size == 0:
                return np.zeros((0, self.dim))
            return np.vstack([a.reshape(-1, self.dim), b.reshape(-1, self.dim)])

        return JumpMeasure(
            stack(self.atoms, other.atoms),
            np.concatenate([self.weights, other.weights]),
            stack(self.density_nodes, other.density_nodes),
            np.concatenate([self.density_weights, other.density_weights]),
        )

    def scaled(self, factor: float) -> "JumpMeasure":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return JumpMeasure(self.atoms, self.weights * factor,
                           self.density_nodes, self.density_weights * factor)


def _clean_matrix(Q, dim: int) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 0:
        Q = Q.reshape(1, 1)
    if Q.shape != (dim, dim):
        raise ValueError(f"Q must be {dim}x{dim}")
    if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL:
        raise ValueError("Q must be symmetric within 1e-12")
    Q = 0.5 * (Q + Q.T)
    evals, evecs = np.linalg.eigh(Q)
    if np.any(evals < -PSD_TOL):
        raise ValueError("Q must be positive semidefinite (eigenvalue < -1e-12)")
    if np.any(evals < 0.0):
        evals = np.maximum(evals, 0.0)
        Q = (evecs * evals) @ evecs.T
        Q = 0.5 * (Q + Q.T)
    return Q


@dataclass(frozen=True)
class LevyTriplet:
    """One characteristic quadruple (c, b, Q, nu)."""

    c: float = 0.0
    b: np.ndarray = field(default_factory=lambda: np.zeros(1))
    Q: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))
    nu: JumpMeasure | None = None

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("killing rate c must be nonnegative")
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        dim = b.size
        Q = _clean_matrix(self.Q, dim)
        nu = self.nu if self.nu is not None else JumpMeasure.empty(dim)
        if nu.support[0].size and nu.dim != dim:
            raise ValueError("jump measure dimension mismatch")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "nu", nu)
        if not np.isfinite(self.mass()):
            raise ValueError("triplet mass bracket must be finite")
        # Compensator drift: sum of w*y over atoms with 0 < |y| < 1 (open).
        pts, w = nu.support
        if pts.size:
            small = np.linalg.norm(pts, axis=1) < 1.0
            comp = (w[small, None] * pts[small]).sum(axis=0)
        else:
            comp = np.zeros(dim)
        object.__setattr__(self, "_compensator", comp)

    @property
    def dim(self) -> int:
        return self.b.size

    @property
    def compensator_drift(self) -> np.ndarray:
        """sum over compensated atoms of w*y; subtracting it from b gives the
        drift of the process written with uncompensated jumps."""
        return self._compensator

    def mass(self) -> float:
        return triplet_mass(self)

    @staticmethod
    def empty(dim: int = 1) -> "LevyTriplet":
        return LevyTriplet(0.0, np.zeros(dim), np.zeros((dim, dim)), JumpMeasure.empty(dim))


def levy_khintchine_symbol(triplet: LevyTriplet, xi) -> complex | np.ndarray:
    """Evaluate the characteristic exponent q(xi).

    ``xi`` may be a scalar (d=1), a (d,) point, or a batch of shape (..., d);
    batches return a complex array of the leading shape.
    """
    d = triplet.dim
    xi_arr = np.asarray(xi, dtype=float)
    scalar_in = xi_arr.ndim == 0 or (xi_arr.ndim == 1 and xi_arr.shape == (d,))
    if xi_arr.ndim == 0:
        xi_arr = xi_arr.reshape(1, 1)
    elif xi_arr.shape[-1] != d:
        if d == 1:
            xi_arr = xi_arr[..., None]
        else:
            raise ValueError(f"xi must have last dimension {d}")
    elif xi_arr.ndim == 1:
        xi_arr = xi_arr[None, :]

    lead = xi_arr.shape[:-1]
    flat = xi_arr.reshape(-1, d)
    q = np.full(flat.shape[0], complex(triplet.c), dtype=complex)
    q -= 1j * flat @ triplet.b
    q += 0.5 * np.einsum("ki,ij,kj->k", flat, triplet.Q, flat)
    pts, w = triplet.nu.support
    if pts.size:
        phase = flat @ pts.T                       # (k, m)
        q += (w * (1.0 - np.exp(1j * phase))).sum(axis=1)
        q += 1j * flat @ triplet.compensator_drift
    if scalar_in:
        return complex(q.reshape(-1)[0])
    return q.reshape(lead)


def triplet_mass(triplet: LevyTriplet) -> float:
    """Mass bracket |c| + |b| + |Q|_F + integral of min{1,|y|^2}."""
    return float(
        abs(triplet.c)
        + np.linalg.norm(triplet.b)
        + np.linalg.norm(triplet.Q, ord="fro")
        + triplet.nu.levy_mass
    )


class Symbol:
    """Callable view of one triplet's characteristic exponent."""

    def __init__(self, triplet: LevyTriplet):
        self.triplet = triplet

    def __call__(self, xi):
        return levy_khintchine_symbol(self.triplet, xi)

    @property
    def killing_rate(self) -> float:
        return self.triplet.c


class CharacteristicFamily:
    """Finite indexed family theta -> triplet, optionally x-dependent.

    ``triplets`` is either a mapping label -> LevyTriplet (translation
    invariant) or a callable (label, x) -> LevyTriplet together with an
    ``x_domain`` box on which the dependence is defined.  Uniform boundedness
    of the mass bracket over the index set is verified at construction on a
    sample of the domain.
    """

    def __init__(
        self,
        index_set: Sequence,
        triplets,
        *,
        translation_invariant: bool | None = None,
        x_domain: tuple[float, float] | None = None,
        conservative: bool = False,
        name: str = "",
        check_points: int = 17,
    ):
        self.index_set = list(index_set)
        if not self.index_set:
            raise ValueError("index set must be nonempty")
        if len(set(map(str, self.index_set))) != len(self.index_set):
            raise ValueError("index labels must be distinct")
        self._table: dict | None = None
        self._fn: Callable | None = None
        if callable(triplets):
            self._fn = triplets
            if translation_invariant is None:
                translation_invariant = False
            if not translation_invariant and x_domain is None:
                raise ValueError("x-dependent families need an x_domain box")
        else:
            self._table = dict(triplets)
            missing = [th for th in self.index_set if th not in self._table]
            if missing:
                raise ValueError(f"missing triplets for labels {missing}")
            if translation_invariant is None:
                translation_invariant = True
            if not translation_invariant:
                raise ValueError("a plain table is necessarily translation invariant")
        self.translation_invariant = bool(translation_invariant)
        self.x_domain = x_domain
        self.declared_conservative = bool(conservative)
        self.name = name or f"family[{len(self.index_set)}]"
        self.dim = self.at(self.index_set[0], self._probe_point()).dim
        self._verify_bounded(check_points)

    def _probe_point(self) -> np.ndarray:
        if self.x_domain is not None:
            return np.atleast_1d(0.5 * (self.x_domain[0] + self.x_domain[1]))
        return np.zeros(1)

    def _verify_bounded(self, check_points: int):
        if self.translation_invariant:
            xs = [self._probe_point()]
        else:
            lo, hi = self.x_domain
            xs = [np.atleast_1d(v) for v in np.linspace(lo, hi, check_points)]
        sup = 0.0
        for x in xs:
            sup = max(sup, max(triplet_mass(self.at(th, x)) for th in self.index_set))
        if not np.isfinite(sup):
            raise ValueError("family mass bracket is unbounded over the index set")
        self.mass_bound = sup

    def at(self, theta, x) -> LevyTriplet:
        """Triplet of control ``theta`` at the point ``x``."""
        if self._table is not None:
            return self._table[theta]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self._fn(theta, x)

    def triplet_list(self, x) -> list[LevyTriplet]:
        return [self.at(th, x) for th in self.index_set]

    def is_conservative_at(self, x, tol: float = 0.0) -> bool:
        return all(t.c <= tol for t in self.triplet_list(x))

    @staticmethod
    def from_table(table: dict, *, conservative: bool = False,
                   name: str = "") -> "CharacteristicFamily":
        return CharacteristicFamily(list(table.keys()), table,
                                    conservative=conservative, name=name)


def tightness_defect(family: CharacteristicFamily, x, R: float) -> float:
    """sup over the index set of the jump mass strictly beyond radius R."""
    if R <= 0:
        raise ValueError("R must be positive")
    return max(t.nu.total_mass_beyond(R) for t in family.triplet_list(x))


@dataclass
class TightnessTrace:
    radii: np.ndarray
    defects: np.ndarray
    eps: float
    tight: bool
    non_increasing: bool


def is_tight(family: CharacteristicFamily, x, R_sequence, eps: float) -> TightnessTrace:
    """Empirical tightness probe along an increasing radius sequence.

    Tight iff the defect drops below ``eps`` at some radius and the tail of
    the trace past that radius is non-increasing (a data sanity condition:
    the defect is non-increasing in R for any fixed family).
    """
    radii = np.asarray(R_sequence, dtype=float)
    if radii.size == 0 or np.any(np.diff(radii) <= 0):
        raise ValueError("R_sequence must be nonempty and increasing")
    defects = np.array([tightness_defect(family, x, R) for R in radii])
    below = np.nonzero(defects < eps)[0]
    non_increasing = bool(np.all(np.diff(defects) <= 1e-15))
    tight = below.size > 0 and bool(np.all(np.diff(defects[below[0]:]) <= 1e-15))
    return TightnessTrace(radii, defects, eps, tight, non_increasing)
