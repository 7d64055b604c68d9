"""Single Levy-type generators, their sublinear envelope, and the structural
checks attached to them.

The generator of one triplet acts on a twice differentiable function as

    A f(x) = -c f(x) + b.grad f(x) + (1/2) tr(Q hess f(x))
             + sum_j w_j (f(x + y_j) - f(x) - y_j.grad f(x) 1_{0<|y_j|<1}),

and the sublinear envelope takes the pointwise maximum over a finite control
family, ties broken by index order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionNotMet
from .functions import ClosedForm, Sampled, TestFunction, constant_fn, plateau
from .grids import GridFunction
from .triplets import (CharacteristicFamily, LevyTriplet,
                       levy_khintchine_symbol, tightness_defect, triplet_mass)

PMP_TOL = 1e-9
CB2_CONSTANT = 2.0


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
        return pts, True
    if pts.ndim == 1:
        if pts.shape[0] == dim:
            return pts[None, :], True
        if dim == 1:
            return pts[:, None], False
        raise ValueError(f"point of dimension {pts.shape[0]}, expected {dim}")
    return pts, False


def apply_generator(triplet: LevyTriplet, f: TestFunction, x):
    """Apply one integro-differential operator at x (a point or a batch).

    Batches of shape (k, d) return a (k,) array; single points return a
    scalar.  Sampled test functions under the strict policy raise
    SampledOutOfDomain when a jump leaves the grid.
    """
    pts, single = _as_batch(x, triplet.dim)
    fx = np.asarray(f.value(pts))
    gx = np.asarray(f.gradient(pts))
    Hx = np.asarray(f.hessian(pts))
    out = -triplet.c * fx
    out = out + gx @ triplet.b
    out = out + 0.5 * np.einsum("ij,kij->k", triplet.Q, Hx)
    ys, w = triplet.nu.support
    if ys.size:
        shifted = pts[:, None, :] + ys[None, :, :]
        fshift = np.asarray(f.value(shifted))
        out = out + (w * (fshift - fx[:, None])).sum(axis=1)
        out = out - gx @ triplet.compensator_drift
    if single:
        out = out[0]
        return complex(out) if np.iscomplexobj(out) else float(out)
    return out


@dataclass
class EnvelopeResult:
    value: float
    argmax_theta: object
    per_theta_values: list

    def __post_init__(self):
        best = max(v for _, v in self.per_theta_values)
        if not np.isclose(self.value, best, rtol=0, atol=0):
            raise ValueError("envelope value must equal the per-control maximum")


def apply_sublinear_generator(family: CharacteristicFamily, f: TestFunction,
                              x) -> EnvelopeResult:
    """Pointwise supremum of the per-control generators; first label in index
    order wins ties."""
    per = [(th, apply_generator(family.at(th, x), f, x)) for th in family.index_set]
    values = np.array([v for _, v in per])
    k = int(np.argmax(values))
    return EnvelopeResult(float(values[k]), family.index_set[k], per)


def envelope_field(family: CharacteristicFamily, f: TestFunction,
                   grid: GridFunction) -> tuple[GridFunction, np.ndarray]:
    """Envelope evaluated on every node of a 1-d grid.

    Returns the field and the per-node argmax control index.  Translation
    invariant families are evaluated with one batched generator call per
    control.
    """
    if grid.dim != 1:
        raise ValueError("envelope fields are 1-d")
    nodes = grid.nodes()
    if family.translation_invariant:
        stacked = np.stack([
            np.asarray(apply_generator(family.at(th, nodes[:1]), f, nodes))
            for th in family.index_set
        ])
    else:
        stacked = np.empty((len(family.index_set), nodes.size))
        for j, th in enumerate(family.index_set):
            stacked[j] = [apply_generator(family.at(th, xv), f, np.atleast_1d(xv))
                          for xv in nodes]
    argmax = np.argmax(stacked, axis=0)
    env = stacked[argmax, np.arange(nodes.size)]
    return grid.with_values(env), argmax


@dataclass
class PmpReport:
    value: float
    argmax_theta: object
    passed: bool
    f_at_x0: float
    scanned_max: float


def check_positive_maximum_principle(family: CharacteristicFamily,
                                     f: TestFunction, x0,
                                     scan_box: tuple[float, float] = (-10.0, 10.0),
                                     scan_n: int = 2001) -> PmpReport:
    """Verify the envelope is nonpositive where f attains a nonnegative
    global maximum.

    The maximum property of x0 is checked by a grid scan over ``scan_box``
    (within 1e-9); a violated precondition raises PreconditionNotMet.
    """
    x0_b, _ = _as_batch(x0, getattr(f, "dim", 1))
    f0 = float(np.asarray(f.value(x0_b))[0])
    lo, hi = scan_box
    dim = getattr(f, "dim", 1)
    axis = np.linspace(lo, hi, scan_n if dim == 1 else max(101, scan_n // 16))
    if dim == 1:
        pts = axis[:, None]
    else:
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([X, Y], axis=-1).reshape(-1, 2)
    scanned = float(np.max(f.value(pts)))
    if f0 < -PMP_TOL or scanned > f0 + PMP_TOL:
        raise PreconditionNotMet(
            f"f(x0)={f0} is not a nonnegative global maximum (scan max {scanned})")
    res = apply_sublinear_generator(family, f, x0)
    return PmpReport(res.value, res.argmax_theta, res.value <= PMP_TOL, f0, scanned)


@dataclass
class Cb2Report:
    lhs: float
    rhs: float
    passed: bool


def cb2_bound_check(triplet: LevyTriplet, f: ClosedForm, x) -> Cb2Report:
    """|A f(x)| against 2 * ||f||_{Cb^2} * mass bracket; sound by a Taylor
    split of small and large jumps."""
    lhs = abs(apply_generator(triplet, f, x))
    rhs = CB2_CONSTANT * f.cb2_norm * triplet_mass(triplet)
    return Cb2Report(float(lhs), float(rhs), lhs <= rhs + 1e-12 * (1.0 + rhs))


@dataclass
class ConservativenessReport:
    rows: list
    violations: list
    passed: bool


def conservativeness_check(family: CharacteristicFamily,
                           x_samples) -> ConservativenessReport:
    """Check q(0) = c for every control and sample point, that the generator
    of the constant 1 equals -c, and (for families declared conservative)
    that every killing rate vanishes."""
    one = constant_fn(1.0, family.dim)
    rows, violations = [], []
    for x in x_samples:
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        for th in family.index_set:
            t = family.at(th, xv)
            q0 = levy_khintchine_symbol(t, np.zeros(t.dim))
            gen_one = apply_generator(t, one, xv)
            row = {"theta": th, "x": xv.tolist(), "c": t.c,
                   "abs_q0": abs(q0), "gen_one": gen_one}
            rows.append(row)
            if abs(q0 - t.c) > 0.0 or gen_one != -t.c:
                violations.append({**row, "reason": "q(0) or A(1) mismatch"})
            if family.declared_conservative and t.c != 0.0:
                violations.append({**row, "reason": "killing rate nonzero"})
    return ConservativenessReport(rows, violations, not violations)


@dataclass
class TightnessFnReport:
    L_value: float
    passed: bool
    defect_inner: float
    defect_outer: float
    bracket_ok: bool


def tightness_test_function_check(family: CharacteristicFamily, x, eps: float,
                                  R: float) -> TightnessFnReport:
    """Evaluate L(1 - phi)(x) for the smooth plateau phi (1 on B(0,R), 0 off
    B(0,2R)) and bracket it between the tail defects at 2R and R."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    L = 0.0
    for t in family.triplet_list(x):
        pts, w = t.nu.support
        if pts.size:
            r = np.linalg.norm(pts, axis=1)
            L = max(L, float(np.sum(w * (1.0 - plateau(r, R, 2.0 * R)))))
    d_inner = tightness_defect(family, x, R)
    d_outer = tightness_defect(family, x, 2.0 * R)
    bracket = d_outer - 1e-12 <= L <= d_inner + 1e-12
    return TightnessFnReport(L, L <= eps, d_inner, d_outer, bracket)


def sampled_from(cf: ClosedForm, lo: float, hi: float, n: int,
                 extension: str = "constant") -> Sampled:
    """Sample a closed form onto a grid as a finite-difference test function."""
    return Sampled(cf.on_grid(lo, hi, n, extension))
