"""First Dirichlet eigenvalue of the weighted operator behind the inf-radius bound.

For a weight ``phi > 0`` on ``[0, l]`` and ``Lambda > 0`` the operator is

    L0 f = -f'' - (phi'/phi) f' - (Lambda + phi''/phi) f
         = -(phi f')'/phi - (Lambda + phi''/phi) f

with Dirichlet conditions.  Nonnegativity of ``L0`` forces
``l <= sqrt(3/2) * pi / sqrt(Lambda)``; :func:`infradius_check` tests that
implication on concrete weights, :func:`falsification_run` on random ones.

The divergence form is discretized by central differences at the interior
nodes.  With ``D = diag(phi_i)`` the matrix is ``D^-1 K`` for a symmetric
tridiagonal ``K``, and ``D^-1/2 K D^-1/2`` is its symmetric version.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PPoly
from scipy.linalg import eigvalsh_tridiagonal

__all__ = [
    "Weight",
    "SturmOperator",
    "Eigen",
    "BoundVerdict",
    "assemble_operator",
    "first_dirichlet_eigenvalue",
    "infradius_check",
    "infradius_bound",
    "falsification_run",
    "weight_from_json",
    "random_spline_weight",
]

MIN_GRID = 16
EIG_TOL = 1e-6
LENGTH_RTOL = 1e-3


@dataclass(frozen=True)
class Weight:
    """A weight with its first two derivatives.

    Built from a constant, a scipy spline (``CubicSpline``/``PPoly``), samples
    on a uniform grid over ``[0, l]`` (interpolated by a cubic spline), or a
    triple of callables ``(phi, dphi, d2phi)``.
    """

    f: object = field(repr=False)
    d1: object = field(repr=False)
    d2: object = field(repr=False)
    label: str = ""

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda s: np.full_like(np.asarray(s, float), c), lambda s: np.zeros_like(np.asarray(s, float)), lambda s: np.zeros_like(np.asarray(s, float)), f"const:{c:g}")

    @classmethod
    def spline(cls, sp: PPoly, label="spline"):
        return cls(sp, sp.derivative(1), sp.derivative(2), label)

    @classmethod
    def coerce(cls, phi, l):
        if isinstance(phi, Weight):
            return phi
        if np.isscalar(phi):
            return cls.constant(phi)
        if isinstance(phi, PPoly):
            return cls.spline(phi)
        if isinstance(phi, tuple) and len(phi) == 3 and all(callable(g) for g in phi):
            return cls(*phi, "callable")
        y = np.asarray(phi, float)
        if y.ndim == 1 and len(y) >= 4:
            return cls.spline(CubicSpline(np.linspace(0.0, l, len(y)), y), "samples")
        raise TypeError("phi must be a constant, spline, samples or (phi, dphi, d2phi)")


@dataclass(frozen=True)
class SturmOperator:
    """Discretized weighted operator on ``n - 1`` interior nodes.

    Attributes
    ----------
    diag, off : ndarray
        The symmetric tridiagonal form (diagonal and off-diagonal).
    phi : ndarray
        Weight at the interior nodes.
    """

    l: float
    n: int
    lambda_const: float
    phi: np.ndarray = field(repr=False)
    diag: np.ndarray = field(repr=False)
    off: np.ndarray = field(repr=False)
    K_diag: np.ndarray = field(repr=False)
    K_off: np.ndarray = field(repr=False)
    weight: Weight = field(repr=False, default=None)

    @property
    def h(self):
        return self.l / self.n

    @property
    def nodes(self):
        return np.arange(1, self.n) * self.h

    def matrix(self):
        """The (non-symmetric) matrix acting on nodal values, dense."""
        K = np.diag(self.K_diag) + np.diag(self.K_off, 1) + np.diag(self.K_off, -1)
        return K / self.phi[:, None]

    def symmetric(self):
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def rayleigh(self, f):
        """Weighted Rayleigh quotient ``f.K f / f.D f`` of nodal values ``f``."""
        f = np.asarray(f, float)
        Kf = self.K_diag * f
        Kf[:-1] += self.K_off * f[1:]
        Kf[1:] += self.K_off * f[:-1]
        return float(f @ Kf / (f @ (self.phi * f)))


def assemble_operator(phi, lambda_const: float, l: float, n: int = 512) -> SturmOperator:
    """Central-difference discretization of the weighted operator.

    Parameters
    ----------
    phi : constant, spline, samples or (phi, dphi, d2phi)
        Positive weight on ``[0, l]``; see :class:`Weight`.
    lambda_const : float
        The constant ``Lambda > 0``.
    l : float
        Interval length.
    n : int
        Number of grid intervals (at least 16).
    """
    if n < MIN_GRID:
        raise ValueError(f"n must be at least {MIN_GRID}")
    if not (l > 0 and lambda_const > 0):
        raise ValueError("l and lambda_const must be positive")
    w = Weight.coerce(phi, l)
    h = l / n
    s = np.arange(1, n) * h
    mid = (np.arange(n) + 0.5) * h
    ph = np.asarray(w.f(s), float)
    pm = np.asarray(w.f(mid), float)
    if np.any(ph <= 0) or np.any(pm <= 0) or np.any(np.asarray(w.f(np.array([0.0, l]))) <= 0):
        raise ValueError("phi must be positive on [0, l]")
    d2 = np.asarray(w.d2(s), float)
    K_diag = (pm[:-1] + pm[1:]) / h**2 - (lambda_const * ph + d2)
    K_off = -pm[1:-1] / h**2
    r = 1.0 / np.sqrt(ph)
    diag = K_diag * r * r
    off = K_off * r[:-1] * r[1:]
    return SturmOperator(float(l), int(n), float(lambda_const), ph, diag, off, K_diag, K_off, w)


@dataclass(frozen=True)
class Eigen:
    """Smallest eigenvalue with a Richardson error estimate.

    ``coarse`` is the value on the grid with half as many intervals;
    ``extrapolated = value + (value - coarse) / 3``.
    """

    value: float
    coarse: float
    error: float
    extrapolated: float

    def __float__(self):
        return self.value


def _smallest(op: SturmOperator):
    return float(eigvalsh_tridiagonal(op.diag, op.off, select="i", select_range=(0, 0), lapack_driver="stebz")[0])


def first_dirichlet_eigenvalue(op: SturmOperator) -> Eigen:
    """Smallest eigenvalue by Sturm-sequence bisection, with an O(n^-2) error estimate."""
    lam = _smallest(op)
    if op.n >= 2 * MIN_GRID and op.n % 2 == 0:
        coarse = _smallest(assemble_operator(op.weight, op.lambda_const, op.l, op.n // 2))
        err = (lam - coarse) / 3.0
    else:
        coarse, err = math.nan, math.nan
    return Eigen(lam, coarse, abs(err), lam + err)


def infradius_bound(lambda_const: float) -> float:
    return math.sqrt(1.5) * math.pi / math.sqrt(lambda_const)


@dataclass(frozen=True)
class BoundVerdict:
    """Outcome of one check of the implication ``L0 >= 0  =>  l <= bound``."""

    first_eigenvalue: float
    l: float
    bound: float
    tol: float
    rel_tol: float
    error: float = math.nan

    @property
    def nonnegative(self):
        return self.first_eigenvalue >= -self.tol

    @property
    def consistent(self):
        return (not self.nonnegative) or self.l <= self.bound * (1 + self.rel_tol)

    def to_json(self):
        return {
            "first_eigenvalue": self.first_eigenvalue,
            "error_estimate": None if math.isnan(self.error) else self.error,
            "l": self.l,
            "bound": self.bound,
            "nonnegative": self.nonnegative,
            "consistent": self.consistent,
            "tol": self.tol,
            "rel_tol": self.rel_tol,
        }


def infradius_check(phi, lambda_const: float, l: float, n: int = 512, tol: float = EIG_TOL, rel_tol: float = LENGTH_RTOL) -> BoundVerdict:
    """Check the inf-radius implication for one weight."""
    ev = first_dirichlet_eigenvalue(assemble_operator(phi, lambda_const, l, n))
    return BoundVerdict(ev.value, float(l), infradius_bound(lambda_const), tol, rel_tol, ev.error)


def random_spline_weight(rng: np.random.Generator, l: float, knots: int = 6, spread: float = 0.9) -> Weight:
    """Positive cubic spline through random values in ``[1 - spread, 1 + spread]``."""
    x = np.linspace(0.0, l, knots)
    y = 1.0 + spread * rng.uniform(-1, 1, knots)
    sp = CubicSpline(x, y)
    dense = sp(np.linspace(0.0, l, 64 * knots))
    if dense.min() <= 0.05:
        sp = CubicSpline(x, y - dense.min() + 0.05)
    return Weight.spline(sp, "random")


def falsification_run(instances: int = 10_000, seed: int = 0, n: int = 512, max_ratio: float = 2.0):
    """Randomized search for weights violating the implication.

    Each instance draws ``Lambda`` log-uniformly in ``[0.1, 10]``, ``l``
    uniformly up to ``max_ratio`` times the bound and a random spline weight.

    Returns
    -------
    dict
        ``instances``, ``nonnegative`` (antecedent true), ``violations``,
        the largest ``l / bound`` among nonnegative instances and the seed.
    """
    rng = np.random.default_rng(seed)
    nonneg = viol = 0
    worst = 0.0
    first_bad = None
    for i in range(instances):
        lam = float(10 ** rng.uniform(-1, 1))
        bound = infradius_bound(lam)
        l = float(rng.uniform(0.05, max_ratio) * bound)
        w = random_spline_weight(rng, l, knots=int(rng.integers(3, 9)))
        v = infradius_check(w, lam, l, n)
        if v.nonnegative:
            nonneg += 1
            worst = max(worst, l / bound)
        if not v.consistent:
            viol += 1
            if first_bad is None:
                first_bad = {"index": i, "lambda": lam, "l": l, "eigenvalue": v.first_eigenvalue}
    return {"instances": instances, "nonnegative": nonneg, "violations": viol, "max_ratio_nonnegative": worst, "seed": seed, "first_violation": first_bad}


def weight_from_json(spec, l=None) -> Weight:
    """Weight from ``const:v``, a JSON file name, or a parsed mapping.

    JSON weights are ``{"x": [...], "y": [...]}`` knots of a cubic spline, or
    ``{"values": [...]}`` samples on a uniform grid over ``[0, l]``.
    """
    if isinstance(spec, str):
        if spec.startswith("const:"):
            return Weight.constant(float(spec[6:]))
        with open(spec) as fh:
            spec = json.load(fh)
    if "x" in spec:
        return Weight.spline(CubicSpline(np.asarray(spec["x"], float), np.asarray(spec["y"], float)), "json")
    if "values" in spec:
        if l is None:
            raise ValueError("sampled weights need the interval length")
        return Weight.coerce(np.asarray(spec["values"], float), l)
    raise ValueError("weight JSON needs 'x'/'y' knots or 'values'")
