"""Domain types (regions, designs) and the dense linear-algebra helpers.

Design points are plain float vectors of length ``d``: the first ``k``
entries are continuous coordinates, the trailing ``d - k`` entries are one
level combination of the discrete factors.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularMatrix

# Relative pivot threshold below which a matrix is declared singular.
PIVOT_RTOL = 1e-12
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DesignRegion:
    """Box of continuous factors times a finite set of discrete combos.

    Parameters
    ----------
    continuous_bounds : sequence of (lower, upper) pairs, one per continuous factor.
    discrete_combos : sequence of level combinations; each has length ``d - k``.
        Leave empty (or pass ``[()]``) when every factor is continuous.
    names : optional factor names, continuous factors first.
    """

    continuous_bounds: tuple[tuple[float, float], ...] = ()
    discrete_combos: tuple[tuple[float, ...], ...] = ((),)
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.continuous_bounds)
        combos = tuple(tuple(float(v) for v in c) for c in self.discrete_combos)
        if not combos:
            combos = ((),)
        for j, (a, b) in enumerate(bounds):
            if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
                raise ValueError(f"continuous factor {j}: need finite a < b, got ({a}, {b})")
        lengths = {len(c) for c in combos}
        if len(lengths) != 1:
            raise DimensionMismatch("discrete combos have differing lengths")
        if len(set(combos)) != len(combos):
            raise ValueError("duplicate discrete combos")
        object.__setattr__(self, "continuous_bounds", bounds)
        object.__setattr__(self, "discrete_combos", combos)
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != self.d:
                raise DimensionMismatch(f"{len(names)} names for {self.d} factors")
            object.__setattr__(self, "names", names)

    @classmethod
    def full_factorial(cls, continuous_bounds=(), levels=(), names=None) -> "DesignRegion":
        combos = tuple(itertools.product(*levels)) if levels else ((),)
        return cls(tuple(continuous_bounds), combos, names)

    @property
    def k(self) -> int:
        return len(self.continuous_bounds)

    @property
    def d(self) -> int:
        return self.k + len(self.discrete_combos[0])

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.continuous_bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.continuous_bounds], dtype=float)

    @property
    def combos(self) -> np.ndarray:
        return np.array(self.discrete_combos, dtype=float).reshape(len(self.discrete_combos), -1)

    def factor_names(self) -> tuple[str, ...]:
        return self.names if self.names is not None else tuple(f"x{i + 1}" for i in range(self.d))

    def point(self, continuous, combo) -> np.ndarray:
        return np.concatenate([np.asarray(continuous, dtype=float).ravel(),
                               np.asarray(combo, dtype=float).ravel()])

    def corners(self) -> np.ndarray:
        """All 2^k box corners crossed with every discrete combo."""
        box = list(itertools.product(*self.continuous_bounds)) if self.k else [()]
        return np.array([self.point(c, z) for z in self.discrete_combos for c in box])

    def combo_index(self, x) -> int:
        x = np.asarray(x, dtype=float)
        tail = tuple(float(v) for v in x[self.k:])
        try:
            return self.discrete_combos.index(tail)
        except ValueError:
            return -1

    def contains(self, x, atol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            return False
        if self.k:
            if np.any(x[: self.k] < self.lower - atol) or np.any(x[: self.k] > self.upper + atol):
                return False
        return self.combo_index(x) >= 0


def _weights_array(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    return w


@dataclass(frozen=True)
class ApproximateDesign:
    """Design points (rows) with probability weights summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = _weights_array(self.weights)
        if pts.shape[0] != w.shape[0]:
            raise DimensionMismatch(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if w.size and abs(w.sum() - 1.0) > WEIGHT_SUM_TOL * max(1, w.size):
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, points, weights) -> "ApproximateDesign":
        w = _weights_array(weights)
        return cls(points, w / w.sum())

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def with_weights(self, weights) -> "ApproximateDesign":
        return ApproximateDesign(self.points, weights)

    def drop_zero(self, tol: float = 0.0) -> "ApproximateDesign":
        keep = self.weights > tol
        return ApproximateDesign.normalized(self.points[keep], self.weights[keep])


@dataclass(frozen=True)
class ExactDesign:
    points: np.ndarray
    counts: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        counts = np.asarray(self.counts).astype(int).ravel()
        if pts.shape[0] != counts.shape[0]:
            raise DimensionMismatch(f"{pts.shape[0]} points but {counts.shape[0]} counts")
        if np.any(counts < 1):
            raise ValueError("exact design counts must be positive integers")
        pts.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", int(counts.sum()))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def to_approximate(self) -> ApproximateDesign:
        return ApproximateDesign(self.points, self.counts / self.n)


# --- linear algebra -------------------------------------------------------

def _lu(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    with warnings.catch_warnings():
        # exact zero pivots are reported through _is_singular instead
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    return lu, piv


def _is_singular(lu) -> bool:
    pivots = np.abs(np.diag(lu))
    if pivots.size == 0:
        return False
    top = pivots.max()
    return top == 0.0 or pivots.min() <= PIVOT_RTOL * top


def det(M) -> float:
    """Determinant through partially pivoted LU; 0.0 when numerically singular."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    lu, piv = _lu(M)
    if _is_singular(lu):
        return 0.0
    sign = -1.0 if np.count_nonzero(piv != np.arange(piv.size)) % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def logdet(M) -> float:
    """``log|det M|`` for a PSD information matrix, ``-inf`` when singular."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    lu, _ = _lu(M)
    if _is_singular(lu):
        return -np.inf
    return float(np.sum(np.log(np.abs(np.diag(lu)))))


def is_singular(M) -> bool:
    M = np.asarray(M, dtype=float)
    return M.size > 0 and _is_singular(_lu(M)[0])


def inverse(M) -> np.ndarray:
    lu, piv = _lu(M)
    if _is_singular(lu):
        raise SingularMatrix("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), np.eye(lu.shape[0]))


def check_info_matrix(M, rtol: float = 1e-10) -> np.ndarray:
    """Validate symmetry and PSD-ness (up to roundoff) and return ``M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    scale = max(np.abs(M).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(M - M.T).max(initial=0.0) > rtol * scale:
        raise ValueError("information matrix is not symmetric")
    eig = np.linalg.eigvalsh((M + M.T) / 2)
    if eig.size and eig.min() < -rtol * max(eig.max(), 0.0) - np.finfo(float).tiny:
        raise ValueError("information matrix is not positive semidefinite")
    return M


def distance(x1, x2, k: int, discrete_mismatch_inf: bool = False) -> float:
    """Euclidean distance between design points.

    With ``discrete_mismatch_inf`` (rounding mode) points whose discrete
    parts differ are infinitely far apart; otherwise (merging mode in the
    outer algorithm) the norm runs over all ``d`` coordinates.
    """
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"points of shape {a.shape} and {b.shape}")
    if discrete_mismatch_inf and not np.array_equal(a[k:], b[k:]):
        return float("inf")
    return float(np.linalg.norm(a - b))
