"""Turn an approximate design into an exact design on user grid levels.

Steps: merge same-combo points closer than ``delta_r`` into their weighted
centroid, round each continuous coordinate to the nearest multiple of its
grid level, allocate ``n`` units (floors first, then the remaining units
one at a time) and drop points that receive no unit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ApproximateDesign, ExactDesign, det
from .errors import AllPointsDropped

ALLOCATIONS = ("remainder", "greedy")


@dataclass(frozen=True)
class RoundingConfig:
    """``grid_levels`` holds one positive grid spacing per continuous factor.

    ``allocation`` chooses how the units left after flooring are handed
    out: ``"remainder"`` gives them to the largest fractional parts
    ``n w_i - floor(n w_i)`` (ties by determinant gain, then index);
    ``"greedy"`` gives each to the eligible point whose extra unit raises
    the information determinant the most.
    """

    n: int
    grid_levels: tuple[float, ...] = field(default=())
    delta_r: float = 0.1
    allocation: str = "remainder"

    def __post_init__(self):
        object.__setattr__(self, "grid_levels", tuple(float(v) for v in self.grid_levels))
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.delta_r > 0:
            raise ValueError("delta_r must be positive")
        if any(not L > 0 for L in self.grid_levels):
            raise ValueError("grid levels must be positive")
        if self.allocation not in ALLOCATIONS:
            raise ValueError(f"allocation must be one of {ALLOCATIONS}")


def round_to_grid(value: float, L: float) -> float:
    """Nearest multiple of ``L``; exact halves go away from zero."""
    q = math.copysign(math.floor(abs(value) / L + 0.5), value)
    inv = 1.0 / L
    if abs(inv - round(inv)) <= 1e-9 * inv:
        # dividing by an integer count is exact to 1 ulp, unlike q * 0.1
        return q / round(inv) + 0.0
    return q * L + 0.0


def merge_weighted(xi: ApproximateDesign, delta: float, k: int, evaluator=None) -> ApproximateDesign:
    """Merge same-combo pairs closer than ``delta`` into their weighted centroid.

    Pairs are scanned in ascending order and the scan restarts after each
    accepted merge.  With an ``evaluator``, merges that make the
    information matrix singular are refused.
    """
    pts = [np.array(x) for x in xi.points]
    w = [float(v) for v in xi.weights]
    refused: set[tuple[bytes, bytes]] = set()
    merged = True
    while merged:
        merged = False
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if not np.array_equal(pts[i][k:], pts[j][k:]):
                    continue
                if np.linalg.norm(pts[i] - pts[j]) >= delta:
                    continue
                key = (pts[i].tobytes(), pts[j].tobytes())
                if key in refused:
                    continue
                wt = w[i] + w[j]
                centroid = (w[i] * pts[i] + w[j] * pts[j]) / wt if wt > 0 else (pts[i] + pts[j]) / 2
                cand_pts = pts[:i] + [centroid] + pts[i + 1:j] + pts[j + 1:]
                cand_w = w[:i] + [wt] + w[i + 1:j] + w[j + 1:]
                if evaluator is not None:
                    trial = ApproximateDesign.normalized(np.array(cand_pts), cand_w)
                    if not det(evaluator.design_info(trial)) > 0:
                        refused.add(key)
                        continue
                pts, w = cand_pts, cand_w
                merged = True
                break
            if merged:
                break
    return ApproximateDesign.normalized(np.array(pts), w)


def _combine_duplicates(points: np.ndarray, weights: np.ndarray):
    out_pts: list[np.ndarray] = []
    out_w: list[float] = []
    for x, wi in zip(points, weights):
        for idx, y in enumerate(out_pts):
            if np.array_equal(x, y):
                out_w[idx] += wi
                break
        else:
            out_pts.append(x)
            out_w.append(float(wi))
    return np.array(out_pts), np.array(out_w)


def _det_with(evaluator, points, counts) -> float:
    counts = np.asarray(counts, dtype=float)
    keep = counts > 0
    if not keep.any():
        return 0.0
    return det(evaluator.design_info(ApproximateDesign.normalized(points[keep], counts[keep])))


def greedy_unit_assign(evaluator, points, counts, remainders, units: int | None = None) -> np.ndarray:
    """Hand out the units left after flooring, one at a time.

    ``remainders`` are the fractional parts ``n w_i - n_i``; a point is
    eligible while ``n w_i > n_i``, so it can receive at most one unit.  Each
    unit goes to the eligible point giving the largest determinant; ties
    go to the lowest index.
    """
    counts = np.asarray(counts, dtype=int).copy()
    target = counts + np.asarray(remainders, dtype=float)
    if units is None:
        units = int(round(float(np.sum(remainders))))
    points = np.atleast_2d(points)
    for _ in range(units):
        eligible = np.flatnonzero(target > counts + 1e-12)
        if eligible.size == 0:
            raise AllPointsDropped("no eligible point left for a remaining unit")
        best_i, best_det = int(eligible[0]), -np.inf
        for i in eligible:
            trial = counts.copy()
            trial[i] += 1
            val = _det_with(evaluator, points, trial)
            if val > best_det:
                best_i, best_det = int(i), val
        counts[best_i] += 1
    return counts


def remainder_unit_assign(evaluator, points, counts, remainders, units: int | None = None) -> np.ndarray:
    """Largest-remainder allocation; equal remainders ranked by determinant gain, then index."""
    counts = np.asarray(counts, dtype=int).copy()
    rem = np.asarray(remainders, dtype=float)
    if units is None:
        units = int(round(float(rem.sum())))
    if units == 0:
        return counts
    points = np.atleast_2d(points)
    order = sorted(range(rem.size), key=lambda i: (-round(rem[i], 12), i))
    cutoff = round(rem[order[units - 1]], 12)
    tied = [i for i in order if round(rem[i], 12) == cutoff]
    sure = [i for i in order[:units] if round(rem[i], 12) > cutoff]
    counts[sure] += 1
    left = units - len(sure)
    if left:
        counts = greedy_unit_assign(evaluator, points, counts,
                                    np.where(np.isin(np.arange(rem.size), tied), rem, 0.0), left)
    return counts


def round_design(evaluator, xi: ApproximateDesign, cfg: RoundingConfig, region=None) -> ExactDesign:
    """Exact design with ``cfg.n`` units on the grid given by ``cfg.grid_levels``.

    ``region`` (optional) clamps rounded coordinates back inside the
    continuous bounds by moving one grid step inward.
    """
    k = len(cfg.grid_levels)
    if np.any(xi.weights <= 0):
        xi = xi.drop_zero()
    merged = merge_weighted(xi, cfg.delta_r, k, evaluator)

    pts = merged.points.copy()
    for j, L in enumerate(cfg.grid_levels):
        for r in range(pts.shape[0]):
            v = round_to_grid(pts[r, j], L)
            if region is not None:
                a, b = region.continuous_bounds[j]
                if v > b + 1e-12:
                    v = round_to_grid(v - L, L)
                elif v < a - 1e-12:
                    v = round_to_grid(v + L, L)
            pts[r, j] = v
    pts, w = _combine_duplicates(pts, merged.weights)
    w = w / w.sum()
    if not det(evaluator.design_info(ApproximateDesign(pts, w))) > 0:
        warnings.warn("design became singular after rounding to the grid", RuntimeWarning, stacklevel=2)

    nw = cfg.n * w
    counts = np.floor(nw + 1e-9).astype(int)
    rem = np.clip(nw - counts, 0.0, None)
    units = cfg.n - int(counts.sum())
    assign = remainder_unit_assign if cfg.allocation == "remainder" else greedy_unit_assign
    counts = assign(evaluator, pts, counts, rem, units)

    keep = counts > 0
    if not keep.any():
        raise AllPointsDropped("every point received zero units")
    exact = ExactDesign(pts[keep], counts[keep])
    if not det(evaluator.design_info(exact.to_approximate())) > 0:
        raise AllPointsDropped(f"n = {cfg.n} leaves too few points for a nonsingular design")
    return exact
