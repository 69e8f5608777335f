"""The EW ForLion outer loop for regions with continuous factors.

Each iteration merges near-duplicate points, re-optimizes the weights with
lift-one, deletes zero-weight points and then searches the whole region
for the point of largest sensitivity ``d(x, xi) = tr(F(xi)^{-1} F_x)``.  The
loop ends once that maximum is at most ``p + stop_slack``.
"""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import ApproximateDesign, DesignRegion, det, inverse
from .errors import MaxIterExceeded, SingularStart
from .liftone import liftone_optimize
from .models import glm_nu, glm_nu_prime

log = logging.getLogger(__name__)

ZERO_WEIGHT_TOL = 1e-10
MAX_CORNER_DIM = 10


@dataclass(frozen=True)
class ForLionConfig:
    delta: float = 1e-2
    eps: float = 1e-6
    stop_slack: float | None = None
    multistart: int = 5
    max_outer_iter: int = 100
    seed: int = 0
    threads: int = 1
    candidate_pool: int = 256
    pool_starts: int = 5
    search_maxiter: int = 200
    search_gtol: float = 1e-8
    liftone_max_iter: int = 5000
    sweep_order: str = "cyclic"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.multistart < 0 or self.max_outer_iter < 1:
            raise ValueError("multistart must be >= 0 and max_outer_iter >= 1")
        if self.sweep_order not in ("cyclic", "random"):
            raise ValueError("sweep_order must be 'cyclic' or 'random'")

    @property
    def slack(self) -> float:
        return self.eps if self.stop_slack is None else self.stop_slack


@dataclass(frozen=True)
class SearchResult:
    x_star: np.ndarray
    d_value: float
    combo_index: int = 0


class Sensitivity:
    """``d(x, xi)`` and its gradient in the continuous coordinates for a fixed design."""

    def __init__(self, evaluator, xi: ApproximateDesign):
        self.evaluator = evaluator
        self.model = evaluator.model
        self.xi = xi
        self.F = evaluator.design_info(xi)
        self.A = inverse(self.F)
        self.thetas = evaluator.ensemble.thetas

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.model.kind == "glm":
            h = self.model.h.evaluate(x)
            nu = float(np.mean(glm_nu(self.model.link, self.thetas @ h)))
            return nu * float(h @ self.A @ h)
        Xx = self.model.model_matrix(x)
        W = self.model.weight_samples(x, self.thetas).mean(axis=0)
        return float(np.sum(self.A * (Xx.T @ W @ Xx)))

    def values(self, X, chunk_elems: int = 4_000_000) -> np.ndarray:
        """Sensitivity at every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.model.kind != "glm":
            return np.array([self(x) for x in X])
        out = np.empty(X.shape[0])
        step = max(1, chunk_elems // max(1, self.thetas.shape[0]))
        for s in range(0, X.shape[0], step):
            H = self.model.h.evaluate(X[s:s + step])
            nu = np.mean(glm_nu(self.model.link, H @ self.thetas.T), axis=1)
            out[s:s + step] = nu * np.einsum("ij,jk,ik->i", H, self.A, H)
        return out

    def at_support(self) -> np.ndarray:
        """Sensitivities at the design's own points (cached per-point matrices)."""
        return np.array([np.sum(self.A * self.evaluator.point_info(x)) for x in self.xi.points])

    def gradient(self, x, lower, upper) -> np.ndarray:
        """Partial derivatives in the ``k`` continuous coordinates."""
        x = np.asarray(x, dtype=float)
        k = len(lower)
        if k == 0:
            return np.zeros(0)
        if self.model.kind == "glm":
            return self._glm_gradient(x, k)
        return self._fd_gradient(x, np.asarray(lower), np.asarray(upper))

    def value_and_gradient(self, x, lower, upper) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        k = len(lower)
        if self.model.kind == "glm" and k:
            h = self.model.h.evaluate(x)
            eta = self.thetas @ h
            nu = float(np.mean(glm_nu(self.model.link, eta)))
            g_nu = np.mean(glm_nu_prime(self.model.link, eta)[:, None] * self.thetas, axis=0)
            Ah = self.A @ h
            quad = float(h @ Ah)
            Jh = self.model.predictor_gradient(x, k)
            return nu * quad, quad * (Jh.T @ g_nu) + 2 * nu * (Jh.T @ Ah)
        return self(x), self.gradient(x, lower, upper)

    def _glm_gradient(self, x, k) -> np.ndarray:
        return self.value_and_gradient(x, np.zeros(k), np.ones(k))[1]

    def _fd_gradient(self, x, lower, upper) -> np.ndarray:
        k = lower.size
        g = np.zeros(k)
        for j in range(k):
            h = 1e-6 * (upper[j] - lower[j])
            lo, hi = x.copy(), x.copy()
            lo[j] = max(x[j] - h, lower[j])
            hi[j] = min(x[j] + h, upper[j])
            g[j] = (self(hi) - self(lo)) / (hi[j] - lo[j])
        return g


def sensitivity(evaluator, x, xi: ApproximateDesign) -> float:
    return Sensitivity(evaluator, xi)(x)


def mlm_block_sensitivity(model, A: np.ndarray, x, U: np.ndarray) -> float:
    """MLM sensitivity assembled from the blocks ``E_st`` of ``A = F(xi)^{-1}``.

    ``sum_{s,t<J} u_st [h_t^T E_ts h_s + 2 h_c^T E_cs h_s + h_c^T E_cc h_c]``
    """
    x = np.asarray(x, dtype=float)
    hs = [hj.evaluate(x) for hj in model.h]
    offs = np.concatenate([[0], np.cumsum(model.block_sizes)])
    hc = model.h_common.evaluate(x) if model.h_common is not None else np.zeros(0)
    c = slice(offs[-2], offs[-1])
    total = 0.0
    for s in range(model.J - 1):
        bs = slice(offs[s], offs[s + 1])
        for t in range(model.J - 1):
            bt = slice(offs[t], offs[t + 1])
            term = hs[t] @ A[bt, bs] @ hs[s]
            if hc.size:
                term += 2 * hc @ A[c, bs] @ hs[s] + hc @ A[c, c] @ hc
            total += U[s, t] * term
    return float(total)


def _combo_search(sens: Sensitivity, region: DesignRegion, combo_idx: int, cfg: ForLionConfig,
                  rng: np.random.Generator) -> SearchResult:
    combo = region.combos[combo_idx]
    lo, hi = region.lower, region.upper
    k = region.k
    if k == 0:
        x = region.point([], combo)
        return SearchResult(x, sens(x), combo_idx)

    def negative(u):
        val, grad = sens.value_and_gradient(region.point(u, combo), lo, hi)
        return -val, -grad

    starts = [(lo + hi) / 2]
    # maxima often sit next to existing support points as the weights shift
    for x in sens.xi.points:
        if np.array_equal(x[k:], combo):
            starts.append(x[:k].copy())
    if cfg.candidate_pool > 0:
        # cheap global scan: box corners plus random points; the best few seed the ascent
        pool = rng.uniform(lo, hi, size=(cfg.candidate_pool, k))
        if k <= MAX_CORNER_DIM:
            pool = np.vstack([np.array(list(itertools.product(*zip(lo, hi)))), pool])
        vals = sens.values(np.hstack([pool, np.repeat(combo[None, :], len(pool), 0)]))
        starts += list(pool[np.argsort(-vals, kind="stable")[: cfg.pool_starts]])
    starts += list(rng.uniform(lo, hi, size=(cfg.multistart, k)))

    best_u, best_val = None, -np.inf
    for u0 in starts:
        res = minimize(negative, u0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                       options={"maxiter": cfg.search_maxiter, "gtol": cfg.search_gtol})
        u = np.clip(res.x, lo, hi)
        val = sens(region.point(u, combo))
        start_val = sens(region.point(u0, combo))
        if start_val > val:
            u, val = np.asarray(u0, dtype=float), start_val
        if val > best_val:
            best_u, best_val = u, val
    return SearchResult(region.point(best_u, combo), best_val, combo_idx)


def new_point_search(evaluator, xi: ApproximateDesign, region: DesignRegion, cfg: ForLionConfig,
                     iteration: int = 0, sens: Sensitivity | None = None) -> SearchResult:
    """Maximize ``d(x, xi)`` over the region: bounded quasi-Newton per discrete combo.

    Each combo gets its own generator seeded by ``(seed, iteration, combo)``,
    so the result does not depend on ``cfg.threads``.  Ties go to the
    lowest combo index.
    """
    sens = sens or Sensitivity(evaluator, xi)
    n_combo = len(region.discrete_combos)

    def run(c):
        return _combo_search(sens, region, c, cfg, np.random.default_rng([cfg.seed, iteration, c]))

    if cfg.threads > 1 and n_combo > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, range(n_combo)))
    else:
        results = [run(c) for c in range(n_combo)]
    best = results[0]
    for r in results[1:]:
        if r.d_value > best.d_value:
            best = r
    return best


def merge_step(xi: ApproximateDesign, delta: float, k: int, evaluator) -> ApproximateDesign:
    """Merge same-combo pairs closer than ``delta`` into their midpoint.

    Pairs are scanned in ascending index order and the scan restarts after
    every accepted merge.  A merge that would make the information matrix
    singular is refused.
    """
    pts = [np.array(x) for x in xi.points]
    w = list(xi.weights)
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
                mid = (pts[i] + pts[j]) / 2
                cand_pts = pts[:i] + [mid] + pts[i + 1:j] + pts[j + 1:]
                cand_w = w[:i] + [w[i] + w[j]] + w[i + 1:j] + w[j + 1:]
                cand = ApproximateDesign.normalized(np.array(cand_pts), cand_w)
                if det(evaluator.design_info(cand)) > 0:
                    pts, w = cand_pts, cand_w
                    merged = True
                    break
                refused.add(key)
            if merged:
                break
    return ApproximateDesign.normalized(np.array(pts), w)


def initial_design(evaluator, region: DesignRegion, seed: int = 0, attempts: int = 10) -> ApproximateDesign:
    """Uniform weights on box corners crossed with the discrete combos.

    At most ``min(4p, 200)`` corner points are kept (seeded subsample).  If
    that set is singular, fresh random interior points are tried instead.
    """
    p = evaluator.p
    cap = min(4 * p, 200)
    rng = np.random.default_rng([seed, 0xD51])
    pts = region.corners()
    if pts.shape[0] > cap:
        pts = pts[np.sort(rng.choice(pts.shape[0], cap, replace=False))]
    for _ in range(attempts + 1):
        xi = ApproximateDesign.normalized(pts, np.ones(len(pts)))
        if det(evaluator.design_info(xi)) > 0:
            return xi
        n = max(cap, p)
        cont = rng.uniform(region.lower, region.upper, size=(n, region.k)) if region.k else np.zeros((n, 0))
        combos = region.combos[rng.integers(len(region.discrete_combos), size=n)]
        pts = np.hstack([cont, combos])
    raise SingularStart("could not find a nonsingular initial design")


@dataclass
class ForLionResult:
    design: ApproximateDesign
    objective: float
    d_max: float
    x_star: np.ndarray
    iterations: int
    converged: bool
    audit: list[dict] = field(default_factory=list)


def forlion_run(evaluator, region: DesignRegion, cfg: ForLionConfig | None = None,
                init: ApproximateDesign | None = None, on_record=None) -> ForLionResult:
    """Run the EW ForLion loop; raises :class:`MaxIterExceeded` carrying the best design.

    ``on_record`` (optional callable) receives every audit record as it is
    produced: a dict with ``iteration, m, objective, d_max, wall_time``.
    """
    cfg = cfg or ForLionConfig()
    p = evaluator.p
    xi = init if init is not None else initial_design(evaluator, region, cfg.seed)
    t0 = time.perf_counter()
    audit: list[dict] = []
    best: ForLionResult | None = None
    for it in range(1, cfg.max_outer_iter + 1):
        xi = merge_step(xi, cfg.delta, region.k, evaluator)
        res = liftone_optimize(evaluator, xi.points, xi.weights, eps=cfg.eps, max_iter=cfg.liftone_max_iter,
                               order=cfg.sweep_order, seed=cfg.seed + it, d_tol=cfg.slack / 2)
        xi = ApproximateDesign.normalized(xi.points, res.weights).drop_zero(ZERO_WEIGHT_TOL)
        sens = Sensitivity(evaluator, xi)
        found = new_point_search(evaluator, xi, region, cfg, it, sens)
        d_max = max(found.d_value, float(sens.at_support().max()))
        obj = det(sens.F)
        rec = {"iteration": it, "m": xi.m, "objective": obj, "d_max": d_max,
               "wall_time": round(time.perf_counter() - t0, 6)}
        audit.append(rec)
        log.info("iteration %d: m=%d objective=%.10g d_max=%.10g", it, xi.m, obj, d_max)
        if on_record is not None:
            on_record(rec)
        current = ForLionResult(xi, obj, d_max, found.x_star, it, False, audit)
        if best is None or obj >= best.objective:
            best = current
        if found.d_value <= p + cfg.slack:
            current.converged = True
            return current
        xi = ApproximateDesign(np.vstack([xi.points, found.x_star]), np.append(xi.weights, 0.0))
    raise MaxIterExceeded(f"no convergence after {cfg.max_outer_iter} outer iterations "
                          f"(last d_max = {audit[-1]['d_max']:.6g}, p = {p})", best.design, audit)
