"""EW lift-one weight optimization over a fixed set of design points.

Lifting point ``i`` to weight ``z`` while scaling the other weights by
``(1 - z) / (1 - w_i)`` turns the objective into a polynomial in ``z``::

    f_i(z) = (1 - z)^(p - J + 1) * sum_j b_j z^j (1 - z)^(J - 1 - j)

because ``F_{x_i}`` has rank at most ``J - 1`` (``J = 2`` for a GLM).  The
coefficients ``b_j`` come from ``J`` determinant evaluations, and the
maximizer over ``[0, 1]`` from the real roots of a degree ``J - 1``
stationarity polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import det, inverse
from .errors import DegenerateProfile, SingularMatrix, SingularStart
from .roots import real_roots

VANDERMONDE_COND_MAX = 1e12
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class LiftOneProfile:
    """Coefficients of ``f_i(z)``.

    ``b`` holds ``b_0 .. b_{J-1}``.  When the structured system is too
    ill-conditioned, ``power`` instead holds plain ascending power-basis
    coefficients of ``f_i`` fitted at Chebyshev nodes, and ``b`` is empty.
    """

    i: int
    b: np.ndarray
    p: int
    J_eff: int
    power: np.ndarray | None = None

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.power is not None:
            return np.polynomial.polynomial.polyval(z, self.power)
        J = self.J_eff
        g = sum(self.b[j] * z ** j * (1 - z) ** (J - 1 - j) for j in range(J))
        return (1 - z) ** (self.p - J + 1) * g

    def stationarity_coeffs(self) -> np.ndarray:
        """Ascending coefficients ``A_0..A_{J-1}`` with ``f_i'(z) = -(1-z)^(p-J) sum_j A_j z^j``."""
        return stationarity_coeffs(self.b, self.p)


def stationarity_coeffs(b, p: int) -> np.ndarray:
    """Stationarity polynomial of a lift-one profile; closed forms for J <= 5."""
    b = np.asarray(b, dtype=float)
    J = b.size
    if J == 2:
        b0, b1 = b
        return np.array([b0 * p - b1, p * (b1 - b0)])
    if J == 3:
        b0, b1, b2 = b
        return np.array([b0 * p - b1, b1 * (1 + p) - 2 * (b0 * p + b2), p * (b0 - b1 + b2)])
    if J == 4:
        b0, b1, b2, b3 = b
        return np.array([
            b0 * p - b1,
            -3 * b0 * p + b1 * (2 + p) - 2 * b2,
            3 * b0 * p - b1 * (1 + 2 * p) + b2 * (2 + p) - 3 * b3,
            p * (-b0 + b1 - b2 + b3),
        ])
    if J == 5:
        b0, b1, b2, b3, b4 = b
        return np.array([
            b0 * p - b1,
            -4 * b0 * p + b1 * (3 + p) - 2 * b2,
            6 * b0 * p - 3 * b1 * (1 + p) + b2 * (4 + p) - 3 * b3,
            -4 * b0 * p + b1 * (1 + 3 * p) - 2 * b2 * (1 + p) + b3 * (3 + p) - 4 * b4,
            p * (b0 - b1 + b2 - b3 + b4),
        ])
    return generic_stationarity_coeffs(b, p)


def generic_stationarity_coeffs(b, p: int) -> np.ndarray:
    """Same polynomial built by power-basis arithmetic (any ``J``)."""
    P = np.polynomial.Polynomial
    b = np.asarray(b, dtype=float)
    J = b.size
    one_minus = P([1.0, -1.0])
    g = sum((b[j] * P.basis(j) * one_minus ** (J - 1 - j) for j in range(J)), P([0.0]))
    deriv = -(p - J + 1) * g + one_minus * g.deriv()
    coef = -deriv.coef
    out = np.zeros(J)
    out[: min(J, coef.size)] = coef[:J]
    return out


def _profile_matrices(F_all: np.ndarray, F_i: np.ndarray, w_i: float):
    """Normalized 'rest' matrix so that F(z) = (1 - z) F_rest + z F_i."""
    return (F_all - w_i * F_i) / (1.0 - w_i)


def build_profile(i: int, F_rest: np.ndarray, F_i: np.ndarray, p: int, J_eff: int) -> LiftOneProfile:
    """Solve for ``b`` from determinant evaluations of ``(1-z) F_rest + z F_i``."""
    J = min(J_eff, p + 1)

    def f(z):
        return det((1 - z) * F_rest + z * F_i)

    b0 = f(0.0)
    if J == 1:
        return LiftOneProfile(i, np.array([b0]), p, 1)
    js = np.arange(1, J, dtype=float)
    c = np.array([(j + 1) ** p * j ** (J - 1 - p) * f(1 / (j + 1)) - j ** (J - 1) * b0 for j in js])
    # c_j = sum_{l>=1} b_l j^(J-1-l): Vandermonde in j, unknowns (b_{J-1}, ..., b_1)
    V = np.vander(js, J - 1, increasing=True)
    if np.linalg.cond(V) > VANDERMONDE_COND_MAX:
        return _chebyshev_profile(i, f, p, J)
    rev = np.linalg.solve(V, c)
    b = np.concatenate([[b0], rev[::-1]])
    return LiftOneProfile(i, b, p, J)


def _chebyshev_profile(i, f, p, J) -> LiftOneProfile:
    nodes = 0.5 - 0.5 * np.cos((2 * np.arange(p + 1) + 1) * np.pi / (2 * (p + 1)))
    vals = np.array([f(z) for z in nodes])
    coef = np.polynomial.polynomial.polyfit(nodes, vals, p)
    return LiftOneProfile(i, np.empty(0), p, J, power=coef)


def lift_profile(evaluator, xi, i: int) -> LiftOneProfile:
    """Profile of the EW objective when point ``i`` of ``xi`` is lifted."""
    mats = [evaluator.point_info(x) for x in xi.points]
    F_all = sum(w * M for w, M in zip(xi.weights, mats))
    w_i = float(xi.weights[i])
    if w_i >= 1 - 1e-12:
        raise DegenerateProfile("the lifted point already carries all the weight")
    prof = build_profile(i, _profile_matrices(F_all, mats[i], w_i), mats[i], evaluator.p, evaluator.model.j_eff)
    if _is_zero_profile(prof):
        raise DegenerateProfile(f"profile of point {i} vanishes identically")
    return prof


def _is_zero_profile(prof: LiftOneProfile) -> bool:
    coef = prof.power if prof.power is not None else prof.b
    return not np.any(coef != 0)


def maximize_profile(prof: LiftOneProfile) -> tuple[float, float]:
    """Return ``(z*, f(z*))`` maximizing the profile on ``[0, 1]``.

    Candidates are ``z = 0``, ``z = 1`` and the real stationary points in
    ``(0, 1)``; ties resolve toward the smallest ``z``.
    """
    if prof.power is not None:
        d = np.polynomial.polynomial.polyder(prof.power)
        interior = real_roots(d[::-1])
    elif prof.J_eff == 2:
        b0, b1 = prof.b
        p = prof.p
        interior = [(p * b0 - b1) / (p * (b0 - b1))] if b0 != b1 else []
    else:
        A = prof.stationarity_coeffs()
        interior = real_roots(A[::-1])
    cands = [0.0] + sorted(z for z in interior if 0.0 < z < 1.0) + [1.0]
    best_z, best_f = 0.0, float(prof(0.0))
    for z in cands[1:]:
        fz = float(prof(z))
        if fz > best_f + TIE_RTOL * abs(best_f):
            best_z, best_f = z, fz
    return best_z, best_f


def _max_sensitivity(F, mats) -> float:
    try:
        A = inverse(F)
    except SingularMatrix:
        return np.inf
    return float(np.max(np.einsum("jk,ikj->i", A, mats)))


def newton_polish(mats: np.ndarray, w: np.ndarray, d_tol: float, max_steps: int = 50):
    """Newton steps for ``log det`` over the simplex, restricted to the current support.

    Lift-one is a coordinate method and crawls when support points are
    nearly collinear.  Each step solves the equality-constrained Newton
    system (least squares, since near-duplicate points make the Hessian
    almost singular), stops at the nonnegativity boundary and backtracks
    until ``log det`` increases.  Returns ``(w, F, det F)``.
    """
    w = w.copy()
    F = np.einsum("i,ijk->jk", w, mats)
    f = det(F)
    p = mats.shape[1]
    for _ in range(max_steps):
        S = np.flatnonzero(w > 0)
        A = inverse(F)
        G = np.einsum("jk,ikl->ijl", A, mats[S])
        g = np.einsum("ijj->i", G)
        if np.max(np.abs(g - p)) <= d_tol / 4:
            break
        H = -np.einsum("ijk,lkj->il", G, G)
        n = S.size
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = H
        K[:n, n] = K[n, :n] = 1.0
        step = np.linalg.lstsq(K, np.concatenate([-g, [0.0]]), rcond=None)[0][:n]
        neg = step < 0
        t_max = np.min(-w[S][neg] / step[neg]) if neg.any() else np.inf
        t = min(1.0, t_max)
        improved = False
        for _ in range(40):
            cand = w.copy()
            cand[S] = np.maximum(w[S] + t * step, 0.0)
            if t == t_max:
                cand[S[neg][np.argmin(-w[S][neg] / step[neg])]] = 0.0
            cand /= cand.sum()
            F_c = np.einsum("i,ijk->jk", cand, mats)
            f_c = det(F_c)
            if f_c > f:
                w, F, f = cand, F_c, f_c
                improved = True
                break
            t /= 2
        if not improved:
            break
    return w, F, f


@dataclass
class LiftOneResult:
    weights: np.ndarray
    objective: float
    sweeps: int
    converged: bool
    trajectory: list[float] = field(default_factory=list)


def liftone_optimize(evaluator, points, weights=None, eps: float = 1e-6, max_iter: int = 1000,
                     order: str = "cyclic", seed: int = 0, restarts: int = 10,
                     d_tol: float | None = None) -> LiftOneResult:
    """EW lift-one over the fixed ``points``.

    A sweep visits every point once, in index order (``order="cyclic"``) or
    in a fresh permutation (``order="random"``).  Iteration stops when a
    sweep improves the objective by less than ``eps`` relative; with
    ``d_tol`` it must also hold that every point's sensitivity is at most
    ``p + d_tol``, which is the discrete optimality condition.

    Returns the weights plus the objective after every accepted update in
    ``trajectory``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    p = evaluator.p
    mats = np.array([evaluator.point_info(x) for x in points])
    # a common scale keeps the determinants away from over/underflow
    scale = max(np.mean([np.trace(M) for M in mats]) / p, np.finfo(float).tiny)
    mats = mats / scale
    rng = np.random.default_rng(seed)

    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float).copy()
    if w.shape != (m,):
        raise ValueError(f"{w.size} weights for {m} points")
    w = w / w.sum()
    F = np.einsum("i,ijk->jk", w, mats)
    f = det(F)
    tries = 0
    while not f > 0:
        if tries >= restarts:
            raise SingularStart(f"objective is zero at the start and after {restarts} random restarts")
        w = rng.dirichlet(np.ones(m))
        F = np.einsum("i,ijk->jk", w, mats)
        f = det(F)
        tries += 1

    rescale = scale ** p
    trajectory = [f * rescale]
    converged = False
    sweeps = 0
    J_eff = evaluator.model.j_eff
    while sweeps < max_iter:
        sweeps += 1
        f_start = f
        idx = rng.permutation(m) if order == "random" else range(m)
        for i in idx:
            w_i = w[i]
            if w_i > 1 - 1e-12:
                continue
            F_rest = _profile_matrices(F, mats[i], w_i)
            prof = build_profile(int(i), F_rest, mats[i], p, J_eff)
            z, fz = maximize_profile(prof)
            if not fz > f:
                continue
            new_w = w * ((1 - z) / (1 - w_i))
            new_w[i] = z
            new_F = (1 - z) * F_rest + z * mats[i]
            new_f = det(new_F)
            if new_f < f:
                continue
            w, F, f = new_w, new_F, new_f
            trajectory.append(f * rescale)
        if f - f_start <= eps * abs(f_start):
            if d_tol is None or _max_sensitivity(F, mats) <= p + d_tol:
                converged = True
                break
            # sweeps have stalled short of the sensitivity bound
            w_new, F_new, f_new = newton_polish(mats, w, d_tol)
            if f_new > f:
                w, F, f = w_new, F_new, f_new
                trajectory.append(f * rescale)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return LiftOneResult(w, f * rescale, sweeps, converged, trajectory)
