"""Expected Fisher information over a parameter ensemble.

A prior is turned into a fixed Monte Carlo sample once, so every later
computation treats sample-based and prior-based ensembles identically and
the objective is a deterministic function of the weights.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ApproximateDesign, det, logdet
from .errors import AllDrawsInfeasible, DimensionMismatch, InfeasibleParameters
from .models import glm_nu, glm_nu_prime

DEFAULT_MC_SIZE = 10_000


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"uniform prior needs a < b, got ({self.a}, {self.b})")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.a, self.b, size=n)

    @property
    def mean(self) -> float:
        return (self.a + self.b) / 2


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"normal prior needs sigma > 0, got {self.sigma}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, size=n)

    @property
    def mean(self) -> float:
        return self.mu


class ParameterEnsemble:
    """A finite set of parameter vectors ``thetas`` (B, p), equally weighted.

    Build one with :meth:`from_samples` (bootstrap fits, posterior draws) or
    :meth:`from_prior` (independent per-coordinate priors, materialized with
    a mandatory seed).
    """

    def __init__(self, thetas, kind: str = "sample", prior=None, seed: int | None = None):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[0] < 1 or thetas.shape[1] < 1:
            raise ValueError("ensemble needs at least one parameter vector")
        if not np.all(np.isfinite(thetas)):
            raise ValueError("parameter vectors must be finite")
        thetas.setflags(write=False)
        self.thetas = thetas
        self.kind = kind
        self.prior = tuple(prior) if prior is not None else None
        self.seed = seed

    @classmethod
    def from_samples(cls, thetas) -> "ParameterEnsemble":
        return cls(thetas, "sample")

    @classmethod
    def from_prior(cls, dists: Sequence, mc_size: int = DEFAULT_MC_SIZE, seed: int | None = None,
                   model=None, probe_points=None, feasibility_filter: bool = False) -> "ParameterEnsemble":
        """Draw ``mc_size`` parameter vectors from independent priors.

        With ``model`` and ``probe_points`` given, draws giving invalid
        category probabilities at any probe point are either rejected and
        redrawn (``feasibility_filter=True``) or reported as an error.
        """
        if seed is None:
            raise ValueError("a seed is required to materialize a prior")
        if mc_size < 1:
            raise ValueError("mc_size must be at least 1")
        rng = np.random.default_rng(seed)

        def draw(n):
            return np.column_stack([dist.sample(rng, n) for dist in dists])

        thetas = draw(mc_size)
        if model is not None and probe_points is not None:
            ok = model.check_feasible(probe_points, thetas)
            if not ok.all() and not feasibility_filter:
                raise InfeasibleParameters(f"{(~ok).sum()} prior draws violate the model's parameter constraints")
            kept, rejected = thetas[ok], int((~ok).sum())
            while kept.shape[0] < mc_size:
                if rejected >= 10 * mc_size:
                    raise AllDrawsInfeasible(f"rejected {rejected} prior draws before collecting {mc_size} feasible ones")
                more = draw(mc_size)
                ok = model.check_feasible(probe_points, more)
                rejected += int((~ok).sum())
                kept = np.vstack([kept, more[ok]])
            thetas = kept[:mc_size]
        return cls(thetas, "prior", dists, seed)

    @property
    def B(self) -> int:
        return self.thetas.shape[0]

    @property
    def p(self) -> int:
        return self.thetas.shape[1]

    def __len__(self) -> int:
        return self.B

    def __repr__(self) -> str:
        return f"ParameterEnsemble(kind={self.kind!r}, B={self.B}, p={self.p})"

    def single(self, b: int) -> "ParameterEnsemble":
        """The degenerate ensemble holding only ``thetas[b]`` (locally optimal designs)."""
        return ParameterEnsemble(self.thetas[b:b + 1], "sample")


class ExpectedInfo:
    """Expected per-point information ``F_x`` for one model and ensemble.

    Per-point weight matrices ``E U_x(Theta)`` are cached by the exact bytes
    of ``x``; the cache is safe for concurrent readers and writers.
    """

    def __init__(self, model, ensemble: ParameterEnsemble):
        if ensemble.p != model.p:
            raise DimensionMismatch(f"ensemble has {ensemble.p} parameters, model has {model.p}")
        self.model = model
        self.ensemble = ensemble
        self._cache: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def p(self) -> int:
        return self.model.p

    def _key(self, x) -> bytes:
        return np.ascontiguousarray(x, dtype=float).tobytes()

    def point_weight(self, x) -> np.ndarray:
        """``E U_x(Theta)`` as an (r, r) matrix."""
        x = np.asarray(x, dtype=float)
        key = self._key(x)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        W = self.model.weight_samples(x, self.ensemble.thetas).mean(axis=0)
        W.setflags(write=False)
        with self._lock:
            self._cache.setdefault(key, W)
        return W

    def point_info(self, x) -> np.ndarray:
        Xx = self.model.model_matrix(x)
        return Xx.T @ self.point_weight(x) @ Xx

    def design_info(self, xi: ApproximateDesign) -> np.ndarray:
        """``sum_i w_i F_{x_i}``; GLMs use the ``X^T W X`` matrix form."""
        pts, w = xi.points, xi.weights
        if self.model.kind == "glm":
            H = self.model.h.evaluate(pts)
            nu = np.array([self.point_weight(x)[0, 0] for x in pts])
            return (H * (w * nu)[:, None]).T @ H
        return self.design_info_sum(xi)

    def design_info_sum(self, xi: ApproximateDesign) -> np.ndarray:
        """Plain weighted sum of per-point matrices (reference path)."""
        F = np.zeros((self.p, self.p))
        for x, wi in zip(xi.points, xi.weights):
            F += wi * self.point_info(x)
        return F

    def objective(self, xi: ApproximateDesign) -> float:
        return det(self.design_info(xi))

    def log_objective(self, xi: ApproximateDesign) -> float:
        return logdet(self.design_info(xi))

    def glm_nu_batch(self, X) -> np.ndarray:
        """Vectorized ``E nu(h(x)^T Theta)`` for GLM rows ``X`` (bypasses the cache)."""
        H = self.model.h.evaluate(np.atleast_2d(X))
        return np.mean(glm_nu(self.model.link, H @ self.ensemble.thetas.T), axis=1)

    def glm_nu_gradient_term(self, x) -> tuple[float, np.ndarray]:
        """``(E nu(h^T Theta), E[nu'(h^T Theta) Theta])`` at a GLM point."""
        th = self.ensemble.thetas
        eta = th @ self.model.h.evaluate(x)
        return float(np.mean(glm_nu(self.model.link, eta))), np.mean(glm_nu_prime(self.model.link, eta)[:, None] * th, axis=0)

    def per_theta_info(self, xi: ApproximateDesign, theta) -> np.ndarray:
        """``F(xi, theta)`` for one parameter vector (no expectation)."""
        theta = np.atleast_2d(theta)
        F = np.zeros((self.p, self.p))
        for x, wi in zip(xi.points, xi.weights):
            Xx = self.model.model_matrix(x)
            F += wi * (Xx.T @ self.model.weight_samples(x, theta)[0] @ Xx)
        return F


def expected_point_info(model, x, ens: ParameterEnsemble) -> np.ndarray:
    return ExpectedInfo(model, ens).point_info(x)


def design_info(model, xi: ApproximateDesign, ens: ParameterEnsemble) -> np.ndarray:
    return ExpectedInfo(model, ens).design_info(xi)


def ew_objective(model, xi: ApproximateDesign, ens: ParameterEnsemble) -> float:
    return ExpectedInfo(model, ens).objective(xi)


def log_ew_objective(model, xi: ApproximateDesign, ens: ParameterEnsemble) -> float:
    return ExpectedInfo(model, ens).log_objective(xi)
