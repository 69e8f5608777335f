"""Per-point Fisher information for GLMs and multinomial logistic models.

Both model kinds expose the same small surface so the rest of the package
never branches on the model type:

``model_matrix(x)``
    ``(r, p)`` matrix ``X_x`` (``r = 1`` for a GLM, ``r = J`` for an MLM).
``weight_samples(x, thetas)``
    ``(B, r, r)`` per-parameter weight matrices ``U_x(theta_b)``, so that
    ``F(x, theta_b) = X_x^T U_x(theta_b) X_x``.
``rank``
    upper bound on the rank of ``F(x, theta)`` (``1`` or ``J - 1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DimensionMismatch, InfeasibleParameters
from .predictors import Predictors

ETA_GUARD = 35.0
LINKS = ("logit", "probit", "cloglog", "loglog", "identity")
FAMILIES = ("baseline", "cumulative", "adjacent", "continuation")


# --- GLM weight function --------------------------------------------------

def _nu_cloglog(eta):
    t = np.exp(eta)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.where(t > 0, t / np.expm1(t), 1.0)
    return t * ratio


def _dnu_cloglog(eta):
    # nu = t^2 / (e^t - 1), t = e^eta  =>  nu' = nu * (2 - t e^t / (e^t - 1))
    t = np.exp(eta)
    with np.errstate(over="ignore", invalid="ignore"):
        frac = np.where(t > 1e-8, t / (-np.expm1(-t)), 1.0 + t / 2)
    return _nu_cloglog(eta) * (2.0 - frac)


def glm_nu(link: str, eta):
    """GLM weight ``nu = ((g^{-1})')^2 / Var``; zero beyond ``|eta| > 35``."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        a = np.exp(-np.abs(eta))
        out = a / (1.0 + a) ** 2
    elif link == "probit":
        out = np.exp(2 * (-0.5 * eta**2 - 0.5 * np.log(2 * np.pi))
                     - special.log_ndtr(eta) - special.log_ndtr(-eta))
    elif link == "cloglog":
        out = _nu_cloglog(eta)
    elif link == "loglog":
        out = _nu_cloglog(-eta)
    elif link == "identity":
        out = np.ones_like(eta)
    else:
        raise ValueError(f"unknown link {link!r}")
    if link != "identity":
        out = np.where(np.abs(eta) > ETA_GUARD, 0.0, out)
    return out if out.ndim else float(out)


def glm_nu_prime(link: str, eta):
    """Analytic derivative of :func:`glm_nu` with respect to ``eta``."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        s = special.expit(eta)
        out = s * (1 - s) * (1 - 2 * s)
    elif link == "probit":
        # d log nu / d eta = -2 eta - phi/Phi + phi/(1 - Phi)
        mills_lo = np.exp(-0.5 * eta**2 - 0.5 * np.log(2 * np.pi) - special.log_ndtr(eta))
        mills_hi = np.exp(-0.5 * eta**2 - 0.5 * np.log(2 * np.pi) - special.log_ndtr(-eta))
        out = glm_nu("probit", eta) * (-2 * eta - mills_lo + mills_hi)
    elif link == "cloglog":
        out = _dnu_cloglog(eta)
    elif link == "loglog":
        out = -_dnu_cloglog(-eta)
    elif link == "identity":
        out = np.zeros_like(eta)
    else:
        raise ValueError(f"unknown link {link!r}")
    if link != "identity":
        out = np.where(np.abs(eta) > ETA_GUARD, 0.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GlmModel:
    """Binary/count GLM with ``F(x, theta) = nu(h(x)^T theta) h(x) h(x)^T``."""

    link: str
    h: Predictors

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}; choose from {LINKS}")
        if len(self.h) < 1:
            raise ValueError("a GLM needs at least one predictor")

    kind = "glm"
    rank = 1
    j_eff = 2

    @property
    def p(self) -> int:
        return len(self.h)

    @property
    def d(self) -> int:
        return self.h.d

    def model_matrix(self, x) -> np.ndarray:
        return self.h.evaluate(x)[None, :]

    def model_matrices(self, X) -> np.ndarray:
        return self.h.evaluate(np.atleast_2d(X))[:, None, :]

    def nu_samples(self, x, thetas) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        return glm_nu(self.link, thetas @ self.h.evaluate(x))

    def weight_samples(self, x, thetas) -> np.ndarray:
        return self.nu_samples(x, thetas)[:, None, None]

    def info(self, x, theta) -> np.ndarray:
        hx = self.h.evaluate(x)
        return glm_nu(self.link, float(hx @ np.asarray(theta, dtype=float))) * np.outer(hx, hx)

    def check_feasible(self, points, thetas) -> np.ndarray:
        return np.ones(np.atleast_2d(thetas).shape[0], dtype=bool)

    def predictor_gradient(self, x, k: int) -> np.ndarray:
        return self.h.jacobian(x, k)


# --- multinomial logistic models ------------------------------------------

def _softmax_last_zero(z):
    """Softmax of ``[z, 0]`` along the last axis."""
    full = np.concatenate([z, np.zeros(z.shape[:-1] + (1,))], axis=-1)
    full = full - full.max(axis=-1, keepdims=True)
    e = np.exp(full)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_jacobian(pi):
    return pi[..., :, None] * (np.eye(pi.shape[-1]) - pi[..., None, :])


def mlm_pi(family: str, eta) -> np.ndarray:
    """Category probabilities for linear predictors ``eta`` (..., J-1)."""
    return _pi_and_jacobian(family, eta)[0]


def mlm_jacobian(family: str, eta) -> np.ndarray:
    """``dpi/deta`` as (..., J, J) with a zero last column (eta_J is not a parameter)."""
    return _pi_and_jacobian(family, eta)[1]


def _pi_and_jacobian(family: str, eta):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 0 or eta.shape[-1] < 1:
        raise DimensionMismatch("eta must have J-1 >= 1 trailing entries")
    if not np.all(np.isfinite(eta)):
        raise InfeasibleParameters("non-finite linear predictor")
    J = eta.shape[-1] + 1
    D = np.zeros(eta.shape[:-1] + (J, J))
    if family == "baseline":
        pi = _softmax_last_zero(eta)
        D[..., :, : J - 1] = _softmax_jacobian(pi)[..., :, : J - 1]
    elif family == "adjacent":
        # log(pi_j / pi_J) = eta_j + ... + eta_{J-1}
        zeta = np.flip(np.cumsum(np.flip(eta, -1), -1), -1)
        pi = _softmax_last_zero(zeta)
        upper = np.triu(np.ones((J - 1, J - 1)))
        D[..., :, : J - 1] = _softmax_jacobian(pi)[..., :, : J - 1] @ upper
    elif family == "cumulative":
        if J > 2 and np.any(np.diff(eta, axis=-1) <= 0):
            raise InfeasibleParameters("cumulative logits must be strictly increasing in the category index")
        lo = np.concatenate([np.full(eta.shape[:-1] + (1,), -np.inf), eta], -1)
        hi = np.concatenate([eta, np.full(eta.shape[:-1] + (1,), np.inf)], -1)
        # gamma_j - gamma_{j-1}, evaluated on the side that avoids cancellation
        direct = special.expit(hi) - special.expit(lo)
        compl = special.expit(-lo) - special.expit(-hi)
        pi = np.where(lo + hi > 0, compl, direct)
        ds = special.expit(eta) * special.expit(-eta)
        idx = np.arange(J - 1)
        D[..., idx, idx] = ds
        D[..., idx + 1, idx] = -ds
    elif family == "continuation":
        # pi_j / (pi_j + ... + pi_J) = expit(eta_j)
        log_rho = special.log_expit(eta)
        log_1m = special.log_expit(-eta)
        before = np.concatenate([np.zeros(eta.shape[:-1] + (1,)), np.cumsum(log_1m, -1)], -1)
        pi = np.exp(before + np.concatenate([log_rho, np.zeros(eta.shape[:-1] + (1,))], -1))
        rho = special.expit(eta)
        for j in range(J - 1):
            D[..., j, j] = pi[..., j] * (1 - rho[..., j])
            D[..., j + 1:, j] = -pi[..., j + 1:] * rho[..., j, None]
    else:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if np.any(pi < 0):
        raise InfeasibleParameters("negative category probability")
    return pi, D


def mlm_weight(family: str, eta) -> np.ndarray:
    """``U = D^T diag(1/pi) D`` for linear predictors ``eta`` (..., J-1) -> (..., J, J)."""
    pi, D = _pi_and_jacobian(family, eta)
    with np.errstate(divide="ignore"):
        inv = np.where(pi > 0, 1.0 / pi, 0.0)
    U = np.einsum("...ij,...i,...ik->...jk", D, inv, D)
    return (U + np.swapaxes(U, -1, -2)) / 2


class MlmModel:
    """Multinomial logistic model with the block model matrix

    row j (< J) = ``[0 .. h_j(x)^T .. 0, h_c(x)^T]``, row J = 0.
    """

    kind = "mlm"

    def __init__(self, J: int, family: str, h: Sequence[Predictors], h_common: Predictors | None = None):
        if J < 3:
            raise ValueError("multinomial models need J >= 3 categories")
        if family not in FAMILIES:
            raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
        h = list(h)
        if len(h) != J - 1:
            raise DimensionMismatch(f"need J-1 = {J - 1} category-specific predictor lists, got {len(h)}")
        dims = {hj.d for hj in h} | ({h_common.d} if h_common is not None else set())
        if len(dims) != 1:
            raise DimensionMismatch("predictor lists disagree on the factor count")
        self.J = int(J)
        self.family = family
        self.h = tuple(h)
        self.h_common = h_common if h_common is not None and len(h_common) else None
        self.block_sizes = tuple(len(hj) for hj in self.h) + (len(self.h_common) if self.h_common else 0,)
        if sum(self.block_sizes) < 1:
            raise ValueError("model has no parameters")
        self.d = dims.pop()

    @classmethod
    def po(cls, J, family, common: Predictors) -> "MlmModel":
        """Proportional odds: intercept per category plus shared slopes."""
        one = Predictors.parse(["1"], [f"x{i + 1}" for i in range(common.d)])
        return cls(J, family, [one] * (J - 1), common)

    @classmethod
    def npo(cls, J, family, h: Predictors) -> "MlmModel":
        return cls(J, family, [h] * (J - 1), None)

    @property
    def p(self) -> int:
        return sum(self.block_sizes)

    @property
    def rank(self) -> int:
        return self.J - 1

    @property
    def j_eff(self) -> int:
        return self.J

    def __repr__(self) -> str:
        return f"MlmModel(J={self.J}, family={self.family!r}, blocks={self.block_sizes})"

    def model_matrices(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros((X.shape[0], self.J, self.p))
        col = 0
        for j, hj in enumerate(self.h):
            out[:, j, col: col + len(hj)] = hj.evaluate(X)
            col += len(hj)
        if self.h_common is not None:
            out[:, : self.J - 1, col:] = self.h_common.evaluate(X)[:, None, :]
        return out

    def model_matrix(self, x) -> np.ndarray:
        return self.model_matrices(np.asarray(x, dtype=float)[None, :])[0]

    def eta(self, x, thetas) -> np.ndarray:
        """Linear predictors (B, J-1) for each parameter row."""
        Xx = self.model_matrix(x)
        return np.atleast_2d(thetas) @ Xx[: self.J - 1].T

    def pi(self, x, theta) -> np.ndarray:
        return mlm_pi(self.family, self.eta(x, theta)[0])

    def weight_samples(self, x, thetas) -> np.ndarray:
        return mlm_weight(self.family, self.eta(x, thetas))

    def U(self, x, theta) -> np.ndarray:
        return self.weight_samples(x, theta)[0]

    def info(self, x, theta) -> np.ndarray:
        Xx = self.model_matrix(x)
        return Xx.T @ self.U(x, theta) @ Xx

    def check_feasible(self, points, thetas) -> np.ndarray:
        """Mask of parameter rows giving valid probabilities at every probe point."""
        thetas = np.atleast_2d(thetas)
        ok = np.ones(thetas.shape[0], dtype=bool)
        if self.family != "cumulative":
            return ok
        for x in np.atleast_2d(points):
            ok &= np.all(np.diff(self.eta(x, thetas), axis=-1) > 0, axis=-1)
        return ok

    def predictor_gradient(self, x, k: int) -> np.ndarray:
        """Jacobian of the stacked predictor vector ``(h_1, ..., h_{J-1}, h_c)``."""
        parts = [hj.jacobian(x, k) for hj in self.h]
        if self.h_common is not None:
            parts.append(self.h_common.jacobian(x, k))
        return np.vstack(parts)


def glm_info(model: GlmModel, x, theta) -> np.ndarray:
    return model.info(x, theta)


def mlm_info(model: MlmModel, x, theta) -> np.ndarray:
    return model.info(x, theta)


def mlm_model_matrix(model: MlmModel, x) -> np.ndarray:
    return model.model_matrix(x)


def mlm_U(model: MlmModel, x, theta) -> np.ndarray:
    return model.U(x, theta)


def predictor_gradient(model, x, k: int) -> np.ndarray:
    return model.predictor_gradient(x, k)
