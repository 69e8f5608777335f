"""Design comparison: relative efficiencies, optimality checks, robustness studies."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ApproximateDesign, DesignRegion, det
from .errors import ReferenceSingular
from .expectation import ExpectedInfo, ParameterEnsemble
from .forlion import ForLionConfig, Sensitivity, forlion_run, new_point_search

log = logging.getLogger(__name__)


def _as_evaluator(model, ens_or_theta) -> ExpectedInfo:
    if isinstance(ens_or_theta, ExpectedInfo):
        return ens_or_theta
    if not isinstance(ens_or_theta, ParameterEnsemble):
        ens_or_theta = ParameterEnsemble.from_samples(np.atleast_2d(ens_or_theta))
    return ExpectedInfo(model, ens_or_theta)


def efficiency_from_dets(det_a: float, det_b: float, p: int) -> float:
    if not det_b > 0:
        raise ReferenceSingular("reference design has a singular information matrix")
    if not det_a > 0:
        return 0.0
    return float((det_a / det_b) ** (1.0 / p))


def relative_efficiency(model, xi_a: ApproximateDesign, xi_b: ApproximateDesign, ens_or_theta) -> float:
    """``(|F(xi_a)| / |F(xi_b)|)^(1/p)`` under one parameter vector or an ensemble."""
    ev = _as_evaluator(model, ens_or_theta)
    return efficiency_from_dets(ev.objective(xi_a), ev.objective(xi_b), model.p)


@dataclass
class VerifyReport:
    d_max: float
    argmax: np.ndarray
    passed: bool
    p: int
    tol: float
    grid_points: int


def grid_points(region: DesignRegion, density: int) -> np.ndarray:
    """Every axis at ``density`` evenly spaced values, crossed with every combo."""
    if region.k == 0:
        return region.combos.copy()
    axes = [np.linspace(a, b, density) for a, b in region.continuous_bounds]
    box = np.array(list(itertools.product(*axes)))
    return np.vstack([np.hstack([box, np.repeat(c[None, :], len(box), 0)]) for c in region.combos])


def verify_design(evaluator, xi: ApproximateDesign, region: DesignRegion, grid_density: int = 201,
                  tol: float = 2e-6, search: ForLionConfig | None = None) -> VerifyReport:
    """Check ``max_x d(x, xi) <= p + tol`` by a grid scan plus a multistart search."""
    sens = Sensitivity(evaluator, xi)
    X = np.vstack([grid_points(region, grid_density), xi.points])
    vals = sens.values(X)
    i = int(np.argmax(vals))
    d_max, arg = float(vals[i]), X[i]
    if region.k:
        found = new_point_search(evaluator, xi, region, search or ForLionConfig(), 0, sens)
        if found.d_value > d_max:
            d_max, arg = found.d_value, found.x_star
    p = evaluator.p
    return VerifyReport(d_max, np.asarray(arg), d_max <= p + tol, p, tol, X.shape[0])


def per_theta_dets(model, xi: ApproximateDesign, thetas) -> np.ndarray:
    """``|F(xi, theta_b)|`` for every row of ``thetas``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    p = model.p
    F = np.zeros((thetas.shape[0], p, p))
    for x, wi in zip(xi.points, xi.weights):
        Xx = model.model_matrix(x)
        U = model.weight_samples(x, thetas)
        F += wi * np.einsum("ji,bjk,kl->bil", Xx, U, Xx)
    return np.array([det(M) for M in F])


def per_theta_objective(model, xi: ApproximateDesign, thetas) -> np.ndarray:
    """``|F(xi, theta_b)|^(1/p)`` for every row of ``thetas``."""
    d = per_theta_dets(model, xi, thetas)
    return np.where(d > 0, np.abs(d), 0.0) ** (1.0 / model.p)


def five_number(values) -> tuple[float, float, float, float, float]:
    """Min, lower quartile, median, upper quartile, max (linear interpolation quantiles)."""
    q = np.quantile(np.asarray(values, dtype=float), [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return tuple(float(v) for v in q)


def frequency_bins(values, bins: int = 30, range_=None) -> tuple[np.ndarray, np.ndarray]:
    """Histogram edges and counts for drawing a frequency polygon elsewhere."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=range_)
    return edges, counts


@dataclass
class EfficiencyReport:
    label: str
    efficiencies: np.ndarray
    objective_values: np.ndarray
    summary: tuple[float, float, float, float, float] = field(init=False)
    mean: float = field(init=False)

    def __post_init__(self):
        self.efficiencies = np.asarray(self.efficiencies, dtype=float)
        self.objective_values = np.asarray(self.objective_values, dtype=float)
        self.summary = five_number(self.efficiencies)
        self.mean = float(np.mean(self.efficiencies))

    @property
    def minimum(self) -> float:
        return self.summary[0]

    @property
    def median(self) -> float:
        return self.summary[2]


class LocalOptimumCache:
    """Locally optimal designs keyed by the exact bytes of ``theta``."""

    def __init__(self, model, region: DesignRegion, cfg: ForLionConfig | None = None):
        self.model = model
        self.region = region
        self.cfg = cfg or ForLionConfig()
        self._store: dict[bytes, ApproximateDesign] = {}

    def __call__(self, theta) -> ApproximateDesign:
        theta = np.ascontiguousarray(theta, dtype=float)
        key = theta.tobytes()
        if key not in self._store:
            ev = ExpectedInfo(self.model, ParameterEnsemble.from_samples(theta[None, :]))
            self._store[key] = forlion_run(ev, self.region, self.cfg).design
        return self._store[key]

    def __len__(self) -> int:
        return len(self._store)


def robustness_study(model, designs: Sequence[ApproximateDesign], thetas, reference="local",
                     labels: Sequence[str] | None = None, local: LocalOptimumCache | None = None,
                     max_local: int | None = None) -> list[EfficiencyReport]:
    """Per-parameter efficiencies of each design against a reference.

    ``reference`` is an index into ``designs`` or ``"local"``, in which
    case the locally optimal design for every ``theta`` is computed (or
    taken from ``local``, which must then be supplied).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    labels = list(labels) if labels is not None else [f"design{i + 1}" for i in range(len(designs))]
    p = model.p
    dets = [per_theta_dets(model, xi, thetas) for xi in designs]
    if reference == "local":
        if local is None:
            raise ValueError("a LocalOptimumCache is needed for locally optimal references")
        if max_local is not None and thetas.shape[0] > max_local:
            raise ValueError(f"{thetas.shape[0]} locally optimal designs requested, cap is {max_local}")
        ref = np.empty(thetas.shape[0])
        for b, th in enumerate(thetas):
            ref[b] = per_theta_dets(model, local(th), th[None, :])[0]
            log.info("local reference %d/%d done", b + 1, thetas.shape[0])
    else:
        ref = dets[int(reference)]
    reports = []
    for lab, d in zip(labels, dets):
        eff = np.array([efficiency_from_dets(a, r, p) for a, r in zip(d, ref)])
        raw = np.where(d > 0, d, 0.0) ** (1.0 / p)
        reports.append(EfficiencyReport(lab, eff, raw))
    return reports
