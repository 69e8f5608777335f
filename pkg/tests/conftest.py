from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from ewdesign import (ApproximateDesign, DesignRegion, ExpectedInfo, GlmModel, MlmModel, Normal,
                      ParameterEnsemble, Predictors)

DATA = Path(__file__).parent / "data"
CONFIGS = Path(__file__).parent.parent / "configs"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS


def small_glm(link="logit", seed=0, B=50):
    """Logistic model in two continuous factors with a modest sampled ensemble."""
    region = DesignRegion(((-1.0, 1.0), (-1.0, 1.0)))
    model = GlmModel(link, Predictors.linear(2))
    ens = ParameterEnsemble.from_prior([Normal(0.3, 0.4), Normal(1.0, 0.5), Normal(-0.8, 0.5)],
                                       mc_size=B, seed=seed)
    return region, model, ExpectedInfo(model, ens)


def mixed_glm(seed=0, B=40):
    """One continuous factor crossed with a two-level factor."""
    region = DesignRegion.full_factorial(((0.0, 3.0),), ((-1.0, 1.0),))
    model = GlmModel("logit", Predictors.parse(["1", "x1", "x2", "x1*x2"], ["x1", "x2"]))
    ens = ParameterEnsemble.from_prior([Normal(-1, 0.3), Normal(0.8, 0.2), Normal(0.3, 0.2), Normal(0.1, 0.1)],
                                       mc_size=B, seed=seed)
    return region, model, ExpectedInfo(model, ens)


def cumulative_po(seed=0, B=20):
    region = DesignRegion(((0.0, 4.0),))
    model = MlmModel.po(3, "cumulative", Predictors.parse(["x1"], ["x1"]))
    rng = np.random.default_rng(seed)
    thetas = np.column_stack([rng.uniform(-2.5, -1.5, B), rng.uniform(0.5, 1.5, B), rng.uniform(0.5, 1.0, B)])
    return region, model, ExpectedInfo(model, ParameterEnsemble.from_samples(thetas))


def random_design(region: DesignRegion, m: int, rng: np.random.Generator) -> ApproximateDesign:
    idx = rng.integers(0, region.combos.shape[0], m)
    cont = rng.uniform(region.lower, region.upper, (m, region.k))
    pts = np.hstack([cont, region.combos[idx]])
    return ApproximateDesign.normalized(pts, rng.dirichlet(np.ones(m)))


def nonsingular_design(region, ev, m, rng) -> ApproximateDesign:
    from ewdesign import det

    while True:
        xi = random_design(region, m, rng)
        if det(ev.design_info(xi)) > 0:
            return xi


# one line per acceptance criterion, echoed again at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
