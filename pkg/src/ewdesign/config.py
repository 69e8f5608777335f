"""Experiment configuration files (YAML) with line/column error reporting.

Example::

    seed: 2024
    region:
      continuous:
        - {name: x1, lower: -2, upper: 2}
      discrete:
        - {name: lot, levels: [-1, 1]}
    model:
      kind: glm
      link: logit
      predictors: ["1", x1, lot]
    ensemble:
      prior:
        - {dist: normal, mu: 1, sigma: 1}
        - {dist: uniform, a: 0, b: 1}
        - {dist: normal, mu: 0, sigma: 0.5}
      mc_size: 10000
    forlion: {delta: 0.01, eps: 1.0e-6}
    rounding: {n: 100, grid_levels: [0.1]}
    verify: {grid_density: 51}
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .core import DesignRegion
from .errors import ConfigError
from .expectation import DEFAULT_MC_SIZE, Normal, ParameterEnsemble, Uniform
from .forlion import ForLionConfig
from .io import read_thetas
from .models import FAMILIES, LINKS, GlmModel, MlmModel
from .predictors import Predictors
from .rounding import ALLOCATIONS, RoundingConfig

TOP_KEYS = {"seed", "region", "model", "ensemble", "forlion", "rounding", "verify", "output"}


class _Doc:
    """Parsed YAML plus the source position of every mapping key and item."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            self.data = yaml.safe_load(text)
            node = yaml.compose(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
            raise ConfigError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from exc
        self.marks: dict[tuple, tuple[int, int]] = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.marks[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                self._walk(value, path + (key.value,))
                # errors about a key point at the key itself, not its value
                self.marks[path + (key.value,)] = (key.start_mark.line + 1, key.start_mark.column + 1)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                self._walk(item, path + (i,))

    def error(self, path: tuple, message: str) -> ConfigError:
        probe = tuple(path)
        while probe and probe not in self.marks:
            probe = probe[:-1]
        line, col = self.marks.get(probe, (1, 1))
        dotted = ".".join(str(p) for p in path) or "<root>"
        return ConfigError(f"{self.source}:{line}:{col}: {dotted}: {message}")


def _get(doc: _Doc, obj: dict, path: tuple, key: str, kind=None, default: Any = ..., check=None):
    if not isinstance(obj, dict) or key not in obj:
        if default is ...:
            raise doc.error(path, f"missing required key {key!r}")
        return default
    value = obj[key]
    if kind is not None:
        try:
            if kind is float and isinstance(value, bool):
                raise TypeError
            if kind is int and (isinstance(value, bool) or int(value) != value):
                raise TypeError
            value = kind(value)
        except (TypeError, ValueError):
            raise doc.error(path + (key,), f"expected {kind.__name__}, got {value!r}") from None
    if check is not None and not check(value):
        raise doc.error(path + (key,), f"invalid value {value!r}")
    return value


def _mapping(doc: _Doc, obj, path: tuple, allowed: set[str] | None = None) -> dict:
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise doc.error(path, "expected a mapping")
    if allowed is not None:
        for key in obj:
            if key not in allowed:
                raise doc.error(path + (key,), f"unknown key {key!r}; allowed: {sorted(allowed)}")
    return obj


def _list(doc: _Doc, obj, path: tuple) -> list:
    if not isinstance(obj, list):
        raise doc.error(path, "expected a list")
    return obj


@dataclass
class ExperimentConfig:
    source: Path
    seed: int | None
    region: DesignRegion
    model: Any
    thetas_csv: Path | None
    prior: list | None
    mc_size: int
    feasibility_filter: bool
    forlion: ForLionConfig
    rounding: RoundingConfig | None
    grid_density: int
    verify_tol: float
    output_dir: Path

    @property
    def names(self) -> tuple[str, ...]:
        return self.region.factor_names()

    def ensemble(self, seed: int | None = None) -> ParameterEnsemble:
        """Materialize the parameter ensemble (the seed override applies to priors)."""
        if self.thetas_csv is not None:
            return ParameterEnsemble.from_samples(read_thetas(self.thetas_csv, self.model.p))
        s = self.seed if seed is None else seed
        if s is None:
            raise ConfigError(f"{self.source}: a seed is required when the ensemble is a prior")
        return ParameterEnsemble.from_prior(self.prior, self.mc_size, s, model=self.model,
                                            probe_points=self.region.corners(),
                                            feasibility_filter=self.feasibility_filter)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, str(path), path.parent)


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    doc = _Doc(text, source)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    root = _mapping(doc, doc.data, (), TOP_KEYS)
    seed = _get(doc, root, (), "seed", int, None)

    region = _parse_region(doc, _mapping(doc, root.get("region"), ("region",), {"continuous", "discrete", "combos", "combos_csv"}), base)
    model = _parse_model(doc, _mapping(doc, root.get("model"), ("model",)), region)

    ens = _mapping(doc, root.get("ensemble"), ("ensemble",), {"samples_csv", "prior", "mc_size", "seed", "feasibility_filter"})
    thetas_csv, prior = None, None
    if "samples_csv" in ens and "prior" in ens:
        raise doc.error(("ensemble",), "give either samples_csv or prior, not both")
    if "samples_csv" in ens:
        thetas_csv = base / str(ens["samples_csv"])
    elif "prior" in ens:
        prior = _parse_prior(doc, ens["prior"], model.p)
        seed = _get(doc, ens, ("ensemble",), "seed", int, seed)
        if seed is None:
            raise doc.error(("ensemble",), "a seed (top-level or ensemble.seed) is required with a prior")
    else:
        raise doc.error(("ensemble",), "need samples_csv or prior")
    mc_size = _get(doc, ens, ("ensemble",), "mc_size", int, DEFAULT_MC_SIZE, lambda v: v >= 1)
    feas = bool(_get(doc, ens, ("ensemble",), "feasibility_filter", None, False))

    fl_map = _mapping(doc, root.get("forlion"), ("forlion",), set(ForLionConfig.__dataclass_fields__) - {"threads"})
    fl_kwargs = dict(fl_map)
    fl_kwargs.setdefault("seed", seed if seed is not None else 0)
    try:
        forlion = ForLionConfig(**fl_kwargs)
    except (TypeError, ValueError) as exc:
        raise doc.error(("forlion",), str(exc)) from None

    rounding = None
    if root.get("rounding") is not None:
        rd = _mapping(doc, root["rounding"], ("rounding",), {"n", "grid_levels", "delta_r", "allocation"})
        levels = rd.get("grid_levels", [])
        if not isinstance(levels, list):
            levels = [levels] * region.k
        if len(levels) != region.k:
            raise doc.error(("rounding", "grid_levels"), f"need {region.k} grid levels, got {len(levels)}")
        try:
            rounding = RoundingConfig(
                n=_get(doc, rd, ("rounding",), "n", int),
                grid_levels=tuple(levels),
                delta_r=_get(doc, rd, ("rounding",), "delta_r", float, 0.1),
                allocation=_get(doc, rd, ("rounding",), "allocation", str, "remainder", lambda v: v in ALLOCATIONS),
            )
        except (TypeError, ValueError) as exc:
            raise doc.error(("rounding",), str(exc)) from None

    vf = _mapping(doc, root.get("verify"), ("verify",), {"grid_density", "tol"})
    grid_density = _get(doc, vf, ("verify",), "grid_density", int, 51, lambda v: v >= 2)
    tol = _get(doc, vf, ("verify",), "tol", float, 2 * forlion.slack, lambda v: v >= 0)

    out = _mapping(doc, root.get("output"), ("output",), {"dir"})
    output_dir = base / str(out.get("dir", "."))
    return ExperimentConfig(Path(source), seed, region, model, thetas_csv, prior, mc_size, feas,
                            forlion, rounding, grid_density, tol, output_dir)


def _parse_region(doc: _Doc, reg: dict, base: Path) -> DesignRegion:
    bounds, names = [], []
    for i, item in enumerate(_list(doc, reg.get("continuous", []), ("region", "continuous"))):
        path = ("region", "continuous", i)
        item = _mapping(doc, item, path, {"name", "lower", "upper"})
        lo = _get(doc, item, path, "lower", float)
        hi = _get(doc, item, path, "upper", float)
        if not lo < hi:
            raise doc.error(path, f"lower bound {lo} must be below upper bound {hi}")
        bounds.append((lo, hi))
        names.append(str(item.get("name", f"x{i + 1}")))
    levels = []
    for i, item in enumerate(_list(doc, reg.get("discrete", []), ("region", "discrete"))):
        path = ("region", "discrete", i)
        item = _mapping(doc, item, path, {"name", "levels"})
        lv = _list(doc, _get(doc, item, path, "levels"), path + ("levels",))
        try:
            lv = [float(v) for v in lv]
        except (TypeError, ValueError):
            raise doc.error(path + ("levels",), "levels must be numbers") from None
        if not lv:
            raise doc.error(path + ("levels",), "need at least one level")
        levels.append(lv)
        names.append(str(item.get("name", f"x{len(bounds) + i + 1}")))
    if len(set(names)) != len(names):
        raise doc.error(("region",), f"duplicate factor names {names}")
    if "combos" in reg or "combos_csv" in reg:
        if "combos" in reg:
            combos = [tuple(float(v) for v in c) for c in _list(doc, reg["combos"], ("region", "combos"))]
        else:
            combos = [tuple(r) for r in read_thetas(base / str(reg["combos_csv"]))]
        if any(len(c) != len(levels) for c in combos):
            raise doc.error(("region", "combos"), f"each combo needs {len(levels)} entries")
    else:
        combos = list(itertools.product(*levels)) if levels else [()]
    try:
        return DesignRegion(tuple(bounds), tuple(combos), tuple(names))
    except ValueError as exc:
        raise doc.error(("region",), str(exc)) from None


def _predictors(doc: _Doc, specs, path: tuple, names) -> Predictors:
    specs = _list(doc, specs, path)
    try:
        return Predictors.parse([str(s) for s in specs], names)
    except ValueError as exc:
        raise doc.error(path, str(exc)) from None


def _parse_model(doc: _Doc, mod: dict, region: DesignRegion):
    names = region.factor_names()
    kind = _get(doc, mod, ("model",), "kind", str, "glm", lambda v: v in ("glm", "mlm"))
    if kind == "glm":
        _mapping(doc, mod, ("model",), {"kind", "link", "predictors"})
        link = _get(doc, mod, ("model",), "link", str, "logit", lambda v: v in LINKS)
        return GlmModel(link, _predictors(doc, _get(doc, mod, ("model",), "predictors"), ("model", "predictors"), names))
    _mapping(doc, mod, ("model",), {"kind", "family", "J", "structure", "predictors", "category_predictors", "common_predictors"})
    J = _get(doc, mod, ("model",), "J", int, ..., lambda v: v >= 3)
    family = _get(doc, mod, ("model",), "family", str, ..., lambda v: v in FAMILIES)
    structure = _get(doc, mod, ("model",), "structure", str, "npo", lambda v: v in ("po", "npo", "ppo"))
    try:
        if structure == "po":
            common = _predictors(doc, _get(doc, mod, ("model",), "predictors"), ("model", "predictors"), names)
            return MlmModel.po(J, family, common)
        if structure == "npo" and "predictors" in mod:
            h = _predictors(doc, mod["predictors"], ("model", "predictors"), names)
            return MlmModel.npo(J, family, h)
        cats = _list(doc, _get(doc, mod, ("model",), "category_predictors"), ("model", "category_predictors"))
        hs = [_predictors(doc, c, ("model", "category_predictors", i), names) for i, c in enumerate(cats)]
        common = None
        if "common_predictors" in mod:
            common = _predictors(doc, mod["common_predictors"], ("model", "common_predictors"), names)
        return MlmModel(J, family, hs, common)
    except ConfigError:
        raise
    except ValueError as exc:
        raise doc.error(("model",), str(exc)) from None


def _parse_prior(doc: _Doc, items, p: int) -> list:
    items = _list(doc, items, ("ensemble", "prior"))
    if len(items) != p:
        raise doc.error(("ensemble", "prior"), f"need {p} prior entries (one per parameter), got {len(items)}")
    out = []
    for i, item in enumerate(items):
        path = ("ensemble", "prior", i)
        item = _mapping(doc, item, path)
        dist = _get(doc, item, path, "dist", str, ..., lambda v: v in ("uniform", "normal"))
        try:
            if dist == "uniform":
                _mapping(doc, item, path, {"dist", "a", "b"})
                out.append(Uniform(_get(doc, item, path, "a", float), _get(doc, item, path, "b", float)))
            else:
                _mapping(doc, item, path, {"dist", "mu", "sigma"})
                out.append(Normal(_get(doc, item, path, "mu", float), _get(doc, item, path, "sigma", float)))
        except ConfigError:
            raise
        except ValueError as exc:
            raise doc.error(path, str(exc)) from None
    return out
