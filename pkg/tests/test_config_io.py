from __future__ import annotations

import os
import textwrap

import numpy as np
import pytest

from ewdesign import ApproximateDesign, ExactDesign, GlmModel, MlmModel
from ewdesign.config import load_config, parse_config
from ewdesign.errors import ConfigError
from ewdesign.io import atomic_write_text, fmt, read_design, read_thetas, write_design, write_jsonl

from conftest import CONFIGS

BASE = textwrap.dedent("""\
    seed: 7
    region:
      continuous:
        - {name: x1, lower: -2, upper: 2}
      discrete:
        - {name: lot, levels: [-1, 1]}
    model:
      kind: glm
      link: probit
      predictors: ["1", x1, lot]
    ensemble:
      prior:
        - {dist: normal, mu: 1, sigma: 1}
        - {dist: uniform, a: 0, b: 1}
        - {dist: normal, mu: 0, sigma: 0.5}
      mc_size: 50
    """)


def test_parse_full_example():
    cfg = parse_config(BASE + "rounding: {n: 30, grid_levels: [0.5]}\nverify: {grid_density: 11}\n")
    assert cfg.names == ("x1", "lot")
    assert cfg.region.k == 1 and len(cfg.region.discrete_combos) == 2
    assert isinstance(cfg.model, GlmModel) and cfg.model.link == "probit" and cfg.model.p == 3
    assert cfg.forlion.seed == 7
    assert cfg.rounding.n == 30 and cfg.rounding.grid_levels == (0.5,)
    assert cfg.grid_density == 11
    assert cfg.verify_tol == pytest.approx(2 * cfg.forlion.eps)
    ens = cfg.ensemble()
    assert ens.thetas.shape == (50, 3)
    np.testing.assert_array_equal(ens.thetas, cfg.ensemble().thetas)
    assert not np.array_equal(ens.thetas, cfg.ensemble(seed=8).thetas)


@pytest.mark.parametrize("name", ["three_factor.yaml", "esd.yaml", "cumulative_po.yaml"])
def test_shipped_configs_load(name):
    cfg = load_config(CONFIGS / name)
    assert cfg.ensemble().p == cfg.model.p


def test_cumulative_config_reads_samples():
    cfg = load_config(CONFIGS / "cumulative_po.yaml")
    assert isinstance(cfg.model, MlmModel) and cfg.model.family == "cumulative"
    assert cfg.ensemble().B == 20


@pytest.mark.parametrize("edit, where, message", [
    (("lower: -2, upper: 2", "lower: 2, upper: 2"), ":4:", "lower bound"),
    (("link: probit", "link: cauchit"), ":9:", "link"),
    (("mc_size: 50", "mc_size: 0"), ":16:", "mc_size"),
    (("predictors: [\"1\", x1, lot]", "predictors: [\"1\", x1, z]"), ":10:", "unknown factor"),
    (("- {dist: normal, mu: 0, sigma: 0.5}", "- {dist: normal, mu: 0, sigma: -1}"), ":15:", "sigma"),
    (("    - {dist: normal, mu: 0, sigma: 0.5}\n", ""), ":12:", "need 3 prior entries"),
    (("kind: glm", "kind: glm\n  extra: 1"), ":9:", "unknown key"),
])
def test_validation_errors_point_at_the_source(edit, where, message):
    text = BASE.replace(*edit)
    with pytest.raises(ConfigError) as info:
        parse_config(text, "exp.yaml")
    msg = str(info.value)
    assert msg.startswith("exp.yaml" + where), msg
    assert message in msg


def test_seed_required_with_prior():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(BASE.replace("seed: 7\n", ""))
    cfg = parse_config(BASE.replace("seed: 7\n", "").replace("mc_size: 50", "mc_size: 50\n  seed: 3"))
    assert cfg.seed == 3


def test_malformed_yaml():
    with pytest.raises(ConfigError, match="invalid YAML"):
        parse_config("region: [1, 2\n", "bad.yaml")


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(BASE + "plots: true\n")


def test_explicit_combos_and_mlm_schema():
    text = textwrap.dedent("""\
        seed: 1
        region:
          continuous: [{name: d, lower: 0, upper: 1}]
          discrete: [{name: a, levels: [0, 1]}, {name: b, levels: [0, 1]}]
          combos: [[0, 0], [1, 1]]
        model:
          kind: mlm
          family: baseline
          J: 3
          structure: ppo
          category_predictors: [["1", d], ["1"]]
          common_predictors: [a]
        ensemble:
          prior: [{dist: normal, mu: 0, sigma: 1}, {dist: normal, mu: 0, sigma: 1},
                  {dist: normal, mu: 0, sigma: 1}, {dist: normal, mu: 0, sigma: 1}]
          mc_size: 5
        """)
    cfg = parse_config(text)
    assert len(cfg.region.discrete_combos) == 2
    assert cfg.model.block_sizes == (2, 1, 1)


def test_design_round_trip(tmp_path):
    xi = ApproximateDesign([[0.123456789012, -1.0], [1.5, 1.0]], [0.3, 0.7])
    path = tmp_path / "d.csv"
    write_design(path, xi, ["x", "lot"])
    assert path.read_text().splitlines()[0] == "x,lot,weight"
    assert "0.123456789" in path.read_text() and "0.1234567890" not in path.read_text()
    back = read_design(path, ["x", "lot"])
    np.testing.assert_allclose(back.weights, xi.weights)
    ex = ExactDesign([[0.5, 1.0]], [10])
    write_design(path, ex, ["x", "lot"])
    assert isinstance(read_design(path), ExactDesign)


@pytest.mark.parametrize("content, message", [
    ("x,weight\n", "at least one row"),
    ("x,w\n1,1\n", "last column"),
    ("x,weight\n1\n", ":2:"),
    ("x,weight\nabc,1\n", ":2:"),
    ("x,count\n1,1.5\n", "integers"),
    ("y,weight\n1,1\n", "do not match"),
])
def test_malformed_design_files(tmp_path, content, message):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(ConfigError, match=message):
        read_design(path, ["x"])


def test_read_thetas(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(read_thetas(path, 2), [[1, 2], [3, 4]])
    path.write_text("1,2\n3\n")
    with pytest.raises(ConfigError):
        read_thetas(path)
    path.write_text("1,2\n")
    with pytest.raises(ConfigError):
        read_thetas(path, 3)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_atomic_write_failure_keeps_old_file(tmp_path):
    target = tmp_path / "out.jsonl"
    write_jsonl(target, [{"a": 1}])

    def records():
        yield {"a": 2}
        raise RuntimeError("interrupted")

    with pytest.raises(RuntimeError):
        write_jsonl(target, records())
    assert target.read_text() == '{"a": 1}\n'
    assert os.listdir(tmp_path) == ["out.jsonl"]


def test_number_format():
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(2.0) == "2"
