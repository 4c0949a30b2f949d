import math
from pathlib import Path

import pytest

from postdesign.config import (
    config_from_dict,
    config_from_setup,
    config_hash,
    config_to_dict,
    parse_config,
)
from postdesign.core import ConfigurationError
from postdesign.models import IntervalHypothesis, semaglutide_sae, semaglutide_weight

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_shipped_weight_config():
    cfg = parse_config(CONFIGS / "semaglutide_weight.toml")
    assert (cfg.alpha, cfg.beta, cfg.m, cfg.q) == (0.05, 0.2, 10_000, 2.0)
    assert cfg.hypothesis == IntervalHypothesis(5.0, math.inf)
    assert cfg.subgroups == (10, 1)
    assert cfg == config_from_setup(semaglutide_weight(), seed=7)


def test_shipped_sae_config():
    cfg = parse_config(CONFIGS / "semaglutide_sae.toml")
    assert (cfg.alpha, cfg.beta) == (0.4, 0.25)
    assert cfg.hypothesis == IntervalHypothesis(-math.inf, 2.0)
    assert cfg.psi0.eta_plus[1] == pytest.approx(math.log(2))
    assert cfg == config_from_setup(semaglutide_sae(), seed=7)


@pytest.mark.parametrize("name", ["semaglutide_weight.toml", "semaglutide_sae.toml"])
def test_echo_roundtrip(name):
    cfg = parse_config(CONFIGS / name)
    doc = config_to_dict(cfg)
    again = config_from_dict(doc)
    assert again == cfg
    assert config_hash(config_to_dict(again)) == config_hash(doc)


def _doc(**design):
    doc = config_to_dict(parse_config(CONFIGS / "semaglutide_weight.toml"))
    doc["design"].update(design)
    return doc


@pytest.mark.parametrize(
    "change,key",
    [
        ({"alpha": 0}, "design.alpha"),
        ({"beta": 1.5}, "design.beta"),
        ({"m": 3}, "design.m"),
        ({"q": -1.0}, "design.q"),
        ({"seed": -1}, "design.seed"),
        ({"m": 1.5}, "design.m"),
        ({"alpha": True}, "design.alpha"),
    ],
)
def test_invalid_design_values(change, key):
    with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
        config_from_dict(_doc(**change))


def test_unknown_keys_are_named():
    doc = _doc()
    doc["design"]["alhpa"] = 0.1
    with pytest.raises(ConfigurationError, match="design.alhpa"):
        config_from_dict(doc)
    doc = _doc()
    doc["extra"] = {}
    with pytest.raises(ConfigurationError, match="extra"):
        config_from_dict(doc)
    doc = _doc()
    doc["model"]["bogus"] = 1
    with pytest.raises(ConfigurationError, match="model.bogus"):
        config_from_dict(doc)
    doc = _doc()
    doc["model"]["id"] = "probit"
    with pytest.raises(ConfigurationError, match="model.id"):
        config_from_dict(doc)


def test_number_forms():
    doc = _doc()
    doc["hypothesis"]["lower"] = "log(2)"
    doc["psi1"]["eta_plus"][1] = "exp(2.5)"
    cfg = config_from_dict(doc)
    assert cfg.hypothesis.lower == pytest.approx(math.log(2))
    assert cfg.psi1.eta_plus[1] == pytest.approx(math.exp(2.5))
    doc["hypothesis"]["lower"] = "log(-1)"
    with pytest.raises(ConfigurationError, match="hypothesis.lower"):
        config_from_dict(doc)
    doc["hypothesis"]["lower"] = "ten"
    with pytest.raises(ConfigurationError, match="hypothesis.lower"):
        config_from_dict(doc)


def test_hypothesis_and_options_checks():
    doc = _doc()
    doc["hypothesis"] = {"lower": 5.0, "upper": 5.0}
    with pytest.raises(ConfigurationError, match="hypothesis"):
        config_from_dict(doc)
    doc = _doc()
    doc["optimizer"]["fixed_gamma"] = 0.3
    with pytest.raises(ConfigurationError, match="optimizer.fixed_gamma"):
        config_from_dict(doc)
    doc = _doc()
    doc["psi1"]["uniform"] = [{"index": 1, "low": 12.0}]
    with pytest.raises(ConfigurationError, match="high"):
        config_from_dict(doc)


def test_invalid_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[design\nalpha = 0.1")
    with pytest.raises(ConfigurationError, match="invalid TOML"):
        parse_config(p)


def test_replace_nested():
    cfg = parse_config(CONFIGS / "semaglutide_weight.toml")
    new = cfg.replace(seed=3, optimizer__fixed_gamma=0.95, bootstrap__big_m=10)
    assert (new.seed, new.optimizer.fixed_gamma, new.bootstrap.big_m) == (3, 0.95, 10)
    assert new.optimizer.subgroups == 10 and cfg.seed == 7
    with pytest.raises(ConfigurationError):
        cfg.replace(alpha=0.0)
