"""Design configuration: dataclasses plus a strict TOML reader.

A config file has the tables ``[design]``, ``[model]``, ``[hypothesis]``,
``[psi0]``, ``[psi1]`` and optionally ``[optimizer]``, ``[bootstrap]`` and
``[contour]``.  Unknown keys are rejected.  Numbers may also be written as
the strings ``"inf"``, ``"-inf"``, ``"log(x)"`` or ``"exp(x)"``.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ConfigurationError
from .models import MODELS, DataGenProcess, IntervalHypothesis, Model


@dataclass(frozen=True)
class OptimizerOptions:
    subgroups: int = 10
    fractional_n: bool = False
    resimulate: bool = False
    resim_threshold: float = 0.5
    fixed_gamma: float | None = None
    scan: int = 8
    eps: float = 1e-12


@dataclass(frozen=True)
class BootstrapOptions:
    big_m: int = 1000
    m_star: int | None = None
    level: float = 0.95


@dataclass(frozen=True)
class ContourOptions:
    n_range: tuple[float, float] | None = None
    gamma_range: tuple[float, float] | None = None
    gamma_steps: int = 200


@dataclass(frozen=True)
class DesignConfig:
    model: Model
    hypothesis: IntervalHypothesis
    psi0: DataGenProcess
    psi1: DataGenProcess
    alpha: float
    beta: float
    q: float = 1.0
    m: int = 10_000
    seed: int = 0
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    bootstrap: BootstrapOptions = field(default_factory=BootstrapOptions)
    contour: ContourOptions = field(default_factory=ContourOptions)
    source: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        _check(0 < self.alpha < 1, "design.alpha", "must satisfy 0 < alpha < 1")
        _check(0 < self.beta < 1, "design.beta", "must satisfy 0 < beta < 1")
        _check(self.q > 0, "design.q", "must be positive")
        _check(isinstance(self.m, int) and self.m >= 1, "design.m", "must be a positive integer")
        _check(
            math.floor(self.m * Fraction(repr(self.beta))) >= 1,
            "design.m",
            f"floor(m * beta) must be at least 1 (m={self.m}, beta={self.beta})",
        )
        _check(isinstance(self.seed, int) and 0 <= self.seed < 2**64, "design.seed", "must be a 64-bit unsigned integer")
        _check(self.psi0.j == 0, "psi0", "must describe hypothesis 0")
        _check(self.psi1.j == 1, "psi1", "must describe hypothesis 1")
        opt = self.optimizer
        _check(opt.subgroups >= 1, "optimizer.subgroups", "must be at least 1")
        _check(opt.resim_threshold > 0, "optimizer.resim_threshold", "must be positive")
        _check(opt.scan >= 0, "optimizer.scan", "must be nonnegative")
        _check(0 < opt.eps < 0.5, "optimizer.eps", "must lie in (0, 0.5)")
        if opt.fixed_gamma is not None:
            _check(0.5 <= opt.fixed_gamma < 1, "optimizer.fixed_gamma", "must lie in [0.5, 1)")
        bs = self.bootstrap
        _check(bs.big_m >= 1, "bootstrap.big_m", "must be at least 1")
        _check(bs.m_star is None or bs.m_star >= 1, "bootstrap.m_star", "must be at least 1")
        _check(0 < bs.level < 1, "bootstrap.level", "must lie in (0, 1)")
        ct = self.contour
        _check(ct.gamma_steps >= 2, "contour.gamma_steps", "must be at least 2")
        for name in ("n_range", "gamma_range"):
            rng = getattr(ct, name)
            if rng is not None:
                _check(len(rng) == 2 and rng[0] < rng[1], f"contour.{name}", "must be [low, high] with low < high")

    @property
    def subgroups(self) -> tuple[int, int]:
        """Subgroup counts for (H1, H0); degenerate processes use one group."""
        s = self.optimizer.subgroups
        return (1 if self.psi1.degenerate else s, 1 if self.psi0.degenerate else s)

    def replace(self, **changes) -> "DesignConfig":
        """Copy with top-level or ``optimizer__field`` style changes."""
        nested = {}
        for key in list(changes):
            if "__" in key:
                block, name = key.split("__", 1)
                nested.setdefault(block, {})[name] = changes.pop(key)
        for block, vals in nested.items():
            changes[block] = dataclasses.replace(getattr(self, block), **vals)
        return dataclasses.replace(self, **changes)


def _check(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigurationError(f"{key}: {msg}")


_FUNC = re.compile(r"^\s*(log|exp)\(\s*([-+0-9.eE]+)\s*\)\s*$")


def _number(value, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigurationError(f"{key}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("inf", "+inf"):
            return math.inf
        if s == "-inf":
            return -math.inf
        hit = _FUNC.match(s)
        if hit:
            arg = float(hit.group(2))
            if hit.group(1) == "log":
                _check(arg > 0, key, "log() needs a positive argument")
                return math.log(arg)
            return math.exp(arg)
    raise ConfigurationError(f"{key}: expected a number, 'inf', '-inf', 'log(x)' or 'exp(x)'; got {value!r}")


def _integer(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{key}: expected an integer; got {value!r}")
    return value


def _boolean(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"{key}: expected true or false; got {value!r}")
    return value


def _table(doc: dict, name: str, allowed: set | None, required: bool = True) -> dict:
    if name not in doc:
        if required:
            raise ConfigurationError(f"[{name}]: missing table")
        return {}
    tab = doc[name]
    if not isinstance(tab, dict):
        raise ConfigurationError(f"[{name}]: expected a table")
    unknown = [] if allowed is None else sorted(set(tab) - allowed)
    if unknown:
        raise ConfigurationError(f"{name}.{unknown[0]}: unknown key (allowed: {', '.join(sorted(allowed))})")
    return tab


def _model(tab: dict) -> Model:
    if "id" not in tab:
        raise ConfigurationError("model.id: missing")
    cls = MODELS.get(tab["id"])
    if cls is None:
        raise ConfigurationError(f"model.id: unknown model {tab['id']!r} (known: {', '.join(MODELS)})")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in tab.items():
        if key == "id":
            continue
        if key not in fields:
            raise ConfigurationError(f"model.{key}: unknown parameter for {tab['id']}")
        full = f"model.{key}"
        if isinstance(val, list):
            kwargs[key] = tuple(_number(v, full) for v in val)
        elif key in ("max_iter",):
            kwargs[key] = _integer(val, full)
        else:
            kwargs[key] = _number(val, full)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"model: {exc}") from exc


def _psi(tab: dict, j: int, name: str) -> DataGenProcess:
    if "eta_plus" not in tab:
        raise ConfigurationError(f"{name}.eta_plus: missing")
    eta = tab["eta_plus"]
    if not isinstance(eta, list) or not eta:
        raise ConfigurationError(f"{name}.eta_plus: expected a nonempty array")
    eta = tuple(_number(v, f"{name}.eta_plus") for v in eta)
    uni = []
    for i, item in enumerate(tab.get("uniform", [])):
        key = f"{name}.uniform[{i}]"
        if not isinstance(item, dict):
            raise ConfigurationError(f"{key}: expected a table {{index, low, high}}")
        extra = sorted(set(item) - {"index", "low", "high"})
        if extra:
            raise ConfigurationError(f"{key}.{extra[0]}: unknown key")
        for k in ("index", "low", "high"):
            if k not in item:
                raise ConfigurationError(f"{key}.{k}: missing")
        uni.append((_integer(item["index"], f"{key}.index"), _number(item["low"], f"{key}.low"), _number(item["high"], f"{key}.high")))
    return DataGenProcess(j, eta, tuple(uni))


def _pair(val, key: str):
    if not isinstance(val, list) or len(val) != 2:
        raise ConfigurationError(f"{key}: expected [low, high]")
    return (_number(val[0], key), _number(val[1], key))


def config_from_dict(doc: dict) -> DesignConfig:
    unknown = sorted(set(doc) - {"design", "model", "hypothesis", "psi0", "psi1", "optimizer", "bootstrap", "contour"})
    if unknown:
        raise ConfigurationError(f"{unknown[0]}: unknown table")
    d = _table(doc, "design", {"alpha", "beta", "q", "m", "seed"})
    for k in ("alpha", "beta"):
        if k not in d:
            raise ConfigurationError(f"design.{k}: missing")
    h = _table(doc, "hypothesis", {"lower", "upper"})
    hyp_lo = _number(h.get("lower", "-inf"), "hypothesis.lower")
    hyp_hi = _number(h.get("upper", "inf"), "hypothesis.upper")
    _check(hyp_lo < hyp_hi, "hypothesis", "lower must be below upper")
    o = _table(doc, "optimizer", {f.name for f in dataclasses.fields(OptimizerOptions)}, False)
    b = _table(doc, "bootstrap", {f.name for f in dataclasses.fields(BootstrapOptions)}, False)
    c = _table(doc, "contour", {f.name for f in dataclasses.fields(ContourOptions)}, False)

    opt = OptimizerOptions(
        subgroups=_integer(o.get("subgroups", 10), "optimizer.subgroups"),
        fractional_n=_boolean(o.get("fractional_n", False), "optimizer.fractional_n"),
        resimulate=_boolean(o.get("resimulate", False), "optimizer.resimulate"),
        resim_threshold=_number(o.get("resim_threshold", 0.5), "optimizer.resim_threshold"),
        fixed_gamma=None if o.get("fixed_gamma") is None else _number(o["fixed_gamma"], "optimizer.fixed_gamma"),
        scan=_integer(o.get("scan", 8), "optimizer.scan"),
        eps=_number(o.get("eps", 1e-12), "optimizer.eps"),
    )
    boot = BootstrapOptions(
        big_m=_integer(b.get("big_m", 1000), "bootstrap.big_m"),
        m_star=None if b.get("m_star") is None else _integer(b["m_star"], "bootstrap.m_star"),
        level=_number(b.get("level", 0.95), "bootstrap.level"),
    )
    cont = ContourOptions(
        n_range=None if "n_range" not in c else _pair(c["n_range"], "contour.n_range"),
        gamma_range=None if "gamma_range" not in c else _pair(c["gamma_range"], "contour.gamma_range"),
        gamma_steps=_integer(c.get("gamma_steps", 200), "contour.gamma_steps"),
    )
    return DesignConfig(
        model=_model(_table(doc, "model", None)),
        hypothesis=IntervalHypothesis(hyp_lo, hyp_hi),
        psi0=_psi(_table(doc, "psi0", {"eta_plus", "uniform"}), 0, "psi0"),
        psi1=_psi(_table(doc, "psi1", {"eta_plus", "uniform"}), 1, "psi1"),
        alpha=_number(d["alpha"], "design.alpha"),
        beta=_number(d["beta"], "design.beta"),
        q=_number(d.get("q", 1.0), "design.q"),
        m=_integer(d.get("m", 10_000), "design.m"),
        seed=_integer(d.get("seed", 0), "design.seed"),
        optimizer=opt,
        bootstrap=boot,
        contour=cont,
        source=copy.deepcopy(doc),
    )


def parse_config(path) -> DesignConfig:
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigurationError(f"{path}: not UTF-8 ({exc})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid TOML ({exc})") from exc
    return config_from_dict(doc)


def config_hash(doc: dict) -> str:
    """SHA-256 of the canonical JSON form of a config document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _num_out(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def config_to_dict(cfg: DesignConfig) -> dict:
    """Document that :func:`config_from_dict` maps back to ``cfg``."""
    model = {"id": cfg.model.name}
    for f in dataclasses.fields(cfg.model):
        v = getattr(cfg.model, f.name)
        if v is None:
            continue
        model[f.name] = [_num_out(x) for x in v] if isinstance(v, tuple) else _num_out(v)

    def psi(p: DataGenProcess):
        out = {"eta_plus": [_num_out(v) for v in p.eta_plus]}
        if p.uniform:
            out["uniform"] = [{"index": i, "low": lo, "high": hi} for i, lo, hi in p.uniform]
        return out

    opt = {k: v for k, v in dataclasses.asdict(cfg.optimizer).items() if v is not None}
    boot = {k: v for k, v in dataclasses.asdict(cfg.bootstrap).items() if v is not None}
    cont = {"gamma_steps": cfg.contour.gamma_steps}
    if cfg.contour.n_range is not None:
        cont["n_range"] = list(cfg.contour.n_range)
    if cfg.contour.gamma_range is not None:
        cont["gamma_range"] = list(cfg.contour.gamma_range)
    return {
        "design": {"alpha": cfg.alpha, "beta": cfg.beta, "q": cfg.q, "m": cfg.m, "seed": cfg.seed},
        "model": model,
        "hypothesis": {"lower": _num_out(cfg.hypothesis.lower), "upper": _num_out(cfg.hypothesis.upper)},
        "psi0": psi(cfg.psi0),
        "psi1": psi(cfg.psi1),
        "optimizer": opt,
        "bootstrap": boot,
        "contour": cont,
    }


def config_from_setup(setup, seed: int = 0, **options) -> DesignConfig:
    """Build a config from a :class:`models.ExampleSetup`."""
    return DesignConfig(
        model=setup.model,
        hypothesis=setup.hypothesis,
        psi0=setup.psi0,
        psi1=setup.psi1,
        alpha=setup.alpha,
        beta=setup.beta,
        q=setup.q,
        m=setup.m,
        seed=seed,
        optimizer=OptimizerOptions(subgroups=setup.subgroups, **options),
    )
