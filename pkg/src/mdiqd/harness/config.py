"""Experiment configuration: YAML file plus command-line overrides.

Example::

    mode: dialogue
    seeds: [1, 2, 3]
    out: results/dialogue
    dialogue:
      m: 10000
      gamma: 0.1
      p_flip: 0.0
      utp: honest
    bb84:
      n_signals: 10000

Validation errors name the file and line of the offending key.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..adversary import UtpStrategy
from ..bb84 import Bb84Config, FiniteKeyParams, InvalidParameter, _require
from ..dialogue import SecurityParams
from ..qubit import BellOutcome
from .cost import CostQuery

MODES = ("bb84", "dialogue", "attack", "leakage", "keylen", "cost")
KEY_SOURCES = ("uniform", "bb84")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DialogueConfig:
    m: int = 1000
    gamma: float = 0.1
    q_threshold: float = 0.11
    eps: float = 1e-10
    qkd_ratio: float = 1.0
    p_flip: float = 0.0
    utp: str = "honest"
    restricted_analyzer: bool = False
    lie_target: str = "phi-"
    p_lie: float = 0.0
    key_source: str = "uniform"

    def __post_init__(self):
        _require(self.key_source in KEY_SOURCES, "key_source", f"must be one of {KEY_SOURCES}")
        _require(0.0 <= self.p_flip <= 0.5, "p_flip", "must lie in [0, 0.5]")
        try:
            BellOutcome.from_label(self.lie_target)
        except ValueError as e:
            raise InvalidParameter("lie_target", str(e)) from None
        self.security_params()
        self.strategy()

    def security_params(self) -> SecurityParams:
        return SecurityParams(
            m=self.m,
            gamma=self.gamma,
            q_threshold=self.q_threshold,
            eps_qsdc=self.eps,
            qkd_ratio=self.qkd_ratio,
        )

    def strategy(self) -> UtpStrategy:
        kind = self.utp
        if self.restricted_analyzer:
            _require(kind in ("honest", "honest-restricted"), "restricted_analyzer",
                     "only combines with the honest strategy")
            kind = "honest-restricted"
        return UtpStrategy(kind, BellOutcome.from_label(self.lie_target), self.p_lie)


@dataclass(frozen=True)
class KeylenConfig:
    n: int = 17504
    k: int = 17504
    qber: float = 0.01
    eps_qkd: float = 1e-10
    eps_Q: float = 1e-10
    source_quality: float = 1.0
    f_EC: float = 1.1
    # when set, eps_qkd is replaced by eps_per_bit * l (self-consistent)
    eps_per_bit: float | None = None

    def __post_init__(self):
        self.params()
        if self.eps_per_bit is not None:
            _require(self.eps_per_bit > 0, "eps_per_bit", "must be > 0")

    def params(self) -> FiniteKeyParams:
        return FiniteKeyParams.from_budget(
            self.n, self.k, self.qber, self.eps_qkd,
            q=self.source_quality, eps_Q=self.eps_Q, f_EC=self.f_EC,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    seeds: tuple[int, ...] = (0,)
    out: str = "results"
    workers: int = 1
    bb84: Bb84Config = field(default_factory=Bb84Config)
    dialogue: DialogueConfig = field(default_factory=DialogueConfig)
    keylen: KeylenConfig = field(default_factory=KeylenConfig)
    cost: CostQuery = field(default_factory=lambda: CostQuery(128, 512))

    def __post_init__(self):
        _require(self.mode in MODES, "mode", f"must be one of {MODES}")
        _require(len(self.seeds) >= 1, "seeds", "at least one seed is required")
        _require(all(0 <= s < 2**64 for s in self.seeds), "seeds", "must be unsigned 64-bit")
        _require(len(set(self.seeds)) == len(self.seeds), "seeds", "must be distinct")
        _require(self.workers >= 1, "workers", "must be >= 1")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


SECTIONS = {
    "bb84": Bb84Config,
    "dialogue": DialogueConfig,
    "keylen": KeylenConfig,
    "cost": CostQuery,
}
TOP_LEVEL = ("mode", "seeds", "out", "workers")


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(key,)`` to 1-based source lines."""
    lines: dict = {}
    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(knode.value,)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def _coerce(cls, name: str, value):
    """Best-effort coercion of YAML scalars to the dataclass field type."""
    ftype = {f.name: f.type for f in fields(cls)}[name]
    ftype = str(ftype)
    if value is None:
        return None
    if "bool" in ftype and not isinstance(value, bool):
        raise TypeError(f"expected a boolean, got {value!r}")
    if ftype.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise TypeError(f"expected an integer, got {value!r}")
        return int(value)
    if ftype.startswith("float"):
        if isinstance(value, str):
            value = float(value)  # YAML reads "1e-10" as a string
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    return value


def build_config(raw: dict, *, source: str = "<config>", lines: dict | None = None,
                 origins: dict | None = None) -> ExperimentConfig:
    """Validate a plain mapping into an :class:`ExperimentConfig`.

    ``origins`` maps ``(section, key)`` to a label such as ``--gamma`` for
    values that came from the command line rather than the file.
    """
    lines = lines or {}
    origins = origins or {}

    def where(*key) -> str:
        if key in origins:
            return origins[key]
        if key in lines:
            return f"{source}:{lines[key]}"
        if key[:1] in lines:
            return f"{source}:{lines[key[:1]]}"
        return source

    def err(key, msg):
        return ConfigError(f"{where(*key)}: {'.'.join(key)}: {msg}")

    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    for key in raw:
        if key not in TOP_LEVEL and key not in SECTIONS:
            raise err((key,), "unknown key")
    if "mode" not in raw:
        raise err(("mode",), "missing required key")

    kwargs = {}
    for key in TOP_LEVEL:
        if key in raw:
            kwargs[key] = raw[key]
    if "seeds" in kwargs:
        seeds = kwargs["seeds"]
        if isinstance(seeds, int):
            seeds = [seeds]
        if not isinstance(seeds, list) or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in seeds
        ):
            raise err(("seeds",), "must be a list of integers")
        kwargs["seeds"] = tuple(seeds)
    if "workers" in kwargs and not isinstance(kwargs["workers"], int):
        raise err(("workers",), "must be an integer")
    if "out" in kwargs:
        kwargs["out"] = str(kwargs["out"])

    for section, cls in SECTIONS.items():
        body = raw.get(section) or {}
        if not isinstance(body, dict):
            raise err((section,), "must be a mapping")
        known = {f.name for f in fields(cls)}
        sk = {}
        for name, value in body.items():
            if name not in known:
                raise err((section, name), f"unknown key (expected one of {sorted(known)})")
            try:
                sk[name] = _coerce(cls, name, value)
            except (TypeError, ValueError) as e:
                raise err((section, name), str(e)) from None
        if section == "cost" and not {"security_bits", "dialogue_uses"} <= sk.keys():
            sk = {"security_bits": 128, "dialogue_uses": 512, **sk}
        try:
            kwargs[section] = cls(**sk)
        except InvalidParameter as e:
            raise err((section, e.field), str(e).split(": ", 1)[-1]) from None

    try:
        return ExperimentConfig(**kwargs)
    except InvalidParameter as e:
        raise err((e.field,), str(e).split(": ", 1)[-1]) from None


def load_config(path: str | Path, overrides: dict | None = None,
                origins: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text) or {}
        lines = _line_index(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{loc}: invalid YAML: {getattr(e, 'problem', e)}") from None
    raw = merge_overrides(raw, overrides or {})
    return build_config(raw, source=str(path), lines=lines, origins=origins)


def merge_overrides(raw: dict, overrides: dict) -> dict:
    """Apply ``{(section, key): value}`` or ``{(key,): value}`` overrides."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for key, value in overrides.items():
        if len(key) == 1:
            out[key[0]] = value
        else:
            out.setdefault(key[0], {})
            out[key[0]][key[1]] = value
    return out
