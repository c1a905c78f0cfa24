"""YAML run configuration: schema, validation, and protocol construction.

A run file is a flat mapping with a nested ``lattice`` block::

    lattice: {kind: square_periodic, rows: 8, cols: 8}
    p_flip: 0.95
    p_nec: 0.8
    p_unit: 0.02
    p_reset: 0.02
    p_me: 0.01
    p_dep: 0.0
    rule: nec
    steps: 200
    trajectories: 1000
    master_seed: 1234
    init: all_plus

Sweeps add a ``sweep: {key: <scalar key>, values: [...]}`` block naming
exactly one swept scalar.  Validation failures raise ConfigError with the
offending key names so the CLI can report them and exit with status 1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import yaml

from .lattice import KINDS, build_lattice
from .protocol import ProtocolParams, RULE_MAJORITY, RULE_NEC


class ConfigError(ValueError):
    pass


_PROB_KEYS = ("p_flip", "p_nec", "p_unit", "p_reset", "p_me", "p_dep")
_OPTIONAL = {"p_unit": 0.0, "p_reset": 0.0, "p_me": 0.0, "p_dep": 0.0,
             "rule": RULE_NEC, "init": "all_plus"}
_REQUIRED = ("lattice", "p_flip", "p_nec", "steps", "trajectories",
             "master_seed")
_SWEEPABLE = _PROB_KEYS + ("steps", "trajectories", "master_seed")


@dataclass
class LatticeConfig:
    kind: str
    rows: int
    cols: int


@dataclass
class RunConfig:
    lattice: LatticeConfig
    p_flip: float
    p_nec: float
    steps: int
    trajectories: int
    master_seed: int
    p_unit: float = 0.0
    p_reset: float = 0.0
    p_me: float = 0.0
    p_dep: float = 0.0
    rule: str = RULE_NEC
    init: str = "all_plus"
    sweep: tuple[str, tuple] | None = field(default=None)

    def protocol_params(self, **overrides) -> ProtocolParams:
        values = {k: getattr(self, k) for k in _PROB_KEYS}
        values.update(rule=self.rule, steps=self.steps)
        values.update({k: v for k, v in overrides.items()
                       if k in values})
        lat = build_lattice(self.lattice.kind,
                            (self.lattice.rows, self.lattice.cols))
        return ProtocolParams(lattice=lat, **values)


def _require_number(raw: dict, key: str, kind, lo=None, hi=None):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"key {key!r} must be a number, got {v!r}")
    if kind is int and not float(v).is_integer():
        raise ConfigError(f"key {key!r} must be an integer, got {v!r}")
    v = kind(v)
    if lo is not None and v < lo:
        raise ConfigError(f"key {key!r} must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"key {key!r} must be <= {hi}, got {v}")
    return v


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    known = set(_REQUIRED) | set(_OPTIONAL) | {"sweep"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")

    lat_raw = raw["lattice"]
    if not isinstance(lat_raw, dict):
        raise ConfigError("key 'lattice' must be a mapping")
    lat_unknown = set(lat_raw) - {"kind", "rows", "cols"}
    if lat_unknown:
        raise ConfigError(f"unknown lattice keys: {sorted(lat_unknown)}")
    for k in ("kind", "rows", "cols"):
        if k not in lat_raw:
            raise ConfigError(f"missing key 'lattice.{k}'")
    if lat_raw["kind"] not in KINDS:
        raise ConfigError(
            f"key 'lattice.kind' must be one of {list(KINDS)}, "
            f"got {lat_raw['kind']!r}"
        )
    lat = LatticeConfig(
        lat_raw["kind"],
        _require_number(lat_raw, "rows", int, lo=1),
        _require_number(lat_raw, "cols", int, lo=1),
    )

    merged = dict(_OPTIONAL)
    merged.update({k: v for k, v in raw.items() if k not in ("lattice", "sweep")})
    kwargs = {}
    for key in _PROB_KEYS:
        kwargs[key] = _require_number(merged, key, float, lo=0.0, hi=1.0)
    kwargs["steps"] = _require_number(merged, "steps", int, lo=0)
    kwargs["trajectories"] = _require_number(merged, "trajectories", int, lo=1)
    kwargs["master_seed"] = _require_number(merged, "master_seed", int, lo=0)
    if merged["rule"] not in (RULE_NEC, RULE_MAJORITY):
        raise ConfigError(f"key 'rule' must be 'nec' or 'majority', "
                          f"got {merged['rule']!r}")
    kwargs["rule"] = merged["rule"]
    init = merged["init"]
    if not isinstance(init, str) or not (
        init in ("all_plus", "all_zero") or init.startswith("random:")
    ):
        raise ConfigError(
            f"key 'init' must be 'all_plus', 'all_zero' or 'random:<m0>', "
            f"got {init!r}"
        )
    if init.startswith("random:"):
        try:
            m0 = float(init.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"key 'init' has a bad bias value: {init!r}")
        if not -1.0 <= m0 <= 1.0:
            raise ConfigError("key 'init' bias must be in [-1, 1]")
    kwargs["init"] = init

    sweep = None
    if "sweep" in raw:
        sw = raw["sweep"]
        if not isinstance(sw, dict) or set(sw) != {"key", "values"}:
            raise ConfigError("key 'sweep' must map exactly 'key' and 'values'")
        if sw["key"] not in _SWEEPABLE:
            raise ConfigError(
                f"key 'sweep.key' must be one of {list(_SWEEPABLE)}, "
                f"got {sw['key']!r}"
            )
        values = sw["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError("key 'sweep.values' must be a non-empty list")
        sweep = (sw["key"], tuple(values))

    cfg = RunConfig(lattice=lat, sweep=sweep, **kwargs)
    # construct once so lattice/protocol invariants surface as config errors
    try:
        cfg.protocol_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"not valid YAML: {exc}") from exc
    return parse_config(raw)


def config_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
