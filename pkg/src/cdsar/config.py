"""Experiment configuration: YAML in, resolved dataclass out."""

import dataclasses
import math
import re
from dataclasses import dataclass

import yaml

from cdsar.montecarlo import DEFAULT_Q_GRID
from cdsar.psf import RadarConfig
from cdsar.statmodel import ZETA_MIN_DEFAULT, ContrastSpec

SWEEP_PARAMS = ("zeta_max", "kappa")
KAPPA_MATCH_TOL = 1e-9

_NUM = r"\d*\.?\d*(?:[eE][-+]?\d+)?"
_PI_RE = re.compile(rf"^\s*([-+]?{_NUM})\s*\*?\s*pi\s*(?:/\s*({_NUM}))?\s*$")


class ConfigError(ValueError):
    pass


def parse_number(value, name="value"):
    """Float from a number or a string like '5pi', '2.5*pi', 'pi/4'."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if m:
            coef, den = m.group(1), m.group(2)
            try:
                v = (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
                return v / float(den) if den else v
            except (ValueError, ZeroDivisionError):
                pass
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{name}: cannot parse {value!r} as a number")


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param must be one of {SWEEP_PARAMS}, got {self.param!r}")
        if not self.values:
            raise ConfigError("sweep.values must be nonempty")


@dataclass(frozen=True)
class ExperimentConfig:
    kappa: float = 2.5
    zeta_max: float = 5.0 * math.pi
    zeta_min: float = ZETA_MIN_DEFAULT
    p_n: float = 0.1
    q: float = 0.5
    q_grid: tuple = DEFAULT_Q_GRID
    eval_q: tuple = (0.2, 0.5)
    p: float = 0.05
    train_size: int = 1000
    eval_size: int = 1000
    seed: int = 0
    radar: RadarConfig = None
    sweep: SweepSpec = None
    psf_rows: tuple = ((math.pi, 2.5), (5.0 * math.pi, 2.5), (5.0 * math.pi, 1.0))
    map_step: float = math.pi / 4

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa!r}")
        if not self.zeta_max >= math.pi:
            raise ConfigError(f"zeta_max must be at least pi, got {self.zeta_max!r}")
        try:
            ContrastSpec(self.p_n, self.q)
            for q in self.q_grid + self.eval_q:
                ContrastSpec(self.p_n, q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.q_grid:
            raise ConfigError("q_grid must be nonempty")
        if not 0 < self.p < 1:
            raise ConfigError(f"p must lie in (0, 1), got {self.p!r}")
        if self.train_size < 1 or self.eval_size < 1:
            raise ConfigError("ensemble sizes must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.map_step > 0:
            raise ConfigError("map_step must be positive")

    def to_dict(self):
        d = dataclasses.asdict(self)
        if self.sweep is not None:
            d["sweep"] = {"param": self.sweep.param, "values": list(self.sweep.values)}
        d["q_grid"] = list(self.q_grid)
        d["eval_q"] = list(self.eval_q)
        d["psf_rows"] = [list(r) for r in self.psf_rows]
        return d

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_RADAR_FIELDS = {f.name for f in dataclasses.fields(RadarConfig)}


def config_from_dict(d):
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(d) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for name in ("kappa", "zeta_max", "zeta_min", "p_n", "q", "p", "map_step"):
        if name in d:
            kw[name] = parse_number(d[name], name)
    for name in ("train_size", "eval_size", "seed"):
        if name in d:
            v = d[name]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
            kw[name] = v
    for name in ("q_grid", "eval_q"):
        if name in d:
            if not isinstance(d[name], (list, tuple)):
                raise ConfigError(f"{name} must be a list")
            kw[name] = tuple(parse_number(v, name) for v in d[name])
    if "psf_rows" in d:
        rows = []
        for r in d["psf_rows"]:
            if not isinstance(r, (list, tuple)) or len(r) != 2:
                raise ConfigError("psf_rows entries must be [zeta_max, kappa] pairs")
            rows.append((parse_number(r[0], "psf_rows"), parse_number(r[1], "psf_rows")))
        kw["psf_rows"] = tuple(rows)
    if d.get("sweep") is not None:
        sw = d["sweep"]
        if not isinstance(sw, dict) or set(sw) - {"param", "values"}:
            raise ConfigError("sweep must be a mapping with keys 'param' and 'values'")
        kw["sweep"] = SweepSpec(
            sw.get("param"), tuple(parse_number(v, "sweep.values") for v in sw.get("values") or ())
        )
    if d.get("radar") is not None:
        rd = d["radar"]
        if not isinstance(rd, dict):
            raise ConfigError("radar must be a mapping")
        bad = set(rd) - _RADAR_FIELDS
        if bad:
            raise ConfigError(f"unknown radar keys: {sorted(bad)}")
        try:
            radar = RadarConfig(**{k: parse_number(v, f"radar.{k}") for k, v in rd.items()})
        except TypeError as exc:
            raise ConfigError(f"radar: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"radar: {exc}") from None
        derived = radar.kappa
        if "kappa" in kw and abs(kw["kappa"] - derived) > KAPPA_MATCH_TOL * max(1.0, abs(derived)):
            raise ConfigError(
                f"kappa={kw['kappa']!r} disagrees with radar-derived kappa={derived!r}"
            )
        kw["kappa"] = derived
        kw["radar"] = radar
    return ExperimentConfig(**kw)


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
