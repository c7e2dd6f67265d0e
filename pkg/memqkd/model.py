#  * Copyright (c) 2020-2021. Authors: see NOTICE file.
#  *
#  * Licensed under the Apache License, Version 2.0 (the "License");
#  * you may not use this file except in compliance with the License.
#  * You may obtain a copy of the License at
#  *
#  *      http://www.apache.org/licenses/LICENSE-2.0
#  *
#  * Unless required by applicable law or agreed to in writing, software
#  * distributed under the License is distributed on an "AS IS" BASIS,
#  * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  * See the License for the specific language governing permissions and
#  * limitations under the License.
"""
Parameter records of the memory station, channel, detectors and BSM.

Units are SI throughout (seconds, meters, probabilities in [0, 1]). The
configuration text format is an env file with flat namespaced keys, e.g.

    memory.t2_s=2.0
    channel.distance_km=100
    protocol.num_modules=400

Lengths are written in kilometers in that format and stored in meters.
"""
from __future__ import annotations

import io
import logging
import math
from decimal import InvalidOperation
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError

from memqkd.utils.units import km_to_m_exact, m_to_km_text

logger = logging.getLogger("memqkd.model")

INFINITE_MODULES = math.inf

ModuleCount = Union[int, float]

DATA_DIR = Path(__file__).parent / "data"
PRESETS = ("paper_defaults", "no_conversion")


class ConfigError(ValueError):
    pass


class _Record(BaseModel):
    class Config:
        frozen = True
        extra = 'forbid'


class MemoryParams(_Record):
    t2_dephasing: float = Field(..., gt=0)
    t_prep: float = Field(..., ge=0)
    eta_prep: float = Field(..., ge=0, le=1)
    eta_coupling: float = Field(..., ge=0, le=1)


class ChannelParams(_Record):
    distance_total: float = Field(..., ge=0)
    att_length: float = Field(..., gt=0)
    light_speed: float = Field(..., gt=0)
    misalignment: float = Field(..., ge=0, le=0.5)


class DetectorParams(_Record):
    dark_count: float = Field(..., ge=0, lt=1)
    eta_det: float = Field(..., ge=0, le=1)


class BsmParams(_Record):
    p_success: float = Field(..., gt=0, le=1)
    ideality: float = Field(..., ge=0, le=1)


class SystemConfig(_Record):
    memory: MemoryParams
    channel: ChannelParams
    detector: DetectorParams
    bsm: BsmParams
    num_modules: int = Field(..., ge=1)
    ec_inefficiency: float = Field(..., ge=1)

    @property
    def eta_total(self) -> float:
        return eta_total(self)

    @property
    def distance(self) -> float:
        return self.channel.distance_total

    def replace(self, changes: Mapping[str, Any]) -> SystemConfig:
        """
        Validated copy with dotted field paths replaced, e.g.
        `cfg.replace({'channel.distance_total': 5e4, 'num_modules': 10})`.
        """
        data = self.dict()
        for path, value in changes.items():
            *parents, leaf = path.split('.')
            target = data
            for parent in parents:
                if parent not in target or not isinstance(target[parent], dict):
                    raise ConfigError(f"Unknown configuration field: {path}")
                target = target[parent]
            if leaf not in target:
                raise ConfigError(f"Unknown configuration field: {path}")
            target[leaf] = value
        return _validated(data, {})

    def with_distance(self, distance: float) -> SystemConfig:
        return self.replace({'channel.distance_total': distance})

    def with_modules(self, m: int) -> SystemConfig:
        return self.replace({'num_modules': m})

    def with_t2(self, t2: float) -> SystemConfig:
        return self.replace({'memory.t2_dephasing': t2})

    def with_att_length(self, att_length: float) -> SystemConfig:
        return self.replace({'channel.att_length': att_length})

    def with_eta_total(self, value: float) -> SystemConfig:
        """
        Copy with the overall efficiency set to `value`. The coupling
        efficiency absorbs the change when it can; otherwise the split
        collapses to (value, 1, 1). Only the product enters any rate.
        """
        others = self.memory.eta_prep * self.detector.eta_det
        if others > 0 and value <= others:
            return self.replace({'memory.eta_coupling': value / others})
        return self.replace({
            'memory.eta_prep': value,
            'memory.eta_coupling': 1.0,
            'detector.eta_det': 1.0,
        })


def eta_total(cfg: SystemConfig) -> float:
    return cfg.memory.eta_prep * cfg.memory.eta_coupling * cfg.detector.eta_det


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


# schema key -> (field path, text -> value, value -> text)
SCHEMA: Dict[str, Tuple[Tuple[str, ...], Callable[[str], Any], Callable[[Any], str]]] = {
    'memory.t2_s': (('memory', 't2_dephasing'), float, repr),
    'memory.t_prep_s': (('memory', 't_prep'), float, repr),
    'memory.eta_prep': (('memory', 'eta_prep'), float, repr),
    'memory.eta_coupling': (('memory', 'eta_coupling'), float, repr),
    'channel.distance_km': (('channel', 'distance_total'), km_to_m_exact, m_to_km_text),
    'channel.att_length_km': (('channel', 'att_length'), km_to_m_exact, m_to_km_text),
    'channel.light_speed_m_per_s': (('channel', 'light_speed'), float, repr),
    'channel.misalignment': (('channel', 'misalignment'), float, repr),
    'detector.dark_count': (('detector', 'dark_count'), float, repr),
    'detector.eta_det': (('detector', 'eta_det'), float, repr),
    'bsm.p_success': (('bsm', 'p_success'), float, repr),
    'bsm.ideality': (('bsm', 'ideality'), float, repr),
    'protocol.num_modules': (('num_modules',), _parse_int, str),
    'protocol.ec_inefficiency': (('ec_inefficiency',), float, repr),
}

_KEY_BY_PATH = {path: key for key, (path, _, _) in SCHEMA.items()}


def _validated(data: dict, raw: Mapping[str, str]) -> SystemConfig:
    try:
        return SystemConfig.parse_obj(data)
    except ValidationError as e:
        error = e.errors()[0]
        path = tuple(str(part) for part in error['loc'])
        key = _KEY_BY_PATH.get(path, '.'.join(path))
        value = raw.get(key)
        if value is None:
            value = _lookup(data, path)
        raise ConfigError(f"Invalid value for {key}: {value!r} ({error['msg']})") from e


def _lookup(data: dict, path: Tuple[str, ...]) -> Any:
    for part in path:
        if not isinstance(data, dict) or part not in data:
            return None
        data = data[part]
    return data


def _read_pairs(text: str) -> Dict[str, str]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith('#') and '=' not in stripped:
            raise ConfigError(f"Cannot parse line {lineno}: {line!r}")
    values = dotenv_values(stream=io.StringIO(text))
    pairs = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"Missing value for {key}")
        pairs[key] = value
    return pairs


def load_config(source: str, base: Optional[SystemConfig] = None) -> SystemConfig:
    """
    Parse configuration text into a validated `SystemConfig`.

    Keys absent from `source` keep their value from `base` (the bundled
    defaults when not given). Unknown keys and out-of-range values
    raise `ConfigError` naming the key and the offending value.
    """
    raw = _read_pairs(source)
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        logger.error(f"Rejected unknown configuration keys: {unknown}")
        raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")

    if base is None and len(raw) < len(SCHEMA):
        base = paper_defaults()
    if base is not None:
        data = base.dict()
    else:
        data = {'memory': {}, 'channel': {}, 'detector': {}, 'bsm': {}}

    for key, text in raw.items():
        path, parse, _ = SCHEMA[key]
        try:
            value = parse(text.strip())
        except (ValueError, InvalidOperation):
            raise ConfigError(f"Invalid value for {key}: {text!r} (not a number)")
        target = data
        for part in path[:-1]:
            target = target[part]
        target[path[-1]] = value

    return _validated(data, raw)


def load_config_file(path: Union[str, Path], base: Optional[SystemConfig] = None) -> SystemConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    logger.debug(f"Loading configuration from {path}")
    return load_config(path.read_text(encoding='utf-8'), base=base)


def serialize_config(cfg: SystemConfig) -> str:
    data = cfg.dict()
    lines = []
    for key, (path, _, dump) in SCHEMA.items():
        lines.append(f"{key}={dump(_lookup(data, path))}")
    return "\n".join(lines) + "\n"


@lru_cache()
def load_preset(name: str) -> SystemConfig:
    """
    Bundled parameter sets: `paper_defaults` (telecom wavelength conversion,
    eta_c = 0.05 * 0.5) and `no_conversion` (eta_c = 0.025 * 1). Both give
    eta_total = 0.01155, T2 = 2 s and L_att = 22 km.
    """
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset {name!r}, expected one of {', '.join(PRESETS)}")
    text = (DATA_DIR / f"{name}.env").read_text(encoding='utf-8')
    missing = sorted(set(SCHEMA) - set(_read_pairs(text)))
    if missing:
        raise ConfigError(f"Preset {name} lacks keys: {', '.join(missing)}")
    return load_config(text)


def paper_defaults() -> SystemConfig:
    return load_preset("paper_defaults")
