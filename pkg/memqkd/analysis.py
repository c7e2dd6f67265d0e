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
Rate-versus-distance curves, crossover searches against the PLOB bound,
(eta_total, T2) region maps and fiber-wavelength sweeps.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from memqkd.bounds import channel_transmittance, plob_bound, single_node_bound
from memqkd.config import get_settings
from memqkd.model import ModuleCount, SystemConfig
from memqkd.rates import evaluate, key_rate_over_distance
from memqkd.utils.parallel import ordered_map
from memqkd.utils.units import convert, loss_db_per_km_to_att_length_km

logger = logging.getLogger("memqkd.analysis")

# Crossover end points are refined to this many meters.
DISTANCE_RESOLUTION = 1.0

REFERENCE_T2 = 2.0
REFERENCE_ETA_TOTAL = 0.01155


class FiberProfileError(ValueError):
    pass


def distance_grid(l_min: Optional[float] = None, l_max: Optional[float] = None,
                  points: Optional[int] = None, spacing: str = 'log') -> np.ndarray:
    """Distance grid in meters; defaults come from the runtime settings."""
    settings = get_settings()
    l_min = settings.grid_min_km * 1e3 if l_min is None else l_min
    l_max = settings.grid_max_km * 1e3 if l_max is None else l_max
    points = settings.grid_points if points is None else points
    if not l_min < l_max:
        raise ValueError(f"Grid minimum {l_min} must be below maximum {l_max}")
    if points < 2:
        raise ValueError(f"A grid needs at least 2 points, got {points}")
    if spacing == 'log':
        if l_min <= 0:
            raise ValueError("A log-spaced grid needs a positive minimum")
        return np.geomspace(l_min, l_max, points)
    if spacing == 'linear':
        return np.linspace(l_min, l_max, points)
    raise ValueError(f"Unknown grid spacing {spacing!r}")


@dataclass(frozen=True)
class SweepSpec:
    l_min: float
    l_max: float
    points: int = 500
    spacing: str = 'log'
    modules: Tuple[ModuleCount, ...] = (1,)
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.l_min < self.l_max:
            raise ValueError(f"Sweep minimum {self.l_min} must be below maximum {self.l_max}")
        if self.points < 2:
            raise ValueError(f"A sweep needs at least 2 points, got {self.points}")
        for m in self.modules:
            if m != math.inf and (int(m) != m or m < 1):
                raise ValueError(f"Module counts must be positive integers or inf, got {m}")

    def distances(self) -> np.ndarray:
        if self.spacing == 'linear':
            return np.linspace(self.l_min, self.l_max, self.points)
        if self.l_min == 0:
            # keep the zero-distance point on a log grid
            return np.concatenate(([0.0], np.geomspace(self.l_max / 10 ** 6, self.l_max,
                                                       self.points - 1)))
        return distance_grid(self.l_min, self.l_max, self.points, self.spacing)


@dataclass(frozen=True)
class CurvePoint:
    distance: float
    m: ModuleCount
    rate: float
    rate_raw: float
    plob: float
    single_node: float
    intermediates: Dict[str, float]

    @property
    def plob_unbounded(self) -> bool:
        return math.isinf(self.plob)


INTERMEDIATES = ('eta', 'eta_prime', 'p_s', 'eps_dp', 'e_x', 'e_z', 'yield_y')


def rate_curve(cfg: SystemConfig, spec: SweepSpec) -> List[CurvePoint]:
    """
    Key rate, PLOB bound and one-middle-node bound at every distance of
    `spec`, for each of its module counts (which may include inf).
    """
    cfg = cfg.replace(spec.overrides) if spec.overrides else cfg
    distances = spec.distances()
    eta_ch = channel_transmittance(distances, cfg.channel.att_length)
    plob = plob_bound(eta_ch)
    single = single_node_bound(eta_ch)

    points = []
    for m in spec.modules:
        arrays = evaluate(cfg, distances, m)
        rate = arrays.rate
        for i, distance in enumerate(distances):
            points.append(CurvePoint(
                distance=float(distance),
                m=m,
                rate=float(rate[i]),
                rate_raw=float(arrays.rate_raw[i]),
                plob=float(plob[i]),
                single_node=float(single[i]),
                intermediates={name: float(getattr(arrays, name)[i]) for name in INTERMEDIATES},
            ))
    return points


def _margin(cfg: SystemConfig, m: ModuleCount, distances: np.ndarray) -> np.ndarray:
    """Signed key rate minus PLOB bound (-inf where the bound is unbounded)."""
    rate = key_rate_over_distance(cfg, distances, m)
    bound = plob_bound(channel_transmittance(distances, cfg.channel.att_length))
    return rate - bound


def _scan(cfg: SystemConfig, m: ModuleCount, l_grid: np.ndarray) -> np.ndarray:
    return _margin(cfg, m, l_grid) > 0


def _refine(cfg: SystemConfig, m: ModuleCount, below: float, above: float) -> float:
    def margin(distance):
        return float(_margin(cfg, m, np.array([distance]))[0])
    return float(optimize.brentq(margin, below, above, xtol=DISTANCE_RESOLUTION))


def beats_plob(cfg: SystemConfig, m: ModuleCount,
               l_grid: Optional[np.ndarray] = None) -> List[Tuple[float, float]]:
    """
    Distance intervals (meters) where the unclamped key rate with `m`
    modules exceeds the PLOB bound. Sign changes found on `l_grid` are
    refined by root finding; an empty list means no grid point beats it.
    """
    l_grid = distance_grid() if l_grid is None else np.asarray(l_grid, dtype=float)
    above = _scan(cfg, m, l_grid)
    intervals = []
    i = 0
    while i < len(l_grid):
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(l_grid) and above[j + 1]:
            j += 1
        start = l_grid[i] if i == 0 else _refine(cfg, m, l_grid[i - 1], l_grid[i])
        end = l_grid[j] if j == len(l_grid) - 1 else _refine(cfg, m, l_grid[j], l_grid[j + 1])
        intervals.append((float(start), float(end)))
        i = j + 1
    return intervals


class SearchStatus(str, Enum):
    FOUND = 'found'
    INFEASIBLE = 'infeasible'
    CAP_EXHAUSTED = 'cap_exhausted'


@dataclass(frozen=True)
class MinModulesResult:
    status: SearchStatus
    m: Optional[int] = None
    m_cap: Optional[int] = None
    crossover: Tuple[Tuple[float, float], ...] = ()

    @property
    def found(self) -> bool:
        return self.status == SearchStatus.FOUND

    def label(self) -> str:
        if self.found:
            return str(self.m)
        return self.status.value


class _Oracle:
    """Memoized 'does m beat PLOB somewhere on the grid'."""

    def __init__(self, cfg: SystemConfig, l_grid: np.ndarray):
        self.cfg = cfg
        self.l_grid = l_grid
        self.cache: Dict[ModuleCount, bool] = {}

    def __call__(self, m: ModuleCount) -> bool:
        if m not in self.cache:
            self.cache[m] = bool(np.any(_scan(self.cfg, m, self.l_grid)))
        return self.cache[m]


def _linear_scan(beats: _Oracle, upper: int) -> Optional[int]:
    for m in range(1, upper + 1):
        if beats(m):
            return m
    return None


def min_m_to_beat(cfg: SystemConfig, m_cap: Optional[int] = None,
                  l_grid: Optional[np.ndarray] = None) -> MinModulesResult:
    """
    Smallest number of memory modules whose key rate beats the PLOB bound
    at some distance of `l_grid`.

    The m -> inf rate is checked first; if even that never beats the bound
    the configuration is infeasible. Otherwise doubling brackets the answer
    and bisection narrows it, assuming that beating is monotone in m; a
    failed neighbour check falls back to a linear scan.
    """
    m_cap = get_settings().m_cap if m_cap is None else m_cap
    if m_cap < 1:
        raise ValueError(f"m_cap must be >= 1, got {m_cap}")
    l_grid = distance_grid() if l_grid is None else np.asarray(l_grid, dtype=float)
    beats = _Oracle(cfg, l_grid)

    if not beats(math.inf):
        return MinModulesResult(SearchStatus.INFEASIBLE, m_cap=m_cap)

    lo, hi = 0, 1
    while not beats(hi):
        lo = hi
        if hi >= m_cap:
            return MinModulesResult(SearchStatus.CAP_EXHAUSTED, m_cap=m_cap)
        hi = min(2 * hi, m_cap)

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if beats(mid):
            hi = mid
        else:
            lo = mid

    monotone = (hi == 1 or not beats(hi - 1)) and (hi >= m_cap or beats(hi + 1))
    if not monotone:
        logger.warning(f"Beating the PLOB bound is not monotone in m around m={hi}; "
                       f"falling back to a linear scan")
        hi = _linear_scan(beats, hi)

    crossover = tuple(beats_plob(cfg, hi, l_grid))
    return MinModulesResult(SearchStatus.FOUND, m=hi, m_cap=m_cap, crossover=crossover)


@dataclass(frozen=True)
class RegionResult:
    eta_grid: Tuple[float, ...]
    t2_grid: Tuple[float, ...]
    min_m: Tuple[Tuple[Optional[ModuleCount], ...], ...]
    violations: Tuple[Tuple[int, int], ...] = ()

    def rows(self):
        for i, eta in enumerate(self.eta_grid):
            for j, t2 in enumerate(self.t2_grid):
                yield eta, t2, self.min_m[i][j]


def _region_cell(task) -> Optional[ModuleCount]:
    cfg, m_list, l_grid = task
    for m in m_list:
        if np.any(_scan(cfg, m, l_grid)):
            return m
    return None


def _nonincreasing(a: Optional[ModuleCount], b: Optional[ModuleCount]) -> bool:
    """Whether stepping from a cell with `a` to one with `b` respects monotonicity."""
    if b is None:
        return a is None
    return a is None or b <= a


def region_grid(eta_grid: Sequence[float], t2_grid: Sequence[float],
                m_list: Sequence[ModuleCount], base_cfg: SystemConfig,
                l_grid: Optional[np.ndarray] = None,
                workers: Optional[int] = None) -> RegionResult:
    """
    For every (eta_total, T2) cell, the smallest m of `m_list` whose key
    rate beats the PLOB bound somewhere on `l_grid`, or None.
    """
    if len(eta_grid) == 0 or len(t2_grid) == 0 or len(m_list) == 0:
        raise ValueError("Region grids and module list must be nonempty")
    l_grid = distance_grid() if l_grid is None else np.asarray(l_grid, dtype=float)
    m_list = tuple(sorted(m_list))
    tasks = [(base_cfg.with_eta_total(eta).with_t2(t2), m_list, l_grid)
             for eta in eta_grid for t2 in t2_grid]
    cells = ordered_map(_region_cell, tasks, workers=workers)

    n_t2 = len(t2_grid)
    table = tuple(tuple(cells[i * n_t2:(i + 1) * n_t2]) for i in range(len(eta_grid)))

    # a better memory (larger eta_total or T2) should never need more modules
    eta_order = np.argsort(eta_grid)
    t2_order = np.argsort(t2_grid)
    violations = set()
    for i in range(len(eta_grid)):
        for a, b in zip(t2_order, t2_order[1:]):
            if not _nonincreasing(table[i][a], table[i][b]):
                violations.add((i, int(b)))
    for j in range(n_t2):
        for a, b in zip(eta_order, eta_order[1:]):
            if not _nonincreasing(table[a][j], table[b][j]):
                violations.add((int(b), j))
    for i, j in sorted(violations):
        logger.warning(f"Region cell eta_total={eta_grid[i]}, T2={t2_grid[j]} needs more "
                       f"modules than a worse neighbour")

    return RegionResult(tuple(eta_grid), tuple(t2_grid), table, tuple(sorted(violations)))


@dataclass(frozen=True)
class FiberProfile:
    """Attenuation length (meters) against wavelength (nanometers)."""
    wavelengths: Tuple[float, ...]
    att_lengths: Tuple[float, ...]
    interpolation: str = 'linear-loss'

    def __post_init__(self):
        if len(self.wavelengths) != len(self.att_lengths) or not self.wavelengths:
            raise FiberProfileError("A fiber profile needs matching, nonempty columns")
        if any(b <= a for a, b in zip(self.wavelengths, self.wavelengths[1:])):
            raise FiberProfileError("Wavelengths must be strictly increasing")
        if any(not a > 0 for a in self.att_lengths):
            raise FiberProfileError("Attenuation lengths must be positive")

    def att_length_at(self, wavelength: float) -> float:
        """Interpolated linearly in loss (1 / L_att) between table rows."""
        if not self.wavelengths[0] <= wavelength <= self.wavelengths[-1]:
            raise FiberProfileError(
                f"Wavelength {wavelength} nm outside the profile range "
                f"[{self.wavelengths[0]}, {self.wavelengths[-1]}] nm"
            )
        loss = np.interp(wavelength, self.wavelengths, 1.0 / np.asarray(self.att_lengths))
        return float(1.0 / loss)


def load_fiber_profile(source: str) -> FiberProfile:
    """
    Read a CSV with a `wavelength_nm` column and either `att_length_km` or
    `loss_db_per_km`. Rows must be sorted by strictly increasing wavelength.
    """
    reader = csv.DictReader(io.StringIO(source))
    header = [name.strip() for name in (reader.fieldnames or [])]
    if 'wavelength_nm' not in header:
        raise FiberProfileError("Fiber profile needs a wavelength_nm column")
    if 'att_length_km' in header:
        column, to_km = 'att_length_km', float
    elif 'loss_db_per_km' in header:
        column, to_km = 'loss_db_per_km', loss_db_per_km_to_att_length_km
    else:
        raise FiberProfileError("Fiber profile needs an att_length_km or loss_db_per_km column")
    reader.fieldnames = header

    wavelengths, att_lengths = [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            wavelength = float(row['wavelength_nm'])
            value = float(row[column])
        except (TypeError, ValueError):
            raise FiberProfileError(f"Malformed fiber profile row {lineno}: {row}")
        if not value > 0:
            raise FiberProfileError(f"Nonpositive attenuation on row {lineno}: {value}")
        wavelengths.append(wavelength)
        att_lengths.append(convert(to_km(value), 'km', 'm'))
    return FiberProfile(tuple(wavelengths), tuple(att_lengths))


@dataclass(frozen=True)
class WavelengthPoint:
    wavelength: float
    att_length: float
    result: MinModulesResult


def _wavelength_task(task) -> MinModulesResult:
    cfg, m_cap, l_grid = task
    return min_m_to_beat(cfg, m_cap, l_grid)


def wavelength_sweep(profile: FiberProfile, base_cfg: SystemConfig,
                     m_cap: Optional[int] = None,
                     wavelengths: Optional[Sequence[float]] = None,
                     t2: float = REFERENCE_T2, eta_total: float = REFERENCE_ETA_TOTAL,
                     l_grid: Optional[np.ndarray] = None,
                     workers: Optional[int] = None) -> List[WavelengthPoint]:
    """
    Minimal number of modules to beat the PLOB bound when photons travel
    at each wavelength without conversion. Evaluated at the profile rows
    unless `wavelengths` are given.
    """
    wavelengths = profile.wavelengths if wavelengths is None else tuple(wavelengths)
    att_lengths = [profile.att_length_at(w) for w in wavelengths]
    cfg = base_cfg.with_eta_total(eta_total).with_t2(t2)
    l_grid = distance_grid() if l_grid is None else np.asarray(l_grid, dtype=float)
    tasks = [(cfg.with_att_length(a), m_cap, l_grid) for a in att_lengths]
    results = ordered_map(_wavelength_task, tasks, workers=workers)
    return [WavelengthPoint(w, a, r) for w, a, r in zip(wavelengths, att_lengths, results)]
