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

import math

import numpy as np
import pytest

from memqkd import rates
from memqkd.analysis import (
    FiberProfile, FiberProfileError, SearchStatus, SweepSpec, beats_plob,
    distance_grid, load_fiber_profile, min_m_to_beat, rate_curve, region_grid,
    wavelength_sweep
)
from memqkd.bounds import channel_transmittance, plob_bound
from memqkd.model import DATA_DIR

COARSE_GRID = np.geomspace(1.0, 8e5, 400)


def curve_by_m(points):
    curves = {}
    for point in points:
        curves.setdefault(point.m, []).append(point)
    return curves


def example_profile():
    return load_fiber_profile((DATA_DIR / "example_fiber.csv").read_text(encoding='utf-8'))


def test_default_distance_grid(settings):
    grid = distance_grid()
    assert len(grid) == settings.grid_points == 2000
    assert grid[0] == pytest.approx(1.0)
    assert grid[-1] == pytest.approx(8e5)
    assert np.all(np.diff(grid) > 0)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(l_min=5e3, l_max=1e3)
    with pytest.raises(ValueError):
        SweepSpec(l_min=0.0, l_max=1e3, points=1)
    with pytest.raises(ValueError):
        SweepSpec(l_min=0.0, l_max=1e3, modules=(0,))


def test_sweep_spec_distances():
    linear = SweepSpec(l_min=0.0, l_max=1e3, points=11, spacing='linear').distances()
    np.testing.assert_allclose(linear, np.arange(0.0, 1001.0, 100.0))
    log = SweepSpec(l_min=0.0, l_max=1e5, points=50).distances()
    assert log[0] == 0.0 and len(log) == 50
    assert log[-1] == pytest.approx(1e5)


def test_rate_curve_zero_distance(point_a):
    points = rate_curve(point_a, SweepSpec(l_min=0.0, l_max=1e5, points=10, modules=(1, 400)))
    assert len(points) == 20
    first = points[0]
    assert first.distance == 0.0
    assert first.plob_unbounded
    assert math.isfinite(first.rate) and first.rate >= 0.0
    assert not points[1].plob_unbounded


def test_rate_curve_ordering(point_a):
    spec = SweepSpec(l_min=1e3, l_max=6e5, points=200, modules=(1, 400, math.inf))
    curves = curve_by_m(rate_curve(point_a, spec))
    for r_1, r_400, r_inf in zip(curves[1], curves[400], curves[math.inf]):
        assert r_inf.rate >= r_400.rate >= r_1.rate


def test_rate_curve_below_relay_bound(point_a, near_ideal):
    spec = SweepSpec(l_min=0.0, l_max=8e5, points=300, modules=(1, 50, math.inf))
    for cfg in (point_a, near_ideal):
        for point in rate_curve(cfg, spec):
            assert point.rate <= point.single_node


def test_rate_curve_single_module_matches_rates(point_a):
    spec = SweepSpec(l_min=1e3, l_max=3e5, points=25)
    for point in rate_curve(point_a, spec):
        expected = rates.secret_key_rate(point_a, 1, point.distance)
        assert point.rate == pytest.approx(expected.rate, rel=1e-14, abs=1e-300)
        assert point.intermediates['eta_prime'] == pytest.approx(expected.eta_prime, rel=1e-14)


def test_rate_curve_overrides(point_a):
    spec = SweepSpec(l_min=1e3, l_max=1e4, points=3, overrides={'memory.t2_dephasing': 1e-3})
    short = rate_curve(point_a, spec)
    long = rate_curve(point_a, SweepSpec(l_min=1e3, l_max=1e4, points=3))
    assert short[-1].intermediates['eps_dp'] > long[-1].intermediates['eps_dp']


def test_single_module_never_beats_plob(point_a):
    assert beats_plob(point_a, 1) == []


def test_many_modules_beat_plob(point_a):
    intervals = beats_plob(point_a, 600)
    assert intervals
    for start, end in intervals:
        assert start < end
        rate = rates.key_rate_over_distance(point_a, np.array([start + 5.0, end - 5.0]), 600)
        bound = plob_bound(channel_transmittance(np.array([start + 5.0, end - 5.0]),
                                                 point_a.channel.att_length))
        assert np.all(rate > bound)
        outside = rates.key_rate_over_distance(point_a, np.array([start - 5.0]), 600)
        assert outside[0] < plob_bound(channel_transmittance(start - 5.0,
                                                             point_a.channel.att_length))


def test_near_ideal_hardware_beats_plob(near_ideal):
    assert beats_plob(near_ideal, 10 ** 4, COARSE_GRID)


@pytest.mark.slow
def test_point_a_crossover(point_a):
    result = min_m_to_beat(point_a)
    assert result.status == SearchStatus.FOUND
    assert 300 <= result.m <= 500
    assert result.crossover
    assert beats_plob(point_a, result.m - 1) == []


def test_ideal_hardware_needs_one_module(near_ideal):
    result = min_m_to_beat(near_ideal, l_grid=COARSE_GRID)
    assert result.found
    assert result.m == 1
    assert result.label() == "1"


def test_fast_dephasing_is_infeasible(point_a):
    result = min_m_to_beat(point_a.with_t2(1e-9), l_grid=COARSE_GRID)
    assert result.status == SearchStatus.INFEASIBLE
    assert result.m is None
    assert result.label() == "infeasible"


def test_cap_exhausted_is_distinguished(point_a):
    result = min_m_to_beat(point_a, m_cap=10, l_grid=COARSE_GRID)
    assert result.status == SearchStatus.CAP_EXHAUSTED
    assert result.m_cap == 10


def test_invalid_cap(point_a):
    with pytest.raises(ValueError):
        min_m_to_beat(point_a, m_cap=0)


def linear_min_m(cfg, m_cap, grid):
    bound = plob_bound(channel_transmittance(grid, cfg.channel.att_length))
    for m in range(1, m_cap + 1):
        if np.any(rates.key_rate_over_distance(cfg, grid, m) > bound):
            return m
    return None


@pytest.mark.slow
def test_bisection_matches_linear_scan(defaults):
    rng = np.random.default_rng(2000)
    grid = np.geomspace(1.0, 8e5, 200)
    for _ in range(10):
        cfg = (defaults.with_eta_total(float(10 ** rng.uniform(-2.5, 0)))
               .with_t2(float(10 ** rng.uniform(-3, 1)))
               .with_att_length(float(10 ** rng.uniform(2, 4.5))))
        result = min_m_to_beat(cfg, m_cap=200, l_grid=grid)
        expected = linear_min_m(cfg, 200, grid)
        if expected is None:
            assert not result.found
        else:
            assert result.m == expected


def test_region_grid_matches_search(point_a):
    m_list = [1, 10, 100, 400, 1000]
    result = region_grid([point_a.eta_total], [2.0], m_list, point_a, l_grid=COARSE_GRID)
    minimal = min_m_to_beat(point_a, l_grid=COARSE_GRID)
    assert minimal.found
    assert result.min_m[0][0] == min(m for m in m_list if m >= minimal.m)


def test_region_grid_hopeless_corner(defaults):
    result = region_grid([1e-6], [1e-3], [1, 10, 100, 400, 1000], defaults, l_grid=COARSE_GRID)
    assert result.min_m == ((None,),)


def test_region_grid_layout_and_refinement(defaults):
    m_list = [1, 10, 100, 1000, math.inf]
    coarse = region_grid([0.01, 1.0], [0.01, 10.0], m_list, defaults, l_grid=COARSE_GRID)
    fine = region_grid([0.01, 0.1, 1.0], [0.01, 1.0, 10.0], m_list, defaults, l_grid=COARSE_GRID)
    rows = list(coarse.rows())
    assert [(eta, t2) for eta, t2, _ in rows] == [(0.01, 0.01), (0.01, 10.0),
                                                  (1.0, 0.01), (1.0, 10.0)]
    for i, fine_i in ((0, 0), (1, 2)):
        for j, fine_j in ((0, 0), (1, 2)):
            assert coarse.min_m[i][j] == fine.min_m[fine_i][fine_j]
    assert coarse.violations == ()


def test_region_grid_independent_of_workers(defaults):
    args = ([0.005, 0.05, 0.5], [0.1, 2.0], [1, 10, 100, 1000], defaults)
    serial = region_grid(*args, l_grid=COARSE_GRID, workers=1)
    parallel = region_grid(*args, l_grid=COARSE_GRID, workers=3)
    assert serial == parallel


def test_region_grid_needs_cells(defaults):
    with pytest.raises(ValueError):
        region_grid([], [1.0], [1], defaults)


def test_load_fiber_profile_loss_column():
    profile = load_fiber_profile("wavelength_nm,loss_db_per_km\n400,10\n500,5\n")
    assert profile.att_lengths[0] == pytest.approx(434.294482, rel=1e-8)
    assert profile.att_lengths[1] == pytest.approx(868.588964, rel=1e-8)
    # one attenuation length costs 1/e of the light
    assert 10 ** (-10 * profile.att_lengths[0] / 1e3 / 10) == pytest.approx(math.exp(-1))


def test_load_fiber_profile_att_length_column():
    profile = load_fiber_profile("wavelength_nm,att_length_km\n1550,22\n")
    assert profile.att_lengths == pytest.approx((22000.0,), rel=1e-15)
    assert profile.att_length_at(1550) == pytest.approx(22000.0, rel=1e-15)


@pytest.mark.parametrize("text", [
    "wavelength_nm,att_length_km\n500,1\n400,2\n",
    "wavelength_nm,att_length_km\n400,1\n400,2\n",
    "wavelength_nm,att_length_km\n400,0\n",
    "wavelength_nm,loss_db_per_km\n400,-3\n",
    "wavelength_nm,att_length_km\n400,abc\n",
    "wavelength_nm,att_length_km\n400\n",
    "wavelength_nm,transmission\n400,0.5\n",
    "lambda,att_length_km\n400,1\n",
    "wavelength_nm,att_length_km\n",
])
def test_load_fiber_profile_rejects(text):
    with pytest.raises(FiberProfileError):
        load_fiber_profile(text)


def test_att_length_interpolated_in_loss():
    profile = FiberProfile(wavelengths=(400.0, 600.0), att_lengths=(100.0, 300.0))
    # losses 1/100 and 1/300 average to 1/150
    assert profile.att_length_at(500.0) == pytest.approx(150.0, rel=1e-14)
    with pytest.raises(FiberProfileError):
        profile.att_length_at(650.0)


def test_bundled_profile():
    profile = example_profile()
    assert len(profile.wavelengths) == 12
    assert profile.att_length_at(1550) == pytest.approx(22000.0, rel=1e-15)
    assert profile.att_length_at(400) == pytest.approx(5.0, rel=1e-15)


def test_wavelength_sweep_point_a_entry(point_a):
    profile = example_profile()
    points = wavelength_sweep(profile, point_a, wavelengths=[1550], l_grid=COARSE_GRID)
    direct = min_m_to_beat(point_a, l_grid=COARSE_GRID)
    assert points[0].att_length == pytest.approx(22000.0, rel=1e-15)
    assert points[0].result.m == direct.m


def test_wavelength_sweep_out_of_range(point_a):
    with pytest.raises(FiberProfileError):
        wavelength_sweep(example_profile(), point_a, wavelengths=[1700])


@pytest.mark.slow
def test_high_loss_trend(no_conversion):
    points = wavelength_sweep(example_profile(), no_conversion)
    minimal = [p.result.m for p in points]
    assert all(p.result.found for p in points)
    # the profile is sorted by increasing attenuation length
    assert minimal == sorted(minimal)
    assert minimal[0] < 10
