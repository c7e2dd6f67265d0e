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

from memqkd import montecarlo, rates
from memqkd.combinatorics import min_detect_dist
from memqkd.montecarlo import SamplingError


def analytic(cfg):
    b = rates.secret_key_rate(cfg)
    return {
        'yield': b.yield_y,
        'exp_dephase': rates.exp_dephase_expectation(cfg, b.p_s),
        'eps_dp': b.eps_dp,
        'qber_x': b.e_x,
        'qber_z': b.e_z,
    }


@pytest.mark.slow
@pytest.mark.parametrize("eta_total", [0.3, 0.6])
@pytest.mark.parametrize("distance", [1e3, 5e3])
@pytest.mark.parametrize("m", [1, 3, 8])
def test_estimates_agree_with_closed_form(defaults, eta_total, distance, m):
    # short T2 so that storage times actually spread the dephasing
    cfg = (defaults.with_eta_total(eta_total).with_distance(distance)
           .with_modules(m).with_t2(1e-4))
    estimates = montecarlo.estimate(cfg, 10 ** 6, seed=2021)
    for name, expected in analytic(cfg).items():
        estimate = estimates[name]
        assert estimate.n_trials == 10 ** 6
        assert estimate.std_error > 0, name
        assert abs(estimate.mean - expected) <= 4 * estimate.std_error, name


def test_estimate_independent_of_workers(desk_scale):
    cfg = desk_scale.with_modules(3).with_t2(1e-4)
    serial = montecarlo.estimate(cfg, 200000, seed=42, workers=1, block_size=50000)
    parallel = montecarlo.estimate(cfg, 200000, seed=42, workers=2, block_size=50000)
    assert serial == parallel


def test_standard_error_halves_with_four_times_the_trials(desk_scale):
    cfg = desk_scale.with_modules(3).with_t2(1e-4)
    small = montecarlo.estimate(cfg, 50000, seed=8)
    large = montecarlo.estimate(cfg, 200000, seed=9)
    for name in ('yield', 'exp_dephase', 'qber_x'):
        ratio = small[name].std_error / large[name].std_error
        assert 1.7 < ratio < 2.3, name
        combined = math.hypot(small[name].std_error, large[name].std_error)
        assert abs(small[name].mean - large[name].mean) <= 4 * combined, name


def test_estimate_replayable(desk_scale):
    first = montecarlo.estimate(desk_scale, 20000, seed=5, block_size=3000)
    second = montecarlo.estimate(desk_scale, 20000, seed=5, block_size=3000)
    other = montecarlo.estimate(desk_scale, 20000, seed=6, block_size=3000)
    assert first == second
    assert first != other


def test_sampled_trials_respect_protocol(desk_scale):
    cfg = desk_scale.with_modules(4)
    batch = montecarlo.sample_trials(cfg, 5000, np.random.default_rng(3))
    assert len(batch) == 5000
    assert np.all(batch.k_a >= 1) and np.all(batch.k_b >= 1)
    assert np.all(batch.k_a <= 4) and np.all(batch.k_b <= 4)
    assert np.all(batch.pairs_made <= np.minimum(batch.k_a, batch.k_b))
    assert np.all(batch.t_a >= batch.t_b)
    np.testing.assert_array_equal(batch.channel_uses, 4 * np.maximum(batch.n_a, batch.n_b))

    record = batch.record(0)
    assert record.k_a == batch.k_a[0]
    assert record.channel_uses == batch.channel_uses[0]


def test_certain_detection_is_deterministic(defaults):
    cfg = defaults.with_eta_total(1.0).with_distance(0.0).with_modules(3)
    record = montecarlo.sample_trial(cfg, np.random.default_rng(0))
    assert (record.n_a, record.n_b) == (1, 1)
    assert (record.k_a, record.k_b) == (3, 3)
    assert record.pairs_made == 3
    assert record.channel_uses == 3


def test_min_detection_frequencies(desk_scale):
    cfg = desk_scale.with_modules(3)
    b = rates.secret_key_rate(cfg)
    expected = min_detect_dist(3, b.eta_prime) / b.p_s ** 2
    expected[0] = 0.0
    frequencies = montecarlo.min_detection_frequencies(cfg, 200000, seed=11)
    assert frequencies[0] == 0.0
    assert frequencies.sum() == pytest.approx(1.0)
    std_error = np.sqrt(expected * (1 - expected) / 200000)
    assert np.all(np.abs(frequencies - expected) <= 4 * std_error)


def test_too_few_trials(desk_scale):
    with pytest.raises(SamplingError):
        montecarlo.estimate(desk_scale, 999, seed=1)


def test_click_probability_too_small(point_a):
    with pytest.raises(SamplingError):
        montecarlo.estimate(point_a.with_distance(5e5), 10 ** 4, seed=1)
