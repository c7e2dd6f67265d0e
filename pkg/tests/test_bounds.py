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

from memqkd.bounds import channel_transmittance, plob_bound, single_node_bound
from memqkd.rates import DomainError


def test_channel_transmittance():
    assert channel_transmittance(0.0, 22e3) == 1.0
    assert channel_transmittance(50e3, 22e3) == pytest.approx(math.exp(-50 / 22), rel=1e-14)
    assert channel_transmittance(50e3, 22e3) == pytest.approx(0.103030, rel=2e-5)
    with pytest.raises(DomainError):
        channel_transmittance(-1.0, 22e3)
    with pytest.raises(DomainError):
        channel_transmittance(1.0, 0.0)


def test_plob_values():
    assert plob_bound(0.5) == pytest.approx(1.0, rel=1e-15)
    assert plob_bound(0.0) == 0.0
    assert plob_bound(0.102923) == pytest.approx(-math.log2(1 - 0.102923), rel=1e-14)
    assert plob_bound(0.102923) == pytest.approx(0.156697, rel=2e-5)


def test_plob_unbounded_for_lossless_channel():
    assert math.isinf(plob_bound(1.0))
    assert math.isinf(single_node_bound(1.0))


def test_plob_small_transmittance_slope():
    eta = 1e-8
    assert (plob_bound(eta) / eta) * math.log(2) == pytest.approx(1.0, abs=1e-6)


def test_plob_increasing_and_convex():
    eta = np.linspace(0.001, 0.999, 999)
    bound = plob_bound(eta)
    assert np.all(np.diff(bound) > 0)
    assert np.all(np.diff(bound, n=2) > 0)


def test_single_node_bound_dominates_plob():
    eta = np.geomspace(1e-12, 0.99, 50)
    assert np.all(single_node_bound(eta) >= plob_bound(eta))
    # the relay bound equals PLOB over half the channel
    np.testing.assert_allclose(single_node_bound(eta), plob_bound(np.sqrt(eta)), rtol=1e-14)


def test_array_in_array_out():
    lengths = np.array([0.0, 1e3, 1e5])
    result = plob_bound(channel_transmittance(lengths, 22e3))
    assert isinstance(result, np.ndarray)
    assert result.shape == (3,)
    assert isinstance(plob_bound(0.3), float)


def test_invalid_transmittance():
    with pytest.raises(DomainError):
        plob_bound(1.5)
    with pytest.raises(DomainError):
        single_node_bound(-0.1)
    with pytest.raises(DomainError):
        plob_bound(np.array([0.2, math.nan]))
