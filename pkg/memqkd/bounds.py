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
Capacity bounds the protocol is compared against, in bits per channel use.

The one-middle-node bound is the repeater-assisted capacity of a lossy
channel split in two equal halves, -log2(1 - sqrt(eta)); it is taken from
the literature on repeater capacities rather than derived here.
"""
from typing import Union

import numpy as np

from memqkd.rates import DomainError

ArrayLike = Union[float, np.ndarray]


def _as_output(value: np.ndarray, like: ArrayLike):
    return float(value) if np.ndim(like) == 0 else value


def _check_transmittance(eta_ch: np.ndarray):
    if np.any((eta_ch < 0) | (eta_ch > 1)) or np.any(np.isnan(eta_ch)):
        raise DomainError("Transmittance must lie in [0, 1]")


def channel_transmittance(length: ArrayLike, att_length: float) -> ArrayLike:
    if att_length <= 0:
        raise DomainError(f"Attenuation length must be positive, got {att_length}")
    length = np.asarray(length, dtype=float)
    if np.any(length < 0):
        raise DomainError("Fiber length must be nonnegative")
    return _as_output(np.exp(-length / att_length), length)


def plob_bound(eta_ch: ArrayLike) -> ArrayLike:
    """
    -log2(1 - eta_ch). Unbounded (inf) for a lossless channel.
    """
    eta = np.asarray(eta_ch, dtype=float)
    _check_transmittance(eta)
    with np.errstate(divide='ignore'):
        bound = -np.log1p(-eta) / np.log(2.0)
    return _as_output(bound, eta_ch)


def single_node_bound(eta_ch: ArrayLike) -> ArrayLike:
    eta = np.asarray(eta_ch, dtype=float)
    _check_transmittance(eta)
    with np.errstate(divide='ignore'):
        bound = -np.log1p(-np.sqrt(eta)) / np.log(2.0)
    return _as_output(bound, eta_ch)
