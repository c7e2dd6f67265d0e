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
Closed-form yield, error rates and secret key rate of the multiplexed
memory-assisted protocol, for any number m >= 1 of memory modules
(including the m -> infinity limit).

Every quantity is evaluated in numpy so that a whole distance grid can be
processed at once; the scalar functions below are thin views on
`evaluate`. Key rates are per channel use and per optical mode.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Union

import numpy as np
from scipy.special import entr

from memqkd.combinatorics import expected_pairs
from memqkd.model import ModuleCount, SystemConfig

logger = logging.getLogger("memqkd.rates")

ArrayLike = Union[float, np.ndarray]

# Below this click probability p_s = 1 - (1 - eta')^m is taken to first
# order, m * eta', as long as m * eta' < FIRST_ORDER_MAX_MEAN (relative
# error below m * eta' / 2).
FIRST_ORDER_MAX_CLICK = 1e-12
FIRST_ORDER_MAX_MEAN = 1e-6


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class RateBreakdown:
    distance: float
    m: ModuleCount
    eta: float
    eta_prime: float
    p_s: float
    tau: float
    alpha_val: float
    eps_mis: float
    eps_dp: float
    e_x: float
    e_z: float
    yield_y: float
    rate: float
    rate_raw: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class RateArrays:
    """Every intermediate quantity of `RateBreakdown`, over a distance grid."""
    distance: np.ndarray
    m: ModuleCount
    eta: np.ndarray
    eta_prime: np.ndarray
    p_s: np.ndarray
    tau: np.ndarray
    alpha_val: np.ndarray
    eps_mis: float
    eps_dp: np.ndarray
    e_x: np.ndarray
    e_z: np.ndarray
    yield_y: np.ndarray
    rate_raw: np.ndarray

    @property
    def rate(self) -> np.ndarray:
        return np.maximum(self.rate_raw, 0.0)


def _modules(cfg: SystemConfig, m: Optional[ModuleCount]) -> ModuleCount:
    if m is None:
        return cfg.num_modules
    if m != math.inf and (int(m) != m or m < 1):
        raise DomainError(f"Number of modules must be a positive integer or inf, got {m}")
    return m


def _distance(cfg: SystemConfig, distance: Optional[ArrayLike]) -> np.ndarray:
    if distance is None:
        distance = cfg.channel.distance_total
    distance = np.asarray(distance, dtype=float)
    if np.any(distance < 0):
        raise DomainError("Distances must be nonnegative")
    return distance


def _entropy(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return (entr(x) + entr(1.0 - x)) / np.log(2.0)


def _click(eta: ArrayLike, p_d: float) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return -np.expm1(np.log1p(-np.asarray(eta, dtype=float)) + 2.0 * np.log1p(-p_d))


def _round_success(m: ModuleCount, eta_prime: np.ndarray) -> np.ndarray:
    eta_prime = np.asarray(eta_prime, dtype=float)
    if m == math.inf:
        return np.where(eta_prime > 0, 1.0, 0.0)
    if m == 1:
        return eta_prime
    first_order = m * eta_prime
    with np.errstate(divide='ignore'):
        exact = -np.expm1(m * np.log1p(-eta_prime))
    use_first_order = (eta_prime < FIRST_ORDER_MAX_CLICK) & (first_order < FIRST_ORDER_MAX_MEAN)
    return np.where(use_first_order, first_order, exact)


def _pairs_per_module(m: ModuleCount, eta_prime: np.ndarray, p_bsm: float) -> np.ndarray:
    if m == math.inf:
        return p_bsm * eta_prime
    flat = [expected_pairs(int(m), float(p), p_bsm) / m for p in np.ravel(eta_prime)]
    return np.reshape(np.array(flat, dtype=float), np.shape(eta_prime))


def evaluate(cfg: SystemConfig, distance: Optional[ArrayLike] = None,
             m: Optional[ModuleCount] = None) -> RateArrays:
    """
    Evaluate the full rate model at one distance or over an array of
    distances (meters). `m` overrides `cfg.num_modules` and may be
    `math.inf`.
    """
    m = _modules(cfg, m)
    distance = _distance(cfg, distance)
    memory, channel = cfg.memory, cfg.channel
    p_d = cfg.detector.dark_count

    eta = cfg.eta_total * np.exp(-distance / (2.0 * channel.att_length))
    eta_prime = _click(eta, p_d)
    clicks = eta_prime > 0
    p_s = _round_success(m, eta_prime)

    flight = distance / channel.light_speed
    tau = memory.t_prep + flight
    t2 = memory.t2_dephasing
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        decay = p_s * np.exp(-flight / t2) / (np.expm1(tau / t2) + p_s)
        decay = np.where(p_s > 0, decay, 0.0)
        alpha_val = np.where(clicks, eta * (1.0 - p_d) / eta_prime, 0.0)

    lam_flight = -np.expm1(-flight / t2) / 2.0
    eps_dp = (1.0 - 2.0 * lam_flight) * (0.5 - 0.5 * decay) + lam_flight
    eps_mis = eps_misalignment(channel.misalignment)

    weight = cfg.bsm.ideality * alpha_val ** 2
    e_x = weight * (eps_mis * (1.0 - eps_dp) + eps_dp * (1.0 - eps_mis)) + (1.0 - weight) / 2.0
    e_z = weight * eps_mis + (1.0 - weight) / 2.0

    pairs = _pairs_per_module(m, eta_prime, cfg.bsm.p_success)
    with np.errstate(divide='ignore', invalid='ignore'):
        # (pairs / p_s^2) / E[max(N_A, N_B)], E[max] = (3 - 2 p_s) / (p_s (2 - p_s))
        yield_y = np.where(p_s > 0, pairs * (2.0 - p_s) / (p_s * (3.0 - 2.0 * p_s)), 0.0)

    rate_raw = yield_y / 2.0 * (1.0 - _entropy(e_x) - cfg.ec_inefficiency * _entropy(e_z))

    return RateArrays(
        distance=distance, m=m, eta=eta, eta_prime=eta_prime, p_s=p_s, tau=tau,
        alpha_val=alpha_val, eps_mis=eps_mis, eps_dp=eps_dp, e_x=e_x, e_z=e_z,
        yield_y=yield_y, rate_raw=rate_raw,
    )


def key_rate_over_distance(cfg: SystemConfig, distances: ArrayLike,
                           m: Optional[ModuleCount] = None) -> np.ndarray:
    """Signed (unclamped) key rates over `distances`."""
    return evaluate(cfg, distances, m).rate_raw


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"Binary entropy is defined on [0, 1], got {x}")
    return float(_entropy(np.float64(x)))


def detect_prob(cfg: SystemConfig, distance: Optional[float] = None) -> float:
    distance = float(_distance(cfg, distance))
    return cfg.eta_total * math.exp(-distance / (2.0 * cfg.channel.att_length))


def click_prob(eta: float, p_d: float) -> float:
    return float(_click(eta, p_d))


def round_success(m: ModuleCount, eta_prime: float) -> float:
    if m != math.inf and m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    return float(_round_success(m, eta_prime))


def alpha(eta: float, p_d: float) -> float:
    """Weight of the transmitted state in the dark-count mixture."""
    denominator = click_prob(eta, p_d)
    if denominator == 0.0:
        raise DomainError("alpha is undefined when both eta and p_d vanish")
    return eta * (1.0 - p_d) / denominator


def round_duration(cfg: SystemConfig, distance: Optional[float] = None) -> float:
    distance = float(_distance(cfg, distance))
    return cfg.memory.t_prep + distance / cfg.channel.light_speed


def lambda_dp(t: float, t2: float) -> float:
    if t < 0 or t2 <= 0:
        raise DomainError(f"lambda_dp needs t >= 0 and t2 > 0, got t={t}, t2={t2}")
    return -math.expm1(-t / t2) / 2.0


def exp_dephase_expectation(cfg: SystemConfig, p_s: float,
                            distance: Optional[float] = None) -> float:
    """
    E[exp(-t_A / T2)] for t_A = N_B tau + L/c with N_B geometric of
    parameter `p_s`.
    """
    if not 0.0 < p_s <= 1.0:
        raise DomainError(f"p_s must lie in (0, 1], got {p_s}")
    distance = float(_distance(cfg, distance))
    t2 = cfg.memory.t2_dephasing
    flight = distance / cfg.channel.light_speed
    tau = cfg.memory.t_prep + flight
    with np.errstate(over='ignore'):
        return float(p_s * np.exp(-flight / t2) / (np.expm1(tau / t2) + p_s))


def eps_dephasing(cfg: SystemConfig, m: Optional[ModuleCount] = None,
                  distance: Optional[float] = None) -> float:
    return float(evaluate(cfg, distance, m).eps_dp)


def eps_misalignment(e: float) -> float:
    if not 0.0 <= e <= 0.5:
        raise DomainError(f"Misalignment must lie in [0, 1/2], got {e}")
    return 2.0 * e * (1.0 - e)


def qber_x(cfg: SystemConfig, m: Optional[ModuleCount] = None,
           distance: Optional[float] = None) -> float:
    return float(evaluate(cfg, distance, m).e_x)


def qber_z(cfg: SystemConfig, distance: Optional[float] = None) -> float:
    return float(evaluate(cfg, distance, 1).e_z)


def yield_(cfg: SystemConfig, m: Optional[ModuleCount] = None,
           distance: Optional[float] = None) -> float:
    """
    Expected raw key bits per channel use,

        Y = (1/p_s^2) sum_k k p_kbits / (m E[max(N_A, N_B)])

    with the pair sum taken from `combinatorics.expected_pairs`.
    """
    arrays = evaluate(cfg, distance, m)
    if float(arrays.eta_prime) == 0.0:
        logger.warning(f"No detector can click at L={float(arrays.distance)} m; yield is 0")
        return 0.0
    return float(arrays.yield_y)


def secret_key_rate(cfg: SystemConfig, m: Optional[ModuleCount] = None,
                    distance: Optional[float] = None) -> RateBreakdown:
    arrays = evaluate(cfg, distance, m)
    if float(arrays.eta_prime) == 0.0:
        logger.warning(f"No detector can click at L={float(arrays.distance)} m; yield is 0")
    rate_raw = float(arrays.rate_raw)
    return RateBreakdown(
        distance=float(arrays.distance),
        m=arrays.m,
        eta=float(arrays.eta),
        eta_prime=float(arrays.eta_prime),
        p_s=float(arrays.p_s),
        tau=float(arrays.tau),
        alpha_val=float(arrays.alpha_val),
        eps_mis=arrays.eps_mis,
        eps_dp=float(arrays.eps_dp),
        e_x=float(arrays.e_x),
        e_z=float(arrays.e_z),
        yield_y=float(arrays.yield_y),
        rate=max(rate_raw, 0.0),
        rate_raw=rate_raw,
    )


def expected_max_rounds(p_s: float) -> float:
    """E[max(N_A, N_B)] for two independent geometric round counts."""
    if not 0.0 < p_s <= 1.0:
        raise DomainError(f"p_s must lie in (0, 1], got {p_s}")
    return 2.0 / p_s - 1.0 / (2.0 * p_s - p_s ** 2)


def raw_key_ceiling(cfg: SystemConfig, m: Optional[ModuleCount] = None,
                    distance: Optional[float] = None) -> float:
    """
    Half the expected number of pairs per attempt (given both sides loaded
    at least one memory) divided by the expected channel uses per attempt.
    No secret key rate exceeds it.
    """
    arrays = evaluate(cfg, distance, m)
    p_s = float(arrays.p_s)
    if p_s == 0.0:
        return 0.0
    m = arrays.m
    if m == math.inf:
        return cfg.bsm.p_success * float(arrays.eta_prime) / 2.0
    pairs = expected_pairs(int(m), float(arrays.eta_prime), cfg.bsm.p_success) / p_s ** 2
    return pairs / (m * expected_max_rounds(p_s)) / 2.0


def single_pair_yield(eta_prime: float, p_bsm: float) -> float:
    """Yield of the single memory-pair protocol, p_bsm / E[max(N_A, N_B)]."""
    return p_bsm / (2.0 / eta_prime - 1.0 / (2.0 * eta_prime - eta_prime ** 2))


def single_pair_dephase_expectation(cfg: SystemConfig, eta_prime: float,
                                    distance: Optional[float] = None) -> float:
    distance = float(_distance(cfg, distance))
    t2 = cfg.memory.t2_dephasing
    flight = distance / cfg.channel.light_speed
    tau = cfg.memory.t_prep + flight
    return eta_prime * math.exp(-flight / t2) / (math.exp(tau / t2) + eta_prime - 1.0)
