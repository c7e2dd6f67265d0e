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
Binomial machinery behind the pairing statistics of m parallel memory
modules: how many memories each side loads in its successful round, how
many pairs the switch can form, and how many of them survive the BSM.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

EXACT_MAX_N = 30
WINDOW_MIN_M = 10 ** 4
WINDOW_SIGMAS = 12
# Absolute padding of the window; keeps skewed (Poisson-like) tails at
# small n*p below the cutoff too.
WINDOW_PAD = 30


def _check_probability(name: str, p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def _check_modules(m: int):
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")


def binom_pmf(i: int, m: int, p: float) -> float:
    """
    Binomial probability C(m, i) p^i (1-p)^(m-i).

    Exact arithmetic for m <= 30, log-gamma evaluation above.
    """
    if int(i) != i or not 0 <= i <= m:
        raise ValueError(f"i must be an integer in [0, {m}], got {i}")
    _check_probability("p", p)
    if p == 0.0:
        return 1.0 if i == 0 else 0.0
    if p == 1.0:
        return 1.0 if i == m else 0.0
    if m <= EXACT_MAX_N:
        return math.comb(m, i) * p ** i * (1.0 - p) ** (m - i)
    log_pmf = (gammaln(m + 1) - gammaln(i + 1) - gammaln(m - i + 1)
               + xlogy(i, p) + xlog1py(m - i, -p))
    return float(np.exp(log_pmf))


def binom_pmf_vector(n: int, p: float, start: int = 0, stop: int = None) -> np.ndarray:
    """B_i^n(p) for i = start..stop (inclusive); n may be 0."""
    if stop is None:
        stop = n
    i = np.arange(start, stop + 1)
    if p == 0.0:
        return (i == 0).astype(float)
    if p == 1.0:
        return (i == n).astype(float)
    if n <= EXACT_MAX_N:
        return np.array([math.comb(n, k) * p ** k * (1.0 - p) ** (n - k) for k in i])
    log_pmf = (gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
               + xlogy(i, p) + xlog1py(n - i, -p))
    return np.exp(log_pmf)


@dataclass(frozen=True)
class PairCountDistribution:
    m: int
    p_click: float
    p_bsm: float
    min_dist: np.ndarray
    pairs_dist: np.ndarray
    expected_pairs: float


def min_detect_dist(m: int, p_click: float) -> np.ndarray:
    """
    Distribution of l = min(k_A, k_B) for two independent Binomial(m, p_click)
    detection counts:

        p_l = 2 B_l sum_{x >= l} B_x - B_l^2
    """
    _check_modules(m)
    _check_probability("p_click", p_click)
    pmf = binom_pmf_vector(m, p_click)
    suffix = np.cumsum(pmf[::-1])[::-1]
    return 2.0 * pmf * suffix - pmf ** 2


def pairs_dist(m: int, p_click: float, p_bsm: float) -> np.ndarray:
    """
    Distribution of the number k of pairs that survive the BSMs, from the
    double sum over the minimum count y >= k. Entry 0 completes the
    normalisation.
    """
    _check_probability("p_bsm", p_bsm)
    minimum = min_detect_dist(m, p_click)
    dist = np.zeros(m + 1)
    for y in range(1, m + 1):
        if minimum[y] == 0.0:
            continue
        dist[:y + 1] += minimum[y] * binom_pmf_vector(y, p_bsm)
    dist[0] = max(0.0, 1.0 - dist[1:].sum())
    return dist


def g_m(m: int, p_click: float) -> float:
    _check_modules(m)
    _check_probability("p_click", p_click)
    if p_click == 0.0 or p_click == 1.0:
        return 0.0

    n = m - 1
    lo, hi = 0, n
    if m > WINDOW_MIN_M:
        mean = n * p_click
        half_width = WINDOW_SIGMAS * math.sqrt(n * p_click * (1.0 - p_click)) + WINDOW_PAD
        lo = max(0, int(math.floor(mean - half_width)))
        hi = min(n, int(math.ceil(mean + half_width)))

    pmf = binom_pmf_vector(n, p_click, lo, hi)
    squares = np.dot(pmf, pmf)
    neighbours = np.dot(pmf[1:], pmf[:-1])
    return p_click * (1.0 - p_click) * (squares + neighbours)


def expected_pairs(m: int, p_click: float, p_bsm: float) -> float:
    """
    Mean number of pairs surviving the BSMs, m p_bsm (p_click - g_m), which
    equals sum_k k * pairs_dist(m, p_click, p_bsm)[k] in O(m).
    """
    _check_probability("p_bsm", p_bsm)
    return m * p_bsm * (p_click - g_m(m, p_click))


def pair_count_distribution(m: int, p_click: float, p_bsm: float) -> PairCountDistribution:
    pairs = pairs_dist(m, p_click, p_bsm)
    return PairCountDistribution(
        m=m,
        p_click=p_click,
        p_bsm=p_bsm,
        min_dist=min_detect_dist(m, p_click),
        pairs_dist=pairs,
        expected_pairs=float(np.dot(np.arange(m + 1), pairs)),
    )
