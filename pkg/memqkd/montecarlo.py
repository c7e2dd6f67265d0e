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
Sampling oracle for the protocol: Alice and Bob repeat rounds until at
least one of their m detectors clicks, the loaded memories are paired,
the BSMs succeed or fail, and every produced pair carries X/Z error bits
drawn from the channel model at the sampled storage times.

Trials are sampled in fixed-size blocks. Block b always uses the b-th
child of `SeedSequence(seed)`, and block statistics are merged in block
order, so estimates do not depend on how many workers ran the blocks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from memqkd.combinatorics import binom_pmf_vector
from memqkd.config import get_settings
from memqkd.model import SystemConfig
from memqkd.rates import evaluate
from memqkd.utils.parallel import ordered_map

logger = logging.getLogger("memqkd.montecarlo")

MIN_CLICK_PROB = 1e-6
MIN_TRIALS = 1000

# Per-trial columns accumulated by every block.
COLUMNS = ('pairs', 'uses', 'x_errors', 'z_errors', 'decay', 'eps_dp')
_COL = {name: i for i, name in enumerate(COLUMNS)}


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    n_a: int
    n_b: int
    k_a: int
    k_b: int
    pairs_made: int
    t_a: float
    t_b: float
    channel_uses: int


@dataclass(frozen=True)
class TrialBatch:
    n_a: np.ndarray
    n_b: np.ndarray
    k_a: np.ndarray
    k_b: np.ndarray
    pairs_made: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray
    channel_uses: np.ndarray

    def __len__(self):
        return len(self.n_a)

    def record(self, i: int) -> TrialRecord:
        return TrialRecord(
            n_a=int(self.n_a[i]), n_b=int(self.n_b[i]),
            k_a=int(self.k_a[i]), k_b=int(self.k_b[i]),
            pairs_made=int(self.pairs_made[i]),
            t_a=float(self.t_a[i]), t_b=float(self.t_b[i]),
            channel_uses=int(self.channel_uses[i]),
        )


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_trials: int


@dataclass(frozen=True)
class _TrialModel:
    m: int
    eta_prime: float
    p_s: float
    p_bsm: float
    tau: float
    flight: float
    t2: float
    weight: float
    eps_mis: float
    e_z: float
    loaded_pmf: np.ndarray


def _trial_model(cfg: SystemConfig) -> _TrialModel:
    arrays = evaluate(cfg)
    eta_prime = float(arrays.eta_prime)
    if not eta_prime > MIN_CLICK_PROB:
        raise SamplingError(
            f"Click probability {eta_prime:.3g} is below {MIN_CLICK_PROB:g}; "
            f"expected round counts are too large to sample"
        )
    m = cfg.num_modules
    loaded = binom_pmf_vector(m, eta_prime)[1:]
    return _TrialModel(
        m=m,
        eta_prime=eta_prime,
        p_s=float(arrays.p_s),
        p_bsm=cfg.bsm.p_success,
        tau=float(arrays.tau),
        flight=cfg.channel.distance_total / cfg.channel.light_speed,
        t2=cfg.memory.t2_dephasing,
        weight=cfg.bsm.ideality * float(arrays.alpha_val) ** 2,
        eps_mis=arrays.eps_mis,
        e_z=float(arrays.e_z),
        loaded_pmf=loaded / loaded.sum(),
    )


def _sample(model: _TrialModel, n: int, rng: np.random.Generator) -> TrialBatch:
    n_a = rng.geometric(model.p_s, size=n)
    n_b = rng.geometric(model.p_s, size=n)
    # detections in the successful round: Binomial(m, eta') given at least one
    counts = np.arange(1, model.m + 1)
    k_a = rng.choice(counts, size=n, p=model.loaded_pmf)
    k_b = rng.choice(counts, size=n, p=model.loaded_pmf)
    pairs = rng.binomial(np.minimum(k_a, k_b), model.p_bsm)
    t_b = np.full(n, model.flight)
    return TrialBatch(
        n_a=n_a, n_b=n_b, k_a=k_a, k_b=k_b, pairs_made=pairs,
        t_a=n_b * model.tau + model.flight,
        t_b=t_b,
        channel_uses=model.m * np.maximum(n_a, n_b),
    )


def sample_trials(cfg: SystemConfig, n: int, rng: np.random.Generator) -> TrialBatch:
    return _sample(_trial_model(cfg), n, rng)


def sample_trial(cfg: SystemConfig, rng: np.random.Generator) -> TrialRecord:
    return sample_trials(cfg, 1, rng).record(0)


def _lambda_dp(t: np.ndarray, t2: float) -> np.ndarray:
    return -np.expm1(-t / t2) / 2.0


class _Moments:
    """Count, means and co-moment matrix of the per-trial columns."""

    def __init__(self, n: int, mean: np.ndarray, comoment: np.ndarray):
        self.n = n
        self.mean = mean
        self.comoment = comoment

    @classmethod
    def of(cls, columns: np.ndarray) -> _Moments:
        mean = columns.mean(axis=0)
        centered = columns - mean
        return cls(len(columns), mean, centered.T @ centered)

    def merge(self, other: _Moments) -> _Moments:
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        comoment = (self.comoment + other.comoment
                    + np.outer(delta, delta) * (self.n * other.n / n))
        return _Moments(n, mean, comoment)

    def covariance(self, a: str, b: str) -> float:
        return self.comoment[_COL[a], _COL[b]] / (self.n - 1)

    def mean_estimate(self, name: str) -> McEstimate:
        variance = max(self.covariance(name, name), 0.0)
        return McEstimate(float(self.mean[_COL[name]]), math.sqrt(variance / self.n), self.n)

    def ratio_estimate(self, numerator: str, denominator: str) -> McEstimate:
        """sum(x) / sum(y), standard error by the delta method."""
        x_bar = self.mean[_COL[numerator]]
        y_bar = self.mean[_COL[denominator]]
        if y_bar == 0:
            return McEstimate(math.nan, math.nan, self.n)
        ratio = x_bar / y_bar
        variance = (self.covariance(numerator, numerator)
                    - 2.0 * ratio * self.covariance(numerator, denominator)
                    + ratio ** 2 * self.covariance(denominator, denominator))
        variance = max(variance, 0.0) / (self.n * y_bar ** 2)
        return McEstimate(float(ratio), math.sqrt(variance), self.n)


def _run_block(task: Tuple[SystemConfig, int, np.random.SeedSequence]) -> _Moments:
    cfg, n, seed_sequence = task
    model = _trial_model(cfg)
    rng = np.random.Generator(np.random.PCG64(seed_sequence))
    batch = _sample(model, n, rng)

    lam_a = _lambda_dp(batch.t_a, model.t2)
    lam_b = _lambda_dp(batch.t_b, model.t2)
    eps_dp = lam_a * (1.0 - lam_b) + lam_b * (1.0 - lam_a)
    p_x = (model.weight * (model.eps_mis * (1.0 - eps_dp) + eps_dp * (1.0 - model.eps_mis))
           + (1.0 - model.weight) / 2.0)
    x_errors = rng.binomial(batch.pairs_made, p_x)
    z_errors = rng.binomial(batch.pairs_made, model.e_z)

    columns = np.empty((n, len(COLUMNS)))
    columns[:, _COL['pairs']] = batch.pairs_made
    columns[:, _COL['uses']] = batch.channel_uses
    columns[:, _COL['x_errors']] = x_errors
    columns[:, _COL['z_errors']] = z_errors
    columns[:, _COL['decay']] = np.exp(-batch.t_a / model.t2)
    columns[:, _COL['eps_dp']] = eps_dp
    return _Moments.of(columns)


def _block_sizes(n_trials: int, block_size: int):
    full, rest = divmod(n_trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def estimate(cfg: SystemConfig, n_trials: int, seed: int, workers: Optional[int] = None,
             block_size: Optional[int] = None) -> Dict[str, McEstimate]:
    """
    Monte-Carlo estimates of the yield (`yield`), E[exp(-t_A/T2)]
    (`exp_dephase`), the dephasing error (`eps_dp`) and the two QBERs
    (`qber_x`, `qber_z`).
    """
    if n_trials < MIN_TRIALS:
        raise SamplingError(f"At least {MIN_TRIALS} trials are required, got {n_trials}")
    _trial_model(cfg)
    if block_size is None:
        block_size = get_settings().mc_block_size

    sizes = _block_sizes(int(n_trials), block_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    logger.debug(f"Sampling {n_trials} trials in {len(sizes)} blocks (seed={seed})")
    blocks = ordered_map(_run_block, [(cfg, n, child) for n, child in zip(sizes, children)],
                         workers=workers)

    moments = blocks[0]
    for block in blocks[1:]:
        moments = moments.merge(block)

    return {
        'yield': moments.ratio_estimate('pairs', 'uses'),
        'exp_dephase': moments.mean_estimate('decay'),
        'eps_dp': moments.mean_estimate('eps_dp'),
        'qber_x': moments.ratio_estimate('x_errors', 'pairs'),
        'qber_z': moments.ratio_estimate('z_errors', 'pairs'),
    }


def min_detection_frequencies(cfg: SystemConfig, n_trials: int, seed: int) -> np.ndarray:
    """
    Relative frequencies of min(k_A, k_B) over sampled trials, indexed
    0..m (entry 0 is always 0 since both sides load at least one memory).
    """
    if n_trials < MIN_TRIALS:
        raise SamplingError(f"At least {MIN_TRIALS} trials are required, got {n_trials}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    batch = sample_trials(cfg, n_trials, rng)
    counts = np.bincount(np.minimum(batch.k_a, batch.k_b), minlength=cfg.num_modules + 1)
    return counts / n_trials
