"""Log partition function: exact enumeration and (reverse) annealed importance sampling.

The annealing path keeps both bias vectors fixed and scales the couplings,
``W -> beta * W`` for ``beta`` in ``[0, 1]``. At ``beta = 0`` the model
factorizes into independent bits, so its partition function and exact
samples are available in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .data import BinaryDataset
from .errors import DegenerateWeights, TooLarge
from .rbm import (ChainState, RbmParams, binary_states, block_gibbs, free_energy_hidden,
                  free_energy_visible, sigmoid, softplus)

EXACT_LIMIT = 25
_CHUNK_BITS = 16


@dataclass(frozen=True)
class LogZEstimate:
    log_z: float
    std_err: float
    direction: str  # "AIS", "RAIS" or "Exact"

    def as_dict(self) -> dict:
        return {"log_z": self.log_z, "std_err": self.std_err, "mode": self.direction.lower()}


@dataclass
class AisConfig:
    """Annealing setup. ``n_temps`` counts transitions, so the schedule has
    ``n_temps + 1`` points from 0 to 1."""

    n_temps: int = 1000
    n_chains: int = 200
    seed: int = 0
    schedule: Optional[np.ndarray] = None
    rais_burn_in: int = 1000

    def __post_init__(self):
        if self.schedule is None:
            self.schedule = np.linspace(0.0, 1.0, self.n_temps + 1)
        self.schedule = np.asarray(self.schedule, dtype=np.float64)
        s = self.schedule
        if s.ndim != 1 or s.size < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("schedule must start at 0, end at 1 and increase strictly")
        self.n_temps = s.size - 1
        if self.n_chains < 2:
            raise ValueError("n_chains must be >= 2 to estimate a standard error")


def _enumerated_logsumexp(n_bits: int, neg_free_energy) -> float:
    """logsumexp of ``neg_free_energy(states)`` over all ``2**n_bits`` states, in chunks."""
    if n_bits <= _CHUNK_BITS:
        return float(logsumexp(neg_free_energy(binary_states(n_bits))))
    low = binary_states(_CHUNK_BITS)
    high_bits = n_bits - _CHUNK_BITS
    partial = []
    for code in range(2 ** high_bits):
        prefix = ((code >> np.arange(high_bits - 1, -1, -1)) & 1).astype(np.float64)
        states = np.hstack([np.broadcast_to(prefix, (low.shape[0], high_bits)), low])
        partial.append(logsumexp(neg_free_energy(states)))
    return float(logsumexp(partial))


def exact_log_z(params: RbmParams) -> LogZEstimate:
    """Sum out the larger layer analytically and enumerate the smaller one."""
    N, M = params.n_visible, params.n_hidden
    if min(N, M) > EXACT_LIMIT:
        raise TooLarge(f"min(N, M) = {min(N, M)} exceeds the enumeration limit {EXACT_LIMIT}")
    if M <= N:
        log_z = _enumerated_logsumexp(M, lambda h: -free_energy_hidden(params, h))
    else:
        log_z = _enumerated_logsumexp(N, lambda v: -free_energy_visible(params, v))
    return LogZEstimate(log_z, 0.0, "Exact")


def base_log_z(params: RbmParams) -> float:
    return float(softplus(params.a).sum() + softplus(params.b).sum())


def _log_f(params: RbmParams, v: np.ndarray, beta: float) -> np.ndarray:
    """Unnormalized log marginal of ``v`` under the model with couplings ``beta * W``."""
    return v @ params.a + softplus(params.b + beta * (v @ params.W)).sum(axis=1)


def _gibbs_at(params: RbmParams, v: np.ndarray, beta: float, rng) -> np.ndarray:
    h = (rng.random((v.shape[0], params.n_hidden)) < sigmoid(params.b + beta * (v @ params.W))).astype(np.float64)
    return (rng.random(v.shape) < sigmoid(params.a + beta * (h @ params.W.T))).astype(np.float64)


def _log_mean_exp(log_w: np.ndarray) -> tuple[float, float]:
    """log of the mean weight and its delta-method standard error."""
    finite = np.isfinite(log_w)
    if not finite.any():
        raise DegenerateWeights("all importance weights are non-finite")
    log_w = log_w[finite]
    shift = log_w.max()
    w = np.exp(log_w - shift)
    mean = w.mean()
    se = float(w.std(ddof=1) / (np.sqrt(w.size) * mean)) if w.size > 1 else float("inf")
    return float(np.log(mean) + shift), se


def ais_log_z(params: RbmParams, cfg: AisConfig) -> LogZEstimate:
    """Forward AIS from the independent-bits model; a stochastic lower bound in expectation of log Z."""
    rng = np.random.default_rng(cfg.seed)
    betas = cfg.schedule
    v = (rng.random((cfg.n_chains, params.n_visible)) < sigmoid(params.a)).astype(np.float64)
    log_w = np.zeros(cfg.n_chains)
    for k in range(1, betas.size):
        log_w += _log_f(params, v, betas[k]) - _log_f(params, v, betas[k - 1])
        if k < betas.size - 1:
            v = _gibbs_at(params, v, betas[k], rng)
    log_mean, se = _log_mean_exp(log_w)
    return LogZEstimate(base_log_z(params) + log_mean, se, "AIS")


def rais_log_z(params: RbmParams, cfg: AisConfig) -> LogZEstimate:
    """Reverse AIS: start at (approximately) equilibrated model samples and anneal back to beta = 0.

    The mean reverse weight estimates ``Z_0 / Z``.
    """
    rng = np.random.default_rng(cfg.seed)
    betas = cfg.schedule
    init = ChainState((rng.random((cfg.n_chains, params.n_visible)) < 0.5).astype(np.float64),
                      np.zeros((cfg.n_chains, params.n_hidden)))
    v = block_gibbs(params, init, max(cfg.rais_burn_in, 1), rng).v
    log_w = np.zeros(cfg.n_chains)
    for k in range(betas.size - 1, 0, -1):
        log_w += _log_f(params, v, betas[k - 1]) - _log_f(params, v, betas[k])
        if k > 1:
            v = _gibbs_at(params, v, betas[k - 1], rng)
    log_mean, se = _log_mean_exp(log_w)
    return LogZEstimate(base_log_z(params) - log_mean, se, "RAIS")


def log_likelihood(params: RbmParams, dataset: BinaryDataset | np.ndarray, log_z) -> float:
    """Average ``ln p(v)`` over the data given a log partition function."""
    bits = dataset.bits if isinstance(dataset, BinaryDataset) else np.asarray(dataset)
    if isinstance(log_z, LogZEstimate):
        log_z = log_z.log_z
    return float(np.mean(-free_energy_visible(params, bits.astype(np.float64))) - log_z)


def exact_log_likelihood(params: RbmParams, dataset) -> float:
    return log_likelihood(params, dataset, exact_log_z(params))
