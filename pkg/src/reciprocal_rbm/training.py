"""Log-likelihood gradients, SGD and the negative-phase chain strategies.

Three chain initializations are supported (Rdm-K, CD, PCD) plus an
``exact`` strategy that replaces the sampled negative phase by full
enumeration; the latter is the oracle used on desk-scale models.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.special import logsumexp

from .data import BinaryDataset, batch_indices
from .errors import DimensionMismatch, EmptyBatch, MissingPersistentStore, NoChains, TooLarge
from .partition import exact_log_likelihood
from .rbm import (ChainState, RbmParams, binary_states, block_gibbs, free_energy_hidden,
                  free_energy_visible, hidden_probs, sigmoid)

EXACT_GRADIENT_LIMIT = 24
EXACT_LL_LIMIT = 20


class Strategy(str, Enum):
    RDMK = "rdmk"
    CD = "cd"
    PCD = "pcd"
    EXACT = "exact"


@dataclass
class TrainConfig:
    strategy: Strategy = Strategy.PCD
    k_steps: int = 100
    learning_rate: float = 0.01
    batch_size: int = 100
    epochs: int = 10
    n_chains: int = 100
    seed: int = 0
    init_sigma: float = 0.01
    n_hidden: int = 500
    momentum: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        self.strategy = Strategy(str(getattr(self.strategy, "value", self.strategy)).lower())
        if self.k_steps < 1:
            raise ValueError("k_steps must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.init_sigma < 0:
            raise ValueError("init_sigma must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d


@dataclass
class Gradients:
    d_a: np.ndarray
    d_b: np.ndarray
    d_W: np.ndarray

    def __neg__(self) -> "Gradients":
        return Gradients(-self.d_a, -self.d_b, -self.d_W)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.d_a, self.d_b, self.d_W.ravel()])


@dataclass
class PersistentStore:
    """Holds the PCD chains between parameter updates."""

    state: Optional[ChainState] = None


def positive_stats(params: RbmParams, batch):
    """Data-side averages of ``v``, ``sigma(C(v))`` and ``v sigma(C(v))^T``."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] == 0:
        raise EmptyBatch("positive phase needs at least one datum")
    p = hidden_probs(params, batch)
    n = batch.shape[0]
    return batch.mean(axis=0), p.mean(axis=0), batch.T @ p / n


def negative_stats(chains: ChainState):
    if chains is None or chains.n_chains == 0:
        raise NoChains("negative phase needs at least one chain")
    n = chains.n_chains
    return chains.v.mean(axis=0), chains.h.mean(axis=0), chains.v.T @ chains.h / n


def gradient(positive, negative) -> Gradients:
    pv, ph, pvh = positive
    nv, nh, nvh = negative
    if np.shape(pv) != np.shape(nv) or np.shape(ph) != np.shape(nh) or np.shape(pvh) != np.shape(nvh):
        raise DimensionMismatch("positive and negative statistics have different shapes")
    return Gradients(np.asarray(pv) - nv, np.asarray(ph) - nh, np.asarray(pvh) - nvh)


def sgd_step(params: RbmParams, grads: Gradients, lr: float) -> RbmParams:
    """Plain gradient ascent on the log-likelihood."""
    return RbmParams(params.a + lr * grads.d_a, params.b + lr * grads.d_b, params.W + lr * grads.d_W)


def make_negative_chains(strategy, params: RbmParams, batch, persistent_store: Optional[PersistentStore],
                         rng, n_chains: Optional[int] = None) -> ChainState:
    strategy = Strategy(getattr(strategy, "value", strategy))
    if (strategy is Strategy.PCD) != (persistent_store is not None):
        raise MissingPersistentStore("a persistent store is required for PCD and only for PCD")
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    N, M = params.n_visible, params.n_hidden
    if strategy is Strategy.CD:
        return ChainState(batch.copy(), np.zeros((batch.shape[0], M)))
    n = n_chains if n_chains is not None else batch.shape[0]
    if strategy is Strategy.RDMK:
        v = (rng.random((n, N)) < 0.5).astype(np.float64)
        h = (rng.random((n, M)) < 0.5).astype(np.float64)
        return ChainState(v, h)
    if strategy is Strategy.PCD:
        if persistent_store.state is None:
            if batch.shape[0] == 0:
                raise EmptyBatch("PCD chains are seeded from the first batch")
            v = batch[np.arange(n) % batch.shape[0]]
            return ChainState(v.copy(), np.zeros((n, M)))
        return persistent_store.state.copy()
    raise ValueError(f"strategy {strategy.value!r} does not use sampled chains")


def model_expectations(params: RbmParams):
    """Exact ``<v>``, ``<h>``, ``<v h^T>`` under the model, enumerating the smaller layer."""
    N, M = params.n_visible, params.n_hidden
    if N + M > EXACT_GRADIENT_LIMIT:
        raise TooLarge(f"N + M = {N + M} exceeds the exact-gradient limit {EXACT_GRADIENT_LIMIT}")
    if M <= N:
        H = binary_states(M)
        logp = -free_energy_hidden(params, H)
        p = np.exp(logp - logsumexp(logp))
        sv = sigmoid(H @ params.W.T + params.a)
        return p @ sv, p @ H, sv.T @ (p[:, None] * H)
    V = binary_states(N)
    logp = -free_energy_visible(params, V)
    p = np.exp(logp - logsumexp(logp))
    sh = sigmoid(V @ params.W + params.b)
    return p @ V, p @ sh, V.T @ (p[:, None] * sh)


def exact_gradient(params: RbmParams, batch) -> Gradients:
    return gradient(positive_stats(params, batch), model_expectations(params))


def sampled_gradient(params: RbmParams, batch, strategy, k_steps: int, rng,
                     persistent_store: Optional[PersistentStore] = None,
                     n_chains: Optional[int] = None) -> Gradients:
    chains = make_negative_chains(strategy, params, batch, persistent_store, rng, n_chains)
    chains = block_gibbs(params, chains, k_steps, rng)
    if persistent_store is not None:
        persistent_store.state = chains
    return gradient(positive_stats(params, batch), negative_stats(chains))


def pseudo_log_likelihood(params: RbmParams, bits: np.ndarray, rng) -> float:
    """Stochastic pseudo-likelihood: one random bit flipped per datum, scaled by N."""
    v = np.asarray(bits, dtype=np.float64)
    flip = rng.integers(0, v.shape[1], size=v.shape[0])
    v_flip = v.copy()
    rows = np.arange(v.shape[0])
    v_flip[rows, flip] = 1.0 - v_flip[rows, flip]
    delta = free_energy_visible(params, v_flip) - free_energy_visible(params, v)
    return float(v.shape[1] * np.mean(-np.logaddexp(0.0, -delta)))


@dataclass
class EpochRecord:
    epoch: int
    strategy: str
    ll: float
    ll_kind: str
    checkpoint: Optional[str] = None


@dataclass
class TrainingTrace:
    records: list[EpochRecord] = field(default_factory=list)

    def lls(self) -> np.ndarray:
        return np.array([r.ll for r in self.records])

    def to_jsonl(self, path) -> None:
        with Path(path).open("w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def ll_proxy(params: RbmParams, dataset: BinaryDataset, rng, max_items: int = 1000) -> tuple[float, str]:
    if min(params.n_visible, params.n_hidden) <= EXACT_LL_LIMIT:
        return exact_log_likelihood(params, dataset), "exact"
    return pseudo_log_likelihood(params, dataset.bits[:max_items], rng), "pseudo"


EpochCallback = Callable[[int, RbmParams], Optional[str]]


def train(config: TrainConfig, dataset: BinaryDataset,
          callbacks: Iterable[EpochCallback] = (),
          init: Optional[RbmParams] = None) -> tuple[RbmParams, TrainingTrace]:
    """Run ``config.epochs`` passes of minibatch gradient ascent.

    Epoch 0 is the initial model. After every epoch each callback receives
    ``(epoch, params)``; a callback may return a checkpoint path, which is
    recorded in the trace.
    """
    rng = np.random.default_rng(config.seed)
    N = dataset.dim
    if init is None:
        params = RbmParams.gaussian_init(N, config.n_hidden, config.init_sigma, rng)
    else:
        if init.n_visible != N:
            raise DimensionMismatch(f"dataset dim {N} != model N {init.n_visible}")
        params = init
    callbacks = list(callbacks)
    store = PersistentStore() if config.strategy is Strategy.PCD else None
    velocity = None
    trace = TrainingTrace()
    eval_rng = np.random.default_rng([config.seed, 1])

    def emit(epoch: int):
        ll, kind = ll_proxy(params, dataset, eval_rng)
        ckpt = None
        for cb in callbacks:
            out = cb(epoch, params)
            if out is not None:
                ckpt = str(out)
        trace.records.append(EpochRecord(epoch, config.strategy.value, ll, kind, ckpt))

    emit(0)
    for epoch in range(1, config.epochs + 1):
        order_seed = int(rng.integers(2 ** 63))
        for idx in batch_indices(dataset.n_items, config.batch_size, order_seed):
            batch = dataset.bits[idx].astype(np.float64)
            if config.strategy is Strategy.EXACT:
                grads = exact_gradient(params, batch)
            else:
                grads = sampled_gradient(params, batch, config.strategy, config.k_steps, rng,
                                         store, config.n_chains)
            if config.weight_decay:
                grads.d_W = grads.d_W - config.weight_decay * params.W
            if config.momentum:
                if velocity is None:
                    velocity = Gradients(np.zeros_like(grads.d_a), np.zeros_like(grads.d_b),
                                         np.zeros_like(grads.d_W))
                velocity = Gradients(config.momentum * velocity.d_a + grads.d_a,
                                     config.momentum * velocity.d_b + grads.d_b,
                                     config.momentum * velocity.d_W + grads.d_W)
                grads = velocity
            params = sgd_step(params, grads, config.learning_rate)
        emit(epoch)
    return params, trace
