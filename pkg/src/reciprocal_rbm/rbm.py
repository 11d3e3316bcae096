"""Binary RBM: energy, conditionals, block Gibbs sampling and checkpoints.

Visible vectors are rows of shape ``(N,)`` or batches ``(B, N)``; hidden
likewise with ``M``. All sampling goes through an explicit
``numpy.random.Generator`` so that every chain is reproducible from a seed.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionMismatch, TooLarge

CHECKPOINT_MAGIC = b"RBMCKPT\x00"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIII")


def _readonly(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RbmParams:
    """Visible biases ``a`` (N), hidden biases ``b`` (M), couplings ``W`` (N, M)."""

    a: np.ndarray
    b: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        a, b, W = _readonly(self.a), _readonly(self.b), _readonly(self.W)
        if a.ndim != 1 or b.ndim != 1 or W.shape != (a.size, b.size):
            raise DimensionMismatch(f"inconsistent shapes a{a.shape} b{b.shape} W{W.shape}")
        if a.size < 1 or b.size < 1:
            raise DimensionMismatch("need N >= 1 and M >= 1")
        if not (np.isfinite(a).all() and np.isfinite(b).all() and np.isfinite(W).all()):
            raise DataError("parameters must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "W", W)

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParams":
        return cls(np.zeros(n_visible), np.zeros(n_hidden), np.zeros((n_visible, n_hidden)))

    @classmethod
    def gaussian_init(cls, n_visible: int, n_hidden: int, sigma: float, rng) -> "RbmParams":
        W = rng.normal(0.0, sigma, size=(n_visible, n_hidden)) if sigma > 0 else np.zeros((n_visible, n_hidden))
        return cls(np.zeros(n_visible), np.zeros(n_hidden), W)

    def replace(self, **changes) -> "RbmParams":
        fields = {"a": self.a, "b": self.b, "W": self.W}
        fields.update(changes)
        return RbmParams(**fields)

    def __eq__(self, other):
        if not isinstance(other, RbmParams):
            return NotImplemented
        return (np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)
                and np.array_equal(self.W, other.W))


@dataclass
class ChainState:
    """Current ``(v, h)`` of a batch of block-Gibbs chains, one chain per row."""

    v: np.ndarray
    h: np.ndarray
    steps_taken: int = 0

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=np.float64))
        self.h = np.atleast_2d(np.asarray(self.h, dtype=np.float64))
        if self.v.shape[0] != self.h.shape[0]:
            raise DimensionMismatch("v and h must hold the same number of chains")

    @property
    def n_chains(self) -> int:
        return self.v.shape[0]

    def copy(self) -> "ChainState":
        return ChainState(self.v.copy(), self.h.copy(), self.steps_taken)


def sigmoid(x):
    """Logistic function, split on the sign of ``x`` so no exp overflows."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x):
    return np.logaddexp(0.0, x)


def _check_visible(params: RbmParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != params.n_visible:
        raise DimensionMismatch(f"visible vector has length {v.shape[-1]}, model has N={params.n_visible}")
    return v


def _check_hidden(params: RbmParams, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.n_hidden:
        raise DimensionMismatch(f"hidden vector has length {h.shape[-1]}, model has M={params.n_hidden}")
    return h


def energy(params: RbmParams, v, h):
    v = _check_visible(params, v)
    h = _check_hidden(params, h)
    return -(v @ params.a) - (h @ params.b) - np.einsum("...i,ij,...j->...", v, params.W, h)


def hidden_field(params: RbmParams, v):
    """Input to each hidden unit, ``C_j(v) = sum_i v_i W_ij + b_j``."""
    return _check_visible(params, v) @ params.W + params.b


def visible_field(params: RbmParams, h):
    """Input to each visible unit, ``D_i(h) = sum_j W_ij h_j + a_i``."""
    return _check_hidden(params, h) @ params.W.T + params.a


def hidden_probs(params: RbmParams, v):
    return sigmoid(hidden_field(params, v))


def visible_probs(params: RbmParams, h):
    return sigmoid(visible_field(params, h))


def sample_hidden(params: RbmParams, v, rng) -> np.ndarray:
    p = hidden_probs(params, v)
    return (rng.random(p.shape) < p).astype(np.float64)


def sample_visible(params: RbmParams, h, rng) -> np.ndarray:
    p = visible_probs(params, h)
    return (rng.random(p.shape) < p).astype(np.float64)


def block_gibbs(params: RbmParams, init: ChainState, K: int, rng) -> ChainState:
    """Run ``K`` sweeps (hidden update, then visible update) on every chain."""
    if K < 1:
        raise ValueError("K must be >= 1")
    v = _check_visible(params, init.v)
    _check_hidden(params, init.h)
    h = init.h
    for _ in range(K):
        h = sample_hidden(params, v, rng)
        v = sample_visible(params, h, rng)
    return ChainState(v, h, init.steps_taken + K)


def free_energy_visible(params: RbmParams, v):
    """``F(v)`` with the hidden layer summed out, so ``p(v) ∝ exp(-F(v))``."""
    v = _check_visible(params, v)
    return -(v @ params.a) - softplus(v @ params.W + params.b).sum(axis=-1)


def free_energy_hidden(params: RbmParams, h):
    h = _check_hidden(params, h)
    return -(h @ params.b) - softplus(h @ params.W.T + params.a).sum(axis=-1)


def binary_states(n: int, limit: int = 25) -> np.ndarray:
    """All ``2**n`` binary vectors of length ``n`` as a float array, first bit most significant."""
    if n > limit:
        raise TooLarge(f"refusing to enumerate 2**{n} states (limit 2**{limit})")
    codes = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.float64)


def save_checkpoint(path, params: RbmParams, meta: dict | None = None) -> Path:
    """Write the binary checkpoint and its ``.json`` metadata sidecar.

    Layout (little-endian): 8-byte magic, uint32 version, uint32 N, uint32 M,
    then ``a``, ``b`` and row-major ``W`` as float64.
    """
    path = Path(path)
    N, M = params.n_visible, params.n_hidden
    blob = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, N, M)
    blob += np.concatenate([params.a, params.b, params.W.ravel()]).astype("<f8").tobytes()
    path.write_bytes(blob)
    sidecar = {"version": CHECKPOINT_VERSION, "n_visible": N, "n_hidden": M}
    sidecar.update(meta or {})
    sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def load_checkpoint(path) -> tuple[RbmParams, dict]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated checkpoint header")
    magic, version, N, M = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not an RBM checkpoint")
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    count = N + M + N * M
    body = blob[_HEADER.size:]
    if len(body) != 8 * count:
        raise DataError(f"{path}: expected {8 * count} payload bytes, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    params = RbmParams(flat[:N], flat[N:N + M], flat[N + M:].reshape(N, M))
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return params, meta
