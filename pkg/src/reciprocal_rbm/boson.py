"""Gaussian-approximation diagnostics: oscillator frequencies, excitations
and per-epoch landscape traces of reciprocal variables.

Under the Gaussian approximation each coupled mode contributes two
oscillators, ``(k - λβ)/2`` along ``u`` and ``(k + λβ)/2`` along ``w``, and
each uncoupled tail direction one oscillator of frequency ``k/2``. A mode
with ``λ > k/β`` has a negative ``u`` frequency and diverges.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange
from .rbm import ChainState, RbmParams, block_gibbs, sample_hidden
from .spectral import ReciprocalFrame, decompose, project_hidden, project_visible, to_uw

DEFAULT_BETA = 1.0
DEFAULT_K = 4.0


@dataclass(frozen=True, eq=False)
class OscillatorSpectrum:
    beta: float
    k_diag: float
    lambdas: np.ndarray
    omegas: np.ndarray
    divergent: tuple[int, ...]
    n_visible: int
    n_hidden: int

    @property
    def lambda_c(self) -> float:
        return self.k_diag / self.beta

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "k_diag": self.k_diag,
            "lambda_c": self.lambda_c,
            "n_visible": self.n_visible,
            "n_hidden": self.n_hidden,
            "lambdas": self.lambdas.tolist(),
            "omegas": self.omegas.tolist(),
            "divergent": [i + 1 for i in self.divergent],
        }


def oscillator_spectrum(lambdas, n_visible: int, n_hidden: int, beta: float = DEFAULT_BETA,
                        k_diag: float = DEFAULT_K) -> OscillatorSpectrum:
    """Frequencies ordered as ``[u-block (k), w-block (k), tail (|N-M|)]`` with ``k = min(N, M)``."""
    if not beta > 0 or not k_diag > 0:
        raise ValueError("beta and k_diag must be positive")
    lam = np.asarray(lambdas, dtype=np.float64)
    k = min(n_visible, n_hidden)
    if lam.shape != (k,):
        raise DimensionMismatch(f"expected {k} singular values, got shape {lam.shape}")
    omegas = np.concatenate([(k_diag - lam * beta) / 2, (k_diag + lam * beta) / 2,
                             np.full(abs(n_visible - n_hidden), k_diag / 2)])
    divergent = tuple(int(i) for i in np.flatnonzero(lam > k_diag / beta))
    lam = lam.copy()
    lam.setflags(write=False)
    omegas.setflags(write=False)
    return OscillatorSpectrum(float(beta), float(k_diag), lam, omegas, divergent, n_visible, n_hidden)


def mode_frequencies(frame: ReciprocalFrame, beta: float = DEFAULT_BETA,
                     k_diag: float = DEFAULT_K) -> OscillatorSpectrum:
    return oscillator_spectrum(frame.lambdas, frame.n_visible, frame.n_hidden, beta, k_diag)


def excitation(spectrum: OscillatorSpectrum, n) -> tuple[float, float]:
    """Energy ``E = Σ ω_i n_i`` of occupation vector ``n`` and its relaxation rate ``βE/2``."""
    n = np.asarray(n)
    if n.shape != spectrum.omegas.shape:
        raise DimensionMismatch(f"occupation vector must have length {spectrum.omegas.size}")
    if np.any(n < 0) or not np.all(np.equal(np.mod(n, 1), 0)):
        raise ValueError("occupation numbers must be non-negative integers")
    E = float(spectrum.omegas @ n) if np.any(n) else 0.0
    return E, spectrum.beta * E / 2


def divergent_modes(spectrum: OscillatorSpectrum) -> dict:
    """Modes whose singular value strictly exceeds ``k/β`` (0-based indices)."""
    idx = list(spectrum.divergent)
    return {
        "lambda_c": spectrum.lambda_c,
        "modes": idx,
        "lambdas": [float(spectrum.lambdas[i]) for i in idx],
        "n_divergent": len(idx),
    }


@dataclass(frozen=True, eq=False)
class ConstraintMinimum:
    """Per-mode centre of uniformly random binary states in reciprocal coordinates.

    ``x`` (length N) and ``y`` (length M) are the means of ``U^T v`` and
    ``V^T h``; ``u`` and ``w`` are the same point in the saddle-centred,
    rotated coordinates of each coupled mode (NaN when the mode is degenerate).
    """

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    w: np.ndarray


def constraint_minimum(frame: ReciprocalFrame) -> ConstraintMinimum:
    x = project_visible(frame, np.full(frame.n_visible, 0.5))
    y = project_hidden(frame, np.full(frame.n_hidden, 0.5))
    u = np.full(frame.n_modes, np.nan)
    w = np.full(frame.n_modes, np.nan)
    for i in np.flatnonzero(frame.active):
        u[i], w[i] = to_uw(frame, int(i), x[i], y[i])
    return ConstraintMinimum(x, y, u, w)


@dataclass
class GibbsConfig:
    n_chains: int = 500
    k_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 2 or self.k_steps < 1:
            raise ValueError("need n_chains >= 2 and k_steps >= 1")


TRACE_COLUMNS = ("epoch", "mode", "mu", "saddle", "test_mean", "test_sd", "gibbs_mean", "gibbs_sd")


@dataclass
class TraceRecord:
    epoch: int
    mode: int  # 0-based; written 1-based
    mu: float
    saddle: float
    test_mean: float
    test_sd: float
    gibbs_mean: float
    gibbs_sd: float
    coordinate: str = "u"
    n_test: int = 0

    @property
    def reference(self) -> float:
        """The saddle when the mode has one, otherwise the constraint minimum."""
        return self.saddle if math.isfinite(self.saddle) else self.mu

    @property
    def distance(self) -> float:
        return abs(self.test_mean - self.reference)

    @property
    def test_se(self) -> float:
        return self.test_sd / math.sqrt(self.n_test) if self.n_test else float("nan")


@dataclass
class LandscapeTrace:
    records: list[TraceRecord] = field(default_factory=list)

    @property
    def epochs(self) -> list[int]:
        return sorted({r.epoch for r in self.records})

    def for_mode(self, mode: int) -> list[TraceRecord]:
        return [r for r in self.records if r.mode == mode]

    def distances(self, mode: int) -> np.ndarray:
        return np.array([r.distance for r in self.for_mode(mode)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            row = asdict(r)
            row["mode"] = r.mode + 1
            writer.writerow([_fmt(row[c]) for c in TRACE_COLUMNS])
        return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _mode_coordinates(frame: ReciprocalFrame, mode: int, v: np.ndarray, h: np.ndarray, mu: ConstraintMinimum):
    """Projected samples, constraint minimum, saddle and coordinate name for one mode."""
    N, M = frame.n_visible, frame.n_hidden
    if not 0 <= mode < max(N, M):
        raise IndexOutOfRange(f"mode {mode} outside [0, {max(N, M)})")
    if mode < frame.n_modes and frame.active[mode]:
        x = v @ frame.U[:, mode]
        y = h @ frame.V[:, mode]
        u, _ = to_uw(frame, mode, x, y)
        return u, float(mu.u[mode]), 0.0, "u"
    if mode < N and (N >= M or mode < frame.n_modes):
        return v @ frame.U[:, mode], float(mu.x[mode]), float("nan"), "x"
    return h @ frame.V[:, mode], float(mu.y[mode]), float("nan"), "y"


def landscape_trace(checkpoints: Sequence[tuple[int, RbmParams]], test_data, gibbs_cfg: GibbsConfig,
                    modes: Iterable[int]) -> LandscapeTrace:
    """Track reciprocal-variable statistics of selected modes across epochs.

    Coupled modes are followed along ``u`` (the saddle sits at ``u = 0``);
    tail modes, and degenerate coupled modes, along ``x`` (or ``y`` when
    ``M > N``), where there is no saddle. Hidden states of the test data
    are drawn from ``q(h|v)``.
    """
    checkpoints = list(checkpoints)
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    epochs = [e for e, _ in checkpoints]
    if any(b <= a for a, b in zip(epochs, epochs[1:])):
        raise ValueError("checkpoint epochs must increase strictly")
    modes = list(modes)
    bits = np.asarray(getattr(test_data, "bits", test_data), dtype=np.float64)
    trace = LandscapeTrace()
    for epoch, params in checkpoints:
        if bits.shape[1] != params.n_visible:
            raise DimensionMismatch(f"test data width {bits.shape[1]} != N={params.n_visible}")
        rng = np.random.default_rng([gibbs_cfg.seed, epoch])
        frame = decompose(params)
        mu = constraint_minimum(frame)
        h_test = sample_hidden(params, bits, rng)
        init = ChainState((rng.random((gibbs_cfg.n_chains, params.n_visible)) < 0.5).astype(np.float64),
                          np.zeros((gibbs_cfg.n_chains, params.n_hidden)))
        chains = block_gibbs(params, init, gibbs_cfg.k_steps, rng)
        for mode in modes:
            z_test, mu_i, saddle, coord = _mode_coordinates(frame, mode, bits, h_test, mu)
            z_gibbs, *_ = _mode_coordinates(frame, mode, chains.v, chains.h, mu)
            trace.records.append(TraceRecord(
                epoch, mode, mu_i, saddle,
                float(z_test.mean()), float(z_test.std(ddof=1)) if z_test.size > 1 else 0.0,
                float(z_gibbs.mean()), float(z_gibbs.std(ddof=1)),
                coord, int(z_test.size)))
    return trace
