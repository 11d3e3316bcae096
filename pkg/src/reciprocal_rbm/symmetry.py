"""Rotational-symmetry probes on the SVD factors of the coupling matrix.

A rotation "about an (n-2)-dimensional subspace" is represented by the
2-plane it acts in: given an orthonormal pair ``(e1, e2)`` spanning the plane,

    R = I + (cos θ - 1)(e1 e1^T + e2 e2^T) + sin θ (e2 e1^T - e1 e2^T)

which is the identity on the orthogonal complement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import ortho_group

from .errors import BinMismatch, DimensionMismatch, NotOrthonormal
from .rbm import RbmParams, sample_hidden, sigmoid
from .spectral import DEGENERATE_RTOL, ReciprocalFrame, decompose, to_uw

ORTHONORMAL_TOL = 1e-10
DEFAULT_BINS = 200


def _check_pair(e1: np.ndarray, e2: np.ndarray, dim: int) -> None:
    if e1.shape != (dim,) or e2.shape != (dim,):
        raise DimensionMismatch(f"plane vectors must have length {dim}")
    if (abs(e1 @ e1 - 1) > ORTHONORMAL_TOL or abs(e2 @ e2 - 1) > ORTHONORMAL_TOL
            or abs(e1 @ e2) > ORTHONORMAL_TOL):
        raise NotOrthonormal("spanning pair must be orthonormal to 1e-10")


def rotation_nd(dim: int, spanning_pair, angle: float) -> np.ndarray:
    """Rotation by ``angle`` in the plane of ``spanning_pair``, from ``e1`` towards ``e2``."""
    e1, e2 = (np.asarray(e, dtype=np.float64) for e in spanning_pair)
    _check_pair(e1, e2, dim)
    R = np.eye(dim)
    return _rotate_left(R, e1, e2, angle)


def _rotate_left(A: np.ndarray, e1: np.ndarray, e2: np.ndarray, angle: float) -> np.ndarray:
    """``G @ A`` for the planar rotation ``G``, as a rank-2 update (O(dim²))."""
    c, s = math.cos(angle), math.sin(angle)
    p1 = e1 @ A
    p2 = e2 @ A
    return A + np.outer(e1, (c - 1.0) * p1 - s * p2) + np.outer(e2, (c - 1.0) * p2 + s * p1)


@dataclass
class RotationPlan:
    """A burst of ``n_rotations`` random planar rotations.

    Planes are drawn uniformly among those orthogonal to the coordinate axes
    listed in ``protected_modes`` (0-based), so those coordinates are left
    untouched. ``angle=None`` draws each angle uniformly from [0, 2π).
    """

    dim: int
    n_rotations: int
    protected_modes: frozenset = field(default_factory=frozenset)
    angle: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.protected_modes = frozenset(int(i) for i in self.protected_modes)
        if self.n_rotations < 0:
            raise ValueError("n_rotations must be >= 0")
        if any(not 0 <= i < self.dim for i in self.protected_modes):
            raise ValueError("protected modes must lie in [0, dim)")
        if self.n_rotations and self.dim - len(self.protected_modes) < 2:
            raise ValueError("need at least two unprotected dimensions to rotate")

    @classmethod
    def fractional(cls, dim: int, fraction: float = 0.1, **kwargs) -> "RotationPlan":
        return cls(dim, math.ceil(fraction * dim), **kwargs)


def random_plane(dim: int, protected, rng) -> tuple[np.ndarray, np.ndarray]:
    free = np.ones(dim, dtype=bool)
    free[list(protected)] = False
    g = rng.standard_normal((2, dim)) * free
    e1 = g[0] / np.linalg.norm(g[0])
    e2 = g[1] - (g[1] @ e1) * e1
    return e1, e2 / np.linalg.norm(e2)


def random_rotation_burst(plan: RotationPlan, rng=None) -> np.ndarray:
    rng = rng if rng is not None else np.random.default_rng(plan.seed)
    R = np.eye(plan.dim)
    for _ in range(plan.n_rotations):
        e1, e2 = random_plane(plan.dim, plan.protected_modes, rng)
        angle = plan.angle if plan.angle is not None else rng.uniform(0.0, 2 * np.pi)
        R = _rotate_left(R, e1, e2, angle)
    return R


def rotate_frame(frame: ReciprocalFrame, R: np.ndarray, R_hidden: Optional[np.ndarray] = None) -> np.ndarray:
    """Rebuild ``W_R = U_R Σ V_R^T`` with ``U_R = R U R^T`` (and likewise ``V`` when ``R_hidden`` is given)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != frame.U.shape:
        raise DimensionMismatch(f"visible rotation must be {frame.U.shape}, got {R.shape}")
    U_R = R @ frame.U @ R.T
    V_R = frame.V
    if R_hidden is not None:
        if R_hidden.shape != frame.V.shape:
            raise DimensionMismatch(f"hidden rotation must be {frame.V.shape}, got {R_hidden.shape}")
        V_R = R_hidden @ frame.V @ R_hidden.T
    k = frame.n_modes
    return (U_R[:, :k] * frame.lambdas) @ V_R[:, :k].T


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or edges.shape != (counts.size + 1,):
            raise ValueError("need len(counts) == len(bin_edges) - 1")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must increase strictly")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)


def shared_histograms(x, y, bins: int = DEFAULT_BINS) -> tuple[Histogram, Histogram]:
    """Histogram two samples on ``bins`` uniform bins spanning their pooled range."""
    x = np.ravel(x)
    y = np.ravel(y)
    lo = min(x.min(), y.min())
    hi = max(x.max(), y.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    return Histogram(edges, np.histogram(x, edges)[0]), Histogram(edges, np.histogram(y, edges)[0])


def jensen_divergence(p: Histogram, q: Histogram) -> float:
    """Jensen-Shannon divergence in nats; empty bins contribute nothing."""
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(p.bin_edges, q.bin_edges):
        raise BinMismatch("histograms must share identical bin edges")
    P = p.counts / p.counts.sum()
    Q = q.counts / q.counts.sum()
    m = 0.5 * (P + Q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / m[nz])))

    return min(max(0.5 * kl(P) + 0.5 * kl(Q), 0.0), math.log(2.0))


def default_plans(params: RbmParams, fraction: float = 0.1, seed: Optional[int] = None):
    return (RotationPlan.fractional(params.n_visible, fraction, seed=seed),
            RotationPlan.fractional(params.n_hidden, fraction, seed=None if seed is None else seed + 1))


def rotation_symmetry_probe(params: RbmParams, plan_v: RotationPlan, plan_h: RotationPlan,
                            bins: int = DEFAULT_BINS, rng=None) -> float:
    """JSD between the entry histograms of ``W`` and its rotated counterpart.

    The reference is the SVD reconstruction of ``W``, built the same way as the
    rotated matrix, so an empty plan scores exactly 0.
    """
    if plan_v.dim != params.n_visible or plan_h.dim != params.n_hidden:
        raise DimensionMismatch("rotation plans must be sized to N and M")
    frame = decompose(params)
    R_v = random_rotation_burst(plan_v, rng)
    R_h = random_rotation_burst(plan_h, rng)
    W0 = rotate_frame(frame, np.eye(frame.n_visible))
    W_R = rotate_frame(frame, R_v, R_h)
    return jensen_divergence(*shared_histograms(W0, W_R, bins))


def probe_scan(params: RbmParams, n_repeats: int, fraction: float = 0.1, bins: int = DEFAULT_BINS,
               seed: int = 0) -> np.ndarray:
    """Probe scores for ``n_repeats`` independent rotation bursts (seeds ``seed, seed+2, ...``)."""
    out = np.empty(n_repeats)
    for r in range(n_repeats):
        plan_v, plan_h = default_plans(params, fraction, seed=seed + 2 * r)
        out[r] = rotation_symmetry_probe(params, plan_v, plan_h, bins)
    return out


def resampling_baseline(params: RbmParams, bins: int = DEFAULT_BINS, n_splits: int = 100, rng=None) -> np.ndarray:
    """JSDs between two disjoint random halves of the entries of ``W``: the sampling-noise floor."""
    rng = rng if rng is not None else np.random.default_rng(0)
    w = params.W.ravel()
    half = w.size // 2
    out = np.empty(n_splits)
    for s in range(n_splits):
        perm = rng.permutation(w.size)
        out[s] = jensen_divergence(*shared_histograms(w[perm[:half]], w[perm[half:2 * half]], bins))
    return out


HIERARCHICAL_MODES = ("identity", "top2_pi", "top5_protected_burst")


def hierarchical_rotation(params: RbmParams, samples, mode: str, rng=None,
                          n_rotations: int = 10, n_protected: int = 5,
                          angle: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Visible activations ``σ(W h + a)`` before and after rotating ``U``.

    Rotation planes are chosen in the eigenbasis: ``top2_pi`` turns the plane
    of the two leading left singular vectors by π; ``top5_protected_burst``
    applies ``n_rotations`` random rotations in planes orthogonal to the
    ``n_protected`` leading ones. ``samples`` may be hidden states (width M)
    or visible states (width N), which are first pushed through ``q(h|v)``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    bits = getattr(samples, "bits", samples)
    bits = np.atleast_2d(np.asarray(bits, dtype=np.float64))
    N, M = params.n_visible, params.n_hidden
    if bits.shape[1] == M:
        h = bits
    elif bits.shape[1] == N:
        h = sample_hidden(params, bits, rng)
    else:
        raise DimensionMismatch(f"samples must have width N={N} or M={M}")
    frame = decompose(params)

    if mode == "identity":
        R_eig = np.eye(N)
    elif mode == "top2_pi":
        e = np.eye(N)
        R_eig = rotation_nd(N, (e[0], e[1]), np.pi)
    elif mode in ("top5_protected_burst", "top5_burst"):
        plan = RotationPlan(N, n_rotations, frozenset(range(min(n_protected, N))), angle=angle)
        R_eig = random_rotation_burst(plan, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {HIERARCHICAL_MODES}")

    W0 = rotate_frame(frame, np.eye(N))
    W_R = W0 if mode == "identity" else rotate_frame(frame, frame.U @ R_eig @ frame.U.T)
    before = sigmoid(h @ W0.T + params.a)
    after = sigmoid(h @ W_R.T + params.a)
    return before, after


@dataclass(frozen=True)
class ReciprocalMoments:
    mu_x: np.ndarray
    mu_y: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray


def reciprocal_moments(frame: ReciprocalFrame) -> ReciprocalMoments:
    """Mean and spread of ``x = U^T v``, ``y = V^T h`` for uniformly random binary ``v, h``."""
    return ReciprocalMoments(0.5 * frame.U.sum(axis=0), 0.5 * frame.V.sum(axis=0),
                             np.full(frame.n_visible, 0.5), np.full(frame.n_hidden, 0.5))


def moments_in_uw(frame: ReciprocalFrame):
    """Per coupled active mode, the mean of ``(u, w)`` for uniform binary states."""
    mom = reciprocal_moments(frame)
    idx = np.flatnonzero(frame.active)
    u = np.empty(idx.size)
    w = np.empty(idx.size)
    for n, i in enumerate(idx):
        u[n], w[n] = to_uw(frame, i, mom.mu_x[i], mom.mu_y[i])
    return u, w


@dataclass
class KurtosisScan:
    kurtosis_y: np.ndarray
    kurtosis_x: Optional[np.ndarray] = None

    @property
    def mean_abs_excess_y(self) -> float:
        return float(np.mean(np.abs(self.kurtosis_y - 3.0)))

    def summary(self) -> dict:
        out = {"y_mean": float(self.kurtosis_y.mean()), "y_sd": float(self.kurtosis_y.std()),
               "y_mean_abs_excess": self.mean_abs_excess_y}
        if self.kurtosis_x is not None:
            out.update(x_mean=float(self.kurtosis_x.mean()), x_sd=float(self.kurtosis_x.std()),
                       x_mean_abs_excess=float(np.mean(np.abs(self.kurtosis_x - 3.0))))
        return out


def haar_frame(n_visible: int, n_hidden: int, rng, lambdas=None) -> ReciprocalFrame:
    """A frame with Haar-distributed ``U`` and ``V`` and zero biases (unit singular values by default)."""
    k = min(n_visible, n_hidden)
    lam = np.ones(k) if lambdas is None else np.sort(np.asarray(lambdas, dtype=np.float64))[::-1]
    if lam.shape != (k,):
        raise DimensionMismatch(f"need {k} singular values")

    def haar(d):
        return ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))

    tol = DEGENERATE_RTOL * lam[0] if k and lam[0] > 0 else 0.0
    return ReciprocalFrame(haar(n_visible), haar(n_hidden), lam, np.zeros(n_visible), np.zeros(n_hidden), tol)


def _projected_kurtosis(Q: np.ndarray, n_samples: int, rng, chunk: int) -> np.ndarray:
    """Kurtosis of each column of ``b @ Q`` with ``b`` uniform on {0,1}^dim."""
    mu = 0.5 * Q.sum(axis=0)
    s1 = np.zeros(Q.shape[1])
    s2 = np.zeros_like(s1)
    s3 = np.zeros_like(s1)
    s4 = np.zeros_like(s1)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        b = (rng.random((n, Q.shape[0])) < 0.5).astype(np.float64)
        d = b @ Q - mu
        d2 = d * d
        s1 += d.sum(axis=0)
        s2 += d2.sum(axis=0)
        s3 += (d2 * d).sum(axis=0)
        s4 += (d2 * d2).sum(axis=0)
        done += n
    m1, m2, m3, m4 = s1 / n_samples, s2 / n_samples, s3 / n_samples, s4 / n_samples
    var = m2 - m1 ** 2
    c4 = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
    return c4 / var ** 2


def kurtosis_scan(frame: ReciprocalFrame, n_samples: int, rng, include_x: bool = True,
                  chunk: int = 10000) -> KurtosisScan:
    """Per-mode kurtosis of reciprocal variables of uniform random binary states (active modes only)."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    idx = np.flatnonzero(frame.active)
    ky = _projected_kurtosis(frame.V[:, idx], n_samples, rng, chunk)
    kx = _projected_kurtosis(frame.U[:, idx], n_samples, rng, chunk) if include_x else None
    return KurtosisScan(ky, kx)


def mean_abs_change(before: np.ndarray, after: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(after) - np.asarray(before))))
