"""Reciprocal-space view of an RBM.

The coupling matrix is factored as ``W = U Σ V^T`` (full, square ``U`` and
``V``). Projecting ``x = U^T v`` and ``y = V^T h`` splits the energy into
independent two-variable terms, one per singular value, plus linear terms
for the ``|N - M|`` uncoupled tail directions.

Mode indices are 0-based throughout the library.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .errors import DegenerateMode, DimensionMismatch, IndexOutOfRange, NumericalFailure
from .rbm import RbmParams

DEGENERATE_RTOL = 1e-10
_ROT45 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ReciprocalFrame:
    U: np.ndarray        # (N, N) orthogonal
    V: np.ndarray        # (M, M) orthogonal
    lambdas: np.ndarray  # (min(N, M),) descending
    a0: np.ndarray       # U^T a
    b0: np.ndarray       # V^T b
    tol: float           # singular values <= tol are treated as zero

    @property
    def n_visible(self) -> int:
        return self.U.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.V.shape[0]

    @property
    def n_modes(self) -> int:
        return self.lambdas.size

    @property
    def n_total_modes(self) -> int:
        return max(self.n_visible, self.n_hidden)

    @property
    def active(self) -> np.ndarray:
        """Boolean mask of coupled modes whose singular value exceeds the tolerance."""
        return self.lambdas > self.tol

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def sigma(self) -> np.ndarray:
        """The rectangular ``(N, M)`` singular-value matrix."""
        S = np.zeros((self.n_visible, self.n_hidden))
        k = self.n_modes
        S[np.arange(k), np.arange(k)] = self.lambdas
        return S

    @property
    def saddles(self) -> np.ndarray:
        """Rows ``(x0, y0, E_saddle)`` for every active mode."""
        lam = self.lambdas[self.active]
        a0 = self.a0[: self.n_modes][self.active]
        b0 = self.b0[: self.n_modes][self.active]
        return np.column_stack([-b0 / lam, -a0 / lam, a0 * b0 / lam])

    def weights(self) -> np.ndarray:
        return self.U @ self.sigma @ self.V.T


def _canonical_signs(Q: np.ndarray) -> np.ndarray:
    """+1/-1 per column so that each column's largest-magnitude entry becomes positive."""
    idx = np.argmax(np.abs(Q), axis=0)
    return np.where(Q[idx, np.arange(Q.shape[1])] < 0, -1.0, 1.0)


def decompose(params: RbmParams) -> ReciprocalFrame:
    W = params.W
    N, M = W.shape
    k = min(N, M)
    try:
        U, s, Vt = np.linalg.svd(W, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    V = Vt.T.copy()

    signs = _canonical_signs(U[:, :k])
    U[:, :k] *= signs
    V[:, :k] *= signs
    if N > k:
        U[:, k:] *= _canonical_signs(U[:, k:])
    if M > k:
        V[:, k:] *= _canonical_signs(V[:, k:])

    # Descending singular values; equal values ordered by their U column, lexicographically.
    keys = [U[r, :k] for r in range(N - 1, -1, -1)] + [-s]
    order = np.lexsort(keys)
    U[:, :k] = U[:, order]
    V[:, :k] = V[:, order]
    s = s[order]

    lam_max = float(s[0]) if s.size else 0.0
    tol = DEGENERATE_RTOL * lam_max if lam_max > 0 else 0.0
    for arr in (U, V, s):
        arr.setflags(write=False)
    a0 = U.T @ params.a
    b0 = V.T @ params.b
    return ReciprocalFrame(U, V, s, a0, b0, tol)


def project_visible(frame: ReciprocalFrame, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != frame.n_visible:
        raise DimensionMismatch(f"visible vector has length {v.shape[-1]}, frame has N={frame.n_visible}")
    return v @ frame.U


def project_hidden(frame: ReciprocalFrame, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != frame.n_hidden:
        raise DimensionMismatch(f"hidden vector has length {h.shape[-1]}, frame has M={frame.n_hidden}")
    return h @ frame.V


def unproject_visible(frame: ReciprocalFrame, x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) @ frame.U.T


def unproject_hidden(frame: ReciprocalFrame, y) -> np.ndarray:
    return np.asarray(y, dtype=np.float64) @ frame.V.T


def mode_energy(frame: ReciprocalFrame, i: int, x_i, y_i=0.0):
    """Energy of mode ``i``.

    Coupled modes (``i < min(N, M)``) give ``-a0 x - b0 y - λ x y``. Tail modes
    carry only their own bias term: ``-a0 x`` when ``N > M`` (``y_i`` ignored)
    or ``-b0 y`` when ``M > N`` (``x_i`` ignored).
    """
    if not 0 <= i < frame.n_total_modes:
        raise IndexOutOfRange(f"mode {i} outside [0, {frame.n_total_modes})")
    if i < frame.n_modes:
        return -frame.a0[i] * x_i - frame.b0[i] * y_i - frame.lambdas[i] * x_i * y_i
    if frame.n_visible > frame.n_hidden:
        return -frame.a0[i] * x_i
    return -frame.b0[i] * y_i


def reciprocal_energy(frame: ReciprocalFrame, x, y):
    """Sum of all mode energies for full reciprocal vectors ``x`` (N) and ``y`` (M)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = frame.n_modes
    coupled = frame.lambdas * x[..., :k] * y[..., :k]
    return -(x @ frame.a0) - (y @ frame.b0) - coupled.sum(axis=-1)


def _require_active(frame: ReciprocalFrame, i: int) -> None:
    if not 0 <= i < frame.n_modes:
        raise IndexOutOfRange(f"mode {i} is not a coupled mode (0 <= i < {frame.n_modes})")
    if not frame.lambdas[i] > frame.tol:
        raise DegenerateMode(f"mode {i} has singular value {frame.lambdas[i]:.3g} below tolerance")


def saddle_point(frame: ReciprocalFrame, i: int) -> tuple[float, float, float]:
    _require_active(frame, i)
    lam, a0, b0 = frame.lambdas[i], frame.a0[i], frame.b0[i]
    return -b0 / lam, -a0 / lam, a0 * b0 / lam


def to_uw(frame: ReciprocalFrame, i: int, x, y):
    """Translate to the saddle and rotate by π/4: ``E_i = E_saddle - λ/2 (u² - w²)``."""
    x0, y0, _ = saddle_point(frame, i)
    dx = np.asarray(x, dtype=np.float64) - x0
    dy = np.asarray(y, dtype=np.float64) - y0
    return _ROT45 * (dx + dy), _ROT45 * (dy - dx)


def from_uw(frame: ReciprocalFrame, i: int, u, w):
    x0, y0, _ = saddle_point(frame, i)
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return x0 + _ROT45 * (u - w), y0 + _ROT45 * (u + w)


def mode_energy_uw(frame: ReciprocalFrame, i: int, u, w):
    _, _, e_saddle = saddle_point(frame, i)
    lam = frame.lambdas[i]
    return e_saddle - 0.5 * lam * (np.asarray(u) ** 2 - np.asarray(w) ** 2)


@dataclass(frozen=True)
class MpLaw:
    """Marčenko-Pastur law for singular values of an ``n x m`` matrix with i.i.d. N(0, sigma²) entries."""

    sigma: float
    n: int
    m: int

    @property
    def q(self) -> float:
        return min(self.n, self.m) * self.sigma ** 2

    @property
    def lambda_plus(self) -> float:
        return math.sqrt(max(self.n, self.m) * self.sigma ** 2) + math.sqrt(self.q)

    @property
    def lambda_minus(self) -> float:
        return abs(math.sqrt(max(self.n, self.m) * self.sigma ** 2) - math.sqrt(self.q))

    @property
    def lambda_peak(self) -> float:
        return self.sigma * math.sqrt(abs(self.n - self.m))

    @classmethod
    def for_frame(cls, frame: ReciprocalFrame, sigma: float | None = None) -> "MpLaw":
        """Law matching the frame's shape; ``sigma`` defaults to the RMS coupling."""
        N, M = frame.n_visible, frame.n_hidden
        if sigma is None:
            sigma = math.sqrt(float(np.sum(frame.lambdas ** 2)) / (N * M))
        return cls(sigma, N, M)


def mp_density(law: MpLaw, lam):
    lam = np.asarray(lam, dtype=np.float64)
    lp2, lm2 = law.lambda_plus ** 2, law.lambda_minus ** 2
    inside = (lam > law.lambda_minus) & (lam < law.lambda_plus)
    out = np.zeros_like(lam)
    l = lam[inside]
    out[inside] = np.sqrt((lp2 - l ** 2) * (l ** 2 - lm2)) / (np.pi * law.q * l)
    return out


def mp_cdf(law: MpLaw, lam, n_grid: int = 20000):
    """Cumulative distribution of :func:`mp_density`.

    Integrated in the angle ``t`` defined by ``λ² = c - r cos t`` (``c``, ``r``
    the centre and half-width of the squared support), where the integrand
    is smooth at both edges.
    """
    lam = np.asarray(lam, dtype=np.float64)
    lp2, lm2 = law.lambda_plus ** 2, law.lambda_minus ** 2
    c, r = 0.5 * (lp2 + lm2), 0.5 * (lp2 - lm2)
    dt = np.pi / n_grid
    t_mid = (np.arange(n_grid) + 0.5) * dt
    integrand = r ** 2 * np.sin(t_mid) ** 2 / (2 * np.pi * law.q * (c - r * np.cos(t_mid)))
    cum = np.concatenate([[0.0], np.cumsum(integrand) * dt])
    t_grid = np.linspace(0.0, np.pi, n_grid + 1)
    t_of_lam = np.arccos(np.clip((c - lam ** 2) / r, -1.0, 1.0))
    return np.interp(t_of_lam, t_grid, cum)


def spectrum_report(frame: ReciprocalFrame, law: MpLaw | None = None, bins: int = 50,
                    n_curve: int = 200) -> dict:
    """Serializable summary: sorted singular values, a histogram of the active
    ones and Marčenko-Pastur reference curve samples."""
    law = law or MpLaw.for_frame(frame)
    active = frame.lambdas[frame.active]
    if active.size:
        lo, hi = float(active.min()), float(active.max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(active, bins=bins, range=(lo, hi))
        hist = {"edges": edges.tolist(), "counts": counts.tolist()}
    else:
        hist = {"edges": [], "counts": []}
    if law.q > 0:
        grid = np.linspace(law.lambda_minus, law.lambda_plus, n_curve)
        curve = np.column_stack([grid, mp_density(law, grid)]).tolist()
    else:
        curve = []
    return {
        "n_visible": frame.n_visible,
        "n_hidden": frame.n_hidden,
        "n_active": frame.n_active,
        "tolerance": frame.tol,
        "lambdas": frame.lambdas.tolist(),
        "histogram": hist,
        "marchenko_pastur": {
            "sigma": law.sigma,
            "lambda_minus": law.lambda_minus,
            "lambda_plus": law.lambda_plus,
            "lambda_peak": law.lambda_peak,
            "curve": curve,
        },
    }


def mode_table(frame: ReciprocalFrame) -> list[dict]:
    """One row per coupled mode (1-based ``i``); saddle columns are NaN for degenerate modes."""
    rows = []
    for i in range(frame.n_modes):
        if frame.lambdas[i] > frame.tol:
            x0, y0, e = saddle_point(frame, i)
        else:
            x0 = y0 = e = float("nan")
        rows.append({"i": i + 1, "lambda": float(frame.lambdas[i]), "a0": float(frame.a0[i]),
                     "b0": float(frame.b0[i]), "x0": float(x0), "y0": float(y0), "E_saddle": float(e)})
    return rows


def sample_gaussian_singular_values(n: int, m: int, sigma: float, n_matrices: int, rng) -> np.ndarray:
    out = [np.linalg.svd(rng.normal(0.0, sigma, size=(n, m)), compute_uv=False) for _ in range(n_matrices)]
    return np.concatenate(out)


def cdf_sup_distance(samples, law: MpLaw) -> float:
    """Kolmogorov distance between the empirical CDF of ``samples`` and the law."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    F = mp_cdf(law, s)
    n = s.size
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def empirical_peak(samples, n_grid: int = 4001, level: float = 0.8) -> float:
    """Location of the maximum of a Gaussian kernel density estimate.

    The density is flat near its mode, so the raw argmax is noisy; a quartic
    fitted to the region where the estimate exceeds ``level`` times its
    maximum locates the peak stably while following any skew.
    """
    s = np.asarray(samples, dtype=np.float64)
    grid = np.linspace(s.min(), s.max(), n_grid)
    dens = gaussian_kde(s)(grid)
    top = grid[dens >= level * dens.max()]
    if top.size < 5:
        return float(grid[np.argmax(dens)])
    coef = np.polyfit(top, dens[dens >= level * dens.max()], 4)
    return float(top[np.argmax(np.polyval(coef, top))])
