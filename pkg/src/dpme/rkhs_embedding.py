"""Kernel mean embeddings of Gaussian mixtures under the Gaussian RBF kernel.

With k(x, y) = exp(-||x - y||^2 / (2 s2)) and diagonal Gaussians, every
inner product needed here has a closed form that factors over dimensions:

    <mu[f], mu[g]>   = prod_j sqrt(s2 / t_j) * exp(-(mf_j - mg_j)^2 / (2 t_j)),
                       t_j = s2 + vf_j + vg_j
    <mu^_X, mu[f]>   = (1/m) sum_k prod_j sqrt(s2 / t_j) * exp(-(x_kj - mf_j)^2 / (2 t_j)),
                       t_j = s2 + vf_j
    <mu^_X, mu^_X>   = (1/m^2) sum_{k,l} k(x_k, x_l)

where mu[f] is the embedding of the component f and mu^_X the empirical
embedding of the data.  Squared distance between a weighted mixture
embedding and the data embedding is then data_term - 2 R'pi + pi'S pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import stick_breaking
from .errors import DegenerateDataError, InvariantError, ParameterError
from .gaussian import GaussianComponent, stack_params
from .rng import make_rng

# Fixed policy seed for the median-heuristic pair subsample; a constant so
# the heuristic is a deterministic function of the data alone.
_PAIR_SUBSAMPLE_SEED = 201
_MAX_PAIRS = 10_000
_ROW_CHUNK = 2048

_SYM_TOL = 1e-12
_PSD_FLOOR = 1e-10
_NEG_CLAMP = 1e-12
_SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian RBF kernel parameters; bandwidth2 is the squared bandwidth s2."""

    bandwidth2: float

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth2) and self.bandwidth2 > 0.0):
            raise ParameterError(f"bandwidth2 must be > 0, got {self.bandwidth2}")
        object.__setattr__(self, "bandwidth2", float(self.bandwidth2))


@dataclass(frozen=True)
class Dataset:
    """An (m, d) array of observations."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2:
            raise ParameterError(f"points must be 2-D (m, d), got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParameterError(f"points must be non-empty, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class EmbeddingGram:
    """Component Gram matrix S, data cross-vector R, and the data self term.

    S[i, j] = <mu[f_i], mu[f_j]>, R[j] = <mu^_X, mu[f_j]>, data_term =
    <mu^_X, mu^_X>.  S is stored exactly symmetric; entries are positive in
    exact arithmetic (extremely distant atoms may underflow to 0).
    """

    S: np.ndarray
    R: np.ndarray
    data_term: float

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        R = np.array(self.R, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ParameterError(f"S must be square, got shape {S.shape}")
        if R.shape != (S.shape[0],):
            raise ParameterError(
                f"R must have length {S.shape[0]}, got shape {R.shape}"
            )
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(R))):
            raise InvariantError("gram entries must be finite")
        if np.max(np.abs(S - S.T), initial=0.0) > _SYM_TOL:
            raise InvariantError("S must be symmetric within 1e-12")
        if np.any(S < 0.0) or np.any(S > 1.0) or np.any(R < 0.0) or np.any(R > 1.0):
            raise InvariantError("gram entries must lie in [0, 1]")
        if not (0.0 < self.data_term <= 1.0):
            raise InvariantError(f"data_term must lie in (0, 1], got {self.data_term}")
        floor = -_PSD_FLOOR * max(float(np.trace(S)), 1.0)
        if float(np.linalg.eigvalsh(S)[0]) < floor:
            raise InvariantError("S must be positive semi-definite")
        S.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "data_term", float(self.data_term))

    @property
    def trunc(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class TruncatedDPMM:
    """A truncated mixture: simplex weights over T Gaussian components."""

    alpha: float
    trunc: int
    weights: np.ndarray
    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        comps = tuple(self.components)
        if len(comps) != self.trunc:
            raise ParameterError(
                f"expected {self.trunc} components, got {len(comps)}"
            )
        stack_params(comps)  # validates shared dimension
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.trunc,):
            raise ParameterError(
                f"weights must have shape ({self.trunc},), got {w.shape}"
            )
        if np.any(w < -_NEG_CLAMP) or abs(w.sum() - 1.0) > _SIMPLEX_TOL:
            raise ParameterError("weights must lie on the probability simplex")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "trunc", int(self.trunc))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim


def kernel_eval(x: np.ndarray, y: np.ndarray, cfg: KernelConfig) -> float:
    """Gaussian kernel k(x, y) = exp(-||x - y||^2 / (2 s2))."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ParameterError(f"x and y must have equal length, got {x.shape} vs {y.shape}")
    return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * cfg.bandwidth2)))


def _pair_inner(means_a, covs_a, means_b, covs_b, s2: float) -> np.ndarray:
    """Closed-form <mu[f_i], mu[g_j]> for all pairs; shapes (Ta, d) -> (Ta, Tb)."""
    t = s2 + covs_a[:, None, :] + covs_b[None, :, :]
    diff = means_a[:, None, :] - means_b[None, :, :]
    log_amp = 0.5 * np.sum(np.log(s2 / t), axis=2)
    return np.exp(log_amp - np.sum(diff * diff / (2.0 * t), axis=2))


def component_inner(
    f: GaussianComponent, g: GaussianComponent, cfg: KernelConfig
) -> float:
    """RKHS inner product of two component embeddings (closed form)."""
    if f.dim != g.dim:
        raise ParameterError(f"components have dimensions {f.dim} vs {g.dim}")
    s2 = cfg.bandwidth2
    t = s2 + f.cov_diag + g.cov_diag
    amp = np.prod(np.sqrt(s2 / t))
    return float(amp * np.exp(-np.sum((f.mean - g.mean) ** 2 / (2.0 * t))))


def _data_inner_vector(means, covs, points, s2: float) -> np.ndarray:
    """R vector: mean over data rows of the smoothed kernel, shape (T,)."""
    T = means.shape[0]
    t = s2 + covs  # (T, d)
    log_amp = 0.5 * np.sum(np.log(s2 / t), axis=1)  # (T,)
    total = np.zeros(T)
    for start in range(0, points.shape[0], _ROW_CHUNK):
        block = points[start : start + _ROW_CHUNK]  # (b, d)
        diff = block[:, None, :] - means[None, :, :]  # (b, T, d)
        total += np.exp(log_amp[None, :] - np.sum(diff * diff / (2.0 * t)[None, :, :], axis=2)).sum(axis=0)
    return total / points.shape[0]


def component_data_inner(
    f: GaussianComponent, X: Dataset, cfg: KernelConfig
) -> float:
    """RKHS inner product of the empirical data embedding with mu[f]."""
    if f.dim != X.d:
        raise ParameterError(f"component dimension {f.dim} does not match data dimension {X.d}")
    return float(
        _data_inner_vector(f.mean[None, :], f.cov_diag[None, :], X.points, cfg.bandwidth2)[0]
    )


def empirical_self_term(X: Dataset, cfg: KernelConfig) -> float:
    """<mu^_X, mu^_X> = (1/m^2) * sum over all ordered pairs of k(x_k, x_l)."""
    pts = X.points
    m = pts.shape[0]
    s2 = cfg.bandwidth2
    sq_norm = np.sum(pts * pts, axis=1)
    total = 0.0
    for start in range(0, m, _ROW_CHUNK):
        block = pts[start : start + _ROW_CHUNK]
        d2 = (
            sq_norm[start : start + _ROW_CHUNK][:, None]
            + sq_norm[None, :]
            - 2.0 * block @ pts.T
        )
        total += float(np.exp(-np.maximum(d2, 0.0) / (2.0 * s2)).sum())
    return total / (m * m)


def assemble_gram(components, X: Dataset, cfg: KernelConfig) -> EmbeddingGram:
    """Build S, R and the data self term for a component list and a dataset.

    Each unordered component pair is computed once and mirrored, so the
    stored S equals its transpose exactly.  Assembly order is fixed, making
    the result independent of any parallel execution of the entry formulas.
    """
    means, covs = stack_params(components)
    if means.shape[1] != X.d:
        raise ParameterError(
            f"components have dimension {means.shape[1]}, data has {X.d}"
        )
    s2 = cfg.bandwidth2
    full = _pair_inner(means, covs, means, covs, s2)
    S = np.triu(full) + np.triu(full, 1).T
    R = _data_inner_vector(means, covs, X.points, s2)
    return EmbeddingGram(S=S, R=R, data_term=empirical_self_term(X, cfg))


def mmd_squared(model: TruncatedDPMM, gram: EmbeddingGram) -> float:
    """Squared embedding distance data_term - 2 R'pi + pi'S pi.

    Tiny negatives from round-off (above -1e-12) clamp to zero; anything
    more negative raises, since the quantity is a squared norm.
    """
    if model.trunc != gram.trunc:
        raise ParameterError(
            f"model has {model.trunc} weights but gram is {gram.trunc} x {gram.trunc}"
        )
    pi = model.weights
    value = gram.data_term - 2.0 * float(gram.R @ pi) + float(pi @ gram.S @ pi)
    if value < 0.0:
        if value <= -_NEG_CLAMP:
            raise InvariantError(f"squared distance {value} below round-off floor")
        value = 0.0
    return value


def mc_component_inner(
    f: GaussianComponent,
    g: GaussianComponent,
    cfg: KernelConfig,
    n_samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of component_inner with its standard error.

    <mu[f], mu[g]> = E k(X, Y) for X ~ f independent of Y ~ g, estimated
    from n_samples paired draws.  Kept deliberately independent of the
    closed form so the two can cross-check each other.
    """
    if f.dim != g.dim:
        raise ParameterError(f"components have dimensions {f.dim} vs {g.dim}")
    if n_samples < 1000:
        raise ParameterError(f"n_samples must be >= 1000, got {n_samples}")
    rng = make_rng(seed)
    x = f.sample(n_samples, rng)
    y = g.sample(n_samples, rng)
    vals = np.exp(-np.sum((x - y) ** 2, axis=1) / (2.0 * cfg.bandwidth2))
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_samples))
    return est, se


def mc_component_data_inner(
    f: GaussianComponent,
    X: Dataset,
    cfg: KernelConfig,
    n_samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of component_data_inner with its standard error.

    Each draw Y_i ~ f contributes (1/m) sum_k k(x_k, Y_i); the estimator
    averages those contributions over n_samples draws.
    """
    if f.dim != X.d:
        raise ParameterError(f"component dimension {f.dim} does not match data dimension {X.d}")
    if n_samples < 1000:
        raise ParameterError(f"n_samples must be >= 1000, got {n_samples}")
    rng = make_rng(seed)
    s2 = cfg.bandwidth2
    pts = X.points
    sq_pts = np.sum(pts * pts, axis=1)
    per_draw = np.empty(n_samples)
    for start in range(0, n_samples, _ROW_CHUNK):
        y = f.sample(min(_ROW_CHUNK, n_samples - start), rng)
        d2 = np.sum(y * y, axis=1)[:, None] + sq_pts[None, :] - 2.0 * y @ pts.T
        per_draw[start : start + y.shape[0]] = np.exp(
            -np.maximum(d2, 0.0) / (2.0 * s2)
        ).mean(axis=1)
    est = float(np.mean(per_draw))
    se = float(np.std(per_draw, ddof=1) / math.sqrt(n_samples))
    return est, se


def median_heuristic_bandwidth(X: Dataset) -> float:
    """Squared bandwidth from the median pairwise distance: med^2 / 2.

    All pairs are used up to 10^4; beyond that a fixed-seed subsample of
    10^4 pairs keeps the cost bounded while staying deterministic.
    """
    pts = X.points
    m = pts.shape[0]
    if m < 2:
        raise ParameterError(f"median heuristic needs at least 2 points, got {m}")
    n_pairs = m * (m - 1) // 2
    if n_pairs <= _MAX_PAIRS:
        iu = np.triu_indices(m, k=1)
        d2 = np.sum((pts[iu[0]] - pts[iu[1]]) ** 2, axis=1)
    else:
        rng = make_rng(_PAIR_SUBSAMPLE_SEED)
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        while rows.size < _MAX_PAIRS:
            need = _MAX_PAIRS - rows.size
            i = rng.integers(0, m, size=2 * need)
            j = rng.integers(0, m, size=2 * need)
            keep = i != j
            rows = np.concatenate((rows, i[keep]))
            cols = np.concatenate((cols, j[keep]))
        rows, cols = rows[:_MAX_PAIRS], cols[:_MAX_PAIRS]
        d2 = np.sum((pts[rows] - pts[cols]) ** 2, axis=1)
    med = float(np.median(np.sqrt(d2)))
    if med == 0.0:
        raise DegenerateDataError(
            "median pairwise distance is zero; data points are (mostly) identical"
        )
    return med * med / 2.0


@dataclass(frozen=True)
class TruncationDecayResult:
    """Mean squared embedding gaps of truncated tails, and their decay rate.

    mean_gaps[k] averages || sum_{i > T_k} w_i mu[f_i] ||^2 over draws;
    bounds[k] = exp(-T_k / alpha) is the reference decay curve with C = 1;
    slope is the least-squares slope of log(mean gap) against T.
    """

    alpha: float
    t_values: tuple[int, ...]
    mean_gaps: np.ndarray
    slope: float
    bounds: np.ndarray
    t_ref: int
    n_draws: int


def truncation_decay_check(
    alpha: float,
    base: stick_breaking.BaseMeasure,
    cfg: KernelConfig,
    t_values,
    t_ref: int,
    n_draws: int,
    seed: int,
) -> TruncationDecayResult:
    """Measure how fast the embedding forgets atoms beyond each truncation T.

    A draw with t_ref atoms stands in for the full infinite draw, so t_ref
    must dwarf every tested T (at least 4x the largest) and leave expected
    tail mass below 1e-10.  Per draw, the squared gap at T is the quadratic
    form of the suffix weights with the component Gram; dropping one more
    atom removes nonnegative terms, so gaps are checked to be non-increasing
    in T for every single draw before averaging.
    """
    t_values = tuple(int(t) for t in t_values)
    if not t_values or any(t < 1 for t in t_values):
        raise ParameterError(f"t_values must be positive integers, got {t_values}")
    if list(t_values) != sorted(set(t_values)):
        raise ParameterError("t_values must be strictly increasing")
    if n_draws < 2:
        raise ParameterError(f"n_draws must be >= 2, got {n_draws}")
    t_ref = int(t_ref)
    if t_ref < 4 * max(t_values):
        raise ParameterError(
            f"t_ref={t_ref} must be at least 4 * max(t_values)={4 * max(t_values)}"
        )
    tail = stick_breaking.expected_tail_mass(alpha, t_ref)
    if tail >= 1e-10:
        raise ParameterError(
            f"t_ref={t_ref} leaves expected tail {tail:.3g} >= 1e-10; increase it"
        )
    if any(t > t_ref for t in t_values):
        raise ParameterError("every tested T must be <= t_ref")

    rng = make_rng(seed)
    betas = stick_breaking._betas_from_uniform(alpha, rng.random((n_draws, t_ref)))
    remainder = np.cumprod(1.0 - betas, axis=1)
    weights = betas * np.concatenate(
        (np.ones((n_draws, 1)), remainder[:, :-1]), axis=1
    )
    means = base.mean0 + math.sqrt(base.tau2) * rng.standard_normal(
        (n_draws, t_ref, base.dim)
    )

    s2 = cfg.bandwidth2
    t_shared = s2 + 2.0 * base.comp_cov  # all atoms share comp_cov
    amp = float(np.prod(np.sqrt(s2 / t_shared)))

    n_t = len(t_values)
    gap_sums = np.zeros(n_t)
    chunk = max(1, int(2**21 // (t_ref * t_ref * base.dim)))
    for start in range(0, n_draws, chunk):
        mean_blk = means[start : start + chunk]
        w_blk = weights[start : start + chunk]
        diff = mean_blk[:, :, None, :] - mean_blk[:, None, :, :]
        gram = amp * np.exp(
            -np.sum(diff * diff / (2.0 * t_shared), axis=3)
        )  # (c, t_ref, t_ref)
        gaps = np.empty((mean_blk.shape[0], n_t))
        for k, T in enumerate(t_values):
            suffix = np.where(np.arange(t_ref) >= T, w_blk, 0.0)
            gaps[:, k] = np.einsum("nij,ni,nj->n", gram, suffix, suffix)
        if not np.all(gaps[:, 1:] <= gaps[:, :-1] * (1.0 + 1e-9) + 1e-300):
            raise InvariantError("per-draw squared gaps must be non-increasing in T")
        gap_sums += gaps.sum(axis=0)

    mean_gaps = gap_sums / n_draws
    positive = mean_gaps > 0.0
    if np.count_nonzero(positive) >= 2:
        slope = float(
            np.polyfit(np.array(t_values)[positive], np.log(mean_gaps[positive]), 1)[0]
        )
    else:
        slope = math.nan
    bounds = np.exp(-np.array(t_values, dtype=float) / alpha)
    mean_gaps.setflags(write=False)
    bounds.setflags(write=False)
    return TruncationDecayResult(
        alpha=float(alpha),
        t_values=t_values,
        mean_gaps=mean_gaps,
        slope=slope,
        bounds=bounds,
        t_ref=t_ref,
        n_draws=n_draws,
    )
