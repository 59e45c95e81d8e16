"""End-to-end fitting: atoms, Gram assembly, QP solve, latent postprocessing.

The model is fit by minimizing the squared distance between the mixture's
kernel mean embedding and the empirical data embedding over the weight
simplex; component parameters (atoms) are fixed up front by one of three
initialization strategies and are not optimized.  Cluster labels fall out
afterwards from weighted component densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .errors import DegenerateDataError, ParameterError
from .gaussian import GaussianComponent, log_density_matrix
from .rkhs_embedding import (
    Dataset,
    EmbeddingGram,
    KernelConfig,
    TruncatedDPMM,
    assemble_gram,
    median_heuristic_bandwidth,
    mmd_squared,
)
from .rng import check_seed, derive_rng
from .simplex_qp import QPProblem, QPSolution
from .simplex_qp import solve_qp
from .stick_breaking import choose_truncation

ATOM_STRATEGIES = ("sample_g0", "kmeans", "subsample")

# Weights below this fraction count as unused components in FitResult.
DEFAULT_WEIGHT_FLOOR = 1e-3

# Atom covariances default to this fraction of the per-dimension data
# variance.  0.4 makes one atom wide enough to cover one data mode, so
# surplus atoms on the same mode take near-zero weight instead of
# splitting it; much smaller scales spread weight over 5+ atoms per mode
# and much larger ones blur neighbouring modes together.
DEFAULT_COMP_COV_SCALE = 0.4

_KMEANS_RESTARTS = 20
_KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class FitConfig:
    """Everything fit() needs beyond the data itself.

    trunc="auto" picks the smallest T with exp(-T / alpha) <= delta;
    epsilon="auto" scales the ridge as 1e-6 * trace(S) / T;
    bandwidth2="median" applies the median heuristic to the data.
    """

    alpha: float = 1.0
    trunc: int | str = "auto"
    delta: float = 1e-3
    atom_strategy: str = "kmeans"
    epsilon: float | str = "auto"
    bandwidth2: float | str = "median"
    comp_cov_scale: float = DEFAULT_COMP_COV_SCALE
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if isinstance(self.trunc, str):
            if self.trunc != "auto":
                raise ParameterError(f'trunc must be a positive int or "auto", got {self.trunc!r}')
        elif isinstance(self.trunc, bool) or not isinstance(self.trunc, (int, np.integer)):
            raise ParameterError(f'trunc must be a positive int or "auto", got {self.trunc!r}')
        elif self.trunc < 1:
            raise ParameterError(f"trunc must be >= 1, got {self.trunc}")
        if not (np.isfinite(self.delta) and 0.0 < self.delta < 1.0):
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if self.atom_strategy not in ATOM_STRATEGIES:
            raise ParameterError(
                f"atom_strategy must be one of {ATOM_STRATEGIES}, got {self.atom_strategy!r}"
            )
        if isinstance(self.epsilon, str):
            if self.epsilon != "auto":
                raise ParameterError(f'epsilon must be a float or "auto", got {self.epsilon!r}')
        elif not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if isinstance(self.bandwidth2, str):
            if self.bandwidth2 != "median":
                raise ParameterError(
                    f'bandwidth2 must be a positive float or "median", got {self.bandwidth2!r}'
                )
        elif not (np.isfinite(self.bandwidth2) and self.bandwidth2 > 0.0):
            raise ParameterError(f"bandwidth2 must be > 0, got {self.bandwidth2}")
        if not (np.isfinite(self.comp_cov_scale) and self.comp_cov_scale > 0.0):
            raise ParameterError(f"comp_cov_scale must be > 0, got {self.comp_cov_scale}")
        check_seed(self.seed)

    def resolve_trunc(self) -> int:
        if self.trunc == "auto":
            return choose_truncation(self.alpha, self.delta, C=1.0)
        return int(self.trunc)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "trunc": self.trunc,
            "delta": self.delta,
            "atom_strategy": self.atom_strategy,
            "epsilon": self.epsilon,
            "bandwidth2": self.bandwidth2,
            "comp_cov_scale": self.comp_cov_scale,
            "seed": self.seed,
            "weight_floor": DEFAULT_WEIGHT_FLOOR,
        }


@dataclass(frozen=True)
class FitResult:
    model: TruncatedDPMM
    qp: QPSolution
    gram: EmbeddingGram
    mmd2: float
    assignments: np.ndarray        # (m,) component index per data row
    responsibilities: np.ndarray   # (m, T), rows sum to 1
    flagged_rows: np.ndarray       # (m,) bool; True where density underflowed
    effective_T: int
    truncation_bound: float        # exp(-T / alpha), the C = 1 decay bound
    bandwidth2: float
    epsilon: float


def _data_variances(points: np.ndarray) -> np.ndarray:
    var = np.var(points, axis=0)
    if np.any(var == 0.0):
        col = int(np.nonzero(var == 0.0)[0][0])
        raise DegenerateDataError(
            f"column {col + 1} has zero variance; atoms would be degenerate"
        )
    return var


def init_atoms(X: Dataset, cfg: FitConfig) -> list[GaussianComponent]:
    """Pick T atom locations; every atom gets cov_diag = scale * data variance.

    sample_g0 draws means i.i.d. from N(data mean, avg data variance * I),
    kmeans uses seeded Lloyd centroids (best inertia of 20 restarts), and
    subsample takes T distinct data rows uniformly without replacement.
    """
    T = cfg.resolve_trunc()
    var = _data_variances(X.points)
    cov_diag = cfg.comp_cov_scale * var
    rng = derive_rng(cfg.seed, "atoms")

    if cfg.atom_strategy == "sample_g0":
        tau2 = float(np.mean(var))
        means = np.mean(X.points, axis=0) + math.sqrt(tau2) * rng.standard_normal(
            (T, X.d)
        )
    elif cfg.atom_strategy == "kmeans":
        if T > X.m:
            raise ParameterError(f"kmeans needs T <= m, got T={T} and m={X.m}")
        km = KMeans(
            n_clusters=T,
            n_init=_KMEANS_RESTARTS,
            max_iter=_KMEANS_MAX_ITER,
            algorithm="lloyd",
            random_state=int(rng.integers(2**32)),
        )
        km.fit(X.points)
        means = km.cluster_centers_
    else:  # subsample
        if T > X.m:
            raise ParameterError(f"subsample needs T <= m, got T={T} and m={X.m}")
        rows = rng.choice(X.m, size=T, replace=False)
        means = X.points[rows]

    return [GaussianComponent(means[i], cov_diag) for i in range(T)]


def fit(X: Dataset, cfg: FitConfig, atoms=None) -> FitResult:
    """Fit weights over fixed atoms by embedding matching.

    When atoms is given it overrides the configured strategy (the list
    length then sets T).  A solver that stalls reports converged=False on
    the returned QP solution instead of raising.
    """
    if atoms is None:
        atoms = init_atoms(X, cfg)
    else:
        atoms = list(atoms)
        if not atoms:
            raise ParameterError("explicit atoms list must be non-empty")
        if cfg.trunc != "auto" and int(cfg.trunc) != len(atoms):
            raise ParameterError(
                f"cfg.trunc={cfg.trunc} conflicts with {len(atoms)} explicit atoms"
            )
    T = len(atoms)

    if cfg.bandwidth2 == "median":
        bandwidth2 = median_heuristic_bandwidth(X)
    else:
        bandwidth2 = float(cfg.bandwidth2)
    kernel = KernelConfig(bandwidth2=bandwidth2)

    gram = assemble_gram(atoms, X, kernel)
    if cfg.epsilon == "auto":
        epsilon = 1e-6 * float(np.trace(gram.S)) / T
    else:
        epsilon = float(cfg.epsilon)
    problem = QPProblem(Q=gram.S + epsilon * np.eye(T), r=gram.R, epsilon=epsilon)
    qp = solve_qp(problem, seed=cfg.seed)

    model = TruncatedDPMM(
        alpha=cfg.alpha, trunc=T, weights=qp.pi, components=tuple(atoms)
    )
    assignments, responsibilities, flagged = assign_latents(model, X)
    return FitResult(
        model=model,
        qp=qp,
        gram=gram,
        mmd2=mmd_squared(model, gram),
        assignments=assignments,
        responsibilities=responsibilities,
        flagged_rows=flagged,
        effective_T=effective_components(model, DEFAULT_WEIGHT_FLOOR),
        truncation_bound=math.exp(-T / cfg.alpha),
        bandwidth2=bandwidth2,
        epsilon=epsilon,
    )


def assign_latents(
    model: TruncatedDPMM, X: Dataset
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Responsibilities and hard labels for every data row.

    responsibility[k, i] is proportional to weight_i * density_i(x_k),
    computed in log space with a log-sum-exp shift.  Components with zero
    weight are never assigned.  Rows where every weighted density is zero
    even in log space fall back to the nearest atom in Mahalanobis
    distance and are flagged.  Ties in the argmax go to the smaller index.
    """
    if X.d != model.dim:
        raise ParameterError(f"data dimension {X.d} does not match model dimension {model.dim}")
    w = model.weights
    if not np.any(w > 0.0):
        raise ParameterError("model has no positive weights to assign from")

    log_dens = log_density_matrix(model.components, X.points)  # (m, T)
    with np.errstate(divide="ignore"):
        log_w = np.log(np.maximum(w, 0.0))  # -inf exactly where the weight is 0
    logits = log_w[None, :] + log_dens
    row_max = logits.max(axis=1)
    flagged = ~np.isfinite(row_max)

    m, T = logits.shape
    responsibilities = np.zeros((m, T))
    ok = ~flagged
    if np.any(ok):
        shifted = np.exp(logits[ok] - row_max[ok, None])
        responsibilities[ok] = shifted / shifted.sum(axis=1, keepdims=True)
    assignments = np.argmax(responsibilities, axis=1)

    if np.any(flagged):
        means = np.stack([c.mean for c in model.components])
        covs = np.stack([c.cov_diag for c in model.components])
        diff = X.points[flagged][:, None, :] - means[None, :, :]
        with np.errstate(over="ignore"):  # saturating to inf is fine here
            maha = np.sum(diff * diff / covs[None, :, :], axis=2)
        maha[:, w <= 0.0] = np.inf
        nearest = np.argmin(maha, axis=1)
        # far enough out every allowed distance overflows to inf and the
        # argmin would tie onto index 0 even if that weight is zero; such
        # rows go to the heaviest component instead
        saturated = ~np.isfinite(np.min(maha, axis=1))
        nearest[saturated] = int(np.argmax(w))
        assignments[flagged] = nearest
        responsibilities[flagged, nearest] = 1.0

    return assignments, responsibilities, flagged


def effective_components(model: TruncatedDPMM, weight_floor: float = DEFAULT_WEIGHT_FLOOR) -> int:
    """Number of weights strictly above the floor."""
    if not (np.isfinite(weight_floor) and 0.0 <= weight_floor < 1.0):
        raise ParameterError(f"weight_floor must lie in [0, 1), got {weight_floor}")
    return int(np.count_nonzero(model.weights > weight_floor))
