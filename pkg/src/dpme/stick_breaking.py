"""Truncated stick-breaking draws from a Dirichlet process prior.

Sticks are beta = Beta(1, alpha) variates; the i-th atom weight is
beta_i * prod_{k<i} (1 - beta_k) and the mass left after T sticks is
prod_{k<=T} (1 - beta_k).  Atom locations are Gaussian draws from the
base measure.  Exact identities used throughout:

    E[1 - sum_{i<=T} weight_i] = (alpha / (1 + alpha)) ** T
    G(A_1), ..., G(A_r) ~ Dirichlet(alpha * G0(A_1), ..., alpha * G0(A_r))

for any finite measurable partition A_1, ..., A_r, which gives per-cell
mean G0(A_i) and variance G0(A_i) (1 - G0(A_i)) / (alpha + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError, PartitionError
from .gaussian import GaussianComponent, _as_vector
from .rng import make_rng

_SUM_TOL = 1e-12


def _check_alpha(alpha: float) -> float:
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ParameterError(f"alpha must be a positive real, got {alpha}")
    return float(alpha)


def _check_trunc(T: int, minimum: int = 1) -> int:
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)):
        raise ParameterError(f"truncation level must be an integer, got {T!r}")
    if T < minimum:
        raise ParameterError(f"truncation level must be >= {minimum}, got {T}")
    return int(T)


@dataclass(frozen=True)
class BaseMeasure:
    """Gaussian base measure over atom means, plus the shared component covariance.

    Atom means are drawn i.i.d. from N(mean0, tau2 * I); every sampled
    component keeps the fixed diagonal covariance comp_cov.
    """

    mean0: np.ndarray
    tau2: float
    comp_cov: np.ndarray

    def __post_init__(self):
        mean0 = _as_vector(self.mean0, "mean0")
        comp_cov = _as_vector(self.comp_cov, "comp_cov")
        if mean0.shape != comp_cov.shape:
            raise ParameterError(
                f"mean0 and comp_cov must have equal length, "
                f"got {mean0.shape} vs {comp_cov.shape}"
            )
        if not (np.isfinite(self.tau2) and self.tau2 > 0.0):
            raise ParameterError(f"tau2 must be > 0, got {self.tau2}")
        if not np.all(comp_cov > 0.0):
            raise ParameterError(f"comp_cov entries must be > 0, got {comp_cov}")
        mean0.setflags(write=False)
        comp_cov.setflags(write=False)
        object.__setattr__(self, "mean0", mean0)
        object.__setattr__(self, "tau2", float(self.tau2))
        object.__setattr__(self, "comp_cov", comp_cov)

    @property
    def dim(self) -> int:
        return self.mean0.size


@dataclass(frozen=True)
class StickBreakingDraw:
    """One truncated draw: sticks, the weights they induce, and the leftover mass."""

    alpha: float
    betas: np.ndarray
    weights: np.ndarray
    tail_mass: float

    def __post_init__(self):
        alpha = _check_alpha(self.alpha)
        betas = _as_vector(self.betas, "betas")
        weights = _as_vector(self.weights, "weights")
        if betas.shape != weights.shape:
            raise ParameterError("betas and weights must have equal length")
        if np.any(betas < 0.0) or np.any(betas > 1.0):
            raise ParameterError("betas must lie in [0, 1]")
        expect_w, expect_tail = weights_from_betas(betas)
        if np.max(np.abs(weights - expect_w), initial=0.0) > _SUM_TOL:
            raise ParameterError("weights do not match the stick-breaking product formula")
        if abs(self.tail_mass - expect_tail) > _SUM_TOL:
            raise ParameterError("tail_mass does not equal the product of (1 - beta)")
        if abs(weights.sum() + self.tail_mass - 1.0) > _SUM_TOL:
            raise ParameterError("weights plus tail_mass must sum to 1")
        betas.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @property
    def trunc(self) -> int:
        return self.betas.size


def _betas_from_uniform(alpha: float, u: np.ndarray) -> np.ndarray:
    # Inverse CDF of Beta(1, alpha): F^-1(u) = 1 - (1 - u)^(1/alpha); using
    # 1 - u^(1/alpha) is the same in distribution.  Guard u == 0 so the
    # result stays inside (0, 1).
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return 1.0 - u ** (1.0 / alpha)


def sample_betas(alpha: float, T: int, seed: int) -> np.ndarray:
    """Draw T independent Beta(1, alpha) sticks, each in (0, 1)."""
    alpha = _check_alpha(alpha)
    T = _check_trunc(T)
    rng = make_rng(seed)
    return _betas_from_uniform(alpha, rng.random(T))


def weights_from_betas(betas: np.ndarray) -> tuple[np.ndarray, float]:
    """Turn sticks into atom weights plus leftover tail mass.

    Single left-to-right pass: the running remainder after k sticks is
    prod_{i<=k} (1 - beta_i); weight_k is beta_k times the remainder
    before stick k.
    """
    betas = np.asarray(betas, dtype=float)
    if betas.ndim != 1:
        raise ParameterError(f"betas must be a 1-D vector, got shape {betas.shape}")
    if betas.size and (np.any(betas < 0.0) or np.any(betas > 1.0) or not np.all(np.isfinite(betas))):
        raise ParameterError("betas must lie in [0, 1]")
    if betas.size == 0:
        return np.empty(0), 1.0
    remainder = np.cumprod(1.0 - betas)
    before = np.concatenate(([1.0], remainder[:-1]))
    weights = betas * before
    return weights, float(remainder[-1])


def sample_draw(
    alpha: float, T: int, base: BaseMeasure, seed: int
) -> tuple[StickBreakingDraw, list[GaussianComponent]]:
    """One truncated prior draw: weights plus T Gaussian components.

    Sticks are drawn first, then atom means, from a single seeded stream,
    so the draw is a pure function of (alpha, T, base, seed).
    """
    alpha = _check_alpha(alpha)
    T = _check_trunc(T)
    rng = make_rng(seed)
    betas = _betas_from_uniform(alpha, rng.random(T))
    weights, tail = weights_from_betas(betas)
    means = base.mean0 + math.sqrt(base.tau2) * rng.standard_normal((T, base.dim))
    components = [GaussianComponent(means[i], base.comp_cov) for i in range(T)]
    draw = StickBreakingDraw(alpha=alpha, betas=betas, weights=weights, tail_mass=tail)
    return draw, components


def sample_tail_masses(alpha: float, T: int, n_draws: int, seed: int) -> np.ndarray:
    """Tail masses of n_draws independent truncated draws, shape (n_draws,).

    Batched equivalent of repeating sample_betas + weights_from_betas; used
    by the Monte Carlo checks of the expected-tail identity.
    """
    alpha = _check_alpha(alpha)
    T = _check_trunc(T)
    if n_draws < 1:
        raise ParameterError(f"n_draws must be >= 1, got {n_draws}")
    rng = make_rng(seed)
    betas = _betas_from_uniform(alpha, rng.random((n_draws, T)))
    return np.prod(1.0 - betas, axis=1)


def expected_tail_mass(alpha: float, T: int) -> float:
    """Exact expected mass beyond T atoms: (alpha / (1 + alpha)) ** T."""
    alpha = _check_alpha(alpha)
    T = _check_trunc(T, minimum=0)
    return float((alpha / (1.0 + alpha)) ** T)


def choose_truncation(alpha: float, delta: float, C: float = 1.0) -> int:
    """Smallest T with C * exp(-T / alpha) <= delta; never less than 1.

    Equivalently T = ceil(alpha * ln(C / delta)).  When delta >= C the
    bound already holds at one atom, so 1 is returned.
    """
    alpha = _check_alpha(alpha)
    if not (np.isfinite(delta) and delta > 0.0):
        raise ParameterError(f"delta must be a positive real, got {delta}")
    if not (np.isfinite(C) and C > 0.0):
        raise ParameterError(f"C must be a positive real, got {C}")
    if delta >= C:
        return 1
    # Tiny slack before ceil avoids bumping T when alpha*ln(C/delta) rounds
    # a hair above an exact integer; the loop restores the guarantee.
    T = max(1, math.ceil(alpha * math.log(C / delta) - 1e-9))
    while C * math.exp(-T / alpha) > delta:
        T += 1
    return T


@dataclass(frozen=True)
class CellMomentCheck:
    """Empirical vs. exact first two moments of G(cell) for one partition cell."""

    lower: float
    upper: float
    g0_mass: float
    mean: float
    mean_dev: float      # empirical mean - g0_mass
    mean_se: float
    z_mean: float
    var: float
    var_expected: float  # g0_mass * (1 - g0_mass) / (alpha + 1)
    var_dev: float
    var_se: float
    z_var: float


@dataclass(frozen=True)
class DirichletMarginalReport:
    alpha: float
    t_proxy: int
    n_draws: int
    cells: tuple[CellMomentCheck, ...]

    def max_abs_z(self) -> float:
        return max(max(abs(c.z_mean), abs(c.z_var)) for c in self.cells)

    def within(self, z_limit: float = 3.0) -> bool:
        return self.max_abs_z() <= z_limit


def _check_partition(partition) -> list[tuple[float, float]]:
    cells = [(float(lo), float(hi)) for lo, hi in partition]
    if not cells:
        raise PartitionError("partition must contain at least one cell")
    cells_sorted = sorted(cells, key=lambda c: c[0])
    if cells_sorted[0][0] != -math.inf:
        raise PartitionError("partition must start at -inf")
    if cells_sorted[-1][1] != math.inf:
        raise PartitionError("partition must end at +inf")
    for lo, hi in cells_sorted:
        if not lo < hi:
            raise PartitionError(f"cell ({lo}, {hi}) is empty or reversed")
    for (_, hi), (lo2, _) in zip(cells_sorted, cells_sorted[1:]):
        if hi != lo2:
            raise PartitionError(
                f"cells must be adjacent: got boundary {hi} followed by {lo2}"
            )
    return cells_sorted


def _safe_z(dev: float, se: float) -> float:
    if se > 0.0:
        return dev / se
    return 0.0 if abs(dev) <= 1e-12 else math.inf


def dirichlet_marginal_check(
    alpha: float,
    base: BaseMeasure,
    partition,
    n_draws: int,
    t_proxy: int,
    seed: int,
) -> DirichletMarginalReport:
    """Compare sampled G(cell) moments against the Dirichlet marginal law.

    Cells are half-open intervals [lo, hi) that tile the real line (the base
    measure must be one-dimensional).  Each of n_draws truncated draws is
    turned into cell masses G(A_i) = sum of weights whose atom falls in A_i,
    with the leftover tail mass spread across cells proportionally to G0.
    t_proxy must be deep enough that the expected tail is below 1e-8.
    """
    alpha = _check_alpha(alpha)
    if base.dim != 1:
        raise ParameterError("dirichlet_marginal_check needs a 1-D base measure")
    if n_draws < 2:
        raise ParameterError(f"n_draws must be >= 2, got {n_draws}")
    t_proxy = _check_trunc(t_proxy)
    tail_expect = expected_tail_mass(alpha, t_proxy)
    if tail_expect >= 1e-8:
        raise ParameterError(
            f"t_proxy={t_proxy} leaves expected tail {tail_expect:.3g} >= 1e-8; increase it"
        )
    cells = _check_partition(partition)

    mean0 = float(base.mean0[0])
    tau = math.sqrt(base.tau2)
    edges = np.array([lo for lo, _ in cells] + [math.inf])
    cdf = ndtr((edges - mean0) / tau)  # ndtr maps -inf/+inf to 0/1
    g0_mass = np.diff(cdf)

    rng = make_rng(seed)
    betas = _betas_from_uniform(alpha, rng.random((n_draws, t_proxy)))
    remainder = np.cumprod(1.0 - betas, axis=1)
    weights = betas * np.concatenate(
        (np.ones((n_draws, 1)), remainder[:, :-1]), axis=1
    )
    tails = remainder[:, -1]
    atoms = mean0 + tau * rng.standard_normal((n_draws, t_proxy))

    # Which cell each atom lands in: cells are [lo, hi), so a strict
    # right-side search over the interior boundaries does it.
    bounds = np.array([hi for _, hi in cells[:-1]])
    idx = np.searchsorted(bounds, atoms, side="right")

    r = len(cells)
    masses = np.empty((n_draws, r))
    for c in range(r):
        masses[:, c] = np.sum(weights * (idx == c), axis=1)
    masses += tails[:, None] * g0_mass[None, :]

    checks = []
    n = n_draws
    for c, (lo, hi) in enumerate(cells):
        x = masses[:, c]
        mean = float(np.mean(x))
        centered = x - mean
        m2 = float(np.mean(centered**2))
        m4 = float(np.mean(centered**4))
        var = float(np.var(x, ddof=1))
        mean_se = math.sqrt(var / n)
        # Asymptotic variance of the sample variance from the 2nd/4th moments.
        var_se = math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)
        mean_dev = mean - float(g0_mass[c])
        var_expected = float(g0_mass[c] * (1.0 - g0_mass[c]) / (alpha + 1.0))
        var_dev = var - var_expected
        checks.append(
            CellMomentCheck(
                lower=lo,
                upper=hi,
                g0_mass=float(g0_mass[c]),
                mean=mean,
                mean_dev=mean_dev,
                mean_se=mean_se,
                z_mean=_safe_z(mean_dev, mean_se),
                var=var,
                var_expected=var_expected,
                var_dev=var_dev,
                var_se=var_se,
                z_var=_safe_z(var_dev, var_se),
            )
        )
    return DirichletMarginalReport(
        alpha=alpha, t_proxy=t_proxy, n_draws=n_draws, cells=tuple(checks)
    )
