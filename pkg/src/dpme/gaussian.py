"""Diagonal-covariance Gaussian components used as mixture atoms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if arr.size == 0:
        raise ParameterError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class GaussianComponent:
    """A Gaussian with diagonal covariance: N(mean, diag(cov_diag))."""

    mean: np.ndarray
    cov_diag: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean, "mean")
        cov = _as_vector(self.cov_diag, "cov_diag")
        if mean.shape != cov.shape:
            raise ParameterError(
                f"mean and cov_diag must have equal length, got {mean.shape} vs {cov.shape}"
            )
        if not np.all(cov > 0.0):
            raise ParameterError(f"cov_diag entries must be > 0, got {cov}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_diag", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points, shape (n, dim)."""
        if n < 0:
            raise ParameterError(f"n must be >= 0, got {n}")
        z = rng.standard_normal((n, self.dim))
        return self.mean + np.sqrt(self.cov_diag) * z

    def log_density(self, points: np.ndarray) -> np.ndarray:
        """Log density at each row of points, shape (n,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ParameterError(
                f"points have dimension {pts.shape[1]}, component has {self.dim}"
            )
        quad = np.sum((pts - self.mean) ** 2 / self.cov_diag, axis=1)
        norm = np.sum(np.log(self.cov_diag)) + self.dim * _LOG_2PI
        return -0.5 * (quad + norm)


def stack_params(components) -> tuple[np.ndarray, np.ndarray]:
    """Stack component parameters into (means (T, d), cov_diags (T, d)).

    All components must share one dimension.
    """
    comps = list(components)
    if not comps:
        raise ParameterError("need at least one component")
    dim = comps[0].dim
    for i, c in enumerate(comps):
        if c.dim != dim:
            raise ParameterError(
                f"component {i} has dimension {c.dim}, expected {dim}"
            )
    means = np.stack([c.mean for c in comps])
    covs = np.stack([c.cov_diag for c in comps])
    return means, covs


def log_density_matrix(components, points: np.ndarray) -> np.ndarray:
    """Per-component log densities for each point, shape (n, T)."""
    means, covs = stack_params(components)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != means.shape[1]:
        raise ParameterError(
            f"points have dimension {pts.shape[1]}, components have {means.shape[1]}"
        )
    # (n, T, d) broadcast; fine for the sizes this package works at.
    diff = pts[:, None, :] - means[None, :, :]
    with np.errstate(over="ignore"):  # absurd outliers saturate to -inf
        quad = np.sum(diff * diff / covs[None, :, :], axis=2)
    norm = np.sum(np.log(covs), axis=1) + means.shape[1] * _LOG_2PI
    return -0.5 * (quad + norm[None, :])
