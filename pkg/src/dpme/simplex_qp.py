"""Quadratic programming on the probability simplex.

Solves min_pi 0.5 pi'Q pi - r'pi subject to sum(pi) = 1, pi >= 0 with an
accelerated projected-gradient iteration.  Euclidean projection onto the
simplex uses the sort-and-threshold rule; optimality is tracked through a
KKT residual that is zero exactly at solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ParameterError
from .rng import make_rng

_SYM_TOL = 1e-12
_PSD_FLOOR = 1e-10
_NEG_CLAMP = 1e-12
_FEAS_TOL = 1e-8
_POWER_ITERS = 30
_STEP_SAFETY = 1.01


@dataclass(frozen=True)
class QPProblem:
    """Simplex QP data.  Q already includes the ridge: Q = S + epsilon * I."""

    Q: np.ndarray
    r: np.ndarray
    epsilon: float

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        r = np.array(self.r, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ParameterError(f"Q must be square, got shape {Q.shape}")
        if r.shape != (Q.shape[0],):
            raise ParameterError(f"r must have length {Q.shape[0]}, got shape {r.shape}")
        if Q.shape[0] < 1:
            raise ParameterError("problem must have at least one variable")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(r))):
            raise ParameterError("Q and r must be finite")
        if np.max(np.abs(Q - Q.T), initial=0.0) > _SYM_TOL:
            raise ParameterError("Q must be symmetric within 1e-12")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        min_eig = float(np.linalg.eigvalsh(Q)[0])
        floor = -_PSD_FLOOR * max(float(np.trace(Q)), 1.0)
        if min_eig < floor:
            raise ParameterError("Q must be positive semi-definite")
        if self.epsilon > 0.0 and min_eig < self.epsilon - _PSD_FLOOR:
            raise ParameterError(
                f"smallest eigenvalue {min_eig:.3g} is below the folded ridge {self.epsilon:.3g}"
            )
        Q.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def size(self) -> int:
        return self.r.size


@dataclass(frozen=True)
class QPSolution:
    pi: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    objective_trace: tuple[float, ...] | None = None  # per accepted step, when recorded

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if np.any(pi < -_NEG_CLAMP):
            raise InvariantError(f"solution weight below -1e-12: min {pi.min()}")
        pi = np.maximum(pi, 0.0)
        total = pi.sum()
        if abs(total - 1.0) > 1e-10:
            raise InvariantError(f"solution weights sum to {total}, not 1")
        pi = pi / total
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto {x : sum(x) = 1, x >= 0}.

    Sort-and-threshold: with u the coordinates in descending order, take
    the largest rho such that u_rho + (1 - sum_{j<=rho} u_j) / rho > 0,
    set tau to that correction, and clip v + tau at zero.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ParameterError(f"v must be a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ParameterError("v must be finite")
    u = np.sort(v)[::-1]
    cum = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    admissible = u + (1.0 - cum) / k > 0.0
    rho = int(np.nonzero(admissible)[0][-1])  # rho=1 is always admissible
    tau = (1.0 - cum[rho]) / (rho + 1)
    return np.maximum(v + tau, 0.0)


def kkt_residual(problem: QPProblem, pi: np.ndarray) -> float:
    """Max of feasibility and complementary-slackness violations at pi.

    With g = Q pi - r and lam = min_i g_i, the residual is
    max(|sum(pi) - 1|, max_i(-pi_i, 0), max_i pi_i (g_i - lam)); it is zero
    exactly at KKT points of the simplex QP.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (problem.size,):
        raise ParameterError(f"pi must have shape ({problem.size},), got {pi.shape}")
    feas_sum = abs(float(pi.sum()) - 1.0)
    feas_neg = float(np.maximum(-pi, 0.0).max(initial=0.0))
    if feas_sum > _FEAS_TOL or feas_neg > _FEAS_TOL:
        raise ParameterError(
            f"pi is infeasible beyond tolerance: sum deviation {feas_sum:.3g}, "
            f"most negative entry {feas_neg:.3g}"
        )
    g = problem.Q @ pi - problem.r
    lam = float(g.min())
    comp = float(np.max(pi * (g - lam), initial=0.0))
    return max(feas_sum, feas_neg, comp)


def _estimate_lipschitz(Q: np.ndarray, seed: int) -> float:
    """Largest eigenvalue of Q by power iteration, inflated by a safety factor."""
    rng = make_rng(seed)
    v = rng.standard_normal(Q.shape[0])
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        v = np.ones(Q.shape[0])
        norm = float(np.linalg.norm(v))
    v /= norm
    lam = 0.0
    for _ in range(_POWER_ITERS):
        w = Q @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = norm
    return lam * _STEP_SAFETY


def solve_qp(
    problem: QPProblem,
    tol: float = 1e-8,
    max_iter: int = 50_000,
    seed: int = 0,
    record_trace: bool = False,
) -> QPSolution:
    """Accelerated projected gradient from the uniform warm start.

    Step size is 1 / L with L a power-iteration estimate of the largest
    eigenvalue of Q (x 1.01 safety).  A monotone restart guards the
    acceleration: whenever the accelerated step would raise the objective,
    momentum is dropped and a plain descent step from the incumbent is
    taken instead, so accepted objectives never increase.  Terminates when
    the KKT residual falls to tol; hitting max_iter returns the incumbent
    with converged=False rather than raising.
    """
    if not (np.isfinite(tol) and tol > 0.0):
        raise ParameterError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1, got {max_iter}")
    Q, r = problem.Q, problem.r
    n = problem.size

    def objective(x: np.ndarray) -> float:
        return 0.5 * float(x @ Q @ x) - float(r @ x)

    lipschitz = _estimate_lipschitz(Q, seed)
    eta = 1.0 / lipschitz if lipschitz > 0.0 else 1.0

    x = np.full(n, 1.0 / n)
    fx = objective(x)
    y = x
    t_mom = 1.0
    trace = [fx] if record_trace else None

    residual = kkt_residual(problem, x)
    iterations = 0
    converged = residual <= tol
    while not converged and iterations < max_iter:
        iterations += 1
        x_new = project_simplex(y - eta * (Q @ y - r))
        f_new = objective(x_new)
        if f_new > fx:
            # Momentum overshot; restart from the incumbent with a plain step.
            x_new = project_simplex(x - eta * (Q @ x - r))
            f_new = objective(x_new)
            t_mom = 1.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
        x, fx, t_mom = x_new, f_new, t_next
        if trace is not None:
            trace.append(fx)
        residual = kkt_residual(problem, x)
        converged = residual <= tol

    return QPSolution(
        pi=x,
        objective=objective(x),
        kkt_residual=residual,
        iterations=iterations,
        converged=converged,
        objective_trace=tuple(trace) if trace is not None else None,
    )


def brute_force_solve(problem: QPProblem, grid_step: float) -> QPSolution:
    """Exhaustive search over the simplex lattice with spacing ~grid_step.

    Only for cross-checking the iterative solver: T must be at most 4 and
    the step at most 1e-2.  The returned objective is within L * grid_step
    of the true optimum for L the objective's Lipschitz constant on the
    simplex.  iterations reports the number of lattice points scanned.
    """
    n = problem.size
    if n > 4:
        raise ParameterError(f"brute force supports at most 4 variables, got {n}")
    if not (0.0 < grid_step <= 1e-2 + 1e-15):
        raise ParameterError(f"grid_step must lie in (0, 1e-2], got {grid_step}")
    levels = int(round(1.0 / grid_step))  # actual spacing is 1 / levels

    if n == 1:
        grid = np.ones((1, 1))
    else:
        axes = np.meshgrid(*([np.arange(levels + 1)] * (n - 1)), indexing="ij")
        counts = np.stack([a.reshape(-1) for a in axes], axis=1)
        keep = counts.sum(axis=1) <= levels
        counts = counts[keep]
        last = levels - counts.sum(axis=1)
        grid = np.column_stack([counts, last]) / levels

    vals = 0.5 * np.einsum("ki,ij,kj->k", grid, problem.Q, grid) - grid @ problem.r
    best = int(np.argmin(vals))
    pi = grid[best]
    return QPSolution(
        pi=pi,
        objective=float(vals[best]),
        kkt_residual=kkt_residual(problem, pi),
        iterations=grid.shape[0],
        converged=True,
    )
