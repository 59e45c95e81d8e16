"""Self-contained statistical validation suites.

Each suite cross-checks one pillar of the package against an independent
oracle: sampled tail masses against the exact expectation, closed-form
RKHS inner products against Monte Carlo, the embedding-gap decay against
the exp(-T / alpha) reference curve, Dirichlet marginal moments against
their analytic values, and the iterative QP solver against brute-force
lattice search.  The CLI exposes them via the validate subcommand; the
acceptance tests drive the same functions at pinned parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import GaussianComponent
from .rkhs_embedding import (
    Dataset,
    KernelConfig,
    component_data_inner,
    component_inner,
    mc_component_data_inner,
    mc_component_inner,
    truncation_decay_check,
)
from .rng import derive_rng
from .simplex_qp import QPProblem, brute_force_solve, solve_qp
from .stick_breaking import BaseMeasure, dirichlet_marginal_check

# The decay suite tests these concentrations by default.  The exact mean
# squared tail decays per extra atom by alpha / (alpha + 2), so the
# exp(-1/alpha) reference curve is a true upper bound only while
# alpha / (alpha + 2) <= exp(-1/alpha), i.e. alpha above ~0.796; smaller
# concentrations genuinely violate the curve and are not suite defaults.
BOUND_SUITE_ALPHAS = (1.0, 2.0)

SLOPE_WINDOW = (-1.4, -0.6)  # divided by alpha


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "checks": self.checks}


def _finish(result: SuiteResult) -> SuiteResult:
    result.passed = all(c["passed"] for c in result.checks)
    return result


def run_bound_suite(
    seed: int,
    alphas=BOUND_SUITE_ALPHAS,
    t_values=tuple(range(1, 16)),
    t_ref: int = 60,
    n_draws: int = 80_000,
) -> SuiteResult:
    """Embedding-gap decay: every mean gap under exp(-T/alpha), slope in window.

    The alpha = 2 window edge sits 0.007 from the true slope ln(1/2), so
    the default draw count is large enough to put the edge about three
    standard errors out.
    """
    result = SuiteResult(name="bound", passed=False)
    base = BaseMeasure(mean0=[0.0], tau2=1.0, comp_cov=[1.0])
    cfg = KernelConfig(bandwidth2=1.0)
    for alpha in alphas:
        decay = truncation_decay_check(
            alpha, base, cfg, t_values, t_ref, n_draws, derive_rng(seed, "bound", str(alpha)).integers(2**32)
        )
        under = decay.mean_gaps <= decay.bounds
        lo, hi = SLOPE_WINDOW[0] / alpha, SLOPE_WINDOW[1] / alpha
        slope_ok = lo <= decay.slope <= hi
        result.checks.append(
            {
                "name": f"gaps_under_bound_alpha_{alpha:g}",
                "passed": bool(np.all(under)),
                "n_violations": int(np.count_nonzero(~under)),
                "worst_ratio": float(np.max(decay.mean_gaps / decay.bounds)),
            }
        )
        result.checks.append(
            {
                "name": f"decay_slope_alpha_{alpha:g}",
                "passed": bool(slope_ok),
                "slope": decay.slope,
                "window": [lo, hi],
            }
        )
    return _finish(result)


# Mean scatter shrinks with dimension and pair separations are capped so
# the closed-form value stays well above what a million-draw Monte Carlo
# estimate can resolve; far-apart pairs make the oracle itself invalid
# (near-zero mean, badly underestimated standard error).
_MAX_PAIR_SEP2 = 6.0


def _random_component(rng, d: int) -> GaussianComponent:
    return GaussianComponent(
        mean=rng.normal(0.0, 1.2 / math.sqrt(d), size=d),
        cov_diag=rng.uniform(0.3, 2.0, size=d),
    )


def _cap_separation(f: GaussianComponent, g: GaussianComponent):
    delta = g.mean - f.mean
    sep2 = float(delta @ delta)
    if sep2 <= _MAX_PAIR_SEP2:
        return f, g
    mid = 0.5 * (f.mean + g.mean)
    half = 0.5 * delta * math.sqrt(_MAX_PAIR_SEP2 / sep2)
    return (
        GaussianComponent(mid - half, f.cov_diag),
        GaussianComponent(mid + half, g.cov_diag),
    )


def run_gram_suite(
    seed: int, n_instances_per_dim: int = 7, n_samples: int = 1_000_000
) -> SuiteResult:
    """Closed-form inner products vs. Monte Carlo, plus a frozen identity."""
    result = SuiteResult(name="gram", passed=False)
    exact = component_inner(
        GaussianComponent([0.0], [1.0]),
        GaussianComponent([0.0], [1.0]),
        KernelConfig(bandwidth2=1.0),
    )
    result.checks.append(
        {
            "name": "unit_overlap_identity",
            "passed": bool(abs(exact - math.sqrt(1.0 / 3.0)) <= 1e-12),
            "value": exact,
            "expected": math.sqrt(1.0 / 3.0),
        }
    )
    rng = derive_rng(seed, "gram")
    for d in (1, 2, 5):
        for i in range(n_instances_per_dim):
            f, g = _cap_separation(_random_component(rng, d), _random_component(rng, d))
            cfg = KernelConfig(bandwidth2=float(rng.uniform(0.5, 2.5)))
            X = Dataset(rng.normal(0.0, 1.5, size=(24, d)))
            mc_seed = int(rng.integers(2**32))

            closed = component_inner(f, g, cfg)
            est, se = mc_component_inner(f, g, cfg, n_samples, mc_seed)
            result.checks.append(
                {
                    "name": f"component_inner_d{d}_{i}",
                    "passed": bool(abs(closed - est) <= 3.0 * se),
                    "closed_form": closed,
                    "monte_carlo": est,
                    "std_error": se,
                }
            )

            closed_data = component_data_inner(f, X, cfg)
            est_data, se_data = mc_component_data_inner(f, X, cfg, n_samples, mc_seed + 1)
            result.checks.append(
                {
                    "name": f"component_data_inner_d{d}_{i}",
                    "passed": bool(abs(closed_data - est_data) <= 3.0 * se_data),
                    "closed_form": closed_data,
                    "monte_carlo": est_data,
                    "std_error": se_data,
                }
            )
    return _finish(result)


def run_dirichlet_suite(
    seed: int, alphas=(1.0, 10.0), n_draws: int = 10_000
) -> SuiteResult:
    """First two moments of G(cell) against the Dirichlet marginal law."""
    result = SuiteResult(name="dirichlet", passed=False)
    base = BaseMeasure(mean0=[0.0], tau2=1.0, comp_cov=[1.0])
    partition = [(-math.inf, -0.5), (-0.5, 0.5), (0.5, math.inf)]
    for alpha in alphas:
        # Deep enough that the expected leftover tail is below 1e-8.
        t_proxy = 30 if alpha <= 1.0 else 200
        report = dirichlet_marginal_check(
            alpha,
            base,
            partition,
            n_draws,
            t_proxy,
            int(derive_rng(seed, "dirichlet", str(alpha)).integers(2**32)),
        )
        result.checks.append(
            {
                "name": f"cell_moments_alpha_{alpha:g}",
                "passed": bool(report.within(3.0)),
                "max_abs_z": report.max_abs_z(),
                "t_proxy": t_proxy,
            }
        )
    return _finish(result)


def run_qp_suite(seed: int, n_instances: int = 50, grid_step: float = 1e-3) -> SuiteResult:
    """Iterative solver vs. brute-force lattice search on random instances."""
    result = SuiteResult(name="qp", passed=False)
    rng = derive_rng(seed, "qp")
    worst_gap = -math.inf
    worst_res = 0.0
    all_ok = True
    for _ in range(n_instances):
        A = rng.standard_normal((3, 3))
        problem = QPProblem(Q=A.T @ A, r=rng.normal(0.0, 1.0, size=3), epsilon=0.0)
        sol = solve_qp(problem, seed=int(rng.integers(2**32)))
        brute = brute_force_solve(problem, grid_step)
        gap = sol.objective - brute.objective
        worst_gap = max(worst_gap, gap)
        worst_res = max(worst_res, sol.kkt_residual)
        all_ok = all_ok and sol.converged and gap <= 1e-4 and sol.kkt_residual <= 1e-8
    result.checks.append(
        {
            "name": "solver_vs_brute_force",
            "passed": bool(all_ok),
            "n_instances": n_instances,
            "worst_objective_gap": worst_gap,
            "worst_kkt_residual": worst_res,
        }
    )

    vertex = QPProblem(Q=np.eye(2), r=np.array([1.0, 0.0]), epsilon=0.0)
    # Tight tolerance drives the iterate onto the vertex itself.
    sol = solve_qp(vertex, tol=1e-18, seed=0)
    err = float(np.max(np.abs(sol.pi - np.array([1.0, 0.0]))))
    result.checks.append(
        {
            "name": "analytic_vertex_instance",
            "passed": bool(err <= 1e-9),
            "max_abs_error": err,
        }
    )
    return _finish(result)


SUITES = {
    "bound": run_bound_suite,
    "gram": run_gram_suite,
    "dirichlet": run_dirichlet_suite,
    "qp": run_qp_suite,
}


def run_suites(names, seed: int) -> tuple[list[SuiteResult], bool]:
    results = [SUITES[name](seed) for name in names]
    return results, all(r.passed for r in results)
