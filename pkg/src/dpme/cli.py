"""Command-line interface: fit, sample, check-truncation, validate.

Every run is a pure function of its flags; the default seed is 0 and no
environment variables are consulted, so a repeated invocation reproduces
its output files byte for byte.  Output JSON is schema-stable: documented
keys are always present and no others are emitted.  Exit codes: 0 success
(including a fit that did not converge), 1 internal error or failed
validation, 2 argument error, 3 data error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, DpmeError, ParameterError
from .gaussian import stack_params
from .inference import FitConfig, fit
from .rkhs_embedding import Dataset
from .rng import derive_rng
from .serialize import dumps, format_float, sha256_hex
from .stick_breaking import (
    BaseMeasure,
    choose_truncation,
    expected_tail_mass,
    sample_draw,
)
from .validation import SUITES, run_suites

_EMPTY_DIGEST = sha256_hex(b"")  # commands that read no data file use this


def load_csv(path, has_header: bool = False) -> Dataset:
    """Parse a UTF-8 comma-separated numeric file into a Dataset.

    Errors name the offending row (1-based, counting the header) and
    column so the message points at the file location to fix.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8: {exc}") from exc

    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path} is empty")
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if has_header and lineno == 1:
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(
                f"{path}: row {lineno} has {len(cells)} fields, expected {width}"
            )
        parsed = []
        for col, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: row {lineno}, column {col}: cannot parse {cell.strip()!r} as a number"
                ) from None
        rows.append(parsed)
    if not rows:
        raise DataError(f"{path} has no data rows")
    try:
        return Dataset(np.array(rows))
    except ParameterError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _manifest(command: str, config: dict, seed: int, input_digest: str) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "artifact_version": __version__,
        "input_digest": input_digest,
    }


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_fit(args) -> int:
    data = load_csv(args.data, has_header=args.header)
    if args.trunc is not None:
        trunc, delta = args.trunc, FitConfig.__dataclass_fields__["delta"].default
    elif args.delta is not None:
        trunc, delta = "auto", args.delta
    else:
        trunc, delta = "auto", FitConfig.__dataclass_fields__["delta"].default
    strategy = {"sample": "sample_g0", "kmeans": "kmeans", "subsample": "subsample"}[args.atoms]
    cfg = FitConfig(
        alpha=args.alpha,
        trunc=trunc,
        delta=delta,
        atom_strategy=strategy,
        epsilon="auto" if args.epsilon is None else args.epsilon,
        bandwidth2="median" if args.bandwidth2 is None else args.bandwidth2,
        seed=args.seed,
    )
    result = fit(data, cfg)

    config = cfg.as_dict()
    config.update(
        {
            "header": bool(args.header),
            "assign": bool(args.assign),
            "resolved_trunc": result.model.trunc,
            "resolved_bandwidth2": result.bandwidth2,
            "resolved_epsilon": result.epsilon,
        }
    )
    means, covs = stack_params(result.model.components)
    payload = {
        "manifest": _manifest("fit", config, args.seed, sha256_hex(Path(args.data).read_bytes())),
        "weights": result.model.weights,
        "atoms": {"means": means, "cov_diag": covs},
        "mmd2": result.mmd2,
        "objective": result.qp.objective,
        "kkt_residual": result.qp.kkt_residual,
        "converged": result.qp.converged,
        "effective_T": result.effective_T,
        "truncation_bound": result.truncation_bound,
    }
    if args.assign:
        payload["assignments"] = [int(a) for a in result.assignments]
        payload["flagged_rows"] = [int(i) for i in np.nonzero(result.flagged_rows)[0]]
    _write(args.out, dumps(payload))
    return 0


def _base_vector(value, dim: int, name: str) -> np.ndarray:
    """Parse a comma-separated flag into a length-dim vector.

    A single number broadcasts across dimensions.
    """
    if value is None:
        return None
    try:
        parts = [float(p) for p in str(value).split(",")]
    except ValueError:
        raise ParameterError(f"{name} must be comma-separated numbers, got {value!r}") from None
    if len(parts) == 1:
        return np.full(dim, parts[0])
    if len(parts) != dim:
        raise ParameterError(f"{name} has {len(parts)} entries, expected {dim}")
    return np.array(parts)


def cmd_sample(args) -> int:
    if args.n < 0:
        raise ParameterError(f"--n must be >= 0, got {args.n}")
    if args.dim < 1:
        raise ParameterError(f"--dim must be >= 1, got {args.dim}")
    mean0 = _base_vector(args.mean0, args.dim, "--mean0")
    comp_cov = _base_vector(args.comp_cov, args.dim, "--comp-cov")
    base = BaseMeasure(
        mean0=np.zeros(args.dim) if mean0 is None else mean0,
        tau2=args.tau2,
        comp_cov=np.ones(args.dim) if comp_cov is None else comp_cov,
    )
    draw, components = sample_draw(args.alpha, args.trunc, base, args.seed)
    means, covs = stack_params(components)

    # Points come from the truncated mixture with weights renormalized to
    # sum to one; the sidecar keeps the raw weights and tail mass.
    rng = derive_rng(args.seed, "points")
    if args.n > 0:
        probs = draw.weights / draw.weights.sum()
        idx = rng.choice(args.trunc, size=args.n, p=probs)
        points = means[idx] + np.sqrt(covs[idx]) * rng.standard_normal(
            (args.n, args.dim)
        )
        body = "".join(
            ",".join(format_float(v) for v in row) + "\n" for row in points
        )
    else:
        body = ""
    _write(args.out, body)

    config = {
        "alpha": args.alpha,
        "trunc": args.trunc,
        "n": args.n,
        "dim": args.dim,
        "mean0": base.mean0,
        "tau2": base.tau2,
        "comp_cov": base.comp_cov,
    }
    sidecar = {
        "manifest": _manifest("sample", config, args.seed, _EMPTY_DIGEST),
        "weights": draw.weights,
        "tail_mass": draw.tail_mass,
        "atoms": {"means": means, "cov_diag": covs},
    }
    _write(str(args.out) + ".json", dumps(sidecar))
    return 0


def cmd_check_truncation(args) -> int:
    trunc = choose_truncation(args.alpha, args.delta, C=args.c)
    bound = args.c * math.exp(-trunc / args.alpha)
    exact = expected_tail_mass(args.alpha, trunc)
    if args.json:
        sys.stdout.write(
            dumps({"trunc": trunc, "bound": bound, "exact_tail": exact})
        )
    else:
        sys.stdout.write(
            f"trunc       {trunc}\n"
            f"bound       {format_float(bound)}\n"
            f"exact_tail  {format_float(exact)}\n"
        )
    return 0


def cmd_validate(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results, passed = run_suites(names, args.seed)
    report = {
        "manifest": _manifest(
            "validate", {"suite": args.suite}, args.seed, _EMPTY_DIGEST
        ),
        "suites": [r.to_dict() for r in results],
        "passed": passed,
    }
    text = dumps(report)
    if args.out is not None:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    for r in results:
        sys.stderr.write(f"suite {r.name}: {'pass' if r.passed else 'FAIL'}\n")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpme",
        description="Fit truncated Dirichlet process mixtures by kernel embedding matching.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="fit mixture weights to a CSV dataset")
    p_fit.add_argument("--data", required=True, help="input CSV path")
    p_fit.add_argument("--alpha", type=float, required=True, help="concentration > 0")
    trunc_group = p_fit.add_mutually_exclusive_group()
    trunc_group.add_argument("--trunc", type=int, help="fixed truncation level")
    trunc_group.add_argument(
        "--delta", type=float, help="tail tolerance for automatic truncation"
    )
    p_fit.add_argument(
        "--atoms",
        choices=["sample", "kmeans", "subsample"],
        default="kmeans",
        help="atom initialization strategy",
    )
    bw_group = p_fit.add_mutually_exclusive_group()
    bw_group.add_argument("--bandwidth2", type=float, help="fixed squared bandwidth")
    bw_group.add_argument(
        "--median",
        action="store_true",
        help="median-heuristic bandwidth (the default)",
    )
    p_fit.add_argument("--epsilon", type=float, help="QP ridge (default: auto)")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True, help="output JSON path")
    p_fit.add_argument(
        "--assign", action="store_true", help="include per-row assignments in the output"
    )
    p_fit.add_argument(
        "--header", action="store_true", help="skip a single header row in the CSV"
    )
    p_fit.set_defaults(func=cmd_fit)

    p_sample = sub.add_parser("sample", help="draw a truncated prior mixture and sample it")
    p_sample.add_argument("--alpha", type=float, required=True)
    p_sample.add_argument("--trunc", type=int, required=True)
    p_sample.add_argument("--n", type=int, required=True, help="number of points")
    p_sample.add_argument("--dim", type=int, required=True)
    p_sample.add_argument(
        "--mean0", help="base measure mean, comma-separated (default zeros)"
    )
    p_sample.add_argument(
        "--tau2", type=float, default=1.0, help="base measure variance (default 1)"
    )
    p_sample.add_argument(
        "--comp-cov",
        dest="comp_cov",
        help="component covariance diagonal, comma-separated (default ones)",
    )
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", required=True, help="output CSV path")
    p_sample.set_defaults(func=cmd_sample)

    p_check = sub.add_parser(
        "check-truncation", help="truncation level for a tail tolerance"
    )
    p_check.add_argument("--alpha", type=float, required=True)
    p_check.add_argument("--delta", type=float, required=True)
    p_check.add_argument("--c", type=float, default=1.0, help="bound constant")
    p_check.add_argument("--json", action="store_true", help="machine-readable output")
    p_check.set_defaults(func=cmd_check_truncation)

    p_val = sub.add_parser("validate", help="run statistical validation suites")
    p_val.add_argument(
        "--suite",
        choices=[*SUITES, "all"],
        required=True,
    )
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--out", help="write the JSON report here instead of stdout")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 3
    except ParameterError as exc:
        sys.stderr.write(f"argument error: {exc}\n")
        return 2
    except DpmeError as exc:
        sys.stderr.write(f"internal error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 1
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
