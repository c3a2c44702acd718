"""Config-driven command line interface.

Subcommands:

    estimate         probability estimates over a decision grid
    gradient         estimates plus gradient columns
    compare          spherical vs naive estimator, variances and timing
    convergence      RMSE / coverage / variance-ratio ladder over N
    replicate-figure smooth-estimator showcase: CSV plus a two-panel SVG

All numeric CSV fields use the shortest round-trip decimal representation,
so identical runs produce byte-identical files; vector-valued fields join
their components with ';'. Exit codes: 0 success, 2 configuration error,
3 numerical or model-assumption error. Nothing is written unless the whole
command succeeds.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import AssumptionError, ConfigError
from .estimators import (
    SamplePlan,
    dominance_check,
    draw_samples,
    naive_estimate,
    samples_for_plan,
    sweep,
)
from .model import verify_slater
from .oracle import (
    QuadratureSpec,
    finite_difference_gradient,
    reference_probability_2d,
    true_gradient_example,
    true_probability_example,
)
from .radial import evaluate_batch, prepare_samples
from .rng import RngStream
from .svgplot import Curve, Panel, line_figure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_STREAM_SLATER = 8
_STREAM_CONVERGENCE = 32
_STREAM_CONVERGENCE_NAIVE = 33


def _fmt(value: float) -> str:
    return repr(float(value))


def _fmt_vec(values) -> str:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    return ";".join(_fmt(v) for v in arr)


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _oracle_functions(exp: ExperimentConfig):
    """(phi_true, grad_true) closures for the configured model."""
    if exp.model_kind == "beta-example":
        delta, spec = exp.delta, exp.oracle_spec

        def phi_true(x):
            return true_probability_example(x, delta, spec)

        def grad_true(x):
            return true_gradient_example(x, delta, spec)

        return phi_true, grad_true

    spec = exp.oracle_spec

    def phi_true(x):
        return reference_probability_2d(exp.constraint, exp.model, x, spec)

    def grad_true(x):
        return finite_difference_gradient(phi_true, x, 1e-5)

    return phi_true, grad_true


def _check_slater(exp: ExperimentConfig) -> None:
    """Advisory Slater verification across the grid; warns, never aborts."""
    worst = None
    rng = RngStream(exp.plan.seed, _STREAM_SLATER)
    for x in exp.grid:
        report = verify_slater(exp.model, exp.constraint, x, exp.slater_gamma0,
                               exp.slater_samples, rng)
        if worst is None or report.worst_margin > worst.worst_margin:
            worst = report
    if worst is not None and not worst.passed:
        print(f"warning: Slater margin check failed (worst g(x, mean(c)) = "
              f"{worst.worst_margin:.6g}, needs < {-exp.slater_gamma0:.6g}); "
              f"estimates are reported but unverified", file=sys.stderr)
    return worst


def run_estimate(exp: ExperimentConfig, out_path: str,
                 include_gradient: bool) -> None:
    slater = _check_slater(exp)
    rows_data = sweep(exp.constraint, exp.model, exp.grid, exp.plan,
                      crn=exp.crn, want_gradient=include_gradient,
                      workers=exp.workers, slater=slater)
    phi_true = grad_true = None
    if exp.oracle_enabled:
        phi_true, grad_true = _oracle_functions(exp)

    header = ["x", "phi_hat", "phi_stderr"]
    if include_gradient:
        header += ["grad_hat", "grad_stderr"]
    if exp.oracle_enabled:
        header += ["phi_true"]
        if include_gradient:
            header += ["grad_true"]
    if exp.naive_enabled:
        header += ["naive_hat"]
    header += ["N", "seed"]

    rows = []
    for point in rows_data:
        row = [_fmt_vec(point.x), _fmt(point.probability.value),
               _fmt(point.probability.stderr)]
        if include_gradient:
            row += [_fmt_vec(point.gradient.value), _fmt_vec(point.gradient.stderr)]
        if exp.oracle_enabled:
            row += [_fmt(phi_true(point.x))]
            if include_gradient:
                row += [_fmt_vec(grad_true(point.x))]
        if exp.naive_enabled:
            naive = naive_estimate(exp.constraint, exp.model, point.x,
                                   exp.naive_samples, exp.plan.seed)
            row += [_fmt(naive.value)]
        row += [str(exp.plan.count), str(exp.plan.seed)]
        rows.append(row)
    _write_csv(out_path, header, rows)


def run_compare(exp: ExperimentConfig, out_path: str) -> None:
    _check_slater(exp)
    header = ["x", "phi_spherical", "var_spherical", "phi_naive", "var_naive",
              "dominance", "sec_per_sample_spherical", "sec_per_sample_naive",
              "N", "seed"]
    rows = []
    count = exp.plan.count
    for x in exp.grid:
        t0 = time.perf_counter()
        batch = draw_samples(exp.model, SamplePlan(count=count, seed=exp.plan.seed))
        prepared = prepare_samples(exp.model, batch)
        ev = evaluate_batch(exp.constraint, prepared, x, workers=exp.workers)
        sph_time = (time.perf_counter() - t0) / count
        phi_sph = float(np.sum(ev.e_values) / count)

        t0 = time.perf_counter()
        naive = naive_estimate(exp.constraint, exp.model, x, count, exp.plan.seed)
        naive_time = (time.perf_counter() - t0) / count

        s2, _, _, dominance = dominance_check(ev.e_values, naive)
        rows.append([_fmt_vec(x), _fmt(phi_sph), _fmt(s2), _fmt(naive.value),
                     _fmt(naive.variance), "true" if dominance else "false",
                     _fmt(sph_time), _fmt(naive_time), str(count),
                     str(exp.plan.seed)])
    _write_csv(out_path, header, rows)


def run_convergence(exp: ExperimentConfig, out_path: str) -> None:
    if len(exp.grid) != 1:
        raise ConfigError("convergence needs a grid with exactly one point")
    x = exp.grid[0]
    _check_slater(exp)
    phi_fn, grad_fn = _oracle_functions(exp)
    truth = phi_fn(x)
    grad_truth = np.atleast_1d(grad_fn(x))

    base = RngStream(exp.plan.seed, _STREAM_CONVERGENCE)
    naive_base = RngStream(exp.plan.seed, _STREAM_CONVERGENCE_NAIVE)
    header = ["N", "replications", "rmse_phi", "rmse_grad", "coverage95",
              "var_ratio", "seed"]
    rows = []
    reps = exp.convergence_replications
    for i, count in enumerate(exp.convergence_ladder):
        sq_phi = 0.0
        sq_grad = 0.0
        covered = 0
        var_sph = 0.0
        var_naive = 0.0
        plan = SamplePlan(count=count, seed=exp.plan.seed, sampler=exp.plan.sampler,
                          burn_in=exp.plan.burn_in, thinning=exp.plan.thinning,
                          proposal_scale=exp.plan.proposal_scale)
        for r in range(reps):
            child = base.spawn(i * 1024 + r)
            batch = samples_for_plan(exp.model, plan, rng=child)
            prepared = prepare_samples(exp.model, batch)
            ev = evaluate_batch(exp.constraint, prepared, x, want_gradient=True,
                                workers=exp.workers)
            phi_hat = float(np.sum(ev.e_values) / count)
            grad_hat = np.sum(ev.gradients, axis=0) / count
            centered = ev.e_values - phi_hat
            s2 = float(np.sum(centered ** 2) / (count - 1))
            stderr = math.sqrt(s2 / count)
            sq_phi += (phi_hat - truth) ** 2
            sq_grad += float(np.sum((grad_hat - grad_truth) ** 2))
            lo, hi = phi_hat - 1.959963984540054 * stderr, \
                phi_hat + 1.959963984540054 * stderr
            covered += int(lo <= truth <= hi)
            var_sph += s2
            naive = naive_estimate(exp.constraint, exp.model, x, count,
                                   exp.plan.seed,
                                   rng=naive_base.spawn(i * 1024 + r))
            var_naive += naive.variance
        rows.append([str(count), str(reps), _fmt(math.sqrt(sq_phi / reps)),
                     _fmt(math.sqrt(sq_grad / reps)), _fmt(covered / reps),
                     _fmt(var_naive / max(var_sph, 1e-300)), str(exp.plan.seed)])
    _write_csv(out_path, header, rows)


def run_replicate_figure(exp: ExperimentConfig, out_path: str,
                         svg_path: str) -> None:
    if exp.model_kind != "beta-example":
        raise ConfigError("replicate-figure needs model.kind = beta-example")
    slater = _check_slater(exp)
    phi_fn, grad_fn = _oracle_functions(exp)
    points = sweep(exp.constraint, exp.model, exp.grid, exp.plan, crn=exp.crn,
                   workers=exp.workers, slater=slater)
    xs = [float(p.x[0]) for p in points]
    phi_true = [phi_fn(p.x) for p in points]
    grad_true = [float(np.atleast_1d(grad_fn(p.x))[0]) for p in points]
    phi_sph = [p.probability.value for p in points]
    grad_sph = [float(p.gradient.value[0]) for p in points]
    naive = [naive_estimate(exp.constraint, exp.model, p.x, exp.naive_samples,
                            exp.plan.seed).value for p in points]

    header = ["x", "phi_true", "grad_true", "phi_spherical", "grad_spherical",
              "phi_naive", "N", "seed"]
    rows = [[_fmt(x), _fmt(pt), _fmt(gt), _fmt(ps), _fmt(gs), _fmt(nv),
             str(exp.plan.count), str(exp.plan.seed)]
            for x, pt, gt, ps, gs, nv
            in zip(xs, phi_true, grad_true, phi_sph, grad_sph, naive)]

    left = Panel("probability", [
        Curve(xs, naive, "#1f4fd8", "naive", step=True),
        Curve(xs, phi_sph, "#d82c1f", "spherical"),
        Curve(xs, phi_true, "#000000", "true"),
    ], xlabel="x", ylabel="probability")
    right = Panel("derivative", [
        Curve(xs, grad_sph, "#d82c1f", "spherical"),
        Curve(xs, grad_true, "#000000", "true"),
    ], xlabel="x", ylabel="d probability / dx")
    svg = line_figure([left, right])

    _write_csv(out_path, header, rows)
    with open(svg_path, "w", encoding="utf-8", newline="") as handle:
        handle.write(svg)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphrad",
        description="Spherical-radial probability and gradient estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("estimate", "probability estimates over the decision grid"),
        ("gradient", "probability and gradient estimates"),
        ("compare", "spherical vs naive estimator comparison"),
        ("convergence", "error and coverage ladder over sample counts"),
        ("replicate-figure", "CSV + SVG figure of estimates vs truth"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="experiment config file")
        cmd.add_argument("--out", required=True, help="output CSV path")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override plan.seed")
        cmd.add_argument("--workers", type=int, default=None,
                         help="override run.workers")
        if name == "replicate-figure":
            cmd.add_argument("--svg", required=True, help="output SVG path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        kwargs = dict(seed_override=args.seed, workers_override=args.workers)
        if args.command == "replicate-figure":
            exp = load_config(args.config, default_samples=100,
                              default_grid=(0.0, 4.0, 0.05),
                              default_sampler="symmetrized", **kwargs)
        else:
            exp = load_config(args.config, **kwargs)
        if args.command == "estimate":
            run_estimate(exp, args.out, include_gradient=False)
        elif args.command == "gradient":
            run_estimate(exp, args.out, include_gradient=True)
        elif args.command == "compare":
            run_compare(exp, args.out)
        elif args.command == "convergence":
            run_convergence(exp, args.out)
        else:
            run_replicate_figure(exp, args.out, args.svg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionError as exc:
        print(f"numerical/model error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
