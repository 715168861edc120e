"""Command-line front end: single runs, p-sweeps, and lemma verification.

Commands
    run    one (problem, p, epsilon) run; writes the trace JSON
    sweep  all p values for one problem; writes traces, a summary CSV and
           optionally a combined log-log SVG
    verify lemma verification of a saved trace, or the geometry self-test

Exit codes: run -> 0 converged, 2 max_iterations, 3 solver_failure,
64 unknown problem key; sweep -> 1 if any run failed; verify -> 1 on
violations, 65 on a malformed trace.  LPOA_SEED overrides the default seed.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import sys
import time

import click

from .analysis import fit_rate, monotone_envelope, verify_trace
from .checks import run_self_test
from .driver import DEFAULT_SEED, RunConfig, RunTrace, hausdorff_series, run
from .plot_svg import write_svg
from .problems import PROBLEM_KEYS, by_key
from .trace_io import (TraceFormatError, atomic_write_text, default_metadata,
                       load_trace, save_trace)

DEFAULT_P_LIST = (1.25, 1.5, 2.0, 3.0, 4.0, 8.0)
DEFAULT_EPSILONS = {
    "example1-q2": 1e-4,
    "example1-q3": 0.01,
    "ellipse": 1e-3,
    "example2": 0.05,
}
CSV_HEADER = "p,p_star,c_hat,r_squared,iterations"

EXIT_MAX_ITERATIONS = 2
EXIT_SOLVER_FAILURE = 3
EXIT_USAGE = 64
EXIT_BAD_TRACE = 65


def _seed(cli_seed) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("LPOA_SEED")
    return int(env) if env else DEFAULT_SEED


def _check_problem(key: str) -> None:
    if key not in PROBLEM_KEYS:
        click.echo(f"error: unknown problem key {key!r}; "
                   f"choose from {', '.join(PROBLEM_KEYS)}", err=True)
        click.echo("usage: lpoa run --problem KEY --p REAL --eps REAL", err=True)
        sys.exit(EXIT_USAGE)


def _trace_curve(trace: RunTrace) -> dict:
    series = monotone_envelope(hausdorff_series(trace))
    q = by_key(trace.config.problem_key).q
    fit = fit_rate(series, q, trace.config.epsilon)
    return {"label": f"p = {trace.config.p:g}", "series": series,
            "fit": fit, "q": q}


@click.group()
def main() -> None:
    """Outer approximation of convex vector optimization problems by lp
    norm-minimization cuts."""


@main.command("run")
@click.option("--problem", "problem_key", required=True, help="Problem key.")
@click.option("--p", "p_value", type=float, required=True, help="Norm exponent.")
@click.option("--eps", type=float, required=True, help="Stopping tolerance.")
@click.option("--max-iters", type=int, default=500, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Trace JSON output path.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False),
              default=None, help="Optional log-log SVG output path.")
@click.option("--seed", type=int, default=None, help="Override random seed.")
def cmd_run(problem_key, p_value, eps, max_iters, out_path, svg_path, seed):
    """Execute one run and write its trace."""
    _check_problem(problem_key)
    config = RunConfig(problem_key=problem_key, p=p_value, epsilon=eps,
                       max_iterations=max_iters, seed=_seed(seed))
    t0 = time.perf_counter()
    trace = run(config)
    wall = time.perf_counter() - t0
    if out_path:
        save_trace(out_path, trace, default_metadata(wall))
    if svg_path and trace.iterations:
        write_svg(svg_path, [_trace_curve(trace)],
                  title=f"{problem_key}, p = {p_value:g}")
    click.echo(f"{problem_key} p={p_value:g} eps={eps:g}: "
               f"{trace.termination} after {len(trace.iterations)} iterations "
               f"({wall:.2f}s)")
    if trace.termination == "max_iterations":
        sys.exit(EXIT_MAX_ITERATIONS)
    if trace.termination == "solver_failure":
        sys.exit(EXIT_SOLVER_FAILURE)


def _sweep_one(args) -> tuple[float, RunTrace, float]:
    config_dict, = args
    config = RunConfig.from_dict(config_dict)
    t0 = time.perf_counter()
    trace = run(config)
    return config.p, trace, time.perf_counter() - t0


@main.command("sweep")
@click.option("--problem", "problem_key", required=True, help="Problem key.")
@click.option("--p-list", default=None,
              help="Comma-separated p values (default: 1.25,1.5,2,3,4,8).")
@click.option("--eps", type=float, default=None,
              help="Stopping tolerance (default: per-problem matrix value).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--max-iters", type=int, default=500, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel runs.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False),
              default=None, help="Combined log-log SVG output path.")
@click.option("--seed", type=int, default=None, help="Override random seed.")
def cmd_sweep(problem_key, p_list, eps, out_dir, max_iters, jobs, svg_path,
              seed):
    """Run every p value for one problem; write traces and a summary CSV."""
    _check_problem(problem_key)
    p_values = (DEFAULT_P_LIST if p_list is None
                else tuple(float(s) for s in p_list.split(",")))
    epsilon = DEFAULT_EPSILONS[problem_key] if eps is None else eps
    seed_val = _seed(seed)
    os.makedirs(out_dir, exist_ok=True)

    configs = [RunConfig(problem_key=problem_key, p=p, epsilon=epsilon,
                         max_iterations=max_iters, seed=seed_val)
               for p in p_values]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_one,
                                  [(c.to_dict(),) for c in configs]))
    else:
        results = [_sweep_one((c.to_dict(),)) for c in configs]
    results.sort(key=lambda r: r[0])

    q = by_key(problem_key).q
    rows = []
    curves = []
    any_failed = False
    for p, trace, wall in results:
        name = f"{problem_key}-p{p:g}.json".replace("/", "_")
        save_trace(os.path.join(out_dir, name), trace, default_metadata(wall))
        status = trace.termination
        if status != "converged":
            any_failed = True
            rows.append((p, p / (p - 1.0), float("nan"), float("nan"),
                         len(trace.iterations), status))
            continue
        env = monotone_envelope(hausdorff_series(trace))
        fit = fit_rate(env, q, epsilon)
        rows.append((p, p / (p - 1.0), fit.c_hat, fit.r_squared,
                     len(trace.iterations), status))
        curves.append({"label": f"p = {p:g}", "series": env, "fit": fit,
                       "q": q})
        click.echo(f"p={p:g}: {len(trace.iterations)} iterations, "
                   f"c_hat={fit.c_hat:.3f}, r2={fit.r_squared:.4f} "
                   f"({wall:.2f}s)")

    header = CSV_HEADER + (",status" if any_failed else "")
    lines = [header]
    for row in rows:
        cells = [f"{row[0]:g}", f"{row[1]!r}", f"{row[2]!r}", f"{row[3]!r}",
                 str(row[4])]
        if any_failed:
            cells.append(row[5])
        lines.append(",".join(cells))
    csv_path = os.path.join(out_dir, f"{problem_key}-summary.csv")
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    click.echo(f"wrote {csv_path}")

    if svg_path and curves:
        write_svg(svg_path, curves, title=f"{problem_key}, eps = {epsilon:g}")
        click.echo(f"wrote {svg_path}")
    if any_failed:
        sys.exit(1)


@main.command("verify")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              default=None, help="Trace JSON to verify.")
@click.option("--eta", type=float, default=0.1, show_default=True,
              help="Deviation-vector offset.")
@click.option("--self-test", is_flag=True,
              help="Run the norm-geometry property suites instead.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Report JSON output path.")
def cmd_verify(trace_path, eta, self_test, out_path):
    """Verify the geometric lemmas on a trace, or run the self-test."""
    if self_test:
        report = run_self_test()
    elif trace_path:
        try:
            trace = load_trace(trace_path)
        except (TraceFormatError, OSError) as exc:
            click.echo(f"error: cannot read trace: {exc}", err=True)
            sys.exit(EXIT_BAD_TRACE)
        report = verify_trace(trace, eta=eta)
    else:
        raise click.UsageError("pass --trace FILE or --self-test")

    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_path:
        atomic_write_text(out_path, text)
    else:
        click.echo(text, nl=False)
    if report["total_violations"] > 0:
        click.echo(f"{report['total_violations']} violation(s) found",
                   err=True)
        sys.exit(1)
    click.echo("0 violations", err=True)


if __name__ == "__main__":
    main()
