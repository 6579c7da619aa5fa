"""Command line entry point: ``dbvp <subcommand>``.

Exit codes: 0 success, 2 hypothesis or validation failure, 3 no convergence,
4 bad input (including usage errors).
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click

from .exceptions import DBVPError, ProblemFormatError
from .greens import build_kernel, solve_via_green, verify_kernel
from .linear import eigenvalues, residual_linear, solve_linear_with_info
from .problems import ProblemDocument, builtin, parse_linear_document
from .report import (
    EXIT_BAD_INPUT,
    EXIT_HYPOTHESIS,
    dumps,
    envelope_svg,
    exit_code_for,
    read_trace_csv,
    run_solve,
    run_sweep,
    run_verify,
    trace_csv,
    trace_rows,
)


class CommandExit(Exception):
    def __init__(self, code):
        self.code = code


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    raise CommandExit(exit_code_for(exc))


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"malformed JSON in {path}: {exc}") from None


def _load_problem(builtin_name, problem_path, T):
    if bool(builtin_name) == bool(problem_path):
        raise ProblemFormatError("give exactly one of --builtin or --problem")
    if builtin_name:
        if T is None:
            raise ProblemFormatError("--T is required with --builtin")
        return builtin(builtin_name, T), f"builtin:{builtin_name}"
    doc = ProblemDocument.from_dict(_load_json(problem_path))
    return doc, f"file:{Path(problem_path).name}"


def _format_flag(f):
    f = click.option("--json", "fmt", flag_value="json", default=True, help="JSON output (default).")(f)
    return click.option("--csv", "fmt", flag_value="csv", help="CSV output.")(f)


def _out_flag(f):
    return click.option("--out", type=click.Path(dir_okay=False), help="Write output to a file.")(f)


@click.group()
def cli():
    """Monotone iteration for discrete two-point boundary value problems."""


@cli.command()
@click.option("--T", "T", type=int, required=True, help="Grid parameter (interior nodes).")
@_format_flag
@_out_flag
def spectrum(T, fmt, out):
    """Eigenvalues of the Dirichlet second-difference operator."""
    try:
        spec = eigenvalues(T)
    except DBVPError as exc:
        _fail(exc)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "eigenvalue"])
        for n, v in enumerate(spec.eigenvalues, start=1):
            w.writerow([n, repr(float(v))])
        _emit(buf.getvalue(), out)
    else:
        _emit(json.dumps(spec.eigenvalues.tolist()) + "\n", out)


@cli.command()
@click.option("--T", "T", type=int, required=True)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--verify", is_flag=True, help="Check negativity, symmetry and impulse identity.")
@_format_flag
@_out_flag
def green(T, lam, verify, fmt, out):
    """Dump the Green's kernel, or certify it with --verify."""
    try:
        kernel = build_kernel(lam, T)
    except DBVPError as exc:
        _fail(exc)
    if verify:
        checks = verify_kernel(kernel)
        _emit(dumps({
            "T": T, "lambda": kernel.lam, "case": kernel.case, **kernel.params(),
            "checks": [c.as_dict() for c in checks],
            "passed": all(checks),
        }) + "\n", out)
        if not all(checks):
            raise CommandExit(EXIT_HYPOTHESIS)
        return
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# case={kernel.case} theta={kernel.theta} alpha={kernel.alpha} beta={kernel.beta}\n")
        w.writerow(["t"] + [f"s={s}" for s in range(1, T + 1)])
        for t, row in enumerate(kernel.G):
            w.writerow([t] + [repr(float(v)) for v in row])
        _emit(buf.getvalue(), out)
    else:
        _emit(dumps({
            "T": T, "lambda": kernel.lam, "case": kernel.case, **kernel.params(),
            "G": kernel.G, "psi": kernel.psi.psi.values,
        }) + "\n", out)


@cli.command("solve-linear")
@click.option("--problem", type=click.Path(dir_okay=False), help="JSON {T, lambda, h, B}.")
@click.option("--T", "T", type=int)
@click.option("--lambda", "lam", type=float)
@click.option("--h", "h", help="Comma-separated forcing values (T or T+2 entries).")
@click.option("--B", "B", type=float, default=0.0, show_default=True)
@click.option("--method", type=click.Choice(["direct", "green"]), default="direct", show_default=True)
@_format_flag
@_out_flag
def solve_linear_cmd(problem, T, lam, h, B, method, fmt, out):
    """Solve -Δ²y(t-1) - λy(t) = h(t), y(0)=0, y(T+1)=B."""
    try:
        if problem:
            p = parse_linear_document(_load_json(problem))
        else:
            if T is None or lam is None:
                raise ProblemFormatError("give --problem, or --T and --lambda")
            values = [0.0] * T if h is None else [float(v) for v in h.split(",") if v.strip()]
            p = parse_linear_document({"T": T, "lambda": lam, "h": values, "B": B})
        y, info = solve_linear_with_info(p)
        if method == "green":
            y = solve_via_green(build_kernel(p.lam, p.T), p.h, p.B)
            info["residual"] = residual_linear(p, y)
    except DBVPError as exc:
        _fail(exc)
    if "warning" in info:
        click.echo(f"warning: {info['warning']}", err=True)
    if fmt == "csv":
        _emit(y.to_csv(), out)
    else:
        _emit(dumps({"y": y.values, "method": method, **info}) + "\n", out)


def _problem_options(f):
    f = click.option("--builtin", "builtin_name", help="example1 or example2.")(f)
    f = click.option("--problem", "problem_path", type=click.Path(dir_okay=False),
                     help="Problem document (JSON).")(f)
    f = click.option("--T", "T", type=int, help="Grid parameter; overrides the document.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    return f


@cli.command("verify")
@_problem_options
@click.option("--samples", type=int, default=64, show_default=True, help="Samples per node.")
@_out_flag
def verify_cmd(builtin_name, problem_path, T, seed, samples, out):
    """Validate the bracket and estimate the one-sided Lipschitz constant."""
    try:
        doc, source = _load_problem(builtin_name, problem_path, T)
    except DBVPError as exc:
        _fail(exc)
    report = run_verify(doc, T, seed=seed, samples_per_node=samples, source=source)
    _emit(report.to_json() + "\n", out)
    if report.exit_code:
        raise CommandExit(report.exit_code)


@cli.command("solve")
@_problem_options
@click.option("--lambda", "lam", type=float, help="Fixed constant shift.")
@click.option("--M", "M", type=float, help="Declared one-sided Lipschitz constant.")
@click.option("--shift", type=click.Choice(["nodewise", "constant"]), default="nodewise",
              show_default=True)
@click.option("--kappa", type=float, default=0.9, show_default=True)
@click.option("--tol", type=float)
@click.option("--max-iter", "max_iter", type=int)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), help="Trace CSV file.")
@click.option("--plot", "plot_path", type=click.Path(dir_okay=False), help="SVG plot of iterates.")
@click.option("--sweep", help="Comma-separated grid sizes to solve independently.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel sweep workers.")
@_out_flag
def solve_cmd(builtin_name, problem_path, T, seed, lam, M, shift, kappa, tol, max_iter,
              trace_path, plot_path, sweep, jobs, out):
    """Monotone iteration from the bracket; emits a JSON run report."""
    try:
        doc, source = _load_problem(builtin_name, problem_path, T if not sweep else 1)
    except DBVPError as exc:
        _fail(exc)
    kwargs = dict(seed=seed, lam=lam, M=M, shift=shift, tol=tol, max_iter=max_iter,
                  kappa=kappa, source=source)
    if sweep:
        try:
            Ts = [int(v) for v in sweep.split(",") if v.strip()]
        except ValueError:
            _fail(ProblemFormatError(f"bad --sweep list {sweep!r}"))
        reports = run_sweep(doc, Ts, jobs=jobs, **kwargs)
        _emit(dumps([r.as_dict() for r in reports]) + "\n", out)
        code = max(r.exit_code for r in reports)
        if code:
            raise CommandExit(code)
        return
    report, solver = run_solve(doc, T, **kwargs)
    _emit(report.to_json() + "\n", out)
    if solver is not None and (trace_path or plot_path):
        text = trace_csv(trace_rows(solver.trace_))
        if trace_path:
            Path(trace_path).write_text(text)
        if plot_path:
            # plot from the serialized trace so plotting cannot touch the numerics
            Path(plot_path).write_text(envelope_svg(read_trace_csv(text)))
    if report.exit_code:
        if report.error:
            click.echo(f"error: {report.error}", err=True)
        raise CommandExit(report.exit_code)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="dbvp", standalone_mode=False)
    except CommandExit as exc:
        return exc.code
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return EXIT_BAD_INPUT
    return 0


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
