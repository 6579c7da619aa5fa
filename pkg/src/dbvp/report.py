"""Run orchestration and report emission (JSON report, trace CSV, SVG plot)."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimators import MonotoneSolver
from .exceptions import BadInputError, BracketError, HypothesisError
from .linear import first_eigenvalue
from .monotone import (
    CONVERGED,
    MAX_ITER_EXCEEDED,
    NonlinearProblem,
    estimate_one_sided_lipschitz,
    is_lower_solution,
    is_upper_solution,
)

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_NOT_CONVERGED = 3
EXIT_BAD_INPUT = 4

TRACE_COLUMNS = ("iter", "t", "alpha", "beta", "step_alpha", "step_beta",
                 "residual_alpha", "residual_beta")


def exit_code_for(exc):
    if isinstance(exc, HypothesisError):
        return EXIT_HYPOTHESIS
    if isinstance(exc, BadInputError):
        return EXIT_BAD_INPUT
    raise exc


def clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False)


@dataclass
class RunReport:
    problem: dict
    stage: str = "start"
    status: str = "ok"
    exit_code: int = EXIT_OK
    error: Optional[str] = None
    spectrum: dict = field(default_factory=dict)
    bracket: dict = field(default_factory=dict)
    lipschitz: dict = field(default_factory=dict)
    shift: dict = field(default_factory=dict)
    iteration: dict = field(default_factory=dict)
    uniqueness: dict = field(default_factory=dict)
    solution: dict = field(default_factory=dict)
    timing_ms: float = 0.0

    def as_dict(self):
        return clean({
            "problem": self.problem,
            "stage": self.stage,
            "status": self.status,
            "exit_code": self.exit_code,
            "error": self.error,
            "spectrum": self.spectrum,
            "bracket": self.bracket,
            "lipschitz": self.lipschitz,
            "shift": self.shift,
            "iteration": self.iteration,
            "uniqueness": self.uniqueness,
            "solution": self.solution,
            "timing_ms": self.timing_ms,
        })

    def to_json(self):
        return dumps(self.as_dict())

    def fail(self, stage, exc, code=None):
        self.stage = stage
        self.status = "failed"
        self.error = f"{type(exc).__name__}: {exc}"
        self.exit_code = exit_code_for(exc) if code is None else code
        return self


def _problem_echo(doc, T, source):
    echo = doc.to_dict()
    echo["T"] = T
    echo["source"] = source
    return echo


def run_verify(doc, T=None, seed=0, samples_per_node=64, random_pairs=64, source="document"):
    """Bracket validation and M estimate only."""
    t0 = time.perf_counter()
    T = doc.T if T is None else T
    report = RunReport(problem=_problem_echo(doc, T, source))
    try:
        report.stage = "parse"
        p = NonlinearProblem.from_document(doc, T)
        report.spectrum = {"lambda_1": first_eigenvalue(p.T)}
        report.stage = "bracket"
        bracket = p.bracket()
        lo, up = is_lower_solution(p, bracket.alpha), is_upper_solution(p, bracket.beta)
        report.bracket = {"lower": lo.as_dict(), "upper": up.as_dict()}
        if not (lo and up):
            raise BracketError("bracket validation failed")
        report.stage = "lipschitz"
        M_hat = estimate_one_sided_lipschitz(p, bracket, samples_per_node, random_pairs, seed)
        report.lipschitz = _lipschitz_section(M_hat, doc.M, samples_per_node, random_pairs, seed)
        report.stage = "done"
    except (BadInputError, HypothesisError) as exc:
        report.fail(report.stage, exc)
    report.timing_ms = (time.perf_counter() - t0) * 1e3
    return report


def _lipschitz_section(M_hat, M_declared, samples_per_node, random_pairs, seed, profile=None):
    out = {
        "M_hat": M_hat,
        "M_declared": M_declared,
        "M_hat_positive": bool(M_hat > 0),
        "samples_per_node": samples_per_node,
        "random_pairs": random_pairs,
        "seed": seed,
    }
    if profile is not None:
        out["M_conservative_profile"] = profile
    if not M_hat > 0:
        out["note"] = ("sampled one-sided constant is not positive; it is used as a lower "
                       "bound on difference quotients, not as a positive Lipschitz constant")
    return out


def run_solve(doc, T=None, seed=0, lam=None, M=None, shift="nodewise", tol=None,
              max_iter=None, kappa=0.9, samples_per_node=64, random_pairs=64,
              source="document"):
    """Full pipeline. Returns (RunReport, fitted MonotoneSolver or None)."""
    t0 = time.perf_counter()
    T = doc.T if T is None else T
    report = RunReport(problem=_problem_echo(doc, T, source))
    lam = doc.lam if lam is None else lam
    solver = MonotoneSolver(
        shift=shift, lam=lam, M=M, kappa=kappa, tol=tol, max_iter=max_iter,
        samples_per_node=samples_per_node, random_pairs=random_pairs, random_state=seed,
    )
    fitted = None
    try:
        report.stage = "parse"
        p = solver._problem(doc, T)
        report.problem["tol"] = p.tol
        report.problem["max_iter"] = p.max_iter
        report.spectrum = {"lambda_1": first_eigenvalue(p.T)}
        report.stage = "bracket"
        bracket = p.bracket()
        lo, up = is_lower_solution(p, bracket.alpha), is_upper_solution(p, bracket.beta)
        report.bracket = {"lower": lo.as_dict(), "upper": up.as_dict()}
        if not (lo and up):
            raise BracketError("bracket validation failed")
        report.stage = "iterate"
        solver.fit(p)
        fitted = solver
        report.lipschitz = _lipschitz_section(
            solver.M_hat_, M if M is not None else doc.M, samples_per_node, random_pairs,
            seed, solver.M_profile_,
        )
        lam_used = solver.lambda_
        report.shift = {
            "strategy": "constant" if np.ndim(lam_used) == 0 else "nodewise",
            "lambda": float(np.max(lam_used)),
            "profile": lam_used if np.ndim(lam_used) else None,
            "kappa": kappa,
        }
        report.iteration = solver.trace_.summary()
        report.uniqueness = solver.uniqueness_.as_dict()
        report.solution = {
            "alpha": solver.alpha_.values,
            "beta": solver.beta_.values,
            "residual_alpha": solver.trace_.iterates[-1].residual_alpha,
            "residual_beta": solver.trace_.iterates[-1].residual_beta,
        }
        outcome = solver.outcome_
        if outcome == CONVERGED:
            report.stage = "done"
        elif outcome == MAX_ITER_EXCEEDED:
            report.status = "failed"
            report.error = f"no convergence within max_iter={p.max_iter}"
            report.exit_code = EXIT_NOT_CONVERGED
        else:
            report.status = "failed"
            report.error = f"monotonicity violated: {solver.trace_.violation}"
            report.exit_code = EXIT_HYPOTHESIS
    except (BadInputError, HypothesisError) as exc:
        report.fail(report.stage, exc)
    report.timing_ms = (time.perf_counter() - t0) * 1e3
    return report, fitted


def run_sweep(doc, Ts, jobs=1, **kwargs):
    """Independent solves over several grid sizes, each with its own report."""
    def one(T):
        return run_solve(doc, T=T, **kwargs)[0]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, Ts))
    return [one(T) for T in Ts]


def report_without_timing(d):
    d = dict(d)
    d.pop("timing_ms", None)
    return d


# -- trace emission ---------------------------------------------------------


def trace_rows(trace):
    rows = []
    for it in trace.iterates:
        for t in range(it.alpha.T + 2):
            rows.append({
                "iter": it.n,
                "t": t,
                "alpha": float(it.alpha.values[t]),
                "beta": float(it.beta.values[t]),
                "step_alpha": it.step_alpha,
                "step_beta": it.step_beta,
                "residual_alpha": it.residual_alpha,
                "residual_beta": it.residual_beta,
            })
    return rows


def trace_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def read_trace_csv(text):
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({k: (int(v) if k in ("iter", "t") else float(v)) for k, v in r.items()})
    return rows


def envelope_svg(rows, width=640, height=400, max_curves=40, title="monotone iterates"):
    """SVG line plot of alpha_n(t) (blue) and beta_n(t) (red) for each iterate."""
    by_iter = {}
    for r in rows:
        by_iter.setdefault(r["iter"], []).append(r)
    iters = sorted(by_iter)
    if len(iters) > max_curves:
        pick = np.unique(np.linspace(0, len(iters) - 1, max_curves).round().astype(int))
        iters = [iters[i] for i in pick]
    ts = [r["t"] for r in rows]
    vals = [r["alpha"] for r in rows] + [r["beta"] for r in rows]
    tmin, tmax = min(ts), max(ts)
    vmin, vmax = min(vals), max(vals)
    if vmax == vmin:
        vmax = vmin + 1.0
    pad = 40

    def X(t):
        return pad + (t - tmin) / max(tmax - tmin, 1) * (width - 2 * pad)

    def Y(v):
        return height - pad - (v - vmin) / (vmax - vmin) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" font-size="12" text-anchor="middle">t</text>',
        f'<text x="4" y="{pad - 8}" font-size="11">{vmax:.4g}</text>',
        f'<text x="4" y="{height - pad}" font-size="11">{vmin:.4g}</text>',
    ]
    for n in iters:
        pts = sorted(by_iter[n], key=lambda r: r["t"])
        for key, colour in (("alpha", "#1f77b4"), ("beta", "#d62728")):
            path = " ".join(f"{X(r['t']):.2f},{Y(r[key]):.2f}" for r in pts)
            out.append(
                f'<polyline fill="none" stroke="{colour}" stroke-opacity="0.6" '
                f'stroke-width="1" points="{path}"><title>{key} n={n}</title></polyline>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
