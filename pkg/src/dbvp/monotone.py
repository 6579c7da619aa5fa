"""Upper/lower solutions and the monotone iteration between them.

Each step solves the shifted linear problem

    -Δ²y_{n+1}(t-1) - λ y_{n+1}(t) = f(t, y_n(t)) - λ y_n(t),
    y_{n+1}(0) = y_{n+1}(T+1) = 0,

once from the upper solution (a non-increasing sequence) and once from the
lower solution (a non-decreasing one). With λ below the one-sided Lipschitz
constant of f on the bracket and below λ₁, the maximum principle keeps both
sequences ordered; that ordering is re-checked at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import BracketError, GridError, OutOfRegimeError
from .grid import MeshFunction, second_difference
from .linear import SINGULAR_TOL, check_nonsingular, first_eigenvalue, solve_shifted
from .problems import Expression, ProblemDocument, evaluate, magnitude, parse

MONOTONE_SLACK = 1e-12
VALIDATION_SLACK = 1e-12
BOUNDARY_TOL = 1e-12
_EPS = np.finfo(float).eps
# safety factor on the first-order rounding bound used by the stopping rule
_ROUNDING_FACTOR = 64.0

CONVERGED = "converged"
MAX_ITER_EXCEEDED = "max_iter_exceeded"
MONOTONICITY_VIOLATED = "monotonicity_violated"


@dataclass(frozen=True)
class NonlinearProblem:
    """-Δ²y(t-1) = f(t, y(t)) on [1, T] with y(0) = y(T+1) = 0."""

    T: int
    f: Expression
    lower_expr: Expression
    upper_expr: Expression
    M_declared: Optional[float] = None
    tol: float = 1e-10
    max_iter: int = 10000

    def __post_init__(self):
        if isinstance(self.T, bool) or not isinstance(self.T, (int, np.integer)) or self.T < 1:
            raise GridError(f"T must be a positive integer, got {self.T!r}")
        for name in ("f", "lower_expr", "upper_expr"):
            v = getattr(self, name)
            if isinstance(v, str):
                object.__setattr__(self, name, parse(v))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @classmethod
    def from_document(cls, doc: ProblemDocument, T=None):
        T = doc.T if T is None else T
        if T is None:
            raise GridError("grid size T is required")
        kwargs = {}
        if doc.tol is not None:
            kwargs["tol"] = float(doc.tol)
        if doc.max_iter is not None:
            kwargs["max_iter"] = int(doc.max_iter)
        return cls(int(T), doc.f, doc.lower, doc.upper, M_declared=doc.M, **kwargs)

    @property
    def t_interior(self):
        return np.arange(1, self.T + 1, dtype=float)

    def f_values(self, y):
        """f(t, y(t)) for t = 1..T; ``y`` is a mesh function or (T+2,) array."""
        v = np.asarray(y, dtype=float)
        return evaluate(self.f, self.t_interior, v[1:-1], self.T)

    def f_at(self, t, y):
        return evaluate(self.f, t, y, self.T)

    def tabulate(self, expr):
        t = np.arange(self.T + 2, dtype=float)
        return MeshFunction(self.T, evaluate(expr, t, 0.0, self.T))

    def bracket(self):
        return Bracket(self.tabulate(self.lower_expr), self.tabulate(self.upper_expr))


@dataclass(frozen=True)
class Bracket:
    alpha: MeshFunction
    beta: MeshFunction

    def __post_init__(self):
        a, b = self.alpha, self.beta
        if a.T != b.T:
            raise GridError(f"bracket functions on different grids: {a.T} vs {b.T}")
        av, bv = a.values, b.values
        bad = np.flatnonzero(av > bv)
        if bad.size:
            raise BracketError(f"lower function exceeds upper function at t={int(bad[0])}")
        if abs(av[0]) > BOUNDARY_TOL or abs(bv[0]) > BOUNDARY_TOL:
            raise BracketError("bracket functions must vanish at t=0")
        if av[-1] > BOUNDARY_TOL:
            raise BracketError(f"lower function must satisfy alpha(T+1) <= 0, got {av[-1]!r}")
        if bv[-1] < -BOUNDARY_TOL:
            raise BracketError(f"upper function must satisfy beta(T+1) >= 0, got {bv[-1]!r}")

    @property
    def T(self):
        return self.alpha.T

    @property
    def degenerate(self):
        return bool(np.array_equal(self.alpha.values, self.beta.values))


@dataclass
class ValidationReport:
    kind: str
    passed: bool
    min_slack: float
    argmin_t: int
    boundary_ok: bool
    slack: list = field(default_factory=list)

    def as_dict(self):
        return {
            "kind": self.kind,
            "passed": self.passed,
            "min_slack": self.min_slack,
            "argmin_t": self.argmin_t,
            "boundary_ok": self.boundary_ok,
        }

    def __bool__(self):
        return self.passed


def _as_mesh(p, y):
    if not isinstance(y, MeshFunction):
        y = MeshFunction(p.T, y)
    if y.T != p.T:
        raise GridError(f"mesh function is on T={y.T}, problem has T={p.T}")
    return y


def _validate(p, y, sign, kind):
    y = _as_mesh(p, y)
    v = y.values
    # sign=+1: -Δ²y - f >= 0 (upper); sign=-1: f + Δ²y >= 0 (lower)
    slack = sign * (-second_difference(v) - p.f_values(v))
    k = int(np.argmin(slack))
    if sign > 0:
        boundary_ok = abs(v[0]) <= BOUNDARY_TOL and v[-1] >= -BOUNDARY_TOL
    else:
        boundary_ok = abs(v[0]) <= BOUNDARY_TOL and v[-1] <= BOUNDARY_TOL
    passed = bool(slack[k] >= -VALIDATION_SLACK and boundary_ok)
    return ValidationReport(kind, passed, float(slack[k]), k + 1, bool(boundary_ok), slack.tolist())


def is_upper_solution(p: NonlinearProblem, beta0) -> ValidationReport:
    return _validate(p, beta0, +1, "upper")


def is_lower_solution(p: NonlinearProblem, alpha0) -> ValidationReport:
    return _validate(p, alpha0, -1, "lower")


def nodewise_lipschitz(p: NonlinearProblem, bracket: Bracket, samples_per_node=64,
                       random_pairs=64, seed=0, conservative=False):
    """Per-node minimum of sampled quotients (f(t,w) - f(t,y)) / (w - y).

    At each interior node the range [alpha(t), beta(t)] is sampled on a
    uniform grid that includes both endpoints (consecutive pairs), plus
    ``random_pairs`` seeded random pairs. Degenerate nodes give +inf.

    A secant over a cell never reaches the extreme slope inside the cell, so
    the plain minimum overestimates the best constant for curved f. With
    ``conservative=True`` each cell quotient is lowered by its largest jump
    to a neighbouring cell, a first-order bound on that shortfall.
    """
    if samples_per_node < 2:
        raise ValueError("samples_per_node must be at least 2")
    rng = np.random.default_rng(seed)
    T = p.T
    lo = bracket.alpha.values[1:-1]
    hi = bracket.beta.values[1:-1]
    out = np.full(T, np.inf)
    live = hi > lo
    if not np.any(live):
        return out
    t = p.t_interior[live]
    lo, hi = lo[live], hi[live]
    frac = np.linspace(0.0, 1.0, samples_per_node)
    Y = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    Y[:, -1] = hi
    F = p.f_at(t[:, None], Y)
    dY = np.diff(Y, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(dY > 0, np.diff(F, axis=1) / dY, np.inf)
    if conservative and q.shape[1] > 1:
        jump = np.abs(np.diff(q, axis=1))
        spread = np.zeros_like(q)
        spread[:, :-1] = jump
        spread[:, 1:] = np.maximum(spread[:, 1:], jump)
        q = q - spread
    m = q.min(axis=1)
    if random_pairs:
        U = rng.uniform(size=(t.size, random_pairs, 2))
        P = lo[:, None, None] + (hi - lo)[:, None, None] * U
        P.sort(axis=2)
        Fp = p.f_at(t[:, None, None], P)
        d = P[..., 1] - P[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            qr = np.where(d > 0, (Fp[..., 1] - Fp[..., 0]) / d, np.inf)
        m = np.minimum(m, qr.min(axis=1))
    out[live] = m
    return out


def estimate_one_sided_lipschitz(p: NonlinearProblem, bracket: Bracket, samples_per_node=64,
                                 random_pairs=64, seed=0) -> float:
    """Sampled estimate of the largest M with f(t,w) - f(t,y) >= M (w - y) on the bracket.

    May be negative (f decreasing in y). Returns +inf for a degenerate bracket.
    """
    return float(np.min(nodewise_lipschitz(p, bracket, samples_per_node, random_pairs, seed)))


def choose_shift(M, T, kappa=0.9):
    """λ = min(M, kappa λ₁): satisfies λ <= M and λ < λ₁. Elementwise for arrays."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    cap = kappa * first_eigenvalue(T)
    if np.ndim(M):
        return np.minimum(np.asarray(M, dtype=float), cap)
    return float(min(M, cap))


def residual_nonlinear(p: NonlinearProblem, y) -> float:
    """max_t |Δ²y(t-1) + f(t, y(t))|; inf when boundary values are nonzero."""
    v = _as_mesh(p, y).values
    if abs(v[0]) > BOUNDARY_TOL or abs(v[-1]) > BOUNDARY_TOL:
        return math.inf
    return float(np.max(np.abs(second_difference(v) + p.f_values(v))))


def rounding_floor(p: NonlinearProblem, y) -> float:
    """Smallest residual resolvable in double precision at y.

    Scales machine epsilon by the magnitude of the stencil terms and the
    rounding scale of f(t, y(t)); zero-residual targets below this level are
    not representable.
    """
    v = np.asarray(y, dtype=float)
    stencil = np.abs(v[2:]) + 2.0 * np.abs(v[1:-1]) + np.abs(v[:-2])
    fscale = magnitude(p.f, p.t_interior, v[1:-1], p.T)
    return float(_ROUNDING_FACTOR * _EPS * np.max(stencil + fscale))


@dataclass
class Iterate:
    n: int
    alpha: MeshFunction
    beta: MeshFunction
    step_alpha: float
    step_beta: float
    residual_alpha: float
    residual_beta: float

    @property
    def step_size(self):
        return max(self.step_alpha, self.step_beta)


@dataclass
class IterationTrace:
    lambda_used: float
    iterates: list = field(default_factory=list)
    outcome: Optional[str] = None
    lambda_profile: Optional[np.ndarray] = None
    violation: Optional[dict] = None

    @property
    def iterations(self):
        return self.iterates[-1].n if self.iterates else 0

    @property
    def converged(self):
        return self.outcome == CONVERGED

    def chain_violation(self, slack=MONOTONE_SLACK):
        """Largest breach of alpha_n <= alpha_{n+1} <= beta_{n+1} <= beta_n."""
        worst = 0.0
        for prev, cur in zip(self.iterates, self.iterates[1:]):
            a0, a1 = prev.alpha.values, cur.alpha.values
            b0, b1 = prev.beta.values, cur.beta.values
            worst = max(worst, float(np.max(a0 - a1)), float(np.max(a1 - b1)),
                        float(np.max(b1 - b0)))
        for it in self.iterates[:1]:
            worst = max(worst, float(np.max(it.alpha.values - it.beta.values)))
        return worst

    def summary(self):
        last = self.iterates[-1] if self.iterates else None
        return {
            "outcome": self.outcome,
            "iterations": self.iterations,
            "lambda_used": self.lambda_used,
            "final_step_alpha": None if last is None else last.step_alpha,
            "final_step_beta": None if last is None else last.step_beta,
            "final_residual_alpha": None if last is None else last.residual_alpha,
            "final_residual_beta": None if last is None else last.residual_beta,
            "violation": self.violation,
        }


def _check_shift(lam, T):
    lam1 = first_eigenvalue(T)
    arr = np.broadcast_to(np.asarray(lam, dtype=float), (T,))
    if not np.all(np.isfinite(arr)):
        raise ValueError("shift must be finite")
    top = float(arr.max())
    if top >= lam1 or abs(top - lam1) < SINGULAR_TOL:
        raise OutOfRegimeError(top, lam1)
    if np.ndim(lam) == 0:
        check_nonsingular(float(lam), T)
    return arr


def step(p: NonlinearProblem, Y, lam):
    """One application of the scheme to the columns of Y, shape (T+2, k)."""
    Y = np.asarray(Y, dtype=float)
    shift = np.broadcast_to(np.asarray(lam, dtype=float), (p.T,))
    t = p.t_interior[:, None]
    rhs = evaluate(p.f, t, Y[1:-1], p.T) - shift[:, None] * Y[1:-1]
    return solve_shifted(shift, rhs, np.zeros(Y.shape[1]))


def _converged(p, it, thr_a, thr_b):
    return (it.step_alpha < p.tol and it.step_beta < p.tol
            and it.residual_alpha < thr_a and it.residual_beta < thr_b)


def monotone_iterate(p: NonlinearProblem, bracket: Bracket, lam):
    """Run both sequences from the bracket until the stopping rule holds.

    ``lam`` is a constant shift or a length-T profile of per-node shifts;
    each entry must be below the corresponding one-sided Lipschitz bound
    (the caller's responsibility, self-checked through monotonicity) and
    below λ₁. Returns (alpha_limit, beta_limit, trace).

    Stops when both step sizes are below ``tol`` and both residuals are
    below ``10*tol`` plus the double-precision rounding floor of the
    equation at the iterate.
    """
    if bracket.T != p.T:
        raise GridError(f"bracket is on T={bracket.T}, problem has T={p.T}")
    shift = _check_shift(lam, p.T)
    constant = np.ndim(lam) == 0
    trace = IterationTrace(
        lambda_used=float(lam) if constant else float(shift.max()),
        lambda_profile=None if constant else shift.copy(),
    )
    a, b = bracket.alpha, bracket.beta
    res_a, res_b = residual_nonlinear(p, a), residual_nonlinear(p, b)
    trace.iterates.append(Iterate(0, a, b, math.nan, math.nan, res_a, res_b))

    if bracket.degenerate:
        thr = 10 * p.tol + rounding_floor(p, a.values)
        trace.outcome = CONVERGED if res_a < thr else MONOTONICITY_VIOLATED
        if trace.outcome != CONVERGED:
            trace.violation = {"n": 0, "reason": "degenerate bracket is not a solution"}
        return a, b, trace

    Y = np.column_stack([a.values, b.values])
    for n in range(1, p.max_iter + 1):
        Ynew = step(p, Y, shift)
        an, bn = Ynew[:, 0], Ynew[:, 1]
        ap, bp = Y[:, 0], Y[:, 1]
        breaches = {
            "alpha_decreased": float(np.max(ap - an)),
            "beta_increased": float(np.max(bn - bp)),
            "alpha_above_beta": float(np.max(an - bn)),
        }
        ma, mb = MeshFunction(p.T, an), MeshFunction(p.T, bn)
        it = Iterate(
            n, ma, mb,
            float(np.max(np.abs(an - ap))), float(np.max(np.abs(bn - bp))),
            residual_nonlinear(p, ma), residual_nonlinear(p, mb),
        )
        trace.iterates.append(it)
        worst = max(breaches, key=breaches.get)
        if breaches[worst] > MONOTONE_SLACK:
            k = int(np.argmax({"alpha_decreased": ap - an, "beta_increased": bn - bp,
                               "alpha_above_beta": an - bn}[worst]))
            trace.outcome = MONOTONICITY_VIOLATED
            trace.violation = {"n": n, "reason": worst, "amount": breaches[worst], "t": k}
            return ma, mb, trace
        Y = Ynew
        if it.step_alpha < p.tol and it.step_beta < p.tol:
            thr_a = 10 * p.tol + rounding_floor(p, an)
            thr_b = 10 * p.tol + rounding_floor(p, bn)
            if _converged(p, it, thr_a, thr_b):
                trace.outcome = CONVERGED
                return ma, mb, trace
    trace.outcome = MAX_ITER_EXCEEDED
    last = trace.iterates[-1]
    return last.alpha, last.beta, trace


@dataclass
class UniquenessVerdict:
    theorem_hypothesis_holds: bool
    empirically_unique: bool
    gap: float
    M_hat: float
    lambda_1: float
    M_positive: bool
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "theorem_hypothesis_holds": self.theorem_hypothesis_holds,
            "empirically_unique": self.empirically_unique,
            "gap": self.gap,
            "M_hat": self.M_hat,
            "lambda_1": self.lambda_1,
            "M_positive": self.M_positive,
            "notes": list(self.notes),
        }


def check_uniqueness(p: NonlinearProblem, bracket: Bracket, result, M_hat=None,
                     seed=0) -> UniquenessVerdict:
    """Report the uniqueness hypothesis and the observed limit gap separately."""
    alpha_lim, beta_lim, trace = result
    if M_hat is None:
        M_hat = estimate_one_sided_lipschitz(p, bracket, seed=seed)
    lam1 = first_eigenvalue(p.T)
    gap = alpha_lim.sup_distance(beta_lim)
    notes = []
    if trace.outcome != CONVERGED:
        notes.append(f"iteration outcome is {trace.outcome}; gap is not a limit gap")
    if math.isfinite(M_hat) and not M_hat > 0:
        notes.append("sampled one-sided constant is not positive; the positive-M "
                     "hypothesis is read as a lower bound on difference quotients")
    if not math.isfinite(M_hat):
        notes.append("bracket is degenerate; no one-sided constant was sampled")
    hyp = bool(math.isfinite(M_hat) and M_hat < lam1)
    return UniquenessVerdict(
        theorem_hypothesis_holds=hyp,
        empirically_unique=bool(trace.outcome == CONVERGED and gap < 10 * p.tol),
        gap=gap,
        M_hat=float(M_hat),
        lambda_1=lam1,
        M_positive=bool(math.isfinite(M_hat) and M_hat > 0),
        notes=notes,
    )
