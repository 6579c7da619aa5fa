"""scikit-learn style front ends.

``GreenTransformer`` maps forcing rows to solutions of the shifted linear
problem; ``MonotoneSolver`` fits a nonlinear problem by monotone iteration.
Both follow the usual estimator contract: hyperparameters in ``__init__``,
learned state in trailing-underscore attributes, ``get_params`` and
``set_params`` from ``BaseEstimator``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import BracketError
from .greens import build_kernel
from .grid import MeshFunction
from .linear import eigenvalues, solve_shifted, check_nonsingular
from .monotone import (
    CONVERGED,
    NonlinearProblem,
    check_uniqueness,
    choose_shift,
    is_lower_solution,
    is_upper_solution,
    monotone_iterate,
    nodewise_lipschitz,
    residual_nonlinear,
)
from .problems import ProblemDocument, builtin

SHIFTS = ("nodewise", "constant")


class GreenTransformer(TransformerMixin, BaseEstimator):
    """Solve -Δ²y(t-1) - lam*y(t) = h(t), y(0)=0, y(T+1)=B for many forcings.

    Parameters
    ----------
    lam : float, default=0.0
        Shift. The ``"green"`` method requires lam < λ₁(T).
    method : {"green", "direct"}, default="green"
        Kernel representation or direct tridiagonal solve.

    Attributes
    ----------
    n_features_in_ : int
        Grid size T (forcings have one column per interior node).
    spectrum_ : Spectrum
    kernel_ : GreensKernel or None
    """

    def __init__(self, lam=0.0, method="green"):
        self.lam = lam
        self.method = method

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if self.method not in ("green", "direct"):
            raise ValueError(f"method must be 'green' or 'direct', got {self.method!r}")
        T = X.shape[1]
        self.n_features_in_ = T
        self.spectrum_ = eigenvalues(T)
        if self.method == "green":
            self.kernel_ = build_kernel(self.lam, T)
        else:
            check_nonsingular(float(self.lam), T)
            self.kernel_ = None
        return self

    def transform(self, X, B=0.0):
        """Return solutions, shape (n_samples, T+2), boundary columns included."""
        check_is_fitted(self, "spectrum_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but GreenTransformer was fitted with "
                f"{self.n_features_in_}"
            )
        if self.kernel_ is not None:
            return self.kernel_.apply(X, B)
        B = np.broadcast_to(np.asarray(B, dtype=float), (X.shape[0],))
        return solve_shifted(float(self.lam), X.T, B).T


class MonotoneSolver(BaseEstimator):
    """Monotone iteration between a lower and an upper solution.

    Parameters
    ----------
    shift : {"nodewise", "constant"}, default="nodewise"
        ``"constant"`` uses one λ = min(M, kappa λ₁) at every node.
        ``"nodewise"`` uses λ(t) = min(M(t), kappa λ₁) with M(t) the bound at
        node t; the maximum principle still holds since every λ(t) < λ₁.
    lam : float, optional
        Fixed constant shift; overrides ``shift`` and ``M``.
    M : float, optional
        Declared one-sided Lipschitz constant; selects a constant shift.
        Falls back to the problem's own declared M when unset.
    kappa : float, default=0.9
        Fraction of λ₁ used as the cap on the shift.
    tol, max_iter : optional
        Override the problem's stopping parameters.
    samples_per_node, random_pairs : int
        Sampling density for the one-sided Lipschitz estimate.
    random_state : int, default=0
        Seed for the random pairs.
    """

    def __init__(self, shift="nodewise", lam=None, M=None, kappa=0.9, tol=None,
                 max_iter=None, samples_per_node=64, random_pairs=64, random_state=0):
        self.shift = shift
        self.lam = lam
        self.M = M
        self.kappa = kappa
        self.tol = tol
        self.max_iter = max_iter
        self.samples_per_node = samples_per_node
        self.random_pairs = random_pairs
        self.random_state = random_state

    def _problem(self, problem, T):
        if isinstance(problem, str):
            problem = builtin(problem, T)
        if isinstance(problem, ProblemDocument):
            problem = NonlinearProblem.from_document(problem, T)
        if not isinstance(problem, NonlinearProblem):
            raise TypeError(f"cannot fit {type(problem).__name__}")
        if self.tol is not None or self.max_iter is not None:
            problem = NonlinearProblem(
                problem.T, problem.f, problem.lower_expr, problem.upper_expr,
                M_declared=problem.M_declared,
                tol=problem.tol if self.tol is None else float(self.tol),
                max_iter=problem.max_iter if self.max_iter is None else int(self.max_iter),
            )
        return problem

    def select_shift(self, problem, bracket):
        """Return (shift, M_hat, M_profile) without iterating."""
        if self.shift not in SHIFTS:
            raise ValueError(f"shift must be one of {SHIFTS}, got {self.shift!r}")
        kw = dict(samples_per_node=self.samples_per_node, random_pairs=self.random_pairs,
                  seed=self.random_state)
        raw = nodewise_lipschitz(problem, bracket, **kw)
        safe = nodewise_lipschitz(problem, bracket, conservative=True, **kw)
        M_hat = float(raw.min())
        T = problem.T
        M = self.M if self.M is not None else problem.M_declared
        if self.lam is not None:
            lam = float(self.lam)
        elif M is not None:
            lam = choose_shift(float(M), T, self.kappa)
        elif self.shift == "constant":
            lam = choose_shift(float(safe.min()), T, self.kappa)
        else:
            lam = choose_shift(safe, T, self.kappa)
        return lam, M_hat, safe

    def fit(self, problem, T=None):
        """Validate the bracket, pick λ, iterate.

        ``problem`` is a ``NonlinearProblem``, a ``ProblemDocument`` or a
        builtin name. Raises ``BracketError`` when the bracket fails
        validation; iteration failures are recorded in ``outcome_``.
        """
        p = self._problem(problem, T)
        bracket = p.bracket()
        self.lower_report_ = is_lower_solution(p, bracket.alpha)
        self.upper_report_ = is_upper_solution(p, bracket.beta)
        if not (self.lower_report_ and self.upper_report_):
            bad = [r for r in (self.lower_report_, self.upper_report_) if not r]
            raise BracketError(
                "; ".join(
                    f"{r.kind} solution check failed (min slack {r.min_slack:.3e} at t={r.argmin_t}, "
                    f"boundary_ok={r.boundary_ok})" for r in bad
                )
            )
        lam, M_hat, safe = self.select_shift(p, bracket)
        alpha, beta, trace = monotone_iterate(p, bracket, lam)
        self.problem_ = p
        self.bracket_ = bracket
        self.M_hat_ = M_hat
        self.M_profile_ = safe
        self.lambda_ = lam
        self.alpha_ = alpha
        self.beta_ = beta
        self.trace_ = trace
        self.outcome_ = trace.outcome
        self.n_iter_ = trace.iterations
        self.solution_ = MeshFunction(p.T, 0.5 * (alpha.values + beta.values))
        self.uniqueness_ = check_uniqueness(p, bracket, (alpha, beta, trace), M_hat=M_hat)
        return self

    @property
    def converged_(self):
        check_is_fitted(self, "trace_")
        return self.outcome_ == CONVERGED

    def predict(self, t=None):
        """Solution values at grid indices ``t`` (all of 0..T+1 by default)."""
        check_is_fitted(self, "solution_")
        v = self.solution_.values
        if t is None:
            return v.copy()
        idx = np.asarray(t)
        if not np.issubdtype(idx.dtype, np.integer) or np.any(idx < 0) or np.any(idx > self.problem_.T + 1):
            raise IndexError("grid indices must be integers in [0, T+1]")
        return v[idx]

    def score(self, problem=None):
        """Negative sup-norm residual of the fitted solution."""
        check_is_fitted(self, "solution_")
        p = self.problem_ if problem is None else self._problem(problem, self.problem_.T)
        return -residual_nonlinear(p, self.solution_)
