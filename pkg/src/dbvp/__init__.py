"""Monotone iteration for nonlinear discrete two-point boundary value problems

    -Δ²y(t-1) = f(t, y(t)),  t = 1..T,  y(0) = y(T+1) = 0,

with Green's-function solution formulas, a discrete maximum principle, and
upper/lower-solution brackets.
"""

from .estimators import GreenTransformer, MonotoneSolver
from .exceptions import (
    BadInputError,
    BracketError,
    DBVPError,
    EvaluationError,
    ExpressionSyntaxError,
    GridError,
    HypothesisError,
    OutOfRegimeError,
    ProblemFormatError,
    SingularOperatorError,
    UnknownIdentifierError,
)
from .greens import (
    CertificationReport,
    GreensKernel,
    HomogeneousFactor,
    build_kernel,
    check_maximum_principle,
    homogeneous_factor,
    solve_via_green,
    verify_negativity,
)
from .grid import MeshFunction, delta, delta2
from .linear import LinearProblem, Spectrum, eigenvalues, residual_linear, solve_linear
from .monotone import (
    Bracket,
    IterationTrace,
    NonlinearProblem,
    check_uniqueness,
    choose_shift,
    estimate_one_sided_lipschitz,
    is_lower_solution,
    is_upper_solution,
    monotone_iterate,
    residual_nonlinear,
)
from .problems import ProblemDocument, builtin, evaluate, parse, pretty

__version__ = "0.1.0"
