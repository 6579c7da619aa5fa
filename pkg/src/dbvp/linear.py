"""Spectrum of the Dirichlet second-difference operator and a direct solver.

The direct solver is deliberately independent of the Green's-function code:
it is the reference every kernel computation is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BadInputError, GridError, SingularOperatorError
from .grid import MeshFunction, second_difference

SINGULAR_TOL = 1e-9
BOUNDARY_TOL = 1e-12
# post-hoc acceptance of the unpivoted elimination, relative to the equation scale
_SOLVE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Spectrum:
    T: int
    eigenvalues: np.ndarray

    @property
    def first(self) -> float:
        return float(self.eigenvalues[0])

    def nearest(self, lam):
        """Return (n, lambda_n) for the eigenvalue closest to ``lam`` (1-based n)."""
        k = int(np.argmin(np.abs(self.eigenvalues - lam)))
        return k + 1, float(self.eigenvalues[k])

    def __len__(self):
        return self.T

    def __iter__(self):
        return iter(self.eigenvalues.tolist())


def eigenvalues(T: int) -> Spectrum:
    """Eigenvalues 2 - 2cos(n pi / (T+1)), n = 1..T, in ascending order.

    Evaluated as 4 sin^2(n pi / (2(T+1))), the same quantity without the
    cancellation in 2 - 2cos for small n / (T+1).
    """
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
        raise GridError(f"T must be a positive integer, got {T!r}")
    n = np.arange(1, T + 1)
    vals = 4.0 * np.sin(n * np.pi / (2.0 * (T + 1))) ** 2
    vals.setflags(write=False)
    return Spectrum(int(T), vals)


def first_eigenvalue(T: int) -> float:
    return 4.0 * math.sin(math.pi / (2.0 * (T + 1))) ** 2


def check_nonsingular(lam, T, tol=SINGULAR_TOL):
    spec = eigenvalues(T)
    n, lam_n = spec.nearest(lam)
    if abs(lam - lam_n) < tol:
        raise SingularOperatorError(lam, n, lam_n)
    return spec


@dataclass(frozen=True)
class LinearProblem:
    """-Δ²y(t-1) - lam*y(t) = h(t) on [1, T], y(0) = 0, y(T+1) = B."""

    T: int
    lam: float
    h: MeshFunction
    B: float = 0.0
    spectrum: Spectrum = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = self.h
        if not isinstance(h, MeshFunction):
            h = _as_forcing(self.T, h)
            object.__setattr__(self, "h", h)
        if h.T != self.T:
            raise GridError(f"forcing is on T={h.T}, problem has T={self.T}")
        lam, B = float(self.lam), float(self.B)
        if not (math.isfinite(lam) and math.isfinite(B)):
            raise BadInputError("lambda and B must be finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "spectrum", check_nonsingular(lam, self.T))

    @property
    def in_maximum_principle_regime(self) -> bool:
        return self.lam < self.spectrum.first

    @classmethod
    def from_dict(cls, doc):
        from .problems import parse_linear_document

        return parse_linear_document(doc)


def _as_forcing(T, h):
    h = np.asarray(h, dtype=float)
    if h.shape == (T,):
        return MeshFunction.from_interior(h)
    if h.shape == (T + 2,):
        return MeshFunction(T, h)
    raise GridError(f"forcing for T={T} needs {T} or {T + 2} values, got {h.shape}")


def thomas(diag, rhs, off=-1.0):
    """Unpivoted elimination for a symmetric tridiagonal system.

    ``diag`` has shape (n,); ``off`` is a scalar or (n-1,) off-diagonal;
    ``rhs`` is (n,) or (n, k). Returns None on an exactly zero pivot.
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.size
    off = np.broadcast_to(np.asarray(off, dtype=float), (max(n - 1, 0),))
    d = np.array(rhs, dtype=float)
    piv = np.empty(n)
    piv[0] = diag[0]
    if piv[0] == 0.0:
        return None
    for k in range(1, n):
        m = off[k - 1] / piv[k - 1]
        piv[k] = diag[k] - m * off[k - 1]
        if piv[k] == 0.0:
            return None
        d[k] = d[k] - m * d[k - 1]
    x = d
    x[n - 1] = x[n - 1] / piv[n - 1]
    for k in range(n - 2, -1, -1):
        x[k] = (x[k] - off[k] * x[k + 1]) / piv[k]
    return x


def solve_shifted(shift, h_interior, B=0.0):
    """Solve -Δ²y(t-1) - shift(t)*y(t) = h(t) with y(0)=0, y(T+1)=B.

    ``shift`` is a scalar or a length-T profile; ``h_interior`` is (T,) or
    (T, k) for k right-hand sides sharing the operator. Returns the full
    (T+2,) or (T+2, k) array including boundary rows. No singularity screening
    is done here beyond the post-hoc residual check.
    """
    h = np.asarray(h_interior, dtype=float)
    T = h.shape[0]
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (T,))
    diag = 2.0 - shift
    rhs = h.copy()
    B = np.asarray(B, dtype=float)
    rhs[-1] = rhs[-1] + B
    x = thomas(diag, rhs)
    if x is None or not _accept(diag, x, rhs):
        A = np.diag(diag) - np.eye(T, k=1) - np.eye(T, k=-1)
        try:
            x = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularOperatorError(None, message=f"singular shifted operator: {exc}")
        if not _accept(diag, x, rhs):
            raise SingularOperatorError(
                None, message="shifted operator too ill-conditioned for a reliable solve"
            )
    out = np.zeros((T + 2,) + h.shape[1:])
    out[1:-1] = x
    out[-1] = B
    return out


def _accept(diag, x, rhs):
    if not np.all(np.isfinite(x)):
        return False
    Ax = diag.reshape((-1,) + (1,) * (x.ndim - 1)) * x
    Ax[1:] -= x[:-1]
    Ax[:-1] -= x[1:]
    scale = np.max(np.abs(rhs)) + np.max(np.abs(diag) + 2.0) * np.max(np.abs(x)) + 1.0
    return float(np.max(np.abs(Ax - rhs))) <= _SOLVE_RTOL * scale


def solve_linear(p: LinearProblem) -> MeshFunction:
    """Direct tridiagonal solve of the linear problem (not via the kernel)."""
    y = solve_shifted(p.lam, p.h.interior, p.B)
    y[0] = 0.0
    y[-1] = p.B
    return MeshFunction(p.T, y)


def solve_linear_with_info(p: LinearProblem):
    y = solve_linear(p)
    info = {
        "lambda": p.lam,
        "lambda_1": p.spectrum.first,
        "residual": residual_linear(p, y),
        "in_maximum_principle_regime": p.in_maximum_principle_regime,
    }
    if not p.in_maximum_principle_regime:
        info["warning"] = "outside maximum-principle regime (lambda >= lambda_1)"
    return y, info


def residual_linear(p: LinearProblem, y: MeshFunction) -> float:
    """Sup-norm defect of y in the interior; inf when boundary values are off."""
    if y.T != p.T:
        raise GridError(f"solution is on T={y.T}, problem has T={p.T}")
    v = y.values
    if abs(v[0]) > BOUNDARY_TOL or abs(v[-1] - p.B) > BOUNDARY_TOL:
        return math.inf
    r = -second_difference(v) - p.lam * v[1:-1] - p.h.interior
    return float(np.max(np.abs(r)))
