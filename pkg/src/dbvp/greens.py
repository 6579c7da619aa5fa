"""Case-split Green's kernel for Δ²y(t-1) + λy(t) with zero Dirichlet data.

Three closed forms cover the regime λ < λ₁:

* ``oscillatory`` (0 < λ < λ₁), with cos θ = (2 - λ)/2,
* ``exponential`` (λ < 0), with roots α, β of m² + (λ - 2)m + 1 = 0,
* ``polynomial`` (λ = 0).

Solutions of ``-Δ²y(t-1) - λy(t) = h(t)``, ``y(0) = 0``, ``y(T+1) = B`` are
``y = B ψ - G h``. Interior kernel entries are strictly negative, which is
what makes the maximum principle work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import GridError, OutOfRegimeError
from .grid import MeshFunction, second_difference
from .linear import (
    SINGULAR_TOL,
    LinearProblem,
    _as_forcing,
    first_eigenvalue,
    solve_linear,
    solve_shifted,
)

ZERO_TOL = 1e-12

OSCILLATORY = "oscillatory"
EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"


def classify(lam):
    if abs(lam) < ZERO_TOL:
        return POLYNOMIAL
    return OSCILLATORY if lam > 0 else EXPONENTIAL


def _check_regime(lam, T):
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
        raise GridError(f"T must be a positive integer, got {T!r}")
    lam = float(lam)
    lam1 = first_eigenvalue(T)
    if not math.isfinite(lam) or lam >= lam1 or abs(lam - lam1) < SINGULAR_TOL:
        raise OutOfRegimeError(lam, lam1)
    return lam, lam1


@dataclass(frozen=True)
class _CaseParams:
    case: str
    theta: float | None = None
    alpha: float | None = None
    beta: float | None = None
    # log(alpha); kept so powers of alpha never overflow
    log_alpha: float | None = None


def _case_params(lam):
    case = classify(lam)
    if case == OSCILLATORY:
        # same angle as arccos((2-lam)/2), without arccos's ill-conditioning near 1
        theta = 2.0 * math.asin(math.sqrt(lam) / 2.0)
        return _CaseParams(case, theta=theta)
    if case == EXPONENTIAL:
        disc = math.sqrt(lam * lam - 4.0 * lam)  # sqrt((lam-2)^2 - 4)
        alpha = ((2.0 - lam) + disc) / 2.0
        beta = 1.0 / alpha  # = ((2-lam) - disc)/2, free of cancellation
        log_alpha = math.log1p((disc - lam) / 2.0)
        return _CaseParams(case, alpha=alpha, beta=beta, log_alpha=log_alpha)
    return _CaseParams(case)


def _one_minus_r_pow(k, log_alpha):
    # 1 - (beta/alpha)^k with beta/alpha = alpha^-2
    return -np.expm1(-2.0 * k * log_alpha)


def _kernel_matrix(T, lam, cp):
    t = np.arange(T + 2, dtype=float)[:, None]
    s = np.arange(1, T + 1, dtype=float)[None, :]
    lo = np.minimum(t, s)
    hi = np.maximum(t, s)
    N = T + 1
    if cp.case == POLYNOMIAL:
        return np.where(t <= s, t * (s - N) / N, s * (t - N) / N)
    if cp.case == OSCILLATORY:
        th = cp.theta
        # t <= s branch of the construction; t >= s follows by the symmetry
        # sin A sin θ(t-s) - sin(A-θs) sin θt = -sin(A-θt) sin θs, which
        # avoids adding the Cauchy term to a nearly opposite quantity
        return -np.sin(th * (N - hi)) * np.sin(th * lo) / (math.sin(th) * math.sin(th * N))
    la = cp.log_alpha
    a_minus_b = cp.alpha - cp.beta
    # (α^{N-hi} - β^{N-hi})(β^lo - α^lo) / ((α-β)(α^N - β^N)), scaled by α^N
    num = np.exp(-(hi - lo) * la) * _one_minus_r_pow(N - hi, la) * _one_minus_r_pow(lo, la)
    return -num / (a_minus_b * _one_minus_r_pow(N, la))


def _psi_values(T, lam, cp):
    t = np.arange(T + 2, dtype=float)
    N = T + 1
    if cp.case == POLYNOMIAL:
        return t / N
    if cp.case == OSCILLATORY:
        return np.sin(cp.theta * t) / math.sin(cp.theta * N)
    la = cp.log_alpha
    return np.exp((t - N) * la) * _one_minus_r_pow(t, la) / _one_minus_r_pow(N, la)


@dataclass(frozen=True, eq=False)
class HomogeneousFactor:
    """ψ with ψ(0) = 0, ψ(T+1) = 1 solving the homogeneous shifted equation."""

    T: int
    lam: float
    psi: MeshFunction

    def residual(self):
        v = self.psi.values
        return float(np.max(np.abs(second_difference(v) + self.lam * v[1:-1])))


@dataclass(frozen=True, eq=False)
class GreensKernel:
    T: int
    lam: float
    case: str
    G: np.ndarray = field(repr=False)
    psi: HomogeneousFactor = field(repr=False)
    theta: float | None = None
    alpha: float | None = None
    beta: float | None = None

    @property
    def interior(self):
        """The T x T block G(t, s) for t, s in [1, T]."""
        return self.G[1:-1, :]

    def __call__(self, t, s):
        if not (0 <= t <= self.T + 1 and 1 <= s <= self.T):
            raise GridError(f"kernel index ({t}, {s}) out of range for T={self.T}")
        return float(self.G[t, s - 1])

    def params(self):
        return {"theta": self.theta, "alpha": self.alpha, "beta": self.beta}

    def impulse_residual(self):
        """Max over columns s of |Δ²G(t-1,s) + λG(t,s) - δ_{ts}|."""
        lhs = second_difference(self.G) + self.lam * self.interior
        return float(np.max(np.abs(lhs - np.eye(self.T))))

    def asymmetry(self):
        Gi = self.interior
        return float(np.max(np.abs(Gi - Gi.T)))

    def apply(self, H, B=0.0):
        """Vectorized representation formula for rows of forcings ``H`` (k, T)."""
        H = np.atleast_2d(np.asarray(H, dtype=float))
        B = np.broadcast_to(np.asarray(B, dtype=float), (H.shape[0],))
        Y = B[:, None] * self.psi.psi.values[None, :] - H @ self.G.T
        Y[:, 0] = 0.0
        Y[:, -1] = B
        return Y


def build_kernel(lam, T) -> GreensKernel:
    lam, _ = _check_regime(lam, T)
    cp = _case_params(lam)
    if cp.case == POLYNOMIAL:
        lam = 0.0
    G = _kernel_matrix(T, lam, cp)
    G[0, :] = 0.0
    G[-1, :] = 0.0
    G.setflags(write=False)
    psi = HomogeneousFactor(T, lam, _psi_mesh(T, lam, cp))
    return GreensKernel(
        T=int(T), lam=lam, case=cp.case, G=G, psi=psi,
        theta=cp.theta, alpha=cp.alpha, beta=cp.beta,
    )


def _psi_mesh(T, lam, cp):
    v = _psi_values(T, lam, cp)
    v[0], v[-1] = 0.0, 1.0
    return MeshFunction(T, v)


def homogeneous_factor(lam, T) -> HomogeneousFactor:
    lam, _ = _check_regime(lam, T)
    cp = _case_params(lam)
    if cp.case == POLYNOMIAL:
        lam = 0.0
    return HomogeneousFactor(int(T), lam, _psi_mesh(T, lam, cp))


def solve_via_green(kernel: GreensKernel, h, B=0.0) -> MeshFunction:
    """y(t) = B ψ(t) - Σ_s G(t,s) h(s), boundary entries set exactly."""
    h = _as_forcing(kernel.T, h)
    if h.T != kernel.T:
        raise GridError(f"forcing is on T={h.T}, kernel has T={kernel.T}")
    return MeshFunction(kernel.T, kernel.apply(h.interior, B)[0])


@dataclass
class CertificationReport:
    name: str
    passed: bool
    value: float
    details: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "details": self.details,
            "violations": self.violations,
        }

    def __bool__(self):
        return self.passed


def verify_negativity(kernel: GreensKernel, max_listed=20) -> CertificationReport:
    Gi = kernel.interior
    bad = np.argwhere(~(Gi < 0.0))
    violations = [(int(i) + 1, int(j) + 1) for i, j in bad[:max_listed]]
    return CertificationReport(
        "negativity",
        passed=bad.size == 0,
        value=float(Gi.max()),
        details={"T": kernel.T, "lambda": kernel.lam, "case": kernel.case,
                 "n_violations": int(len(bad))},
        violations=violations,
    )


def verify_symmetry(kernel, tol=1e-11):
    err = kernel.asymmetry()
    return CertificationReport("symmetry", err < tol, err, {"tol": tol})


def verify_impulse(kernel, tol=1e-10):
    err = kernel.impulse_residual()
    return CertificationReport("impulse", err < tol, err, {"tol": tol})


def verify_kernel(kernel):
    return [verify_negativity(kernel), verify_symmetry(kernel), verify_impulse(kernel)]


def check_maximum_principle(lam, T, trials=100, seed=0, floor=-1e-12) -> CertificationReport:
    """Random nonnegative (h, B) must give nonnegative solutions on both paths.

    The first trial is always h = 0, B = 0.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    kernel = build_kernel(lam, T)
    rng = np.random.default_rng(seed)
    H = rng.uniform(0.0, 1.0, size=(trials, T))
    B = rng.uniform(0.0, 1.0, size=trials)
    H[0] = 0.0
    B[0] = 0.0
    Y_green = kernel.apply(H, B)
    Y_direct = solve_shifted(kernel.lam, H.T, B).T
    mins = np.minimum(Y_green[:, 1:-1].min(axis=1), Y_direct[:, 1:-1].min(axis=1))
    bad = np.flatnonzero(mins < floor)
    return CertificationReport(
        "maximum_principle",
        passed=bad.size == 0,
        value=float(mins.min()),
        details={
            "T": int(T),
            "lambda": kernel.lam,
            "trials": int(trials),
            "seed": seed,
            "path_disagreement": float(np.max(np.abs(Y_green - Y_direct))),
        },
        violations=bad[:20].tolist(),
    )


def direct_column(lam, T, s):
    """Impulse response at s from the direct solver, for cross-checks."""
    e = np.zeros(T)
    e[s - 1] = -1.0  # L G = δ  <=>  -L G = -δ
    return solve_linear(LinearProblem(T, lam, e, 0.0)).values
