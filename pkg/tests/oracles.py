"""Reference computations that share no code path with the package.

* dense eigenvalues of the second-difference matrix (numpy.linalg.eigvalsh)
* the kernel and homogeneous factor written literally as branch formulas,
  including the Cauchy-function term, with numpy powers
* damped Newton on the nonlinear system, with f and df/dy from sympy
"""

import math

import numpy as np
import sympy


def laplacian_matrix(T, lam=0.0):
    """Matrix of -Δ² - lam on the interior: diag 2-lam, off-diagonal -1."""
    return (2.0 - lam) * np.eye(T) - np.eye(T, k=1) - np.eye(T, k=-1)


def dense_eigenvalues(T):
    return np.sort(np.linalg.eigvalsh(laplacian_matrix(T)))


def literal_kernel(lam, T):
    """Kernel entries G(t, s), t = 0..T+1, s = 1..T, from the two-branch formulas."""
    G = np.zeros((T + 2, T))
    N = T + 1
    if lam == 0:
        for t in range(T + 2):
            for s in range(1, T + 1):
                G[t, s - 1] = t * (s - N) / N if t <= s else s * (t - N) / N
        return G
    if lam > 0:
        th = math.acos((2.0 - lam) / 2.0)
        for t in range(T + 2):
            for s in range(1, T + 1):
                u = -math.sin(th * (N - s)) * math.sin(th * t) / (math.sin(th) * math.sin(th * N))
                cauchy = math.sin(th * (t - s)) / math.sin(th)
                G[t, s - 1] = u if t <= s else u + cauchy
        return G
    root = math.sqrt((lam - 2.0) ** 2 - 4.0)
    a = ((2.0 - lam) + root) / 2.0
    b = ((2.0 - lam) - root) / 2.0
    for t in range(T + 2):
        for s in range(1, T + 1):
            u = (a ** (N - s) - b ** (N - s)) * (b ** t - a ** t) / ((a - b) * (a ** N - b ** N))
            cauchy = (a ** (t - s) - b ** (t - s)) / (a - b)
            G[t, s - 1] = u if t <= s else u + cauchy
    return G


def literal_psi(lam, T):
    t = np.arange(T + 2, dtype=float)
    N = T + 1
    if lam == 0:
        return t / N
    if lam > 0:
        th = math.acos((2.0 - lam) / 2.0)
        return np.sin(th * t) / math.sin(th * N)
    root = math.sqrt((lam - 2.0) ** 2 - 4.0)
    a = ((2.0 - lam) + root) / 2.0
    b = ((2.0 - lam) - root) / 2.0
    return (a ** t - b ** t) / (a ** N - b ** N)


_t, _y, _T = sympy.symbols("t y T")


def sympy_f(source, T):
    """f and df/dy as numpy callables, compiled by sympy from the source text."""
    expr = sympy.sympify(source.replace("^", "**"), locals={"T": _T, "t": _t, "y": _y})
    expr = expr.subs(_T, T)
    f = sympy.lambdify((_t, _y), expr, "numpy")
    df = sympy.lambdify((_t, _y), sympy.diff(expr, _y), "numpy")
    return (lambda t, y: np.broadcast_to(f(t, y), np.shape(y)).astype(float),
            lambda t, y: np.broadcast_to(df(t, y), np.shape(y)).astype(float))


def newton_solve(source, T, y0=None, tol=1e-13, max_iter=200):
    """Damped Newton for A y = f(t, y) with A the Dirichlet -Δ² matrix.

    Returns the full mesh vector (T+2,) with zero boundary values.
    """
    f, df = sympy_f(source, T)
    A = laplacian_matrix(T)
    t = np.arange(1, T + 1, dtype=float)
    y = np.zeros(T) if y0 is None else np.array(y0, dtype=float)

    def F(v):
        return A @ v - f(t, v)

    r = F(y)
    for _ in range(max_iter):
        J = A - np.diag(df(t, y))
        dy = np.linalg.solve(J, -r)
        step = 1.0
        while True:
            cand = y + step * dy
            with np.errstate(all="ignore"):
                rc = F(cand)
            if np.all(np.isfinite(rc)) and np.linalg.norm(rc) <= (1 - 1e-4 * step) * np.linalg.norm(r):
                break
            step *= 0.5
            if step < 1e-12:
                cand, rc = y + dy, F(y + dy)
                break
        y, r = cand, rc
        if np.max(np.abs(step * dy)) <= tol * max(1.0, np.max(np.abs(y))):
            break
    return np.concatenate(([0.0], y, [0.0]))


def random_problem(rng, T):
    """A random problem with a bracket that is valid by construction.

    f(t, y) = p (1 + sin(t)/2) + a sin(y) - q y^3 - r y with p > 0 and
    a, q, r >= 0. Lower solution 0; upper solution K t (T+1-t) / 2 with
    K = 1.5 p + a, which dominates f wherever y >= 0.
    """
    p = rng.uniform(0.2, 2.0)
    a = rng.uniform(0.0, 0.5)
    q = rng.uniform(0.0, 0.05)
    r = rng.uniform(0.0, 1.0)
    K = 1.5 * p + a
    f = f"{p!r}*(1 + sin(t)/2) + {a!r}*sin(y) - {q!r}*y^3 - {r!r}*y"
    upper = f"{K!r}*t*(T+1-t)/2"
    return {"T": T, "f": f, "lower": "0", "upper": upper}
