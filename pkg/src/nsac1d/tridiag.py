"""Thomas algorithm for tridiagonal systems."""
from __future__ import annotations

import numpy as np


class SingularSystemError(ArithmeticError):
    pass


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Solve ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``.

    All four arrays have length n; ``lower[0]`` and ``upper[-1]`` are ignored.
    No pivoting, so the matrix should be diagonally dominant (every system
    assembled by the integrator is).
    """
    b = np.asarray(diag, dtype=np.float64)
    n = b.shape[0]
    a = np.asarray(lower, dtype=np.float64)
    c = np.asarray(upper, dtype=np.float64)
    d = np.asarray(rhs, dtype=np.float64)
    if not (a.shape == b.shape == c.shape == d.shape == (n,)) or n == 0:
        raise ValueError("lower, diag, upper and rhs must be 1-D arrays of equal nonzero length")

    # plain floats are several times faster than numpy scalars in this loop
    a, b, c, d = a.tolist(), b.tolist(), c.tolist(), d.tolist()
    cp = [0.0] * n
    dp = [0.0] * n
    denom = b[0]
    if denom == 0.0:
        raise SingularSystemError("zero pivot in row 0")
    cp[0] = c[0] / denom
    dp[0] = d[0] / denom
    for i in range(1, n):
        denom = b[i] - a[i] * cp[i - 1]
        if denom == 0.0:
            raise SingularSystemError(f"zero pivot in row {i}")
        cp[i] = c[i] / denom
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom
    x = dp
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def tridiagonal_matvec(lower, diag, upper, x) -> np.ndarray:
    """Product of the tridiagonal matrix with ``x`` (same conventions)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(diag) * x
    y[1:] += np.asarray(lower)[1:] * x[:-1]
    y[:-1] += np.asarray(upper)[:-1] * x[1:]
    return y


def dense_matrix(lower, diag, upper) -> np.ndarray:
    n = len(diag)
    m = np.diag(np.asarray(diag, dtype=np.float64))
    if n > 1:
        m += np.diag(np.asarray(lower, dtype=np.float64)[1:], -1)
        m += np.diag(np.asarray(upper, dtype=np.float64)[:-1], 1)
    return m
