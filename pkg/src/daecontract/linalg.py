"""Small dense real linear algebra and matrix measures.

Matrices are 2-D ``numpy`` float arrays. Everything here is meant for the
handful-of-states systems this package deals with (dimension <= ~16), so the
factorizations are written out directly instead of calling LAPACK.
"""

import enum
import math

import numpy as np


class DimensionError(ValueError):
    pass


class SingularMatrix(ArithmeticError):
    """Raised when a matrix is singular or too badly conditioned to invert.

    Applied to dg/dz this signals a loss of the index-1 property.
    """

    def __init__(self, message="matrix is singular", cond=math.inf):
        super().__init__(message)
        self.cond = cond


class NormKind(enum.Enum):
    ONE = "1"
    TWO = "2"
    INF = "inf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"1": cls.ONE, "one": cls.ONE, "2": cls.TWO, "two": cls.TWO,
                   "inf": cls.INF, "infinity": cls.INF, "oo": cls.INF}
        if key not in aliases:
            raise ValueError(f"unknown norm {value!r}; expected 1, 2 or inf")
        return aliases[key]


COND_LIMIT = 1e12
JACOBI_TOL = 1e-14


def as_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def _square(a):
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def symmetric_eigen_max(s):
    """Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrized first, so tiny asymmetries from round-off are
    harmless.
    """
    s = _square(s)
    a = 0.5 * (s + s.T)
    n = a.shape[0]
    if n == 0:
        return -math.inf
    if n == 1:
        return float(a[0, 0])
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(100):
        off = math.sqrt(2.0 * sum(a[i, j] ** 2 for i in range(n) for j in range(i + 1, n)))
        if off < JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff  # theta would overflow; tan of the angle is ~1/(2 theta)
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                # rotate rows/cols p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - sn * aq
                a[:, q] = sn * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - sn * aq
                a[q, :] = sn * ap + c * aq
                a[p, q] = a[q, p] = 0.0
    return float(np.max(np.diag(a)))


def matrix_measure(a, p):
    """Logarithmic norm mu_p(A) for p in {1, 2, inf}."""
    a = _square(a)
    p = NormKind.parse(p)
    if a.shape[0] == 0:
        return -math.inf
    diag = np.diag(a)
    off = np.abs(a) - np.diag(np.abs(diag))
    if p is NormKind.ONE:
        return float(np.max(diag + off.sum(axis=0)))
    if p is NormKind.INF:
        return float(np.max(diag + off.sum(axis=1)))
    return symmetric_eigen_max(0.5 * (a + a.T))


def induced_norm(a, p):
    a = as_matrix(a)
    p = NormKind.parse(p)
    if a.size == 0:
        return 0.0
    if p is NormKind.ONE:
        return float(np.abs(a).sum(axis=0).max())
    if p is NormKind.INF:
        return float(np.abs(a).sum(axis=1).max())
    return math.sqrt(max(symmetric_eigen_max(a.T @ a), 0.0))


def vector_norm(x, p):
    x = np.asarray(x, dtype=float).ravel()
    p = NormKind.parse(p)
    if x.size == 0:
        return 0.0
    if p is NormKind.ONE:
        return float(np.abs(x).sum())
    if p is NormKind.INF:
        return float(np.abs(x).max())
    return float(math.sqrt(np.dot(x, x)))


def lu_factor(a):
    """LU factorization with partial (row) pivoting.

    Returns ``(lu, perm)`` with unit-lower L and U packed in ``lu`` and
    ``perm`` the row order, so that ``a[perm] == L @ U``.
    """
    lu = _square(a).copy()
    n = lu.shape[0]
    perm = list(range(n))
    for k in range(n):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[piv, k] == 0.0:
            raise SingularMatrix(f"zero pivot in column {k}")
        if piv != k:
            lu[[k, piv]] = lu[[piv, k]]
            perm[k], perm[piv] = perm[piv], perm[k]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def lu_solve(factors, b):
    lu, perm = factors
    b = np.asarray(b, dtype=float)
    x = b[perm].copy()
    n = lu.shape[0]
    for i in range(n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def invert(a):
    """Inverse via LU; raises SingularMatrix when cond_1 exceeds 1e12."""
    a = _square(a)
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(a)):
        raise SingularMatrix("matrix has non-finite entries")
    if n == 1:
        # fast path; the 1x1 condition number is always 1
        if a[0, 0] == 0.0:
            raise SingularMatrix("zero pivot in column 0")
        return np.array([[1.0 / a[0, 0]]])
    inv = lu_solve(lu_factor(a), np.eye(n))
    cond = induced_norm(a, NormKind.ONE) * induced_norm(inv, NormKind.ONE)
    if not math.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrix(f"condition estimate {cond:.3g} exceeds {COND_LIMIT:g}", cond)
    return inv


def solve(a, b):
    """Solve ``a x = b`` (b a vector or matrix) through :func:`invert`."""
    return invert(a) @ np.asarray(b, dtype=float)
