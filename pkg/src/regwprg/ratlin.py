"""Exact rational dense linear algebra on numpy object arrays.

Matrices are plain ``numpy.ndarray`` objects with ``dtype=object`` whose
entries are :class:`fractions.Fraction` (ints are tolerated and behave the
same).  Everything here is exact except :func:`two_norm_num`, which is the
one floating point routine.
"""

from fractions import Fraction
import json

import numpy as np

__all__ = [
    "as_fraction",
    "rat_matrix",
    "rat_vector",
    "identity",
    "zeros",
    "mat_mul",
    "lin_combine",
    "inf_norm",
    "two_norm_num",
    "to_float",
    "is_zero",
    "row_sums",
    "col_sums",
    "is_doubly_stochastic",
    "null_space",
    "matrix_to_json",
    "matrix_from_json",
    "frozen",
]


def as_fraction(x):
    """Convert ``x`` to a Fraction without going through binary floats.

    Floats are read through their shortest repr, so ``0.49`` becomes
    ``49/100`` rather than the nearest double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(repr(float(x)))
    return Fraction(x)


def rat_matrix(rows):
    a = np.array([[as_fraction(x) for x in row] for row in rows], dtype=object)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("a matrix needs at least one row and one column")
    return a


def rat_vector(entries):
    v = np.array([as_fraction(x) for x in entries], dtype=object)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError("a vector needs at least one entry")
    return v


def identity(w):
    out = np.full((w, w), Fraction(0), dtype=object)
    for i in range(w):
        out[i, i] = Fraction(1)
    return out


def zeros(rows, cols=None):
    return np.full((rows, rows if cols is None else cols), Fraction(0), dtype=object)


def frozen(a):
    """Mark ``a`` read-only and return it."""
    a.flags.writeable = False
    return a


def mat_mul(a, b):
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def lin_combine(terms):
    """Exact ``sum(coef * m)`` over a nonempty list of ``(coef, m)`` pairs."""
    terms = list(terms)
    if not terms:
        raise ValueError("lin_combine needs at least one term")
    shape = terms[0][1].shape
    out = zeros(*shape) if len(shape) == 2 else np.full(shape, Fraction(0), dtype=object)
    for coef, m in terms:
        if m.shape != shape:
            raise ValueError(f"dimension mismatch: {m.shape} vs {shape}")
        out = out + as_fraction(coef) * m
    return out


def inf_norm(a):
    """Maximum absolute row sum, exact."""
    if a.ndim == 1:
        return max(abs(x) for x in a)
    return max(sum((abs(x) for x in row), Fraction(0)) for row in a)


def to_float(a):
    return np.array(a, dtype=float)


def two_norm_num(a, tol=1e-12):
    """Largest singular value via a symmetric eigensolve of ``a.T @ a``.

    Raises ``numpy.linalg.LinAlgError`` if the eigensolver does not converge.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    af = to_float(a)
    ev = np.linalg.eigvalsh(af.T @ af)
    return float(np.sqrt(max(ev[-1], 0.0)))


def is_zero(a):
    return all(x == 0 for x in np.ravel(a))


def row_sums(a):
    return [sum(row, Fraction(0)) for row in a]


def col_sums(a):
    return [sum(col, Fraction(0)) for col in a.T]


def is_doubly_stochastic(a, nonnegative=True):
    """Row and column sums exactly 1 (and entries >= 0 unless told otherwise)."""
    if a.shape[0] != a.shape[1]:
        return False
    if nonnegative and any(x < 0 for x in np.ravel(a)):
        return False
    return all(s == 1 for s in row_sums(a)) and all(s == 1 for s in col_sums(a))


def null_space(a):
    """Exact basis of the right kernel of ``a`` as columns of a matrix.

    Returns an array of shape ``(cols, nullity)``; nullity may be zero.
    """
    m = np.array(a, dtype=object, copy=True)
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if m[i, c] != 0), None)
        if p is None:
            continue
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r] = m[r] / m[r, c]
        for i in range(rows):
            if i != r and m[i, c] != 0:
                m[i] = m[i] - m[i, c] * m[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    basis = np.full((cols, len(free)), Fraction(0), dtype=object)
    for j, f in enumerate(free):
        basis[f, j] = Fraction(1)
        for i, pc in enumerate(pivots):
            basis[pc, j] = -m[i, f]
    return basis


def _frac_str(x):
    x = as_fraction(x)
    return f"{x.numerator}/{x.denominator}"


def matrix_to_json(a):
    """``{"rows", "cols", "entries"}`` with entries as ``"p/q"`` strings."""
    rows, cols = a.shape
    return {"rows": rows, "cols": cols, "entries": [_frac_str(x) for x in np.ravel(a)]}


def matrix_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    rows, cols = obj["rows"], obj["cols"]
    entries = [Fraction(s) for s in obj["entries"]]
    if rows < 1 or cols < 1 or len(entries) != rows * cols:
        raise ValueError("entry count does not match rows * cols")
    return np.array(entries, dtype=object).reshape(rows, cols)
