"""Edge-disagreement weights of a program and weight-approximation checks."""

import csv
from fractions import Fraction
import itertools

import numpy as np

from .approx import EpsSchedule, bs_intervals, level_matrix
from .ratlin import as_fraction, inf_norm, rat_vector
from .robp import layer_rw, rw_matrix

__all__ = [
    "WeightApproxViolation",
    "BaseCertificationError",
    "w_star",
    "layer_weight",
    "total_weight",
    "weight_functionals",
    "weight_test_set",
    "weight_approx_error",
    "wprg_main_harness",
    "write_harness_csv",
]


class WeightApproxViolation(ValueError):
    """A zero-weight direction is moved by the candidate matrix."""


class BaseCertificationError(RuntimeError):
    pass


def w_star(b):
    return Fraction(b.w * b.w)


def layer_weight(b, i, y):
    """Sum over states ``u`` and bits of ``|(M_i y)[u] - y[B_i(u, bit)]|``."""
    if len(y) != b.w:
        raise ValueError(f"vector has dimension {len(y)}, expected {b.w}")
    my = layer_rw(b, i) @ y
    total = Fraction(0)
    for u, (t0, t1) in enumerate(b.layers[i - 1]):
        total += abs(my[u] - y[t0]) + abs(my[u] - y[t1])
    return total


def total_weight(b, l, r, y):
    """``W(l, r, y) = sum_{i=l+1}^{r} W(i, M_{i..r} y)``."""
    if not 0 <= l <= r <= b.n:
        raise IndexError(f"interval ({l}, {r}) outside 0..{b.n}")
    return sum((layer_weight(b, i, rw_matrix(b, i, r) @ y) for i in range(l + 1, r + 1)), Fraction(0))


def weight_functionals(b, l, r):
    """Rows ``f`` with ``W(l, r, y) = sum |f . y|``, one per edge between layers l and r.

    The edge from ``u`` at layer ``i-1`` on bit ``c`` contributes
    ``M_{i-1..r}[u] - M_{i..r}[B_i(u, c)]``.  Identically zero rows are dropped.
    """
    rows = []
    for i in range(l + 1, r + 1):
        before = rw_matrix(b, i - 1, r)
        after = rw_matrix(b, i, r)
        for u, pair in enumerate(b.layers[i - 1]):
            for t in pair:
                f = before[u] - after[t]
                if any(x != 0 for x in f):
                    rows.append(f)
    if not rows:
        return np.empty((0, b.w), dtype=object)
    return np.array(rows, dtype=object)


def weight_test_set(w, n_random=16, seed=0, max_sign_width=10):
    """Basis vectors, all +-1 vectors (small widths), and seeded random rationals."""
    vecs = []
    for u in range(w):
        vecs.append(rat_vector([1 if v == u else 0 for v in range(w)]))
    if w <= max_sign_width:
        for signs in itertools.product((1, -1), repeat=w):
            vecs.append(rat_vector(signs))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        vecs.append(rat_vector([Fraction(int(x), 64) for x in rng.integers(-64, 65, size=w)]))
    return vecs


def weight_approx_error(b, m_tilde, l, r, test_set, w_star_value=None):
    """Largest ``||(m_tilde - M_{l..r}) y||_inf * W* / W(l, r, y)`` over the test set.

    This is a lower bound on the true weight-approximation parameter.
    Vectors of zero weight are required to be mapped to zero exactly.
    """
    ws = w_star(b) if w_star_value is None else as_fraction(w_star_value)
    diff = m_tilde - rw_matrix(b, l, r)
    worst = Fraction(0)
    for y in test_set:
        img = diff @ y
        weight = total_weight(b, l, r, y)
        if weight == 0:
            if any(x != 0 for x in img):
                raise WeightApproxViolation(f"zero-weight vector {list(map(str, y))} has nonzero image on ({l}, {r})")
            continue
        worst = max(worst, inf_norm(img) * ws / weight)
    return worst


def wprg_main_harness(b, gamma, k_max, provider, test_set=None, w_star_value=None):
    """Check that every level-k matrix is a ``C_t eps(k)`` weight approximation on the test set.

    The level-0 matrices must first pass at ``eps(0)/3``; otherwise
    :class:`BaseCertificationError` names the offending interval.
    """
    schedule = EpsSchedule(gamma, b.n)
    if test_set is None:
        test_set = weight_test_set(b.w)
    base_bound = schedule.eps(0) / 3
    for l, r in bs_intervals(b.n, min_len=2):
        e = weight_approx_error(b, provider.base(l, r), l, r, test_set, w_star_value)
        if e > base_bound:
            raise BaseCertificationError(f"base ({l}, {r}) has weight error {e} > {base_bound}")
    rows = []
    for l, r in bs_intervals(b.n):
        t = (r - l).bit_length() - 1
        for k in range(k_max + 1):
            measured = weight_approx_error(b, level_matrix(provider, l, r, k), l, r, test_set, w_star_value)
            bound = schedule.growth(t) * schedule.eps(k)
            rows.append({"l": l, "r": r, "k": k, "t": t, "measured_error": measured,
                         "bound": bound, "pass": measured <= bound})
    return rows


def write_harness_csv(rows, path):
    cols = ["l", "r", "k", "t", "measured_error", "bound", "pass"]
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(cols)
        for row in rows:
            out.writerow([row[c] for c in cols])
