"""Generalized recursion on arbitrary intervals, the h-split identity,
block inverse-Laplacian checks and the white-box expectation estimator.

For a non-dyadic interval the split point is the LCA: the multiple of the
largest power of two lying strictly inside ``(l, r)``.  Level-0 matrices of
such intervals are products of level-0 matrices of dyadic pieces.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .approx import EpsSchedule, bs_intervals, is_bs, level_matrix
from .providers import RoundedProvider
from .ratlin import as_fraction, frozen, identity, is_zero, zeros
from .robp import layer_rw, rw_matrix, start_accept_vectors
from .svapprox import sv_error
from .weights import BaseCertificationError

__all__ = [
    "lca",
    "lca_scan",
    "base_factorization",
    "level_matrix_general",
    "SpaceLedger",
    "newrec_matrix",
    "BlockLaplacian",
    "richardson_check",
    "choose_gamma",
    "EstimateReport",
    "estimate_report",
    "estimate_expectation",
]


def lca_scan(l, r):
    """Scan ``t`` downward for the first power ``2**t`` with a multiple strictly inside ``(l, r)``."""
    if l >= r:
        raise ValueError(f"need l < r, got ({l}, {r})")
    if r - l < 2:
        raise ValueError(f"({l}, {r}) has no integer strictly inside")
    for t in range(r.bit_length(), -1, -1):
        step = 1 << t
        m = (l // step + 1) * step
        if m < r:
            return m
    raise AssertionError("unreachable")


def lca(l, r):
    """Split point of ``(l, r)``; the midpoint for dyadic intervals."""
    if l >= r:
        raise ValueError(f"need l < r, got ({l}, {r})")
    d = r - l
    if d >= 2 and d & (d - 1) == 0 and l % d == 0:
        return (l + r) // 2
    return lca_scan(l, r)


def base_factorization(l, r, n):
    """Dyadic pieces, left to right, whose level-0 product is the generalized level-0 matrix of ``(l, r)``."""
    if not 0 <= l < r <= n:
        raise ValueError(f"need 0 <= l < r <= {n}, got ({l}, {r})")
    if is_bs(l, r, n):
        return [(l, r)]
    m = lca(l, r)
    return base_factorization(l, m, n) + base_factorization(m, r, n)


def level_matrix_general(p, l, r, k):
    """``M^(k)_{l..r}`` for any ``0 <= l <= r <= n``, splitting at the LCA."""
    if k < 0:
        raise ValueError("level must be non-negative")
    if not 0 <= l <= r <= p.n:
        raise IndexError(f"interval ({l}, {r}) outside 0..{p.n}")
    if l == r:
        return identity(p.w)
    if is_bs(l, r, p.n):
        return level_matrix(p, l, r, k)
    with p._lock:
        hit = p._general.get((l, r, k))
    if hit is not None:
        return hit
    m = lca(l, r)
    if k == 0:
        out = level_matrix_general(p, l, m, 0) @ level_matrix_general(p, m, r, 0)
    else:
        left = [level_matrix_general(p, l, m, i) for i in range(k + 1)]
        right = [level_matrix_general(p, m, r, j) for j in range(k + 1)]
        out = left[0] @ right[k]
        for i in range(1, k + 1):
            out = out + left[i] @ right[k - i]
        for i in range(k):
            out = out - left[i] @ right[k - 1 - i]
    frozen(out)
    with p._lock:
        p._general[(l, r, k)] = out
    return out


@dataclass
class SpaceLedger:
    """Counters standing in for working space: split depth, peak retained matrices, base-case calls."""

    max_recursion_depth: int = 0
    max_live_matrices: int = 0
    base_calls: int = 0

    def to_dict(self):
        return {"depth": self.max_recursion_depth, "live_peak": self.max_live_matrices,
                "base_calls": self.base_calls}


class _Eval:
    def __init__(self, p, memo):
        self.p = p
        self.memo = {} if memo else None
        self.ledger = SpaceLedger()
        self.frames = 0

    def live(self, extra=0):
        held = len(self.memo) if self.memo is not None else 0
        self.ledger.max_live_matrices = max(self.ledger.max_live_matrices, held + 3 * self.frames + extra)

    def get(self, l, r, k):
        if l == r:
            return identity(self.p.w)
        if k == 0:
            self.ledger.base_calls += 1
            return level_matrix_general(self.p, l, r, 0)
        if self.memo is not None and (l, r, k) in self.memo:
            return self.memo[(l, r, k)]
        out = self.split(l, r, k, (k + 1) // 2)
        if self.memo is not None:
            self.memo[(l, r, k)] = out
        return out

    def split(self, l, r, k, h):
        self.frames += 1
        self.ledger.max_recursion_depth = max(self.ledger.max_recursion_depth, self.frames)
        self.live()
        acc = zeros(self.p.w)
        for s in range(l + 1, r + 1):
            acc = acc + self.get(l, s - 1, h - 1) @ layer_rw(self.p.program, s) @ self.get(s, r, k - h)
            self.live()
        for s in range(l + 1, r):
            acc = acc - self.get(l, s, h - 1) @ self.get(s, r, k - h)
            self.live()
        self.frames -= 1
        return acc


def newrec_matrix(p, l, r, k, h=None, memo=True):
    """``M^(k)_{l..r}`` through the h-split identity.

    The top call splits at ``h`` (default ``ceil(k/2)``); every sub-term of
    level ``k' >= 1`` splits at ``ceil(k'/2)``, so the number of nested
    splits is ``floor(log2 k) + 1``.  Sums run left to right.  With
    ``memo=True`` sub-terms are cached for the duration of the call and the
    cache counts toward the live-matrix peak.  Returns ``(matrix, ledger)``.
    """
    if not 0 <= l < r <= p.n:
        raise ValueError(f"need 0 <= l < r <= {p.n}, got ({l}, {r})")
    if k < 0:
        raise ValueError("level must be non-negative")
    ev = _Eval(p, memo)
    if k == 0:
        if h is not None:
            raise ValueError("h must lie in 1..k")
        return ev.get(l, r, 0), ev.ledger
    if h is None:
        h = (k + 1) // 2
    if not 1 <= h <= k:
        raise ValueError(f"h must lie in 1..{k}, got {h}")
    return ev.split(l, r, k, h), ev.ledger


class BlockLaplacian:
    """Upper block-triangular ``(n+1) x (n+1)`` array of ``w x w`` blocks; ``None`` is a zero block."""

    def __init__(self, n, w, blocks=None):
        self.n, self.w = n, w
        self.size = n + 1
        self.blocks = blocks or [[None] * self.size for _ in range(self.size)]

    @classmethod
    def identity(cls, n, w):
        out = cls(n, w)
        for i in range(out.size):
            out.blocks[i][i] = identity(w)
        return out

    @classmethod
    def laplacian(cls, program):
        """``L = I - W`` with ``W[i-1, i] = M_i``."""
        out = cls.identity(program.n, program.w)
        for i in range(1, program.n + 1):
            out.blocks[i - 1][i] = -layer_rw(program, i)
        return out

    @classmethod
    def from_function(cls, n, w, f):
        """Blocks ``f(i, j)`` for ``i <= j``; zero below the diagonal."""
        out = cls(n, w)
        for i in range(out.size):
            for j in range(i, out.size):
                out.blocks[i][j] = f(i, j)
        return out

    def block(self, i, j):
        b = self.blocks[i][j]
        return zeros(self.w) if b is None else b

    def _combine(self, other, sign):
        out = BlockLaplacian(self.n, self.w)
        for i in range(self.size):
            for j in range(self.size):
                a, b = self.blocks[i][j], other.blocks[i][j]
                if a is None and b is None:
                    continue
                out.blocks[i][j] = (self.block(i, j) + sign * other.block(i, j))
        return out

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __matmul__(self, other):
        out = BlockLaplacian(self.n, self.w)
        for i in range(self.size):
            for j in range(self.size):
                acc = None
                for m in range(self.size):
                    a, b = self.blocks[i][m], other.blocks[m][j]
                    if a is None or b is None:
                        continue
                    acc = a @ b if acc is None else acc + a @ b
                out.blocks[i][j] = acc
        return out

    def inverse_unit_upper(self):
        """Inverse of a unit upper block-triangular matrix by block back substitution."""
        out = BlockLaplacian(self.n, self.w)
        for j in range(self.size):
            for i in range(j, -1, -1):
                acc = identity(self.w) if i == j else zeros(self.w)
                for m in range(i + 1, j + 1):
                    a, x = self.blocks[i][m], out.blocks[m][j]
                    if a is not None and x is not None:
                        acc = acc - a @ x
                out.blocks[i][j] = acc
        return out

    def equals_blocks(self, f):
        """Keys ``(i, j)`` where the block differs from ``f(i, j)`` (zero below the diagonal)."""
        bad = []
        for i in range(self.size):
            for j in range(self.size):
                want = f(i, j) if i <= j else zeros(self.w)
                if not is_zero(self.block(i, j) - want):
                    bad.append((i, j))
        return bad


def richardson_check(p, k):
    """Block-level check that Richardson iteration on ``L`` reproduces the level-k matrices.

    Returns a dict with the mismatching block keys for each identity and an
    overall ``pass`` flag.
    """
    if k < 0:
        raise ValueError("level must be non-negative")
    b = p.program
    if b.n > 32:
        raise ValueError("dense block check is capped at n <= 32")
    lap = BlockLaplacian.laplacian(b)
    approx_inv = BlockLaplacian.from_function(b.n, b.w, lambda i, j: level_matrix_general(p, i, j, 0))
    one = BlockLaplacian.identity(b.n, b.w)
    resid = one - lap @ approx_inv
    x = approx_inv
    for _ in range(k):
        x = approx_inv + x @ resid
    bad_level = x.equals_blocks(lambda i, j: level_matrix_general(p, i, j, k))

    def resid_block(i, j):
        if i == j:
            return zeros(b.w)
        return layer_rw(b, i + 1) @ level_matrix_general(p, i + 1, j, 0) - level_matrix_general(p, i, j, 0)

    bad_resid = resid.equals_blocks(resid_block)
    bad_inverse = lap.inverse_unit_upper().equals_blocks(lambda i, j: rw_matrix(b, i, j))
    return {
        "k": k, "n": b.n, "w": b.w, "provider": p.kind,
        "level_mismatch": bad_level, "residual_mismatch": bad_resid, "inverse_mismatch": bad_inverse,
        "pass": not (bad_level or bad_resid or bad_inverse),
    }


def choose_gamma(n):
    """``1/log2(n)``, or ``1/3`` when that is not below ``1/2`` (``n <= 4``)."""
    log_n = n.bit_length() - 1
    return Fraction(1, log_n) if log_n >= 3 else Fraction(1, 3)


class EstimateReport(NamedTuple):
    value: Fraction
    ledger: SpaceLedger
    k: int
    gamma: Fraction
    base_bound: Fraction
    base_errors: dict
    grid_used: dict


def estimate_report(b, eps, grid_bits=1, fill_budget=True, tol=1e-9):
    """The estimator with its configuration: value, ledger, level, schedule and base certificates."""
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    gamma = choose_gamma(b.n)
    schedule = EpsSchedule(gamma, b.n)
    k = schedule.min_level(eps * eps / b.w, squared=True)
    base_bound = schedule.eps(0) / 3
    p = RoundedProvider(b, grid_bits=grid_bits, target=base_bound, tol=tol, fill_budget=fill_budget)
    for l, r in bs_intervals(b.n, min_len=2):
        got = p.base(l, r)
        err = sv_error(rw_matrix(b, l, r), got, tol).eps_measured
        if err > base_bound:
            raise BaseCertificationError(f"base ({l}, {r}) has SV error {err} > {float(base_bound)}")
    m, ledger = newrec_matrix(p, 0, b.n, k)
    v_st, v_ed = start_accept_vectors(b)
    return EstimateReport(v_st @ m @ v_ed, ledger, k, gamma, base_bound,
                          dict(p.base_error), dict(p.grid_used))


def estimate_expectation(b, eps):
    """``(value, ledger)`` with ``|value - E_x[B(x)]| <= eps`` by construction of the level."""
    rep = estimate_report(b, eps)
    return rep.value, rep.ledger
