"""Error schedule and the binary-recursive level-k approximation.

For a dyadic interval ``(l, r)`` with midpoint ``m`` the level-k matrix is::

    M^(k)_{l..r} = sum_{i+j=k} M^(i)_{l..m} M^(j)_{m..r}
                 - sum_{i+j=k-1} M^(i)_{l..m} M^(j)_{m..r}

with ``M^(k)_{r-1..r} = M_r`` and ``M^(0)`` supplied by a base provider.
"""

from dataclasses import dataclass
from fractions import Fraction
import threading

from .ratlin import as_fraction, frozen, identity, inf_norm, is_zero
from .robp import layer_rw, rw_matrix, is_power_of_two

__all__ = [
    "EpsSchedule",
    "eps_value",
    "check_eps_inequality",
    "is_bs",
    "bs_intervals",
    "BaseProvider",
    "ExactProvider",
    "level_matrix",
    "delta_matrix",
    "delta_identity_residual",
    "residual_report",
]


@dataclass(frozen=True)
class EpsSchedule:
    """``eps(i) = gamma**(i+1) / (const * log2(n) * (i+1)**2)``.

    With ``flat_k`` set, the alternative ``gamma**(i+1) / ((2K+1) log2(n))``
    with ``K = flat_k`` is used instead.
    """

    gamma: Fraction
    n: int
    const: int = 10
    flat_k: int | None = None

    def __post_init__(self):
        g = as_fraction(self.gamma)
        object.__setattr__(self, "gamma", g)
        if not 0 < g < Fraction(1, 2):
            raise ValueError(f"gamma must lie in (0, 1/2), got {g}")
        if not is_power_of_two(self.n) or self.n < 2:
            raise ValueError("n must be a power of 2 and at least 2")

    @property
    def log_n(self):
        return self.n.bit_length() - 1

    def eps(self, i):
        if i < 0:
            raise ValueError("level must be non-negative")
        if self.flat_k is not None:
            return self.gamma ** (i + 1) / ((2 * self.flat_k + 1) * self.log_n)
        return self.gamma ** (i + 1) / (self.const * self.log_n * (i + 1) ** 2)

    def growth(self, t):
        """``C_t = (1 + 1/log n)**t / 3``."""
        return (1 + Fraction(1, self.log_n)) ** t / 3

    def min_level(self, target, squared=False):
        """Smallest ``k`` with ``eps(k) <= target`` (or ``eps(k)**2 <= target``)."""
        target = as_fraction(target)
        if target <= 0:
            raise ValueError("target must be positive")
        k = 0
        while (self.eps(k) ** 2 if squared else self.eps(k)) > target:
            k += 1
        return k

    def to_dict(self):
        return {"gamma": str(self.gamma), "n": self.n, "const": self.const, "flat_k": self.flat_k}


def eps_value(schedule, i):
    return schedule.eps(i)


def check_eps_inequality(gamma, n, k_max, **kwargs):
    """Exact check of ``sum_{i+j in {k-1,k}} eps_i eps_j <= eps_k / log n`` for ``k <= k_max``.

    Returns a list of dicts ``{k, lhs, rhs, ok}``.
    """
    s = EpsSchedule(gamma, n, **kwargs)
    eps = [s.eps(i) for i in range(k_max + 1)]
    rows = []
    for k in range(k_max + 1):
        lhs = sum((eps[i] * eps[k - i] for i in range(k + 1)), Fraction(0))
        lhs += sum((eps[i] * eps[k - 1 - i] for i in range(k)), Fraction(0))
        rhs = eps[k] / s.log_n
        rows.append({"k": k, "lhs": lhs, "rhs": rhs, "ok": lhs <= rhs})
    return rows


def is_bs(l, r, n):
    """Whether ``(l, r)`` is a dyadic interval ``(i 2^t, (i+1) 2^t)`` inside ``[0, n]``."""
    d = r - l
    return 0 <= l < r <= n and d & (d - 1) == 0 and l % d == 0


def bs_intervals(n, min_len=1):
    """All dyadic intervals of ``[0, n]``, shortest first."""
    out = []
    d = min_len
    while d <= n:
        out.extend((l, l + d) for l in range(0, n, d))
        d *= 2
    return out


class BaseProvider:
    """Source of level-0 matrices for dyadic intervals.

    Subclasses implement ``_base(l, r)`` for intervals of length at least 2;
    length-1 intervals always return the exact layer matrix.  The provider
    also owns the memo caches used by the recursions.
    """

    kind = "base"

    def __init__(self, program):
        self.program = program
        self._base_cache = {}
        self._levels = {}
        self._general = {}
        self._lock = threading.RLock()

    @property
    def n(self):
        return self.program.n

    @property
    def w(self):
        return self.program.w

    def base(self, l, r):
        if not is_bs(l, r, self.n):
            raise ValueError(f"({l}, {r}) is not a dyadic interval of [0, {self.n}]")
        if r - l == 1:
            return layer_rw(self.program, r)
        with self._lock:
            m = self._base_cache.get((l, r))
        if m is None:
            m = frozen(self._base(l, r))
            with self._lock:
                self._base_cache[(l, r)] = m
        return m

    def _base(self, l, r):
        raise NotImplementedError

    def clear_cache(self):
        with self._lock:
            self._base_cache.clear()
            self._levels.clear()
            self._general.clear()

    def cache_size(self):
        return {"base": len(self._base_cache), "levels": len(self._levels), "general": len(self._general)}

    def config(self):
        return {"kind": self.kind}


class ExactProvider(BaseProvider):
    """Returns the true random walk matrix; every level is then exact."""

    kind = "exact"

    def _base(self, l, r):
        return rw_matrix(self.program, l, r)


def _check_key(p, l, r, k):
    if k < 0:
        raise ValueError("level must be non-negative")
    if not 0 <= l <= r <= p.n:
        raise IndexError(f"interval ({l}, {r}) outside 0..{p.n}")


def level_matrix(p, l, r, k):
    """Memoized ``M^(k)_{l..r}`` for a dyadic interval (or ``l == r``)."""
    _check_key(p, l, r, k)
    if l == r:
        return identity(p.w)
    if not is_bs(l, r, p.n):
        raise ValueError(f"({l}, {r}) is not dyadic; use spacerec.level_matrix_general")
    if r - l == 1:
        return layer_rw(p.program, r)
    if k == 0:
        return p.base(l, r)
    with p._lock:
        hit = p._levels.get((l, r, k))
    if hit is not None:
        return hit
    m = (l + r) // 2
    left = [level_matrix(p, l, m, i) for i in range(k + 1)]
    right = [level_matrix(p, m, r, j) for j in range(k + 1)]
    out = left[0] @ right[k]
    for i in range(1, k + 1):
        out = out + left[i] @ right[k - i]
    for i in range(k):
        out = out - left[i] @ right[k - 1 - i]
    frozen(out)
    with p._lock:
        p._levels[(l, r, k)] = out
    return out


def delta_matrix(p, l, r, k):
    """``Delta^(k)_{l..r} = M^(k)_{l..r} - M_{l..r}``."""
    return level_matrix(p, l, r, k) - rw_matrix(p.program, l, r)


def delta_identity_residual(p, l, r, k):
    """Left minus right side of the error-matrix identity; exactly zero when the recursion is sound."""
    if not is_bs(l, r, p.n) or r - l < 2:
        raise ValueError("need a dyadic interval of length at least 2")
    if k < 1:
        raise ValueError("the identity is stated for k >= 1")
    m = (l + r) // 2
    dl = [delta_matrix(p, l, m, i) for i in range(k + 1)]
    dr = [delta_matrix(p, m, r, j) for j in range(k + 1)]
    rhs = dl[k] @ rw_matrix(p.program, m, r) + rw_matrix(p.program, l, m) @ dr[k]
    for i in range(k + 1):
        rhs = rhs + dl[i] @ dr[k - i]
    for i in range(k):
        rhs = rhs - dl[i] @ dr[k - 1 - i]
    return delta_matrix(p, l, r, k) - rhs


def residual_report(p, k_max):
    """JSON-ready verdicts ``{key, residual_inf_norm}`` over every eligible key."""
    out = []
    for l, r in bs_intervals(p.n, min_len=2):
        for k in range(1, k_max + 1):
            res = delta_identity_residual(p, l, r, k)
            out.append({
                "key": [l, r, k],
                "residual_inf_norm": str(inf_norm(res)),
                "pass": is_zero(res),
            })
    return out
