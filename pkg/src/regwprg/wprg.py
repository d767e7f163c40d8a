"""Weighted PRG built from the level-k expansion.

The level-k matrix is a signed sum of products of level-0 matrices over
increasing index sequences.  The generator picks one term with part of its
seed, feeds INW symbols through a base bit generator ``G0`` for each factor,
and outputs the term's sign scaled by the number of term slots.

Seed integers are split as ``s = (s_enum << d_inw) | s_inw``.  INW seeds keep
the level-0 symbol in the low bits and the expander edge labels above it,
one label per level.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import math
from typing import NamedTuple

import numpy as np

from .approx import EpsSchedule, level_matrix
from .ratlin import as_fraction, identity, inf_norm
from .robp import brute_expectation, run_states

__all__ = [
    "SignedSequence",
    "expand",
    "enum_term",
    "circulant_lambda",
    "InwConfig",
    "make_inw_config",
    "inw_sample",
    "inw_table",
    "inw_error_bound",
    "inw_matrix_error",
    "BaseGenerator",
    "WprgDescriptor",
    "build_wprg",
    "wprg_output",
    "eval_wprg",
    "WprgEval",
    "term_errors",
    "wprg_report",
]


class SignedSequence(NamedTuple):
    indices: tuple
    sign: int


def _check_dyadic(l, r):
    d = r - l
    if l < 0 or d < 1 or d & (d - 1) or l % d:
        raise ValueError(f"({l}, {r}) is not a dyadic interval")


def expand(l, r, k):
    """Signed sequences whose level-0 products sum to ``M^(k)_{l..r}``.

    Terms are listed in the order the enumeration function indexes them:
    first the ``k + 1`` splits of ``k`` with sign +1, then the ``k`` splits
    of ``k - 1`` with sign -1.
    """
    _check_dyadic(l, r)
    return list(_expand(l, r, k))


@lru_cache(maxsize=None)
def _expand(l, r, k):
    if r - l == 1 or k == 0:
        return (SignedSequence((l, r), 1),)
    m = (l + r) // 2
    out = []
    for b in (0, 1):
        for i in range(k - b + 1):
            left, right = _expand(l, m, i), _expand(m, r, k - b - i)
            for sl in left:
                for sr in right:
                    out.append(SignedSequence(sl.indices + sr.indices[1:], (-1) ** b * sl.sign * sr.sign))
    return tuple(out)


def _bits(value, width):
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def _to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def enum_term(n, k, index_bits):
    """Map a ``2 k log2(n)``-bit index to a term of ``expand(0, n, k)`` or to a dummy.

    At each node the first ``ceil(log2(2k+1))`` bits pick a term of the
    recursion; the next ``2 i (t-1)`` and ``2 j (t-1)`` bits index the left
    and right sub-terms; any bits left over must be zero.  Out-of-range picks
    and nonzero leftovers give the dummy ``((0, n), 0)``, so every real term
    is hit by exactly one index.  ``index_bits`` may be an int or a bit list.
    """
    log_n = n.bit_length() - 1
    width = 2 * k * log_n
    if isinstance(index_bits, (int, np.integer)):
        index_bits = _bits(int(index_bits), width)
    index_bits = [int(b) for b in index_bits]
    if len(index_bits) != width:
        raise ValueError(f"need {width} index bits, got {len(index_bits)}")
    got = _enum(0, n, k, tuple(index_bits))
    return got if got is not None else SignedSequence((0, n), 0)


def _enum(l, r, k, bits):
    t = (r - l).bit_length() - 1
    if t == 0 or k == 0:
        return SignedSequence((l, r), 1)
    c = (2 * k).bit_length()
    idx = _to_int(bits[:c])
    if idx > 2 * k:
        return None
    b, i = (0, idx) if idx <= k else (1, idx - k - 1)
    j = k - b - i
    lb, rb = 2 * i * (t - 1), 2 * j * (t - 1)
    rest = bits[c:]
    if any(rest[lb + rb:]):
        return None
    m = (l + r) // 2
    left = _enum(l, m, i, rest[:lb])
    right = _enum(m, r, j, rest[lb:lb + rb])
    if left is None or right is None:
        return None
    return SignedSequence(left.indices + right.indices[1:], (-1) ** b * left.sign * right.sign)


def circulant_lambda(offsets, size):
    """Second largest singular value of the walk ``v -> v + c_e (mod size)`` with uniform ``e``."""
    if size == 1:
        return 0.0
    hist = np.bincount(np.asarray(offsets) % size, minlength=size)
    spectrum = np.abs(np.fft.fft(hist)) / len(offsets)
    return float(spectrum[1:].max())


@dataclass(frozen=True)
class InwConfig:
    """INW generator over ``symbol_bits``-bit symbols producing ``block_count`` symbols.

    ``offsets[j]`` are the circulant offsets of the expander used at level
    ``j + 1`` and ``level_lambdas[j]`` its measured second singular value.
    """

    symbol_bits: int
    block_count: int
    degree_bits: int
    expander_seed: int = 0
    target_error: Fraction | None = None
    offsets: tuple = ()
    level_lambdas: tuple = ()

    @property
    def levels(self):
        return max(0, (self.block_count - 1).bit_length())

    @property
    def padded_blocks(self):
        return 1 << self.levels

    @property
    def seed_bits(self):
        return self.symbol_bits + self.degree_bits * self.levels

    @property
    def verified_lambda(self):
        return max(self.level_lambdas, default=0.0)

    def to_dict(self):
        return {
            "symbol_bits": self.symbol_bits,
            "block_count": self.block_count,
            "degree_bits": self.degree_bits,
            "expander_seed": self.expander_seed,
            "target_error": None if self.target_error is None else str(self.target_error),
            "seed_bits": self.seed_bits,
            "level_lambdas": list(self.level_lambdas),
            "verified_lambda": self.verified_lambda,
        }


def make_inw_config(symbol_bits, block_count, degree_bits, expander_seed=0,
                    lambda_threshold=None, target_error=None, max_tries=64):
    """Pick a circulant expander per level, retrying seeds until ``lambda_threshold`` is met.

    When the degree reaches the vertex count the offsets cover every residue
    and the level is exact.  If no attempt meets the threshold the best one
    found is kept; compare :func:`inw_error_bound` with the target to see
    whether it was achieved.
    """
    if block_count < 1:
        raise ValueError("need at least one block")
    levels = max(0, (block_count - 1).bit_length())
    offsets, lambdas = [], []
    degree = 1 << degree_bits
    for j in range(1, levels + 1):
        size = 1 << (symbol_bits + degree_bits * (j - 1))
        if degree >= size:
            best = tuple(int(e % size) for e in range(degree))
            best_lam = 0.0
        else:
            best, best_lam = None, math.inf
            for attempt in range(max_tries):
                rng = np.random.default_rng([expander_seed, j, attempt])
                cand = tuple(int(c) for c in rng.integers(0, size, size=degree))
                lam = circulant_lambda(cand, size)
                if lam < best_lam:
                    best, best_lam = cand, lam
                if lambda_threshold is None or lam <= lambda_threshold:
                    break
        offsets.append(best)
        lambdas.append(best_lam)
    return InwConfig(symbol_bits, block_count, degree_bits, expander_seed,
                     None if target_error is None else as_fraction(target_error),
                     tuple(offsets), tuple(lambdas))


def inw_sample(cfg, seed):
    """The ``block_count`` symbols produced from one seed (int or big-endian bit string)."""
    if isinstance(seed, str):
        if len(seed) != cfg.seed_bits:
            raise ValueError(f"need {cfg.seed_bits} seed bits")
        seed = int(seed, 2)
    if not 0 <= seed < 1 << cfg.seed_bits:
        raise ValueError("seed out of range")

    def walk(level, s):
        if level == 0:
            return [s]
        d = cfg.symbol_bits + cfg.degree_bits * (level - 1)
        v, e = s & ((1 << d) - 1), s >> d
        return walk(level - 1, v) + walk(level - 1, (v + cfg.offsets[level - 1][e]) % (1 << d))

    return walk(cfg.levels, seed)[: cfg.block_count]


def inw_table(cfg):
    """All outputs at once: int array of shape ``(2**seed_bits, block_count)``."""
    table = np.arange(1 << cfg.symbol_bits, dtype=np.int64)[:, None]
    for j in range(1, cfg.levels + 1):
        size = table.shape[0]
        c = np.asarray(cfg.offsets[j - 1], dtype=np.int64)
        v = np.arange(size, dtype=np.int64)
        left = np.broadcast_to(table[None, :, :], (len(c),) + table.shape)
        right = table[(v[None, :] + c[:, None]) % size]
        table = np.concatenate([left, right], axis=2).reshape(len(c) * size, -1)
    return table[:, : cfg.block_count]


def inw_error_bound(cfg, w):
    """Guaranteed inf-norm error for products of ``w x w`` stochastic blocks.

    Each level adds at most ``w * lambda`` per merge on top of twice the
    error of the halves, giving ``sum_j 2**(L-j) * w * lambda_j``.
    """
    levels = cfg.levels
    return sum((1 << (levels - j)) * w * lam for j, lam in enumerate(cfg.level_lambdas, start=1))


def _int_tables(a_funcs, symbols):
    tables, denoms = [], []
    for f in a_funcs:
        mats = [f(x) if callable(f) else f[x] for x in range(symbols)]
        q = 1
        for m in mats:
            for x in np.ravel(m):
                q = math.lcm(q, as_fraction(x).denominator)
        ints = np.array([[[int(as_fraction(x) * q) for x in row] for row in m] for m in mats], dtype=object)
        tables.append(ints)
        denoms.append(q)
    return tables, denoms


def inw_matrix_error(cfg, a_funcs, max_symbol_bits=12, max_blocks=8):
    """Exact ``|| E_s[prod A_i(G(s)_i)] - prod E_x[A_i(x)] ||_inf``.

    ``a_funcs[i]`` maps a symbol to a row-stochastic matrix; it may be a
    callable or a sequence indexed by symbol.
    """
    if cfg.symbol_bits > max_symbol_bits or cfg.block_count > max_blocks:
        raise ValueError("too large for exact evaluation; lower symbol_bits or block_count")
    if len(a_funcs) != cfg.block_count:
        raise ValueError(f"need {cfg.block_count} matrix functions")
    symbols = 1 << cfg.symbol_bits
    tables, denoms = _int_tables(a_funcs, symbols)
    seeds = inw_table(cfg)
    w = tables[0].shape[1]
    bound = seeds.shape[0]
    for t in tables:
        bound *= max(1, max(abs(int(x)) for x in np.ravel(t))) * w
    dtype = np.int64 if bound < 1 << 62 else object
    prod = tables[0].astype(dtype)[seeds[:, 0]]
    for i in range(1, cfg.block_count):
        prod = np.matmul(prod, tables[i].astype(dtype)[seeds[:, i]])
    scale = seeds.shape[0] * math.prod(denoms)
    seeded = np.array([[Fraction(int(x), scale) for x in row] for row in prod.sum(axis=0)], dtype=object)
    ideal = identity(w)
    for t, q in zip(tables, denoms):
        mean = np.array([[Fraction(int(x), symbols * q) for x in row] for row in t.sum(axis=0)], dtype=object)
        ideal = ideal @ mean
    return inf_norm(seeded - ideal)


class BaseGenerator:
    """Bit generator ``G0`` with an unbiased first output bit.

    ``G0(b, s) = b || G0'(s)`` where ``G0'`` is INW over single bits with
    ``n_out - 1`` blocks.  Seed bit 0 is ``b``; the remaining bits seed ``G0'``.
    """

    def __init__(self, n_out, degree_bits=1, expander_seed=0, lambda_threshold=None, max_tries=64):
        self.n_out = n_out
        self.inner = None
        if n_out > 1:
            self.inner = make_inw_config(1, n_out - 1, degree_bits, expander_seed, lambda_threshold,
                                         max_tries=max_tries)
        self.d0 = 1 + (self.inner.seed_bits if self.inner else 0)
        self._table = None

    def output(self, seed):
        first = seed & 1
        rest = inw_sample(self.inner, seed >> 1) if self.inner else []
        return [first] + rest

    def table(self):
        if self._table is None:
            first = np.arange(1 << self.d0, dtype=np.int64) & 1
            if self.inner:
                rest = inw_table(self.inner)[np.arange(1 << self.d0) >> 1]
                self._table = np.concatenate([first[:, None], rest], axis=1)
            else:
                self._table = first[:, None]
        return self._table

    def error_bound(self, w):
        return inw_error_bound(self.inner, w) if self.inner else 0.0

    def to_dict(self):
        return {"n_out": self.n_out, "d0": self.d0,
                "inner": self.inner.to_dict() if self.inner else None}


@dataclass
class WprgDescriptor:
    n: int
    w: int
    k: int
    gamma: Fraction
    eps: Fraction
    enum_bits: int
    base: BaseGenerator = field(repr=False)
    inw: InwConfig = field(repr=False)
    eps_inw: Fraction = Fraction(0)
    inw_bound: float = 0.0

    @property
    def s_size(self):
        return 1 << self.enum_bits

    @property
    def d_inw(self):
        return self.inw.seed_bits

    @property
    def d(self):
        return self.enum_bits + self.d_inw

    @property
    def inw_feasible(self):
        return self.inw_bound <= self.eps_inw

    def to_dict(self):
        return {
            "n": self.n, "w": self.w, "k": self.k, "gamma": str(self.gamma), "eps": str(self.eps),
            "d": self.d, "enum_bits": self.enum_bits, "d_inw": self.d_inw, "s_size": self.s_size,
            "eps_inw": str(self.eps_inw), "inw_bound": self.inw_bound, "inw_feasible": self.inw_feasible,
            "base": self.base.to_dict(), "inw": self.inw.to_dict(),
        }


def build_wprg(b, eps, gamma, g0=None, k=None, degree_bits=None, expander_seed=0,
               max_seed_bits=26, max_tries=64):
    """Assemble ``(rho, G)`` for program shape ``(b.n, b.w)``.

    ``k`` defaults to the least level with ``eps(k) <= eps / 2``.  When
    ``degree_bits`` is not given, the smallest expander degree whose
    guaranteed INW error reaches ``eps / (2 |S|)`` is used, searching only
    while the total seed stays within ``max_seed_bits``; failing that the
    degree with the smallest achievable bound is kept and the descriptor
    reports ``inw_feasible = False``.
    """
    eps = as_fraction(eps)
    schedule = EpsSchedule(gamma, b.n)
    if k is None:
        k = schedule.min_level(eps / 2)
    if g0 is None:
        g0 = BaseGenerator(b.n, degree_bits=2, expander_seed=expander_seed, max_tries=max_tries)
    enum_bits = 2 * k * schedule.log_n
    eps_inw = eps / (2 * (1 << enum_bits))
    blocks = k * schedule.log_n + 1
    levels = max(0, (blocks - 1).bit_length())
    threshold = float(eps_inw) / ((1 << levels) * b.w) if levels else None

    def config(a):
        return make_inw_config(g0.d0, blocks, a, expander_seed, threshold, eps_inw, max_tries)

    if levels == 0:
        inw = config(0)
    elif degree_bits is not None:
        inw = config(degree_bits)
    else:
        inw, best = None, math.inf
        a = 1
        while a == 1 or enum_bits + g0.d0 + a * levels <= max_seed_bits:
            cand = config(a)
            bound = inw_error_bound(cand, b.w)
            if bound < best:
                inw, best = cand, bound
            if bound <= eps_inw:
                break
            a += 1
    return WprgDescriptor(b.n, b.w, k, schedule.gamma, eps, enum_bits, g0, inw, eps_inw,
                          inw_error_bound(inw, b.w))


def wprg_output(desc, s):
    """``(rho(s), G(s))`` for one seed integer ``s`` in ``[0, 2**d)``."""
    if not 0 <= s < 1 << desc.d:
        raise ValueError("seed out of range")
    s_enum, s_inw = s >> desc.d_inw, s & ((1 << desc.d_inw) - 1)
    term = enum_term(desc.n, desc.k, s_enum) if desc.enum_bits else SignedSequence((0, desc.n), 1)
    symbols = inw_sample(desc.inw, s_inw)
    x = []
    for j in range(1, len(term.indices)):
        x.extend(desc.base.output(symbols[j - 1])[: term.indices[j] - term.indices[j - 1]])
    return term.sign * desc.s_size, x


def _term_bits(desc, indices, inw_tab, g0_tab):
    pieces = []
    for j in range(1, len(indices)):
        pieces.append(g0_tab[inw_tab[:, j - 1], : indices[j] - indices[j - 1]])
    return np.concatenate(pieces, axis=1)


def _grouped_terms(n, k):
    """Net sign per distinct sequence of ``expand(0, n, k)``."""
    net = {}
    for t in expand(0, n, k):
        net[t.indices] = net.get(t.indices, 0) + t.sign
    return [(seq, c) for seq, c in net.items() if c]


class WprgEval(NamedTuple):
    value: Fraction | float
    exact: bool
    seeds: int


def eval_wprg(b, desc, max_exact_bits=26, sample=None, seed=0):
    """Average of ``rho(s) B(G(s))`` over all ``2**d`` seeds.

    Seeds whose enumeration part is a dummy have ``rho = 0`` and are skipped;
    the rest are evaluated in one vectorized pass per term.  Above
    ``max_exact_bits`` a uniform sample of ``sample`` seeds is averaged
    instead and the result is flagged ``exact=False``.
    """
    if (b.n, b.w) != (desc.n, desc.w):
        raise ValueError("descriptor was built for a different program shape")
    accept = np.zeros(b.w, dtype=bool)
    accept[list(b.accept)] = True
    if desc.d > max_exact_bits:
        if not sample:
            raise ValueError(f"seed length {desc.d} exceeds {max_exact_bits}; pass sample=N for an estimate")
        rng = np.random.default_rng(seed)
        total = 0
        for _ in range(sample):
            s = int(rng.integers(0, 1 << desc.d)) if desc.d < 63 else int.from_bytes(rng.bytes((desc.d + 7) // 8), "big") % (1 << desc.d)
            rho, x = wprg_output(desc, s)
            if rho:
                total += rho * int(accept[run_states(b, np.array([x]))[0]])
        return WprgEval(total / sample, False, sample)
    inw_tab = inw_table(desc.inw)
    g0_tab = desc.base.table()
    total = 0
    for seq, coef in _grouped_terms(desc.n, desc.k):
        states = run_states(b, _term_bits(desc, seq, inw_tab, g0_tab))
        total += coef * int(accept[states].sum())
    return WprgEval(Fraction(total, inw_tab.shape[0]), True, 1 << desc.d)


def _term_matrix(b, desc, seq, inw_tab, g0_tab):
    bits = _term_bits(desc, seq, inw_tab, g0_tab)
    out = np.full((b.w, b.w), Fraction(0), dtype=object)
    for u in range(b.w):
        states = np.full(bits.shape[0], u, dtype=np.int64)
        for j in range(bits.shape[1]):
            states = b.table(j + 1)[states, bits[:, j]]
        for v, c in enumerate(np.bincount(states, minlength=b.w)):
            out[u, v] = Fraction(int(c), bits.shape[0])
    return out


def term_errors(b, desc, provider):
    """Per-term INW error against the level-0 products of ``provider``.

    ``provider`` should average over ``desc.base`` (a ``PrgBackedProvider``)
    so that each factor's symbol average is its level-0 matrix.  Returns
    ``(rows, total)`` where ``total`` is the exact inf-norm distance between
    the seed-averaged weighted walk matrix and ``M^(k)_{0..n}``.
    """
    inw_tab = inw_table(desc.inw)
    g0_tab = desc.base.table()
    rows = []
    combined = np.full((b.w, b.w), Fraction(0), dtype=object)
    for seq, coef in _grouped_terms(desc.n, desc.k):
        got = _term_matrix(b, desc, seq, inw_tab, g0_tab)
        ideal = identity(b.w)
        for j in range(1, len(seq)):
            ideal = ideal @ provider.base(seq[j - 1], seq[j])
        rows.append({"indices": seq, "coef": coef, "error": inf_norm(got - ideal)})
        combined = combined + coef * got
    total = inf_norm(combined - level_matrix(provider, 0, desc.n, desc.k))
    return rows, total


def wprg_report(b, desc, **kwargs):
    """One CSV-ready row comparing the generator's weighted average to the truth."""
    got = eval_wprg(b, desc, **kwargs)
    truth = brute_expectation(b)
    err = abs(got.value - truth)
    return {
        "n": desc.n, "w": desc.w, "gamma": str(desc.gamma), "k": desc.k, "d": desc.d,
        "S": desc.s_size, "inw_lambda": desc.inw.verified_lambda,
        "eval": str(got.value) if got.exact else f"~{float(got.value)}",
        "truth": str(truth), "abs_error": str(err) if got.exact else float(err),
        "bound": str(desc.eps), "pass": err <= desc.eps, "exact": got.exact,
    }
