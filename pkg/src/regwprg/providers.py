"""Level-0 providers: perturbed, generator-averaged and rounded.

All of them return the exact layer matrix on length-1 intervals (handled by
:class:`BaseProvider`).  The perturbed and rounded providers keep every row
and column sum exactly 1.
"""

from fractions import Fraction

import numpy as np

from .approx import BaseProvider, ExactProvider
from .ratlin import as_fraction, identity, inf_norm, null_space, zeros
from .robp import rw_matrix
from .svapprox import sv_error
from .weights import w_star, weight_functionals

__all__ = [
    "ExactProvider",
    "PerturbedProvider",
    "PrgBackedProvider",
    "RoundedProvider",
    "make_perturbed_provider",
    "make_provider",
]

MODES = ("inf", "weight", "sv")


def _rand_ints(rng, shape, bound=8):
    return np.vectorize(Fraction, otypes=[object])(rng.integers(-bound, bound + 1, size=shape))


def _double_center(a):
    rows, cols = a.shape
    row_mean = np.array([sum(r, Fraction(0)) / cols for r in a], dtype=object)
    col_mean = np.array([sum(c, Fraction(0)) / rows for c in a.T], dtype=object)
    grand = sum(row_mean, Fraction(0)) / rows
    return a - row_mean[:, None] - col_mean[None, :] + grand


def _kernel_projector(k):
    """Exact orthogonal projector onto the complement of the column span of ``k``."""
    n = k.shape[0]
    if k.shape[1] == 0:
        return identity(n)
    gram = k.T @ k
    m = gram.shape[0]
    aug = np.concatenate([gram, identity(m)], axis=1)
    inv = _solve_identity(aug, m)
    return identity(n) - k @ inv @ k.T


def _solve_identity(aug, m):
    """Gauss-Jordan on ``[G | I]``; returns ``G^-1``."""
    a = np.array(aug, dtype=object, copy=True)
    for c in range(m):
        p = next(i for i in range(c, m) if a[i, c] != 0)
        if p != c:
            a[[c, p]] = a[[p, c]]
        a[c] = a[c] / a[c, c]
        for i in range(m):
            if i != c and a[i, c] != 0:
                a[i] = a[i] - a[i, c] * a[c]
    return a[:, m:]


class PerturbedProvider(ExactProvider):
    """Exact matrix plus a seeded zero-marginal error of controlled size.

    ``mode="inf"`` bounds the infinity norm of the error by ``delta``.
    ``mode="weight"`` writes the error as ``G F`` where the rows of ``F`` are
    the edge functionals of the weight, so ``|E y|_inf <= delta W(l,r,y)/W*``
    holds for every ``y``.  ``mode="sv"`` writes it as ``(I - M M^T) X (I - M^T M)``
    with ``|X|_2 <= delta``, which bounds the SV error by ``delta``.
    """

    kind = "perturbed"

    def __init__(self, program, delta, mode="inf", seed=0, w_star_value=None):
        super().__init__(program)
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.delta = as_fraction(delta)
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        self.mode = mode
        self.seed = seed
        self.w_star = w_star(program) if w_star_value is None else as_fraction(w_star_value)

    def config(self):
        return {"kind": self.kind, "delta": str(self.delta), "mode": self.mode, "seed": self.seed}

    def error_matrix(self, l, r):
        m = rw_matrix(self.program, l, r)
        w = self.w
        if self.delta == 0 or w == 1:
            return zeros(w)
        rng = np.random.default_rng([self.seed, l, r])
        if self.mode == "inf":
            e = _double_center(_rand_ints(rng, (w, w)))
            size = inf_norm(e)
            return zeros(w) if size == 0 else e * (self.delta / size)
        if self.mode == "weight":
            f = weight_functionals(self.program, l, r)
            if f.shape[0] == 0:
                return zeros(w)
            g = _rand_ints(rng, (w, f.shape[0]))
            g = g - np.array([sum(c, Fraction(0)) / w for c in g.T], dtype=object)[None, :]
            size = max(abs(x) for x in np.ravel(g))
            if size == 0:
                return zeros(w)
            return (g * (self.delta / (self.w_star * size))) @ f
        left = identity(w) - m @ m.T
        right = identity(w) - m.T @ m
        x = _rand_ints(rng, (w, w))
        size = max(inf_norm(x), inf_norm(x.T))
        if size == 0:
            return zeros(w)
        return left @ (x * (self.delta / size)) @ right

    def _base(self, l, r):
        return rw_matrix(self.program, l, r) + self.error_matrix(l, r)


def make_perturbed_provider(b, delta, mode="inf", seed=0, w_star_value=None):
    return PerturbedProvider(b, delta, mode, seed, w_star_value)


class PrgBackedProvider(BaseProvider):
    """``M^(0)_{l..r} = E_s[M_{l..r}(G0(s)[:r-l])]`` for a bit generator ``G0``.

    ``generator`` needs a ``table()`` method returning all outputs as an
    array of shape ``(2**d0, n_out)`` with ``n_out >= n``.  Only row sums are
    guaranteed to be 1; column sums depend on the generator.
    """

    kind = "prg"

    def __init__(self, program, generator):
        super().__init__(program)
        self.generator = generator
        self._table = np.asarray(generator.table(), dtype=np.int64)
        if self._table.shape[1] < program.n:
            raise ValueError("generator output is shorter than the program")

    def config(self):
        cfg = getattr(self.generator, "to_dict", None)
        return {"kind": self.kind, "generator": cfg() if cfg else repr(self.generator)}

    def _base(self, l, r):
        bits = self._table[:, : r - l]
        seeds = bits.shape[0]
        out = zeros(self.w)
        for u in range(self.w):
            states = np.full(seeds, u, dtype=np.int64)
            for j in range(r - l):
                states = self.program.table(l + j + 1)[states, bits[:, j]]
            counts = np.bincount(states, minlength=self.w)
            for v in range(self.w):
                out[u, v] = Fraction(int(counts[v]), seeds)
        return out


def round_to_grid(m, bits):
    scale = 1 << bits
    return np.array([[Fraction(round(x * scale), scale) for x in row] for row in m], dtype=object)


class RoundedProvider(ExactProvider):
    """Exact matrix rounded to the grid ``2**-grid_bits`` and re-balanced.

    The rounding error is projected onto the orthogonal complements of
    ``ker(I - M M^T)`` (left) and ``ker(I - M^T M)`` (right).  Both kernels
    contain the all-ones vector, so row and column sums stay exactly 1.
    When ``target`` is given the grid is refined per interval until the
    measured SV error is at most ``target``; at ``grid_bits >= r - l``
    rounding is exact, so refinement always stops.

    With ``fill_budget=True`` the grid is not refined; instead the projected
    rounding error at ``grid_bits`` is scaled by a rational factor so that
    the SV error lands just under ``target``.  SV error is linear in the
    error matrix, so this yields a base that uses its error budget, which
    exact rounding at small sizes never does.
    """

    kind = "rounded"

    def __init__(self, program, grid_bits=8, target=None, tol=1e-9, fill_budget=False):
        super().__init__(program)
        if fill_budget and target is None:
            raise ValueError("fill_budget needs a target")
        self.grid_bits = grid_bits
        self.fill_budget = fill_budget
        self.target = None if target is None else float(target)
        self.tol = tol
        self.grid_used = {}
        self.base_error = {}

    def config(self):
        return {"kind": self.kind, "grid_bits": self.grid_bits, "target": self.target,
                "fill_budget": self.fill_budget}

    def rounded(self, l, r, bits):
        m = rw_matrix(self.program, l, r)
        raw = round_to_grid(m, bits) - m
        left = _kernel_projector(null_space(identity(self.w) - m @ m.T))
        right = _kernel_projector(null_space(identity(self.w) - m.T @ m))
        return m + left @ raw @ right

    def _base(self, l, r):
        m = rw_matrix(self.program, l, r)
        bits = self.grid_bits
        if self.fill_budget:
            return self._filled(m, l, r)
        while True:
            cand = self.rounded(l, r, bits)
            err = sv_error(m, cand, self.tol).eps_measured
            if self.target is None or err <= self.target or bits >= r - l:
                self.grid_used[(l, r)] = bits
                self.base_error[(l, r)] = err
                return cand
            bits += 1

    def _filled(self, m, l, r):
        err_mat = self.rounded(l, r, self.grid_bits) - m
        err = sv_error(m, m + err_mat, self.tol).eps_measured
        scale = Fraction(1)
        if err > self.target:
            scale = Fraction(self.target * (1 - 1e-6) / err).limit_denominator(1 << 20)
        while True:
            cand = m + scale * err_mat
            got = sv_error(m, cand, self.tol).eps_measured
            if got <= self.target:
                self.grid_used[(l, r)] = self.grid_bits
                self.base_error[(l, r)] = got
                return cand
            scale /= 2


def make_provider(kind, program, **kwargs):
    """Build a provider by name: ``exact``, ``perturbed``, ``prg`` or ``rounded``."""
    if kind == "exact":
        return ExactProvider(program)
    if kind == "perturbed":
        return PerturbedProvider(program, kwargs.get("delta", Fraction(1, 100)),
                                 kwargs.get("mode", "inf"), kwargs.get("seed", 0))
    if kind == "prg":
        from .wprg import BaseGenerator

        gen = kwargs.get("generator") or BaseGenerator(program.n, degree_bits=kwargs.get("degree_bits", 1),
                                                      expander_seed=kwargs.get("seed", 0))
        return PrgBackedProvider(program, gen)
    if kind == "rounded":
        return RoundedProvider(program, kwargs.get("grid_bits", 8), kwargs.get("target"),
                               fill_budget=kwargs.get("fill_budget", False))
    raise ValueError(f"unknown provider kind {kind!r}")
