"""Regular read-once branching programs and their matrix view.

Layers are 1-indexed as in the usual presentation: layer ``i`` reads bit
``i`` and moves from layer ``i-1`` to layer ``i``.  States are 0-based.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import json
from typing import NamedTuple

import numpy as np

from .ratlin import identity, frozen, rat_vector

__all__ = [
    "RegularROBP",
    "NotRegularError",
    "RegularityReport",
    "check_regular",
    "is_power_of_two",
    "pad_layers",
    "transition_matrix",
    "layer_rw",
    "walk_matrix",
    "rw_matrix",
    "start_accept_vectors",
    "evaluate",
    "enumerate_expectation",
    "brute_expectation",
    "gen_regular",
    "parity_program",
    "program_to_dict",
    "program_from_dict",
    "save_program",
    "load_program",
]


class NotRegularError(ValueError):
    pass


class RegularityReport(NamedTuple):
    ok: bool
    violation: str | None = None

    def __bool__(self):
        return self.ok


def is_power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


def check_regular(layers, w):
    """Check that every state of every layer has exactly two labelled pre-images.

    ``layers`` is a sequence of tables ``table[u] = (B(u, 0), B(u, 1))``.
    The report names the first violation found.
    """
    for i, table in enumerate(layers, start=1):
        if len(table) != w:
            return RegularityReport(False, f"layer {i}: expected {w} rows, got {len(table)}")
        counts = [0] * w
        for u, pair in enumerate(table):
            if len(pair) != 2:
                return RegularityReport(False, f"layer {i}, state {u}: need 2 targets")
            for v in pair:
                if not 0 <= v < w:
                    return RegularityReport(False, f"layer {i}, state {u}: target {v} out of range")
                counts[v] += 1
        for v, c in enumerate(counts):
            if c != 2:
                return RegularityReport(False, f"layer {i}: state {v} has {c} pre-images")
    return RegularityReport(True)


def pad_layers(layers, w):
    """Append identity layers until the length is a power of two."""
    layers = [tuple(tuple(p) for p in t) for t in layers]
    n = max(1, len(layers))
    target = 1 << (n - 1).bit_length()
    ident = tuple((u, u) for u in range(w))
    return layers + [ident] * (target - len(layers))


@dataclass(frozen=True)
class RegularROBP:
    """A length-``n``, width-``w`` regular ROBP.

    ``layers[i-1][u] == (B_i(u, 0), B_i(u, 1))``.
    """

    n: int
    w: int
    layers: tuple
    start: int = 0
    accept: frozenset = frozenset({0})
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(tuple(int(v) for v in p) for p in t) for t in self.layers))
        object.__setattr__(self, "accept", frozenset(int(v) for v in self.accept))
        if self.w < 1:
            raise ValueError("width must be at least 1")
        if not is_power_of_two(self.n):
            raise ValueError(f"length {self.n} is not a power of 2 (pad with pad_layers first)")
        if len(self.layers) != self.n:
            raise ValueError(f"expected {self.n} layers, got {len(self.layers)}")
        if not 0 <= self.start < self.w:
            raise ValueError("start state out of range")
        if any(not 0 <= v < self.w for v in self.accept):
            raise ValueError("accept state out of range")
        report = check_regular(self.layers, self.w)
        if not report:
            raise NotRegularError(report.violation)

    @property
    def log_n(self):
        return self.n.bit_length() - 1

    def table(self, i):
        """Layer ``i`` as an int array of shape ``(w, 2)``."""
        key = ("table", i)
        if key not in self._cache:
            self._cache[key] = np.array(self.layers[i - 1], dtype=np.int64).reshape(self.w, 2)
        return self._cache[key]


def _check_layer(b, i):
    if not 1 <= i <= b.n:
        raise IndexError(f"layer index {i} outside 1..{b.n}")


def _check_range(b, l, r):
    if not 0 <= l <= r <= b.n:
        raise IndexError(f"interval ({l}, {r}) outside 0..{b.n}")


def transition_matrix(b, i, bit):
    _check_layer(b, i)
    out = np.full((b.w, b.w), Fraction(0), dtype=object)
    for u, pair in enumerate(b.layers[i - 1]):
        out[u, pair[bit]] = Fraction(1)
    return out


def layer_rw(b, i):
    """Random walk matrix ``(M_i(0) + M_i(1)) / 2`` of layer ``i``."""
    _check_layer(b, i)
    key = ("layer", i)
    if key not in b._cache:
        m = (transition_matrix(b, i, 0) + transition_matrix(b, i, 1)) * Fraction(1, 2)
        b._cache[key] = frozen(m)
    return b._cache[key]


def walk_matrix(b, l, r, s):
    """Transition matrix from layer ``l`` to ``r`` on the bits ``s``."""
    _check_range(b, l, r)
    s = [int(c) for c in s]
    if len(s) != r - l:
        raise ValueError(f"need {r - l} bits, got {len(s)}")
    out = identity(b.w)
    for offset, bit in enumerate(s, start=1):
        out = out @ transition_matrix(b, l + offset, bit)
    return out


def rw_matrix(b, l, r):
    """Exact random walk matrix ``M_{l..r}``; the identity when ``l == r``."""
    _check_range(b, l, r)
    key = ("rw", l, r)
    if key not in b._cache:
        if l == r:
            m = identity(b.w)
        elif r - l == 1:
            m = layer_rw(b, r)
        else:
            m = rw_matrix(b, l, r - 1) @ layer_rw(b, r)
        b._cache[key] = frozen(m)
    return b._cache[key]


def start_accept_vectors(b):
    v_st = rat_vector([1 if u == b.start else 0 for u in range(b.w)])
    v_ed = rat_vector([1 if u in b.accept else 0 for u in range(b.w)])
    return v_st, v_ed


def evaluate(b, x):
    """``B(x)`` for one input string of ``n`` bits."""
    if len(x) != b.n:
        raise ValueError(f"need {b.n} bits")
    v = b.start
    for i, bit in enumerate(x, start=1):
        v = b.layers[i - 1][v][int(bit)]
    return int(v in b.accept)


def run_states(b, bits, start_layer=0):
    """Vectorized walk: ``bits`` has shape ``(batch, steps)``; returns final states."""
    bits = np.asarray(bits, dtype=np.int64)
    states = np.full(bits.shape[0], b.start, dtype=np.int64)
    for j in range(bits.shape[1]):
        states = b.table(start_layer + j + 1)[states, bits[:, j]]
    return states


def enumerate_expectation(b):
    """Acceptance probability by running all ``2**n`` inputs."""
    inputs = (np.arange(1 << b.n, dtype=np.int64)[:, None] >> np.arange(b.n - 1, -1, -1)) & 1
    states = run_states(b, inputs)
    acc = np.zeros(b.w, dtype=bool)
    acc[list(b.accept)] = True
    return Fraction(int(acc[states].sum()), 1 << b.n)


def brute_expectation(b, check=None, max_check_n=20):
    """Exact ``E_x[B(x)] = v_st^T M_{0..n} v_ed``.

    With ``check`` left as ``None`` the value is cross-checked against full
    input enumeration whenever ``n <= max_check_n``; ``check=True`` above the
    cap is refused.
    """
    if check is None:
        check = b.n <= max_check_n
    elif check and b.n > max_check_n:
        raise ValueError(f"exhaustive check refused: n={b.n} > {max_check_n}")
    v_st, v_ed = start_accept_vectors(b)
    value = v_st @ rw_matrix(b, 0, b.n) @ v_ed
    if check:
        enum = enumerate_expectation(b)
        if enum != value:
            raise AssertionError(f"matrix value {value} disagrees with enumeration {enum}")
    return Fraction(value)


def gen_regular(n, w, seed):
    """Seeded random regular program.

    Each layer joins state ``u`` to ``pi(u)`` and ``sigma(u)`` for two random
    permutations, which samples every 2-regular bipartite multigraph, then
    labels the two out-edges of each state with bits 0 and 1 at random.
    Bit maps are therefore not forced to be permutations.
    """
    if not is_power_of_two(n):
        raise ValueError(f"length {n} is not a power of 2")
    if w < 1:
        raise ValueError("width must be at least 1")
    rng = np.random.default_rng(seed)
    layers = []
    for _ in range(n):
        pi = rng.permutation(w)
        sigma = rng.permutation(w)
        flip = rng.integers(0, 2, size=w)
        layers.append(tuple(
            (int(sigma[u]), int(pi[u])) if flip[u] else (int(pi[u]), int(sigma[u]))
            for u in range(w)
        ))
    start = int(rng.integers(0, w))
    accept = frozenset(int(v) for v in rng.choice(w, size=max(1, w // 2), replace=False))
    return RegularROBP(n, w, tuple(layers), start, accept)


def parity_program(n, start=0, accept=(0,)):
    """Width-2 program tracking the parity of the input."""
    return RegularROBP(n, 2, tuple(((0, 1), (1, 0)) for _ in range(n)), start, frozenset(accept))


def program_to_dict(b):
    return {
        "n": b.n,
        "w": b.w,
        "start": b.start,
        "accept": sorted(b.accept),
        "layers": [[list(p) for p in t] for t in b.layers],
    }


def program_from_dict(d):
    return RegularROBP(d["n"], d["w"], d["layers"], d["start"], frozenset(d["accept"]))


def save_program(b, path):
    with open(path, "w") as f:
        json.dump(program_to_dict(b), f, sort_keys=True)
        f.write("\n")


def load_program(path):
    with open(path) as f:
        return program_from_dict(json.load(f))
