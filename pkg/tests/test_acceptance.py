"""The twelve acceptance criteria, each at its stated sizes, tolerances and time limit.

Every test prints one ``[PASS]``/``[FAIL]`` line (shown in the terminal
summary as well).  Run directly with ``python3 tests/test_acceptance.py``
to get just those lines.
"""

from collections import Counter
from fractions import Fraction as F
import math
import time

import numpy as np

from regwprg.approx import EpsSchedule, ExactProvider, bs_intervals, check_eps_inequality, delta_identity_residual
from regwprg.cli import check_enum, check_expand
from regwprg.providers import PerturbedProvider, PrgBackedProvider, RoundedProvider
from regwprg.ratlin import identity, inf_norm, is_zero, rat_vector
from regwprg.robp import RegularROBP, brute_expectation, gen_regular, rw_matrix
from regwprg.spacerec import (
    base_factorization, estimate_report, level_matrix_general, newrec_matrix, richardson_check,
)
from regwprg.svapprox import check_sv_forms, mixing_gap, sv_error, sv_main_harness, sv_norm_check
from regwprg.weights import total_weight, weight_test_set, wprg_main_harness
from regwprg.wprg import BaseGenerator, build_wprg, eval_wprg

RESULTS = {}


def report(num, title, ok, elapsed, limit, detail=""):
    ok = bool(ok) and elapsed < limit
    line = f"[{'PASS' if ok else 'FAIL'}] AC{num:<2} {title} ({elapsed:.1f}s < {limit}s){' ' + detail if detail else ''}"
    RESULTS[num] = line
    print(line)
    return ok


def all_providers(b, seed=0):
    """The three non-exact level-0 sources."""
    return [
        PerturbedProvider(b, F(1, 60), mode=("inf", "weight", "sv")[seed % 3], seed=seed),
        PrgBackedProvider(b, BaseGenerator(b.n, degree_bits=1, expander_seed=seed)),
        RoundedProvider(b, grid_bits=2),
    ]


def rand_vec(rng, w, scale=32):
    return rat_vector([F(int(x), scale) for x in rng.integers(-scale, scale + 1, size=w)])


def test_ac01_identity_residual():
    t0 = time.time()
    rng = np.random.default_rng(101)
    cache, bad = {}, []
    for trial in range(200):
        n, w = int(rng.choice([4, 8, 16])), int(rng.choice([2, 3, 5]))
        seed, kind = int(rng.integers(0, 4)), int(rng.integers(0, 3))
        key = (n, w, seed, kind)
        if key not in cache:
            cache[key] = all_providers(gen_regular(n, w, seed), seed)[kind]
        p = cache[key]
        l, r = bs_intervals(n, min_len=2)[int(rng.integers(0, n - 1))]
        k = int(rng.integers(1, 5))
        if not is_zero(delta_identity_residual(p, l, r, k)):
            bad.append((n, w, seed, p.kind, l, r, k))
    ok = report(1, "error-matrix identity residual is exactly zero on 200 configs", not bad,
                time.time() - t0, 60, f"failures={len(bad)} providers={sorted({p.kind for p in cache.values()})}")
    assert ok, bad


def test_ac02_eps_schedule():
    t0 = time.time()
    bad = []
    for gamma in (F(1, 10), F(1, 4), F(49, 100)):
        for n in (2 ** 4, 2 ** 10, 2 ** 20):
            bad += [(gamma, n, r["k"]) for r in check_eps_inequality(gamma, n, 50) if not r["ok"]]
    ok = report(2, "schedule inequality exact for 3 gammas x 3 lengths, k <= 50", not bad, time.time() - t0, 10)
    assert ok, bad


def test_ac03_weight_facts():
    t0 = time.time()
    rng = np.random.default_rng(303)
    progs = [gen_regular(int(rng.choice([4, 8, 16])), int(rng.integers(2, 6)), s) for s in range(25)]
    bad = 0
    for _ in range(500):
        b = progs[int(rng.integers(0, len(progs)))]
        l, m, r = sorted(int(x) for x in rng.integers(0, b.n + 1, size=3))
        y = rand_vec(rng, b.w)
        whole = total_weight(b, l, r, y)
        split = total_weight(b, l, m, rw_matrix(b, m, r) @ y) + total_weight(b, m, r, y)
        const = total_weight(b, l, r, rat_vector([y[0]] * b.w))
        bad += not (whole == split and whole <= b.w ** 2 * inf_norm(y) and const == 0)
    ok = report(3, "weight additivity, w^2 bound and zero on constants over 500 tuples", bad == 0,
                time.time() - t0, 30, f"failures={bad}")
    assert ok


def test_ac04_weight_harness():
    t0 = time.time()
    gamma = F(1, 4)
    base = EpsSchedule(gamma, 16).eps(0) / 3
    rows = []
    for w in (2, 4):
        b = gen_regular(16, w, 40 + w)
        rows += wprg_main_harness(b, gamma, 3, PerturbedProvider(b, base, mode="weight", seed=w))
    worst = max(float(r["measured_error"] / r["bound"]) for r in rows)
    ok = report(4, "weight harness: every key (l,r,k<=3), n=16, w in {2,4} within C_t eps(k)",
                all(r["pass"] for r in rows), time.time() - t0, 120,
                f"keys={len(rows)} worst_ratio={worst:.3g}")
    assert ok


def test_ac05_expand():
    t0 = time.time()
    rows = []
    for n in (2, 4, 8, 16):
        p = PerturbedProvider(gen_regular(n, 3, n), F(1, 50), seed=n)
        rows += [check_expand(p, l, r, k) for l, r in bs_intervals(n) for k in range(4)]
    enum_ok = all(check_enum(n, k) for n in (2, 4, 8) for k in range(3))
    ok = all(r["sum_ok"] and r["size_ok"] and r["len_ok"] for r in rows) and enum_ok
    ok = report(5, "expansion exact with size/length bounds (n<=16, k<=3); enumeration multiset (n<=8, k<=2)",
                ok, time.time() - t0, 120, f"keys={len(rows)} enum_ok={enum_ok}")
    assert ok


def test_ac06_wprg_end_to_end():
    t0 = time.time()
    bad, ks, ds = [], Counter(), set()
    for seed in range(10):
        b = gen_regular(4, 2, seed)
        truth = brute_expectation(b)
        for eps in (F(1, 4), F(1, 8)):
            desc = build_wprg(b, eps, F(1, 4))
            got = eval_wprg(b, desc)
            ks[desc.k] += 1
            ds.add(desc.d)
            d_ok = desc.d == 2 * desc.k * 2 + desc.d_inw
            if not (got.exact and abs(got.value - truth) <= eps and d_ok):
                bad.append((seed, eps, got.value, truth, desc.d))
    ok = report(6, "generator end-to-end on 10 programs, n=4, w=2, eps in {1/4, 1/8}", not bad,
                time.time() - t0, 600, f"levels={dict(ks)} d={sorted(ds)}")
    assert ok, bad


def test_ac07_sv_machinery():
    t0 = time.time()
    rng = np.random.default_rng(707)
    progs = [gen_regular(int(rng.choice([4, 8, 16])), int(rng.integers(2, 6)), s) for s in range(25)]
    chain_bad = 0
    for _ in range(500):
        b = progs[int(rng.integers(0, len(progs)))]
        l, m, r = sorted(int(x) for x in rng.integers(0, b.n + 1, size=3))
        y = rand_vec(rng, b.w)
        a, c = rw_matrix(b, l, m), rw_matrix(b, m, r)
        chain_bad += mixing_gap(a @ c, y) != mixing_gap(c, y) + mixing_gap(a, c @ y)
    b = gen_regular(16, 4, 7)
    m = rw_matrix(b, 0, 16)
    self_zero = sv_error(m, m).eps_measured == 0
    p = PerturbedProvider(b, F(1, 30), mode="sv", seed=7)
    norm_ok, forms_ok = True, True
    for l, r in [(0, 4), (0, 8), (8, 16), (0, 16)]:
        target, cand = rw_matrix(b, l, r), p.base(l, r)
        eps = sv_error(target, cand).eps_measured
        norm_ok &= all(row["pass"] for row in sv_norm_check(target, cand, F(1, 30), weight_test_set(4)))
        forms_ok &= check_sv_forms(target, cand, eps, samples=1000, seed=l + r, tol=1e-9)[0]
    ok = report(7, "mixing-gap chain rule (500 tuples), SV self-error 0, SV norm check, SV forms agree (1000 pairs)",
                chain_bad == 0 and self_zero and norm_ok and forms_ok, time.time() - t0, 60,
                f"chain_failures={chain_bad}")
    assert ok


def test_ac08_sv_harness():
    t0 = time.time()
    gamma = F(1, 4)
    target = EpsSchedule(gamma, 16).eps(0) / 3
    rows = []
    for seed in range(2):
        b = gen_regular(16, 4, seed)
        rows += sv_main_harness(b, gamma, 3, RoundedProvider(b, grid_bits=1, target=target, fill_budget=True))
        rows += sv_main_harness(b, gamma, 3, RoundedProvider(b, grid_bits=1, target=target))
    worst = max(r["eps_measured"] / r["bound"] for r in rows)
    ok = report(8, "SV harness: rounded base certified at eps(0)/3 gives sv_error <= C_t eps(k) + 1e-9, n=16, w=4",
                all(r["pass"] for r in rows), time.time() - t0, 120,
                f"keys={len(rows)} worst_ratio={worst:.3g}")
    assert ok


def test_ac09_new_recursion():
    t0 = time.time()
    bad, deepest = [], 0
    for n in (4, 8, 16):
        b = gen_regular(n, 3, n + 1)
        for p in [ExactProvider(b)] + all_providers(b, n):
            for l in range(n):
                for r in range(l + 1, n + 1):
                    for k in range(1, 4):
                        for h in range(1, k + 1):
                            m, ledger = newrec_matrix(p, l, r, k, h)
                            deepest = max(deepest, ledger.max_recursion_depth)
                            depth_ok = ledger.max_recursion_depth <= math.ceil(math.log2(k)) + 1
                            if not (depth_ok and is_zero(m - level_matrix_general(p, l, r, k))):
                                bad.append((n, p.kind, l, r, k, h))
    ok = report(9, "h-split recursion equals generalized recursion, all keys, n<=16, h<=k<=3, 4 providers",
                not bad, time.time() - t0, 120, f"max_depth={deepest}")
    assert ok, bad[:5]


def test_ac10_factorization():
    t0 = time.time()
    bad = 0
    for e in range(1, 7):
        n = 1 << e
        p = PerturbedProvider(gen_regular(n, 2, e), F(1, 80), seed=e)
        for l in range(n):
            for r in range(l + 1, n + 1):
                parts = base_factorization(l, r, n)
                prod = identity(2)
                for a, c in parts:
                    prod = prod @ p.base(a, c)
                bad += not (parts[0][0] == l and parts[-1][1] == r
                            and all(x[1] == y[0] for x, y in zip(parts, parts[1:]))
                            and len(parts) <= 2 * e
                            and (prod == level_matrix_general(p, l, r, 0)).all())
    ok = report(10, "base factorization: gapless dyadic cover, length <= 2 log n, product exact, n<=64",
                bad == 0, time.time() - t0, 30, f"failures={bad}")
    assert ok


def test_ac11_richardson():
    t0 = time.time()
    bad = []
    for n in (4, 8, 16):
        b = gen_regular(n, 3, n + 5)
        for p in [ExactProvider(b)] + all_providers(b, n):
            for k in range(4):
                rep = richardson_check(p, k)
                if not rep["pass"]:
                    bad.append((n, p.kind, k))
    ok = report(11, "Richardson iterate equals level-k blocks and L^-1 equals walk matrices, n<=16, k<=3",
                not bad, time.time() - t0, 120)
    assert ok, bad


def test_ac12_white_box_estimator():
    t0 = time.time()
    bad, levels, worst = [], {}, 0
    for seed in range(5):
        base = gen_regular(16, 4, seed)
        b = RegularROBP(16, 4, base.layers, base.start, frozenset({seed % 4}))
        truth = brute_expectation(b)
        ks = []
        for eps in (F(1, 10 ** 3), F(1, 10 ** 4), F(1, 10 ** 6)):
            rep = estimate_report(b, eps)
            ks.append(rep.k)
            worst = max(worst, float(abs(rep.value - truth) / eps))
            if abs(rep.value - truth) > eps:
                bad.append((seed, eps, float(abs(rep.value - truth))))
        levels[seed] = ks
        if ks != sorted(ks):
            bad.append((seed, "levels not monotone", ks))
    ok = report(12, "white-box estimate within eps of truth, eps in {1e-3, 1e-4, 1e-6}, n=16, w=4",
                not bad, time.time() - t0, 300, f"k per eps={levels[0]} worst error/eps={worst:.3g}")
    assert ok, bad


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_ac"):
            try:
                fn()
            except AssertionError:
                pass
