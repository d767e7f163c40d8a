from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from conftest import with_accept
from regwprg.approx import EpsSchedule, ExactProvider, bs_intervals, is_bs, level_matrix
from regwprg.providers import PerturbedProvider, RoundedProvider
from regwprg.ratlin import identity, is_zero
from regwprg.robp import brute_expectation, gen_regular, layer_rw, rw_matrix
from regwprg.spacerec import (
    BlockLaplacian, base_factorization, choose_gamma, estimate_expectation, estimate_report, lca, lca_scan,
    level_matrix_general, newrec_matrix, richardson_check,
)
from regwprg.weights import BaseCertificationError


def test_lca_examples():
    assert lca(0, 8) == 4
    assert lca(1, 6) == 4
    assert lca(2, 4) == 3 == lca_scan(2, 4)
    with pytest.raises(ValueError):
        lca(3, 3)
    with pytest.raises(ValueError):
        lca(2, 3)


def test_lca_scan_matches_midpoint_on_dyadic():
    for n in (8, 64):
        for l, r in bs_intervals(n, min_len=2):
            assert lca_scan(l, r) == (l + r) // 2


def test_factorization_examples():
    assert base_factorization(1, 6, 8) == [(1, 2), (2, 4), (4, 6)]
    assert base_factorization(0, 8, 8) == [(0, 8)]
    assert base_factorization(4, 6, 8) == [(4, 6)]
    with pytest.raises(ValueError):
        base_factorization(3, 3, 8)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 7).flatmap(lambda e: st.tuples(st.just(1 << e), st.integers(0, (1 << e) - 1),
                                                     st.integers(1, 1 << e))))
def test_factorization_cover_property(args):
    n, l, r = args
    if r <= l:
        l, r = r - 1, l + 1
    parts = base_factorization(l, r, n)
    assert parts[0][0] == l and parts[-1][1] == r
    assert all(a[1] == b[0] for a, b in zip(parts, parts[1:]))
    assert all(is_bs(a, c, n) for a, c in parts)
    assert len(parts) <= 2 * (n.bit_length() - 1)


def test_general_level_zero_is_product(prog8):
    p = PerturbedProvider(prog8, F(1, 40), seed=1)
    want = identity(3)
    for a, c in base_factorization(1, 6, 8):
        want = want @ p.base(a, c)
    assert (level_matrix_general(p, 1, 6, 0) == want).all()
    assert (level_matrix_general(p, 5, 5, 2) == identity(3)).all()
    for l, r in bs_intervals(8):
        assert (level_matrix_general(p, l, r, 2) == level_matrix(p, l, r, 2)).all()


def test_general_exact_provider_is_exact(prog8):
    p = ExactProvider(prog8)
    for l in range(8):
        for r in range(l + 1, 9):
            assert (level_matrix_general(p, l, r, 2) == rw_matrix(prog8, l, r)).all()


def test_newrec_base_case(prog8):
    p = PerturbedProvider(prog8, F(1, 40))
    m, _ = newrec_matrix(p, 3, 4, 1, 1)
    assert (m == layer_rw(prog8, 4)).all()


@pytest.mark.parametrize("memo", [True, False])
def test_newrec_all_splits(memo):
    b = gen_regular(8, 3, 5)
    p = PerturbedProvider(b, F(1, 40), seed=2)
    for k in range(1, 4):
        for h in range(1, k + 1):
            for l, r in [(0, 8), (1, 6), (2, 7), (3, 5)]:
                m, ledger = newrec_matrix(p, l, r, k, h, memo=memo)
                assert is_zero(m - level_matrix_general(p, l, r, k))
                assert ledger.max_recursion_depth <= (max(k, 1) - 1).bit_length() + 1


def test_newrec_errors(prog8):
    p = ExactProvider(prog8)
    with pytest.raises(ValueError):
        newrec_matrix(p, 0, 8, 2, 3)
    with pytest.raises(ValueError):
        newrec_matrix(p, 0, 8, 2, 0)
    with pytest.raises(ValueError):
        newrec_matrix(p, 4, 4, 1)
    m, ledger = newrec_matrix(p, 0, 8, 0)
    assert (m == rw_matrix(prog8, 0, 8)).all() and ledger.max_recursion_depth == 0


def test_ledger_depth_for_large_k():
    p = ExactProvider(gen_regular(16, 2, 0))
    for k in list(range(1, 17)) + [31, 32, 33, 64]:
        _, ledger = newrec_matrix(p, 0, 16, k)
        assert ledger.max_recursion_depth <= (k - 1).bit_length() + 1
        if k <= 8:
            assert ledger.max_recursion_depth == k.bit_length()
        assert set(ledger.to_dict()) == {"depth", "live_peak", "base_calls"}


def test_block_laplacian_inverse(prog8):
    lap = BlockLaplacian.laplacian(prog8)
    inv = lap.inverse_unit_upper()
    assert not inv.equals_blocks(lambda i, j: rw_matrix(prog8, i, j))
    prod = lap @ inv
    assert not prod.equals_blocks(lambda i, j: identity(3) if i == j else identity(3) * 0)


@pytest.mark.parametrize("kind", ["exact", "perturbed", "rounded"])
def test_richardson(kind, prog8):
    p = {"exact": ExactProvider(prog8), "perturbed": PerturbedProvider(prog8, F(1, 40), seed=4),
         "rounded": RoundedProvider(prog8, grid_bits=1)}[kind]
    for k in range(4):
        rep = richardson_check(p, k)
        assert rep["pass"], rep


def test_richardson_cap():
    with pytest.raises(ValueError):
        richardson_check(ExactProvider(gen_regular(64, 2, 0)), 1)


def test_choose_gamma():
    assert choose_gamma(16) == F(1, 4)
    assert choose_gamma(4) == F(1, 3)
    assert choose_gamma(1024) == F(1, 10)


def test_estimate_within_eps():
    b = with_accept(gen_regular(16, 4, 3), [1])
    for eps in (F(1, 100), F(1, 1000)):
        value, ledger = estimate_expectation(b, eps)
        assert abs(value - brute_expectation(b)) <= eps
        assert ledger.base_calls > 0


def test_estimate_constant_and_trivial():
    b = gen_regular(8, 3, 0)
    assert estimate_expectation(with_accept(b, range(3)), F(1, 1000))[0] == 1
    value, _ = estimate_expectation(b, 1)
    assert abs(value - brute_expectation(b)) <= 1
    with pytest.raises(ValueError):
        estimate_expectation(b, 0)


def test_estimate_level_selection():
    b = gen_regular(16, 4, 0)
    rep = estimate_report(b, F(1, 10 ** 4))
    s = EpsSchedule(F(1, 4), 16)
    assert s.eps(rep.k) ** 2 <= F(1, 10 ** 8) / 4 < s.eps(rep.k - 1) ** 2
    assert all(e <= float(rep.base_bound) for e in rep.base_errors.values())


def test_estimate_reports_failed_certification(monkeypatch):
    import regwprg.spacerec as sr

    class Loose(sr.RoundedProvider):
        def _base(self, l, r):
            return PerturbedProvider(self.program, F(1, 2), mode="sv")._base(l, r)

    monkeypatch.setattr(sr, "RoundedProvider", Loose)
    with pytest.raises(BaseCertificationError):
        estimate_expectation(gen_regular(8, 3, 1), F(1, 100))
