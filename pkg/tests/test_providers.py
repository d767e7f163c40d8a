from fractions import Fraction as F

import pytest

from regwprg.approx import bs_intervals
from regwprg.providers import (
    PerturbedProvider, PrgBackedProvider, RoundedProvider, make_provider, round_to_grid,
)
from regwprg.ratlin import col_sums, inf_norm, row_sums
from regwprg.robp import layer_rw, rw_matrix
from regwprg.svapprox import sv_error
from regwprg.wprg import BaseGenerator


@pytest.mark.parametrize("mode", ["inf", "weight", "sv"])
def test_perturbed_keeps_marginals(mode, prog8):
    p = PerturbedProvider(prog8, F(1, 40), mode=mode, seed=5)
    for l, r in bs_intervals(8, min_len=2):
        m = p.base(l, r)
        assert all(x == 1 for x in row_sums(m)) and all(x == 1 for x in col_sums(m))


def test_perturbed_inf_norm_is_delta(prog8):
    p = PerturbedProvider(prog8, F(1, 40), mode="inf")
    assert inf_norm(p.base(0, 8) - rw_matrix(prog8, 0, 8)) == F(1, 40)


def test_sv_mode_bound(prog8):
    p = PerturbedProvider(prog8, F(1, 40), mode="sv", seed=2)
    for l, r in bs_intervals(8, min_len=2):
        assert sv_error(rw_matrix(prog8, l, r), p.base(l, r)).eps_measured <= 1 / 40 + 1e-12


def test_perturbed_is_seeded(prog8):
    a = PerturbedProvider(prog8, F(1, 40), seed=1).base(0, 4)
    b = PerturbedProvider(prog8, F(1, 40), seed=1).base(0, 4)
    c = PerturbedProvider(prog8, F(1, 40), seed=2).base(0, 4)
    assert (a == b).all() and not (a == c).all()


def test_perturbed_zero_and_bad_args(prog8):
    p = PerturbedProvider(prog8, 0)
    assert (p.base(0, 8) == rw_matrix(prog8, 0, 8)).all()
    with pytest.raises(ValueError):
        PerturbedProvider(prog8, F(1, 10), mode="nope")
    with pytest.raises(ValueError):
        PerturbedProvider(prog8, F(-1, 10))


def test_length_one_intervals_are_exact(prog8):
    for p in (PerturbedProvider(prog8, F(1, 10)), RoundedProvider(prog8, grid_bits=1)):
        assert (p.base(3, 4) == layer_rw(prog8, 4)).all()
    with pytest.raises(ValueError):
        p.base(1, 3)


def test_prg_backed_row_stochastic(prog8):
    p = PrgBackedProvider(prog8, BaseGenerator(8, degree_bits=1))
    for l, r in bs_intervals(8):
        assert all(x == 1 for x in row_sums(p.base(l, r)))
    with pytest.raises(ValueError):
        PrgBackedProvider(prog8, BaseGenerator(4))


def test_prg_backed_with_full_generator_is_exact(prog8):
    class Everything:
        def table(self):
            import numpy as np
            return (np.arange(256)[:, None] >> np.arange(7, -1, -1)) & 1

    p = PrgBackedProvider(prog8, Everything())
    for l, r in bs_intervals(8):
        assert (p.base(l, r) == rw_matrix(prog8, l, r)).all()


def test_round_to_grid():
    import numpy as np
    m = np.array([[F(3, 8), F(5, 8)]], dtype=object)
    assert list(round_to_grid(m, 2)[0]) == [F(1, 2), F(1, 2)]


def test_rounded_marginals(prog8):
    p = RoundedProvider(prog8, grid_bits=1)
    for l, r in bs_intervals(8, min_len=2):
        m = p.base(l, r)
        assert all(x == 1 for x in row_sums(m)) and all(x == 1 for x in col_sums(m))


def test_make_provider(prog8):
    assert make_provider("exact", prog8).kind == "exact"
    assert make_provider("perturbed", prog8, delta=F(1, 9)).delta == F(1, 9)
    assert make_provider("prg", prog8).kind == "prg"
    assert make_provider("rounded", prog8, grid_bits=3).grid_bits == 3
    with pytest.raises(ValueError):
        make_provider("bogus", prog8)
