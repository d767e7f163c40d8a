"""Two ways to measure how good an approximate walk matrix is.

Weight approximation compares the error on a vector y with the total edge
disagreement W(l, r, y).  SV approximation compares it with the mixing gap
|y|^2 - |My|^2.  Both are zero for exact matrices and both propagate through
the level-k recursion with a bounded blow-up.
"""

from fractions import Fraction

from regwprg.approx import EpsSchedule
from regwprg.providers import PerturbedProvider, RoundedProvider
from regwprg.ratlin import rat_vector
from regwprg.robp import gen_regular, rw_matrix
from regwprg.svapprox import mixing_gap, sv_error, sv_main_harness
from regwprg.weights import total_weight, weight_test_set, weight_approx_error, wprg_main_harness

b = gen_regular(16, 4, seed=1)
y = rat_vector([1, 0, -1, Fraction(1, 2)])
print("W(0,16,y) =", total_weight(b, 0, 16, y), " bound w^2 |y|_inf =", 16)
print("D(M_{0..16}, y) =", mixing_gap(rw_matrix(b, 0, 16), y))

gamma = Fraction(1, 4)
base = EpsSchedule(gamma, 16).eps(0) / 3
print("\nlevel-0 budget eps(0)/3 =", base)

p = PerturbedProvider(b, base, mode="weight", seed=2)
print("weight error of a certified base on (0,8):",
      float(weight_approx_error(b, p.base(0, 8), 0, 8, weight_test_set(4))))
rows = wprg_main_harness(b, gamma, 3, p)
print("weight harness keys:", len(rows), "all within C_t eps(k):", all(r["pass"] for r in rows))

r = RoundedProvider(b, grid_bits=1, target=base, fill_budget=True)
print("\nSV error of a rounded base on (0,16):", sv_error(rw_matrix(b, 0, 16), r.base(0, 16)).eps_measured)
rows = sv_main_harness(b, gamma, 3, r)
print("SV harness keys:", len(rows), "all within C_t eps(k):", all(row["pass"] for row in rows))
worst = max(rows, key=lambda row: row["eps_measured"] / row["bound"])
print("tightest key:", worst["key"], f"measured {worst['eps_measured']:.3e} vs bound {worst['bound']:.3e}")
