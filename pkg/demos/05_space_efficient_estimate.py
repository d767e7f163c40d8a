"""White-box estimate of E[B] through the h-split recursion.

The level is chosen from the target error, level-0 matrices are rounded and
certified in the SV sense, and the level-k matrix is evaluated by splitting
the level in half at each step.  The ledger records recursion depth, peak
retained matrices and base-case calls.
"""

from fractions import Fraction

from regwprg.providers import PerturbedProvider
from regwprg.robp import RegularROBP, brute_expectation, gen_regular
from regwprg.spacerec import base_factorization, estimate_report, lca, richardson_check

print("lca(1, 6) =", lca(1, 6), " factorization of (1, 6) in n=8:", base_factorization(1, 6, 8))

g = gen_regular(16, 4, seed=3)
b = RegularROBP(16, 4, g.layers, g.start, frozenset({1}))
truth = brute_expectation(b)
print("\ntruth =", truth)
for eps in (Fraction(1, 10 ** 3), Fraction(1, 10 ** 4), Fraction(1, 10 ** 6)):
    rep = estimate_report(b, eps)
    err = abs(rep.value - truth)
    print(f"eps={float(eps):.0e}: k={rep.k} error={float(err):.2e} ledger={rep.ledger.to_dict()}")

p = PerturbedProvider(gen_regular(8, 3, seed=0), Fraction(1, 40))
print("\nRichardson iteration on the block Laplacian matches the level-k blocks:",
      all(richardson_check(p, k)["pass"] for k in range(4)))
