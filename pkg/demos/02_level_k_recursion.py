"""The level-k recursion and how fast it cancels base-case error.

Start from level-0 matrices that are off by delta in the infinity norm.
Each level splits an interval at its midpoint and combines the halves so
that first-order errors cancel.  The printed error drops roughly by a
factor of delta per level.
"""

from fractions import Fraction

from regwprg.approx import delta_identity_residual, level_matrix
from regwprg.providers import PerturbedProvider
from regwprg.ratlin import inf_norm, is_zero
from regwprg.robp import gen_regular, rw_matrix

b = gen_regular(16, 4, seed=5)
exact = rw_matrix(b, 0, 16)

for delta in (Fraction(1, 20), Fraction(1, 200)):
    p = PerturbedProvider(b, delta, mode="inf", seed=1)
    print(f"delta = {delta}")
    for k in range(5):
        err = inf_norm(level_matrix(p, 0, 16, k) - exact)
        print(f"  k={k}: |M^(k) - M|_inf = {float(err):.3e}")

# the error matrices obey an exact algebraic identity; the residual is zero, not small
p = PerturbedProvider(b, Fraction(1, 20), mode="sv", seed=3)
print("\nidentity residual zero on (0,16), k=1..4:",
      all(is_zero(delta_identity_residual(p, 0, 16, k)) for k in range(1, 5)))
