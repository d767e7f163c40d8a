"""The weighted generator: pick a signed term, fill it from INW, weight by the sign.

Each seed selects one signed sequence of the level-k expansion (or a dummy
of weight zero) and one INW seed.  The INW symbols drive the base generator
to produce the bits of each factor.  Averaging rho(s) B(G(s)) over all
seeds approximates E[B].
"""

from fractions import Fraction

from regwprg.robp import brute_expectation, gen_regular
from regwprg.wprg import build_wprg, enum_term, eval_wprg, expand, wprg_output

print("expand(0, 4, 1):")
for t in expand(0, 4, 1):
    print("  ", t.indices, "+" if t.sign > 0 else "-")
print("enum_term(4, 1, 0b0000) =", enum_term(4, 1, 0))
print("enum_term(4, 1, 0b1111) =", enum_term(4, 1, 0b1111), "(dummy)")

b = gen_regular(4, 3, seed=2)
truth = brute_expectation(b)
for k in (0, 1, 2):
    desc = build_wprg(b, Fraction(1, 8), Fraction(1, 4), k=k)
    got = eval_wprg(b, desc)
    print(f"\nk={k}: seed bits d={desc.d} (enumeration {desc.enum_bits} + INW {desc.d_inw}), |S|={desc.s_size}")
    print(f"  INW lambda={desc.inw.verified_lambda:.3f}, guaranteed INW error {desc.inw_bound:.3g}"
          f" vs target {float(desc.eps_inw):.3g} (feasible: {desc.inw_feasible})")
    print(f"  E_s[rho B(G(s))] = {got.value}  truth = {truth}  error = {float(abs(got.value - truth)):.4f}")

rho, x = wprg_output(desc, 12345)
print("\none seed's output: rho =", rho, "bits =", x)
