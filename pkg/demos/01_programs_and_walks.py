"""Regular programs and their random-walk matrices.

A regular program gives every state exactly two incoming labelled edges, so
each layer's averaged transition matrix is doubly stochastic.  The product
over a range of layers is the expected transition over uniform inputs.
"""

from regwprg.ratlin import is_doubly_stochastic, to_float
from regwprg.robp import brute_expectation, enumerate_expectation, gen_regular, layer_rw, rw_matrix

b = gen_regular(8, 3, seed=2)
print("program: n =", b.n, "w =", b.w, "start =", b.start, "accept =", sorted(b.accept))
print("layer 1 table (state -> (on 0, on 1)):", b.layers[0])

m1 = layer_rw(b, 1)
print("\nM_1 =\n", to_float(m1))
print("doubly stochastic:", is_doubly_stochastic(m1))

m = rw_matrix(b, 0, 8)
print("\nM_{0..8} =\n", to_float(m))

# the acceptance probability two ways: matrix product vs running all 256 inputs
print("\nE[B] from matrices:", brute_expectation(b))
print("E[B] from enumeration:", enumerate_expectation(b))
