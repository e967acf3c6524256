"""Exact maximum norms of the Fourier-multiplier operators behind the error analysis.

For a convolution on the periodic grid the induced max-norm is the l1 sum
of its kernel, so these numbers are exact, not estimates.  A and the
first-difference solution operator stay bounded as h -> 0, second
differences of the inverse Laplacian grow like |log h|, and the
Crank-Nicolson powers stay bounded uniformly in n.
"""

import numpy as np

from iimns.grid import GridSpec
from iimns.harness.studies import brute_force_inverse_laplacian_norm, cn_norm_sequences, log_fit
from iimns.spectral import A_symbol, forward_symbol, inverse_laplacian_symbol, maxnorm_of_multiplier

inv = inverse_laplacian_symbol()
Ns = [16, 32, 64, 128]
print(f"{'N':>5} {'||A||':>8} {'||D Lap^-1||':>13} {'||D^2 Lap^-1||':>15} {'sup_n ||S^n||':>14}")
d2 = []
for N in Ns:
    spec = GridSpec(N)
    a = maxnorm_of_multiplier(A_symbol(), spec)
    d1 = maxnorm_of_multiplier(forward_symbol(0) * inv, spec)
    d2.append(maxnorm_of_multiplier(forward_symbol(0) * forward_symbol(0) * inv, spec))
    s, _ = cn_norm_sequences(spec, 0.5, range(1, 257))
    print(f"{N:>5} {a:8.4f} {d1:13.6f} {d2[-1]:15.4f} {max(s):14.4f}")

c1, c2, resid = log_fit(np.pi / np.array(Ns), np.array(d2))
print(f"\n||D^2 Lap^-1|| ~ {c1:.3f} + {c2:.3f} |log h|  (max relative residual {100 * resid:.2f}%)")

bf = brute_force_inverse_laplacian_norm(GridSpec(16))
print(f"dense pseudo-inverse row sum at N = 16: {bf['row_sum']:.6f}; "
      f"kernel sum: {maxnorm_of_multiplier(inv, GridSpec(16)):.6f}")
