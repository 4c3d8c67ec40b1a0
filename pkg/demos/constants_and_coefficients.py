"""Lattice constants and interaction coefficients, computed and cross-checked.

Run:  python3 demos/constants_and_coefficients.py
"""
import math

from transport_noise.lattice import eps_table, lattice_sum_S, mode_set, viscosity_threshold
from transport_noise.nonlinear import h_coeff, h_coeff_sq_reduced, h_coeff_sq_sum, h_table

# The quartic lattice sum over nonzero integer points, with a certified error.
S = lattice_sum_S(1e-10)
print(f"sum |k|^-4        = {S.value:.12f}  (+- {S.tail_bound:.1e}, radius {S.radius})")

# Threshold viscosity for a given constant, and the 10-digit value at 4 pi.
print(f"threshold(S)      = {viscosity_threshold(S.value):.10f}")
print(f"threshold(4 pi)   = {viscosity_threshold(4 * math.pi):.10f}")

# Normalising constants of the noise: full ball and the inner third.
full, third = eps_table(12), eps_table(12, "third")
for N in (3, 6, 9, 12):
    print(f"N={N:>2}  eps_full={full[N - 1]:.6f}  eps_third={third[N - 1]:.6f}")

# A few interaction coefficients.  Only k + l = j is nonzero.
j = (1, 0)
for k, l in [((2, 1), (-1, -1)), ((1, 1), (0, -1)), ((2, 0), (1, 0))]:
    print(f"h{j}{k}{l} = {h_coeff(j, k, l):.6f}")

# |h|^2 has a closed reduced form; compare on a small table.
# The table holds both l = j - k and l = -j - k; the reduced form covers the first.
tab = h_table(j, 6)
same = [(tuple(k), c) for k, l, c in zip(tab.k, tab.l, tab.values) if tuple(k + l) == j]
worst = max(abs(abs(c) ** 2 - h_coeff_sq_reduced(j, k)) for k, c in same)
print(f"|h|^2 vs reduced form, worst over {len(same)} of {len(tab)} entries: {worst:.1e}")

# The second moment of the drift in mode j grows with the cutoff.
for N in (4, 8, 16):
    print(f"sum |h_(1,0)|^2 up to N={N:>2}: {h_coeff_sq_sum(j, cutoff=N):10.2f}")
print("modes in the N=9 ball:", len(mode_set(9)), " in its safe band:", len(mode_set(3)))
