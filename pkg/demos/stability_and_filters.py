"""Robustness of the lattice conductivity.

Run with ``python3 demos/stability_and_filters.py`` (a few minutes). Shows
that a compact perturbation away from the wall leaves the Dirac value in
place, that moving the edge filter across the wall switches the sign, and
how the error shrinks with the domain size.
"""
from edgecond.conductivity import conductivity_trace, convergence_study, filter_sweep
from edgecond.lattice import (FilterSpec, Grid, assemble_hamiltonian, bump_perturbation,
                              make_filter_P, make_filter_Q)
from edgecond.models import PAULI, WallProfile, dirac2x2


def main():
    L, N = 24.0, 48
    grid = Grid(N, N, L, L)
    fs = FilterSpec(3.0, 3.0)
    H = assemble_hamiltonian(dirac2x2(WallProfile(period=L)), grid)
    P = make_filter_P(grid, fs)
    Q = make_filter_Q(grid, fs)
    base = conductivity_trace(H, P, Q).two_pi_sigma
    print(f"unperturbed {base:+.5f}")
    for d, name in enumerate(("s0", "s1", "s2", "s3")):
        V = bump_perturbation(grid, 6.0, 7.5, direction=PAULI[d], filter_spec=fs)
        v = conductivity_trace(H.plus(V), P, Q).two_pi_sigma
        print(f"bump strength 6 along {name}: {v:+.5f} ({100 * abs(v / base - 1):.2f}% change)")

    small = Grid(32, 32, 16.0, 16.0)
    Hs = assemble_hamiltonian(dirac2x2(WallProfile(period=16.0)), small)
    sweep = filter_sweep(Hs, make_filter_P(small, FilterSpec(1.5, 1.5)), None,
                         shifts=[0.0, 2.0, 4.0, 6.0, 8.0], filter_spec=FilterSpec(1.5, 1.5))
    for s, v in zip(sweep.params, sweep.values):
        print(f"Q shifted by {s:4.1f}: {v:+.5f}")

    conv = convergence_study(dirac2x2(), [12.0, 18.0, 24.0, 36.0], 0.375)
    for row in conv:
        print(f"L = {row['L']:4.1f}: {row['value']:+.6f}  error {row['error']:.2e}")


if __name__ == "__main__":
    main()
