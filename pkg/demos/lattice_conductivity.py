"""Edge conductivity of a periodic wall on a spectral lattice.

Run with ``python3 demos/lattice_conductivity.py``. Prints the quantized
value for each 2x2 model, the no-filter control (which must vanish) and the
agreement of the fibered trace with the full dense evaluation.
"""
from edgecond.conductivity import conductivity_trace
from edgecond.lattice import (FilterSpec, Grid, assemble_hamiltonian, identity_filter, make_filter_P,
                              make_filter_Q)
from edgecond.models import WallProfile, make_model


def main():
    L, N = 24.0, 64
    grid = Grid(N, N, L, L)
    fs = FilterSpec(1.5, 1.5)
    P, Q = make_filter_P(grid, fs), make_filter_Q(grid, fs)
    for name in ("dirac2x2", "pwave", "dwave"):
        H = assemble_hamiltonian(make_model(name, wall=WallProfile(period=L)), grid)
        rep = conductivity_trace(H, P, Q)
        none = conductivity_trace(H, P, identity_filter(grid))
        print(f"{name:10s} 2pi sigma {rep.two_pi_sigma:+.5f} ({rep.method}, {rep.n_modes} modes)"
              f"   without Q {none.two_pi_sigma:+.2e}")

    grid = Grid(16, 16, 8.0, 8.0)
    H = assemble_hamiltonian(make_model("dirac2x2", wall=WallProfile(period=8.0, wall_width_delta=1.0)), grid)
    P, Q = make_filter_P(grid, FilterSpec(1.0, 1.0)), make_filter_Q(grid, FilterSpec(1.0, 1.0))
    a = conductivity_trace(H, P, Q, method="fibered").two_pi_sigma
    b = conductivity_trace(H, P, Q, method="full").two_pi_sigma
    print(f"fibered {a:+.12f}  full {b:+.12f}  difference {abs(a - b):.1e}")


if __name__ == "__main__":
    main()
