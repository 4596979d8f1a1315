"""Edge branches of the fiber operators and their spectral flow.

Run with ``python3 demos/branch_structure.py``. For each model the signed
crossings of the gap centre by wall-localized branches match the interface
invariant, while the total over all branches cancels because the periodic
wall carries a second, opposite interface.
"""
from edgecond.branches import branch_spectrum, spectral_flow, xi_grid
from edgecond.lattice import Grid
from edgecond.models import WallProfile, make_model


def main():
    L, N = 24.0, 64
    grid = Grid(N, N, L, L)
    xi = xi_grid(grid, 3.14159)
    for name in ("dirac2x2", "pwave", "dwave", "shallow_water3x3"):
        model = make_model(name, wall=WallProfile(period=L))
        lo, hi = model.gap
        E = 0.5 * (lo + hi)
        window = (lo - 0.25 * (hi - lo), hi + 0.25 * (hi - lo))
        bs = branch_spectrum(model, xi, window, grid, 1.5)
        total, filtered = spectral_flow(bs, E)
        print(f"{name:18s} branches {bs.n_branches:3d}  total {total:+d}  wall-localized {filtered:+d}")


if __name__ == "__main__":
    main()
