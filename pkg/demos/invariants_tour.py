"""Interface invariant of every bundled model, computed several independent ways.

Run with ``python3 demos/invariants_tour.py``. The signed-determinant count,
the Gauss-map degree and (for the 2x2 models) the bulk-difference integral
should agree on one integer per model. The 3x3 model uses the winding of its
eigenprojector instead.
"""
import numpy as np

from edgecond.invariants import (bulk_difference_fh, degree_gauss_map, degree_signed_det,
                                 field_from_model, winding_integral_3x3)
from edgecond.models import WallProfile, make_model


def main():
    wall = WallProfile()
    for name in ("dirac2x2", "pwave", "dwave"):
        model = make_model(name, wall=wall)
        sd, zeros = degree_signed_det(model, return_zeros=True)
        R = max(3.0, 1.5 * max((np.linalg.norm(z.location) for z in zeros), default=0.0))
        gm = -degree_gauss_map(field_from_model(model), R, 128, check=False)
        line = f"{name:10s} zeros {len(zeros)}  signed_det {sd:+.0f}  gauss_map {gm:+.6f}"
        if name != "dwave":
            line += f"  bulk_difference {bulk_difference_fh(model):+.4f}"
        print(line)

    model = make_model("shallow_water3x3", wall=wall)
    print(f"{'3x3':10s} winding {winding_integral_3x3(model.wall, 5.0, 256):+.6f}")

    # swapping the plateaus reverses the interface and flips every invariant
    flipped = WallProfile(plateau_minus=1.0, plateau_plus=-1.0)
    print("flipped dirac signed_det", degree_signed_det(make_model("dirac2x2", wall=flipped)))


if __name__ == "__main__":
    main()
