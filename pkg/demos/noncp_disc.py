"""A map that flattens the Bloch sphere onto the equatorial disc is not
completely positive, yet each input state can still be sent to its image by
a unitary on the purified system-bath space.

Run: python3 demos/noncp_disc.py [out.csv]
"""

import sys

import numpy as np

from purodyn import channels
from purodyn.scenarios import atomic_write, csv_text


def main(path="noncp_disc.csv"):
    print(f"disc map Choi eigenvalues: {np.round(channels.choi_eigenvalues(channels.DISC_MAP), 12)}")
    comp = channels.cp_disc_comparator()
    print(f"comparator ({comp.l1}, {comp.l2}, {comp.l3}) is CP: {channels.is_cp(comp)}")

    rows = channels.transfer_samples(channels.sample_bloch_sphere(200))
    print(f"max |z'| over 200 surface points = {np.abs(rows[:, 5]).max():.1e}")
    print(f"max unitarity residual = {rows[:, 6].max():.1e}")
    atomic_write(path, csv_text(["x", "y", "z", "x_out", "y_out", "z_out", "unitarity_residual"], rows))
    print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
