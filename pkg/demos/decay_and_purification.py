"""Amplitude-style decay of a qubit, with the state carried as a pure
system-bath vector and compared against the master-equation solution.

Run: python3 demos/decay_and_purification.py [out.csv]
"""

import sys

import numpy as np

from purodyn.lindblad import decay_channel_model, integrate
from purodyn.states import projector, purify, reduce_purified
from purodyn.scenarios import atomic_write, csv_text


def main(path="decay_and_purification.csv"):
    t = np.arange(0.0, 50.0001, 0.05)
    traj = integrate(decay_channel_model(), projector(1, 2), t)
    closed = 0.5 + 0.5 * np.exp(-0.2 * t)
    print(f"max |rho11 - closed form| = {np.abs(traj.states[:, 1, 1].real - closed).max():.2e}")

    # every state on the trajectory has a purification whose reduction is exact
    err = max(np.abs(reduce_purified(purify(r), 2) - r).max() for r in traj.states)
    print(f"max purification round-trip error = {err:.2e}")

    rows = np.column_stack([t, traj.states[:, 0, 0].real, traj.states[:, 1, 1].real, closed])
    atomic_write(path, csv_text(["t", "rho00", "rho11", "rho11_closed_form"], rows))
    print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
