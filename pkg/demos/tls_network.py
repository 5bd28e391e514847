"""Two system qubits, each coupled to its own bath qubit by a train of
Gaussian pulses. Bath pulses with opposite sign pull excitation back into the
system, which shows up as intervals of rising system population.

Uses the unfitted default network; `purodyn run` on the tls-network scenario
fits the pulses first.

Run: python3 demos/tls_network.py [out.csv]
"""

import sys

import numpy as np

from purodyn import network, scenarios
from purodyn.purified_dynamics import propagate


def main(path="tls_network_demo.csv"):
    spec = network.TLSNetworkSpec.from_dict(scenarios.default_config("tls-network")["network"])
    t = np.arange(0.0, 400.0001, 0.5)
    traj = propagate(network.network_hamiltonian(spec), network.initial_state(), t, max_step=0.1)
    series = network.population_series(t, traj.purified_states)
    system = series.total(("S1", "S2"))
    print(f"system population at t=400: {system[-1]:.4f}")
    for a, b in network.detect_backflow(series, window=10):
        print(f"backflow {a:7.1f} .. {b:7.1f}")
    rows = np.column_stack([t] + [series.populations[n] for n in network.NODE_NAMES])
    scenarios.atomic_write(path, scenarios.csv_text(["t", *network.NODE_NAMES], rows))
    print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
