"""Compile the first few step unitaries of the network evolution into a
9-CNOT ansatz, then replay the circuits and compare with exact propagation.

Run: python3 demos/compile_circuit.py [steps]
"""

import sys

import numpy as np

from purodyn import circuit, network, scenarios
from purodyn.states import state_fidelity


def main(steps="5"):
    spec = network.TLSNetworkSpec.from_dict(scenarios.default_config("tls-network")["network"])
    ht = network.network_hamiltonian(spec)
    sched = circuit.compile_schedule(ht, 4.04, int(steps), max_step=0.04)
    psi0 = network.initial_state()
    replay = circuit.playback(sched, psi0)
    psi = psi0
    for k, (s, u) in enumerate(zip(sched.steps, sched.targets)):
        psi = u @ psi
        f = state_fidelity(np.outer(psi, psi.conj()), np.outer(replay[k + 1], replay[k + 1].conj()))
        print(f"step {k}: t = {s.t_end:6.2f}  gate fidelity {s.fidelity:.6f}  state fidelity {f:.6f}")
    print(circuit.emit_circuit_text(sched.ansatz, sched.steps[0].params).splitlines()[4])


if __name__ == "__main__":
    main(*sys.argv[1:])
