"""Two-node two-level-system network with one effective bath node per system
node. Qubit order on the 16-dimensional composite space is
``(S1, S2, B1, B2)``; edge ``i`` couples ``S_i`` to ``B_i``."""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import qmath
from .errors import IndexOutOfRange, LengthMismatch, UnsupportedNodeCount
from .purified_dynamics import TotalHamiltonian
from .shapes import GaussianTrain, envelope_from_dict, params_to_hermitian

NODE_NAMES = ("S1", "S2", "B1", "B2")
LAYOUT = (2, 2, 2, 2)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
SIGMA_MINUS = SIGMA_PLUS.T.copy()

EDGE_PARAM_COUNT = {"exchange": 2, "full": 16}


def exchange_generator(g):
    """``g |10><01| + h.c.`` on an (S, B) pair: moves the excitation S <-> B."""
    g = complex(g)
    return g * np.kron(SIGMA_PLUS, SIGMA_MINUS) + np.conj(g) * np.kron(SIGMA_MINUS, SIGMA_PLUS)


def edge_generator(params, mode="exchange"):
    params = np.asarray(params, dtype=float)
    if mode == "exchange":
        if params.shape != (2,):
            raise LengthMismatch(f"exchange edges take 2 parameters, got {params.size}")
        return exchange_generator(params[0] + 1j * params[1])
    if mode == "full":
        return params_to_hermitian(params, 4)
    raise ValueError(f"unknown edge mode {mode!r}")


@dataclass(frozen=True)
class TLSNetworkSpec:
    system_nodes: int = 2
    bath_nodes: int = 2
    e0: float = -0.5
    e1: float = 0.5
    coupling_c: float = 0.2
    edge_envelopes: Tuple[object, ...] = (GaussianTrain(), GaussianTrain())
    edge_base_params: Tuple[Tuple[float, ...], ...] = ((0.0, 0.0), (0.0, 0.0))
    edge_mode: str = "exchange"

    def __post_init__(self):
        if self.system_nodes != 2:
            raise UnsupportedNodeCount(f"only two system nodes are supported, got {self.system_nodes}")
        if self.bath_nodes != self.system_nodes:
            raise UnsupportedNodeCount("need exactly one bath node per system node")
        if not self.e1 > self.e0:
            raise ValueError("require e1 > e0")
        if len(self.edge_envelopes) != 2 or len(self.edge_base_params) != 2:
            raise LengthMismatch("need one envelope and one parameter set per edge")
        base = tuple(tuple(float(x) for x in p) for p in self.edge_base_params)
        for p in base:
            if len(p) != EDGE_PARAM_COUNT[self.edge_mode]:
                raise LengthMismatch(f"{self.edge_mode} edges take {EDGE_PARAM_COUNT[self.edge_mode]} parameters")
        object.__setattr__(self, "edge_base_params", base)
        object.__setattr__(self, "edge_envelopes", tuple(self.edge_envelopes))

    def to_vector(self):
        parts = []
        for env, base in zip(self.edge_envelopes, self.edge_base_params):
            parts.extend([env.params(), np.asarray(base)])
        return np.concatenate(parts)

    def from_vector(self, v):
        v = np.asarray(v, dtype=float)
        envs, bases, k = [], [], 0
        for env, base in zip(self.edge_envelopes, self.edge_base_params):
            ne = len(env.params())
            envs.append(env.with_params(v[k:k + ne]))
            k += ne
            bases.append(tuple(v[k:k + len(base)]))
            k += len(base)
        if k != len(v):
            raise LengthMismatch(f"expected {k} coordinates, got {len(v)}")
        return replace(self, edge_envelopes=tuple(envs), edge_base_params=tuple(bases))

    def to_dict(self):
        return {
            "e0": self.e0,
            "e1": self.e1,
            "coupling_c": self.coupling_c,
            "edge_mode": self.edge_mode,
            "edge_envelopes": [e.to_dict() for e in self.edge_envelopes],
            "edge_base_params": [list(p) for p in self.edge_base_params],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            e0=float(d.get("e0", -0.5)),
            e1=float(d.get("e1", 0.5)),
            coupling_c=float(d.get("coupling_c", 0.2)),
            edge_mode=d.get("edge_mode", "exchange"),
            edge_envelopes=tuple(envelope_from_dict(e) for e in d["edge_envelopes"]),
            edge_base_params=tuple(tuple(p) for p in d["edge_base_params"]),
        )


def _node_hamiltonian(spec):
    return np.diag([spec.e0, spec.e1]).astype(complex)


def build_system_hamiltonian(spec):
    h = _node_hamiltonian(spec)
    eye = np.eye(2)
    hop = np.kron(SIGMA_PLUS, SIGMA_MINUS) + np.kron(SIGMA_MINUS, SIGMA_PLUS)
    return np.kron(h, eye) + np.kron(eye, h) + spec.coupling_c * hop


def build_bath_hamiltonian(spec):
    h = _node_hamiltonian(spec)
    eye = np.eye(2)
    return np.kron(h, eye) + np.kron(eye, h)


class EdgeInteractions:
    """``sum_i gamma_i(t) G_i`` with ``G_i`` the edge generator embedded on
    the ``(S_i, B_i)`` qubit pair."""

    def __init__(self, spec):
        self.spec = spec
        self.generators = [
            qmath.embed(edge_generator(base, spec.edge_mode), [i, 2 + i], LAYOUT)
            for i, base in enumerate(spec.edge_base_params)
        ]

    def envelopes(self, ts):
        ts = np.asarray(ts, dtype=float)
        return np.stack([np.broadcast_to(env(ts), ts.shape) for env in self.spec.edge_envelopes])

    def many(self, ts):
        g = self.envelopes(ts)
        return np.einsum("et,eij->tij", g, np.stack(self.generators))

    def __call__(self, t):
        return self.many([t])[0]


def build_edge_interactions(spec, t):
    return EdgeInteractions(spec)(t)


def network_hamiltonian(spec):
    return TotalHamiltonian(4, 4, build_system_hamiltonian(spec), build_bath_hamiltonian(spec),
                            EdgeInteractions(spec))


def initial_state(excited=("S1",)):
    """Computational basis state with the named nodes excited."""
    idx = 0
    for name in excited:
        idx |= 1 << (3 - NODE_NAMES.index(name))
    psi = np.zeros(16, dtype=complex)
    psi[idx] = 1.0
    return psi


def excited_population(rho, node, layout=LAYOUT):
    layout = list(layout)
    if not 0 <= node < len(layout):
        raise IndexOutOfRange(f"node {node} outside layout of {len(layout)} nodes")
    return float(qmath.reduced_state(rho, layout, [node])[1, 1].real)


def node_populations(psi_states, layout=LAYOUT):
    """Excited populations of every node for a stack of pure states ``(K, D)``."""
    layout = list(layout)
    probs = np.abs(np.asarray(psi_states)) ** 2
    probs = probs.reshape([len(probs)] + layout)
    out = []
    for node in range(len(layout)):
        axes = tuple(1 + i for i in range(len(layout)) if i != node)
        out.append(probs.sum(axis=axes)[:, 1])
    return np.stack(out, axis=1)


@dataclass
class PopulationSeries:
    times: np.ndarray
    populations: Dict[str, np.ndarray] = field(default_factory=dict)

    def total(self, nodes):
        return np.sum([self.populations[n] for n in nodes], axis=0)


def population_series(times, psi_states):
    pops = node_populations(psi_states)
    return PopulationSeries(np.asarray(times), {n: pops[:, i] for i, n in enumerate(NODE_NAMES)})


def detect_backflow(series, node_set=("S1", "S2"), window=1, threshold=1e-4):
    """Maximal time intervals where the summed population of ``node_set``
    rises by more than ``threshold`` across ``window`` samples."""
    p = series.total(node_set)
    t = np.asarray(series.times)
    if len(p) <= window:
        raise ValueError("series is shorter than the window")
    rising = (p[window:] - p[:-window]) > threshold
    intervals: List[Tuple[float, float]] = []
    start = None
    for k, up in enumerate(rising):
        if up and start is None:
            start = k
        elif not up and start is not None:
            intervals.append((float(t[start]), float(t[k - 1 + window])))
            start = None
    if start is not None:
        intervals.append((float(t[start]), float(t[len(rising) - 1 + window])))
    merged: List[Tuple[float, float]] = []
    for a, b in intervals:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
        else:
            merged.append((a, b))
    return merged
