"""CNOT + one-qubit-rotation ansatz, variational compilation of step
unitaries, and an OpenQASM-style text round trip.

Qubit 0 is the most significant tensor factor, matching the
``(S1, S2, B1, B2)`` ordering of the network module.
"""

import hashlib
import re
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np

from . import qmath
from .errors import LengthMismatch, NonUnitaryTarget
from .fit import OptimizerConfig, optimize
from .purified_dynamics import DEFAULT_MAX_STEP, propagator_ode

DEFAULT_CHAIN = ((0, 1), (1, 2), (2, 3))


@dataclass(frozen=True)
class CircuitAnsatz:
    """Ordered gate list; entries are ``("cx", control, target)`` or ``("u", qubit)``.

    Each ``"u"`` entry consumes three parameters ``(theta, phi, lam)`` in order.
    """

    qubit_count: int
    gates: Tuple[tuple, ...]

    def __post_init__(self):
        for g in self.gates:
            qubits = g[1:]
            if g[0] not in ("cx", "u") or any(not 0 <= q < self.qubit_count for q in qubits):
                raise ValueError(f"invalid gate {g!r}")
            if g[0] == "cx" and g[1] == g[2]:
                raise ValueError(f"CNOT needs distinct qubits: {g!r}")

    @property
    def rotation_count(self):
        return sum(1 for g in self.gates if g[0] == "u")

    @property
    def cnot_count(self):
        return sum(1 for g in self.gates if g[0] == "cx")

    @property
    def parameter_count(self):
        return 3 * self.rotation_count

    @property
    def dim(self):
        return 2 ** self.qubit_count


def default_ansatz(qubit_count=4, chain=DEFAULT_CHAIN, repeats=3, initial_layer=True):
    """Rotation layer, then ``repeats`` passes over ``chain``; every CNOT is
    followed by a rotation on its control and one on its target."""
    gates = [("u", q) for q in range(qubit_count)] if initial_layer else []
    for _ in range(repeats):
        for c, t in chain:
            gates += [("cx", c, t), ("u", c), ("u", t)]
    return CircuitAnsatz(qubit_count, tuple(gates))


def rotation_matrix(theta, phi, lam):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ])


def _cnot_perm(n, control, target):
    idx = np.arange(2 ** n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def _apply_1q(m, gate, q, n):
    """``(gate on qubit q) @ m`` for a ``(2**n, k)`` matrix ``m``."""
    k = m.shape[1]
    t = m.reshape(2 ** q, 2, 2 ** (n - q - 1), k)
    return np.einsum("ab,ibjk->iajk", gate, t).reshape(2 ** n, k)


def _apply_1q_right(m, gate, q, n):
    """``m @ (gate on qubit q)`` for a ``(k, 2**n)`` matrix ``m``."""
    return _apply_1q(m.T, gate.T, q, n).T


def _check_params(a, params):
    params = np.asarray(params, dtype=float)
    if params.shape != (a.parameter_count,):
        raise LengthMismatch(f"ansatz takes {a.parameter_count} parameters, got {params.size}")
    return params


def ansatz_unitary(a, params, start=None):
    """Ordered product of the gates (first gate acts first), optionally applied to ``start``."""
    params = _check_params(a, params)
    n = a.qubit_count
    u = np.eye(a.dim, dtype=complex) if start is None else np.array(start, dtype=complex)
    k = 0
    for g in a.gates:
        if g[0] == "cx":
            u = u[_cnot_perm(n, g[1], g[2])]
        else:
            u = _apply_1q(u, rotation_matrix(*params[k:k + 3]), g[1], n)
            k += 3
    return u


def unitary_fidelity(u, v):
    return abs(np.trace(qmath.dag(u) @ v)) / u.shape[0]


def _check_unitary(u):
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if u.ndim != 2 or u.shape != (n, n) or np.linalg.norm(qmath.dag(u) @ u - np.eye(n)) > 1e-8:
        raise NonUnitaryTarget("target is not unitary")
    return u


class FidelityObjective:
    """``1 - |Tr(U(params)^+ target)| / N`` with a structured central-difference
    gradient: only the 2x2 rotation changes per coordinate, so each perturbed
    trace is ``Tr(R^+ N_k)`` with ``N_k`` a reduced environment matrix."""

    def __init__(self, ansatz, target, fd_step=1e-6):
        self.ansatz = ansatz
        self.target = _check_unitary(target)
        self.fd_step = fd_step
        if self.target.shape[0] != ansatz.dim:
            raise NonUnitaryTarget(f"target dimension {self.target.shape[0]} != ansatz {ansatz.dim}")

    def __call__(self, params):
        return 1.0 - unitary_fidelity(ansatz_unitary(self.ansatz, params), self.target)

    def _environments(self, params):
        a = self.ansatz
        n = a.qubit_count
        gates = a.gates
        mats = []
        k = 0
        for g in gates:
            if g[0] == "cx":
                mats.append(None)
            else:
                mats.append(rotation_matrix(*params[k:k + 3]))
                k += 3
        # prefixes[i] = G_{i-1} ... G_0
        prefixes = []
        p = np.eye(a.dim, dtype=complex)
        for g, m in zip(gates, mats):
            prefixes.append(p)
            p = p[_cnot_perm(n, g[1], g[2])] if m is None else _apply_1q(p, m, g[1], n)
        # suffix_dag_t = (G_last ... G_{i+1})^+ target, built from the end
        envs = [None] * len(gates)
        w = self.target.copy()
        for i in range(len(gates) - 1, -1, -1):
            g, m = gates[i], mats[i]
            if m is not None:
                env = w @ qmath.dag(prefixes[i])
                envs[i] = qmath.reduced_state(env, [2] * n, [g[1]])
                w = _apply_1q(w, qmath.dag(m), g[1], n)
            else:
                # a CNOT is its own inverse
                w = w[_cnot_perm(n, g[1], g[2])]
        return [(e, g[1]) for e, g in zip(envs, gates) if g[0] == "u"]

    def gradient(self, params):
        params = _check_params(self.ansatz, params)
        h = self.fd_step
        dim = self.ansatz.dim
        grad = np.empty_like(params)
        for r, (env, _) in enumerate(self._environments(params)):
            angles = params[3 * r:3 * r + 3]
            for j in range(3):
                up = angles.copy()
                dn = angles.copy()
                up[j] += h
                dn[j] -= h
                f_up = 1 - abs(np.trace(qmath.dag(rotation_matrix(*up)) @ env)) / dim
                f_dn = 1 - abs(np.trace(qmath.dag(rotation_matrix(*dn)) @ env)) / dim
                grad[3 * r + j] = (f_up - f_dn) / (2 * h)
        return grad


def default_compile_config(seed=0):
    return OptimizerConfig(max_iterations=2000, gradient_tolerance=1e-10, restarts=32, seed=seed,
                           init_range=(-np.pi, np.pi), target_value=1e-9)


def compile_unitary(u_target, cfg=None, ansatz=None, x0=None):
    """Variationally fit the ansatz to ``u_target``; returns ``(params, fidelity, FitResult)``."""
    ansatz = ansatz or default_ansatz()
    cfg = cfg or default_compile_config()
    obj = FidelityObjective(ansatz, u_target, cfg.fd_step)
    x0 = np.zeros(ansatz.parameter_count) if x0 is None else np.asarray(x0, dtype=float)
    res = optimize(obj, x0, cfg, gradient=obj.gradient)
    fid = unitary_fidelity(ansatz_unitary(ansatz, res.best_params), obj.target)
    return res.best_params, float(fid), res


def unitary_digest(u):
    return hashlib.sha256(np.round(np.asarray(u, dtype=complex), 12).tobytes()).hexdigest()[:16]


@dataclass
class CompiledStep:
    target_hash: str
    params: np.ndarray
    fidelity: float
    t_start: float
    t_end: float


@dataclass
class CompiledSchedule:
    interval: float
    ansatz: CircuitAnsatz
    steps: List[CompiledStep] = field(default_factory=list)
    targets: List[np.ndarray] = field(default_factory=list)

    def fidelities(self):
        return np.array([s.fidelity for s in self.steps])

    def to_dict(self):
        return {
            "interval": self.interval,
            "qubit_count": self.ansatz.qubit_count,
            "cnot_count": self.ansatz.cnot_count,
            "parameter_count": self.ansatz.parameter_count,
            "steps": [
                {
                    "index": i,
                    "t_start": s.t_start,
                    "t_end": s.t_end,
                    "target_hash": s.target_hash,
                    "fidelity": s.fidelity,
                    "params": [float(x) for x in s.params],
                }
                for i, s in enumerate(self.steps)
            ],
        }


def step_targets(ht, interval, steps, t0=0.0, max_step=DEFAULT_MAX_STEP):
    """``U(t_k + interval, t_k)`` for ``k = 0 .. steps-1``."""
    grid = t0 + interval * np.arange(steps + 1)
    cumulative = propagator_ode(ht, grid, max_step)
    return [cumulative[k + 1] @ qmath.dag(cumulative[k]) for k in range(steps)], grid


def compile_schedule(ht, interval, steps, cfg=None, ansatz=None, t0=0.0, max_step=DEFAULT_MAX_STEP,
                     warm_restarts=4):
    """Compile every step unitary.

    The first step uses ``cfg`` as given; later steps start from the previous
    solution and add ``warm_restarts - 1`` random restarts.
    """
    if not interval > 0 or steps < 1:
        raise ValueError("need interval > 0 and steps >= 1")
    ansatz = ansatz or default_ansatz()
    cfg = cfg or default_compile_config()
    warm_cfg = replace(cfg, restarts=max(1, warm_restarts))
    targets, grid = step_targets(ht, interval, steps, t0, max_step)
    sched = CompiledSchedule(interval, ansatz, targets=targets)
    x0 = None
    for k, u in enumerate(targets):
        params, fid, _ = compile_unitary(u, cfg if x0 is None else replace(warm_cfg, seed=cfg.seed + k), ansatz, x0)
        sched.steps.append(CompiledStep(unitary_digest(u), params, fid, float(grid[k]), float(grid[k + 1])))
        x0 = params
    return sched


def playback(schedule, psi0):
    """States after each compiled step, starting from ``psi0`` (length ``steps + 1``)."""
    psi = np.asarray(psi0, dtype=complex)
    out = [psi]
    for s in schedule.steps:
        psi = ansatz_unitary(schedule.ansatz, s.params, start=psi[:, None])[:, 0]
        out.append(psi)
    return np.array(out)


def emit_circuit_text(a, params):
    """OpenQASM 2 style program; angles printed with 17 significant digits."""
    params = _check_params(a, params)
    lines = [
        "OPENQASM 2.0;",
        'include "qelib1.inc";',
        "// qubit 0 is the most significant tensor factor",
        f"qreg q[{a.qubit_count}];",
    ]
    k = 0
    for g in a.gates:
        if g[0] == "cx":
            lines.append(f"cx q[{g[1]}],q[{g[2]}];")
        else:
            th, ph, la = params[k:k + 3]
            lines.append(f"u3({th:.17g},{ph:.17g},{la:.17g}) q[{g[1]}];")
            k += 3
    return "\n".join(lines) + "\n"


_QREG = re.compile(r"^qreg\s+q\[(\d+)\];$")
_CX = re.compile(r"^cx\s+q\[(\d+)\],\s*q\[(\d+)\];$")
_U3 = re.compile(r"^u3\(([^,]+),([^,]+),([^)]+)\)\s+q\[(\d+)\];$")


def parse_circuit_text(text):
    """Inverse of :func:`emit_circuit_text`; returns ``(ansatz, params)``."""
    n = None
    gates, params = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("//") or line.startswith("OPENQASM") or line.startswith("include"):
            continue
        if m := _QREG.match(line):
            n = int(m.group(1))
        elif m := _CX.match(line):
            gates.append(("cx", int(m.group(1)), int(m.group(2))))
        elif m := _U3.match(line):
            params.extend(float(m.group(i)) for i in (1, 2, 3))
            gates.append(("u", int(m.group(4))))
        else:
            raise ValueError(f"cannot parse line: {raw!r}")
    if n is None:
        raise ValueError("missing qreg declaration")
    return CircuitAnsatz(n, tuple(gates)), np.array(params)
