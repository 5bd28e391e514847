"""GKSL master equation: right-hand side, reference RK4 integrator, and the
two-level decay channel used as the matching target."""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import qmath
from .errors import DimensionMismatch, StateInvariantViolated, StepTooLarge
from .states import POSITIVITY_TOL, check_density

MAX_STEP = 0.1


@dataclass
class LindbladModel:
    hamiltonian: np.ndarray
    channels: List[Tuple[float, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        self.hamiltonian = qmath.as_square(self.hamiltonian, "hamiltonian")
        qmath.check_hermitian(self.hamiltonian, name="hamiltonian")
        d = self.dim
        chans = []
        for rate, jump in self.channels:
            jump = np.asarray(jump, dtype=complex)
            if rate < 0:
                raise ValueError(f"negative rate {rate}")
            if jump.shape != (d, d):
                raise DimensionMismatch(f"jump operator shape {jump.shape} != {(d, d)}")
            chans.append((float(rate), jump))
        self.channels = chans

    @property
    def dim(self):
        return self.hamiltonian.shape[0]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (K, d, d)

    def __len__(self):
        return len(self.times)


def decay_channel_model(rate=0.1):
    """Two-level decay channel: ``H = diag(0, 1)``, ``L = sigma_x``, ``gamma = 0.1``."""
    return LindbladModel(np.diag([0.0, 1.0]).astype(complex), [(rate, qmath.PAULI_X.copy())])


def dissipator(model, rho):
    """Non-Hamiltonian part ``sum_k g_k (L rho L^+ - 1/2 {L^+ L, rho})``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != model.hamiltonian.shape:
        raise DimensionMismatch(f"state shape {rho.shape} vs model {model.hamiltonian.shape}")
    out = np.zeros_like(rho)
    for rate, jump in model.channels:
        jd = jump.conj().T
        out += rate * (jump @ rho @ jd - 0.5 * qmath.anticommutator(jd @ jump, rho))
    return out


def gksl_rhs(model, rho):
    rho = np.asarray(rho, dtype=complex)
    return -1j * qmath.commutator(model.hamiltonian, rho) + dissipator(model, rho)


def liouvillian(model):
    """Superoperator acting on row-major ``rho.reshape(-1)``."""
    d = model.dim
    eye = np.eye(d, dtype=complex)
    h = model.hamiltonian
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, jump in model.channels:
        jdj = jump.conj().T @ jump
        sup += rate * (np.kron(jump, jump.conj()) - 0.5 * (np.kron(jdj, eye) + np.kron(eye, jdj.T)))
    return sup


def _check_grid(t_grid, max_step):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValueError("time grid must be a non-empty 1-D sequence")
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise ValueError("time grid must be strictly increasing")
    if max_step is not None and np.any(dts > max_step * (1 + 1e-12)):
        raise StepTooLarge(f"grid step {dts.max():.4g} exceeds {max_step}")
    return t, dts


def integrate(model, rho0, t_grid, max_step=MAX_STEP):
    """Fixed-step classical RK4 on the grid points themselves.

    The state is re-symmetrised after every step. Raises
    :class:`StateInvariantViolated` if any state dips below the positivity
    tolerance.
    """
    rho0 = check_density(rho0, "rho0")
    if rho0.shape != model.hamiltonian.shape:
        raise DimensionMismatch(f"rho0 shape {rho0.shape} vs model {model.hamiltonian.shape}")
    t, dts = _check_grid(t_grid, max_step)
    d = model.dim
    sup = liouvillian(model)
    v = rho0.reshape(-1).copy()
    out = np.empty((len(t), d, d), dtype=complex)
    out[0] = rho0
    for k, h in enumerate(dts, start=1):
        k1 = sup @ v
        k2 = sup @ (v + 0.5 * h * k1)
        k3 = sup @ (v + 0.5 * h * k2)
        k4 = sup @ (v + h * k3)
        m = (v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)).reshape(d, d)
        m = 0.5 * (m + m.conj().T)
        out[k] = m
        v = m.reshape(-1)
    lo = np.linalg.eigvalsh(out)[:, 0]
    bad = np.flatnonzero(lo < -POSITIVITY_TOL)
    if len(bad):
        k = int(bad[0])
        raise StateInvariantViolated(f"positivity lost at t={t[k]:.6g} (min eigenvalue {lo[k]:.3e})")
    return Trajectory(t, out)
