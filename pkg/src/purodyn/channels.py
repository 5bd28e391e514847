"""Pauli-diagonal qubit maps, Choi-matrix CP certification, and transfer
unitaries between purified states."""

from dataclasses import dataclass

import numpy as np

from . import qmath
from .errors import DimensionMismatch
from .states import bloch_to_density, check_density, density_to_bloch, purify, reduce_purified

_PAULIS = (qmath.PAULI_I, qmath.PAULI_X, qmath.PAULI_Y, qmath.PAULI_Z)


@dataclass(frozen=True)
class PauliDiagonalMap:
    """Unital qubit map scaling the Bloch axes by ``(l1, l2, l3)``."""

    l1: float
    l2: float
    l3: float

    def __post_init__(self):
        if max(abs(self.l1), abs(self.l2), abs(self.l3)) > 1 + 1e-12:
            raise ValueError("Bloch-axis scalings must satisfy |l_i| <= 1")

    @property
    def scalings(self):
        return np.array([self.l1, self.l2, self.l3])


DISC_MAP = PauliDiagonalMap(1.0, 1.0, 0.0)


def _apply_linear(m, x):
    """Action on an arbitrary 2x2 operator (linear extension)."""
    coeffs = [1.0, m.l1, m.l2, m.l3]
    return sum(c * 0.5 * np.trace(p @ x) * p for c, p in zip(coeffs, _PAULIS))


def apply_pauli_map(m, rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionMismatch(f"Pauli-diagonal maps act on qubits, got shape {rho.shape}")
    return _apply_linear(m, rho)


def choi(m):
    """``sum_ij |i><j| (x) E(|i><j|)``, i.e. twice ``(id (x) E)(|Phi+><Phi+|)``."""
    out = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            eij = np.zeros((2, 2), dtype=complex)
            eij[i, j] = 1.0
            out += np.kron(eij, _apply_linear(m, eij))
    return out


def choi_eigenvalues(m):
    """Closed-form Choi spectrum, sorted descending."""
    a, b, c = m.l1, m.l2, m.l3
    vals = np.array([1 + a + b + c, 1 + a - b - c, 1 - a + b - c, 1 - a - b + c]) / 2
    return np.sort(vals)[::-1]


def is_cp(m, tol=1e-10):
    return bool(np.linalg.eigvalsh(choi(m))[0] >= -tol)


def cp_disc_comparator():
    """Largest CP map of the form ``(l, l, 0)``.

    The Choi spectrum of ``(l, l, 0)`` is ``{1+2l, 1, 1, 1-2l}/2``, so the
    boundary sits at ``l = 1/2``.
    """
    return PauliDiagonalMap(0.5, 0.5, 0.0)


def cp_boundary_certificate(m, eps=1e-6, tol=1e-10):
    """``m`` is CP while the same map pushed outward by ``eps`` in-plane is not."""
    pushed = PauliDiagonalMap(m.l1 + eps, m.l2 + eps, m.l3)
    return {"cp": is_cp(m, tol), "pushed_cp": is_cp(pushed, tol), "eps": eps,
            "certified": is_cp(m, tol) and not is_cp(pushed, tol)}


def build_transfer_unitary(rho_init, rho_final):
    """``V_T V_S^+`` from the eigenvector matrices of the purified initial and
    final projectors; maps ``purify(rho_init)`` onto ``purify(rho_final)`` up to phase."""
    rho_init = check_density(rho_init, "rho_init")
    rho_final = check_density(rho_final, "rho_final")
    if rho_init.shape != (2, 2) or rho_final.shape != (2, 2):
        raise DimensionMismatch("transfer unitaries are defined for qubit states")
    psi_s = purify(rho_init)
    psi_t = purify(rho_final)
    v_s = qmath.hermitian_eig(np.outer(psi_s, psi_s.conj())).vectors
    v_t = qmath.hermitian_eig(np.outer(psi_t, psi_t.conj())).vectors
    return v_t @ qmath.dag(v_s)


def sample_bloch_sphere(n, seed=None, radii=(1.0,)):
    """Fibonacci-lattice points, ``n`` per radius, poles included.

    ``seed`` (if given) rotates the lattice azimuthally by a reproducible angle.
    """
    if n < 1:
        raise ValueError("need at least one point")
    offset = 0.0 if seed is None else np.random.default_rng(seed).uniform(0, 2 * np.pi)
    i = np.arange(n)
    z = np.ones(1) if n == 1 else 1 - 2 * i / (n - 1)
    rho = np.sqrt(np.clip(1 - z * z, 0, None))
    phi = offset + i * np.pi * (3 - np.sqrt(5))
    unit = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return np.concatenate([r * unit for r in radii])


def transfer_samples(points, m=DISC_MAP):
    """Per-point rows ``(x, y, z, x', y', z', unitarity_residual)``.

    ``(x', y', z')`` is the Bloch vector of ``Tr_B(U |Psi_S>)`` where ``U`` is
    the transfer unitary targeting ``m(rho)``.
    """
    rows = []
    for p in np.asarray(points, dtype=float):
        rho = bloch_to_density(p)
        u = build_transfer_unitary(rho, apply_pauli_map(m, rho))
        out = reduce_purified(u @ purify(rho), 2)
        resid = np.linalg.norm(qmath.dag(u) @ u - np.eye(4))
        rows.append(np.concatenate([p, density_to_bloch(out), [resid]]))
    return np.array(rows)
