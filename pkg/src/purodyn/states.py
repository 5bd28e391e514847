"""Density matrices, Bloch vectors and the two extension maps.

Density matrices are plain complex ``ndarray`` objects; :func:`check_density`
is the single gatekeeper for their invariants. Composite spaces are always
ordered system-first, bath-second.
"""

import numpy as np

from . import qmath
from .errors import (
    BlochNormExceeded,
    DimensionMismatch,
    InvalidDensityMatrix,
    NonUnitaryBasis,
)

TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9


def check_density(rho, name="rho"):
    """Return ``rho`` as a complex array or raise :class:`InvalidDensityMatrix`."""
    try:
        rho = qmath.as_square(rho, name)
    except (DimensionMismatch, ValueError) as exc:
        raise InvalidDensityMatrix(str(exc)) from None
    herm = qmath.hermiticity_residual(rho)
    if herm > qmath.HERMITIAN_TOL:
        raise InvalidDensityMatrix(f"{name} not Hermitian (residual {herm:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidDensityMatrix(f"{name} has trace {tr!r}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -POSITIVITY_TOL:
        raise InvalidDensityMatrix(f"{name} has negative eigenvalue {lo:.3e}")
    return rho


def pure_density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def basis_state(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(index, dim):
    return pure_density(basis_state(index, dim))


def maximally_mixed(dim):
    return np.eye(dim, dtype=complex) / dim


def random_density(dim, rng, rank=None):
    """Random density matrix (Ginibre construction)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def spectral_decompose(rho):
    """Weights (descending) and eigenstates of ``rho``.

    Returns ``(weights, states)`` with ``states[:, i]`` the i-th eigenvector.
    Tiny negative eigenvalues from round-off are clipped to zero.
    """
    rho = check_density(rho)
    eig = qmath.hermitian_eig(rho)
    weights = np.clip(eig.values, 0.0, None)
    return weights, eig.vectors


def purify(rho, bath_basis=None):
    """Purification ``sum_i sqrt(w_i) |psi_i> (x) |b_i>`` on ``dim**2`` amplitudes.

    ``bath_basis`` columns are the bath vectors ``|b_i>``; the canonical
    basis is used when omitted.
    """
    weights, states = spectral_decompose(rho)
    dim = len(weights)
    if bath_basis is None:
        bath = np.eye(dim, dtype=complex)
    else:
        bath = np.asarray(bath_basis, dtype=complex)
        if bath.shape != (dim, dim):
            raise DimensionMismatch(f"bath basis must be {dim}x{dim}, got {bath.shape}")
        if np.linalg.norm(bath.conj().T @ bath - np.eye(dim)) > 1e-10:
            raise NonUnitaryBasis("bath basis columns are not orthonormal")
    amps = np.sqrt(weights)
    # sum_i amps_i psi_i (x) b_i, as a dim x dim coefficient matrix flattened row-major
    psi = (states * amps) @ bath.T
    return psi.reshape(dim * dim)


def reduce_purified(psi, dim_s, dim_b=None):
    """System density matrix ``Tr_B |psi><psi|`` computed from the amplitudes."""
    dim_b = dim_s if dim_b is None else dim_b
    c = np.asarray(psi, dtype=complex).reshape(dim_s, dim_b)
    return c @ c.conj().T


def extend_product(rho_s, rho_e):
    """Uncorrelated extension ``rho_s (x) rho_e``."""
    return qmath.kron(check_density(rho_s, "rho_s"), check_density(rho_e, "rho_e"))


def density_to_bloch(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionMismatch(f"Bloch vectors need a qubit state, got shape {rho.shape}")
    return np.array([np.trace(rho @ p).real for p in (qmath.PAULI_X, qmath.PAULI_Y, qmath.PAULI_Z)])


def bloch_to_density(v):
    x, y, z = np.asarray(v, dtype=float)
    r = np.sqrt(x * x + y * y + z * z)
    if r > 1 + 1e-10:
        raise BlochNormExceeded(f"|r| = {r!r} exceeds 1")
    return 0.5 * (qmath.PAULI_I + x * qmath.PAULI_X + y * qmath.PAULI_Y + z * qmath.PAULI_Z)


def trace_distance(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(min(1.0, 0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))))))


def _psd_sqrt(m):
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def state_fidelity(a, b):
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    sa = _psd_sqrt(a)
    w = np.linalg.eigvalsh(sa @ b @ sa)
    f = np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2
    return float(np.clip(f, 0.0, 1.0))
