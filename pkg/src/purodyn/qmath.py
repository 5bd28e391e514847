"""Dense complex linear algebra kernel.

Everything here works on plain ``numpy`` arrays. Matrices stay small (at most
16x16 in the bundled scenarios), so the emphasis is on determinism and exact
unitarity rather than speed.
"""

from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput

HERMITIAN_TOL = 1e-10
# eigenvalues closer than this (relative to the spectral scale) form one degenerate cluster
DEGENERACY_TOL = 1e-9

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class EigenSystem(NamedTuple):
    """Eigenvalues (descending) and eigenvectors stored column-wise."""

    values: np.ndarray
    vectors: np.ndarray


def dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def as_square(m, name="matrix"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def hermiticity_residual(h):
    """Frobenius norm of ``h - h^dagger`` (batched over leading axes)."""
    h = np.asarray(h)
    return np.linalg.norm(h - dag(h), axis=(-2, -1))


def check_hermitian(h, tol=HERMITIAN_TOL, name="matrix", exc=NonHermitianInput):
    res = np.max(hermiticity_residual(h), initial=0.0)
    if res > tol:
        raise exc(f"{name} is not Hermitian (residual {res:.3e} > {tol:.1e})")


def kron(a, b):
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(ops):
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def _fix_phase(v):
    # largest-magnitude component made real positive; first index wins near-ties
    mags = np.abs(v)
    k = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-12) - 1e-15)[0])
    return v * (np.conj(v[k]) / mags[k])


def _canonical_cluster(q):
    """Deterministic orthonormal basis of span(q) built by pivoted Gram-Schmidt
    on the projections of the computational basis vectors."""
    n, k = q.shape
    resid = q @ dag(q)
    picked = []
    for _ in range(k):
        norms = np.linalg.norm(resid, axis=0)
        j = int(np.flatnonzero(norms >= norms.max() * (1 - 1e-10))[0])
        u = resid[:, j] / norms[j]
        picked.append((j, u))
        resid = resid - np.outer(u, np.conj(u) @ resid)
    picked.sort(key=lambda item: item[0])
    return np.column_stack([u for _, u in picked])


def hermitian_eig(h, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix with a reproducible gauge.

    Eigenvalues come back in descending order. Each eigenvector has its
    largest-magnitude entry real and positive. Inside a degenerate cluster
    the basis is rebuilt from the computational basis (pivoted Gram-Schmidt)
    and ordered by pivot index, so e.g. ``I/2`` yields the identity columns.
    """
    h = as_square(h)
    check_hermitian(h, tol)
    h = 0.5 * (h + dag(h))
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]

    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    start = 0
    n = len(w)
    while start < n:
        stop = start + 1
        while stop < n and w[stop - 1] - w[stop] <= DEGENERACY_TOL * scale:
            stop += 1
        if stop - start > 1:
            v[:, start:stop] = _canonical_cluster(v[:, start:stop])
        start = stop
    for i in range(n):
        v[:, i] = _fix_phase(v[:, i])
    return EigenSystem(w, v)


def herm_expm(h, s):
    """``exp(-i s h)`` for Hermitian ``h``, computed through the eigenbasis."""
    h = as_square(h)
    check_hermitian(h)
    h = 0.5 * (h + dag(h))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * s * w)) @ dag(v)


def herm_expm_many(hs, steps):
    """Batched ``exp(-i s_k h_k)`` over a stack of Hermitian matrices.

    Returns ``(unitaries, spreads)`` where ``spreads[k]`` is the spectral
    width ``lambda_max - lambda_min`` of ``h_k``.
    """
    hs = np.asarray(hs, dtype=complex)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), hs.shape[:1])
    check_hermitian(hs)
    hs = 0.5 * (hs + dag(hs))
    w, v = np.linalg.eigh(hs)
    phases = np.exp(-1j * steps[:, None] * w)
    return (v * phases[:, None, :]) @ dag(v), w[:, -1] - w[:, 0]


def partial_trace(m, dim_a, dim_b, keep="A"):
    """Trace out one factor of a bipartite operator on ``H_A (x) H_B``."""
    m = np.asarray(m, dtype=complex)
    n = dim_a * dim_b
    if m.shape != (n, n):
        raise DimensionMismatch(f"expected {(n, n)} for dims ({dim_a}, {dim_b}), got {m.shape}")
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def reduced_state(m, dims: Sequence[int], keep: Sequence[int]):
    """Partial trace keeping the subsystems listed in ``keep`` (in that order)."""
    dims = list(dims)
    n = len(dims)
    total = int(np.prod(dims))
    m = np.asarray(m, dtype=complex)
    if m.shape != (total, total):
        raise DimensionMismatch(f"operator shape {m.shape} does not match dims {dims}")
    keep = list(keep)
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise DimensionMismatch(f"invalid subsystem selection {keep} for {n} subsystems")
    drop = [i for i in range(n) if i not in keep]
    t = m.reshape(dims + dims)
    t = t.transpose(keep + drop + [n + i for i in keep] + [n + i for i in drop])
    dk = int(np.prod([dims[i] for i in keep]))
    dd = int(np.prod([dims[i] for i in drop]))
    return np.einsum("ajbj->ab", t.reshape(dk, dd, dk, dd))


def embed(op, targets: Sequence[int], dims: Sequence[int]):
    """Place ``op`` on the subsystems ``targets`` with identity elsewhere."""
    dims = list(dims)
    targets = list(targets)
    n = len(dims)
    op = np.asarray(op, dtype=complex)
    dt = int(np.prod([dims[i] for i in targets]))
    if op.shape != (dt, dt):
        raise DimensionMismatch(f"operator shape {op.shape} does not fit targets {targets}")
    rest = [i for i in range(n) if i not in targets]
    order = targets + rest
    full = np.kron(op, np.eye(int(np.prod([dims[i] for i in rest])), dtype=complex))
    full = full.reshape([dims[i] for i in order] * 2)
    pos = list(np.argsort(order))
    full = full.transpose(pos + [n + p for p in pos])
    total = int(np.prod(dims))
    return full.reshape(total, total)
