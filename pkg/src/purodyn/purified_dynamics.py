"""Total Hamiltonian on system (x) bath, unitary propagation of the purified
state, and the effective dissipator induced by the interaction.

The time-ordered exponential is approximated by a product of exact
exponentials of the Hamiltonian at each substep midpoint. Each factor is
exactly unitary; the scheme is second order in the substep.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import qmath
from .errors import DimensionMismatch, NonHermitianComponent, StepTooLarge
from .states import check_density, purify

DEFAULT_MAX_STEP = 1e-2
# a substep is halved while dt * (spectral half-width) exceeds this phase
PHASE_LIMIT = 0.5
MAX_HALVINGS = 30
CHUNK = 2048

Generator = Union[np.ndarray, Callable[[float], np.ndarray], None]


def _stack(component, ts, dim):
    """Evaluate a constant, callable, or batch-capable generator on ``ts``."""
    if component is None:
        return np.zeros((len(ts), dim, dim), dtype=complex)
    if callable(component):
        many = getattr(component, "many", None)
        if many is not None:
            return np.asarray(many(ts), dtype=complex)
        return np.stack([np.asarray(component(t), dtype=complex) for t in ts])
    m = np.asarray(component, dtype=complex)
    return np.broadcast_to(m, (len(ts),) + m.shape)


@dataclass
class TotalHamiltonian:
    """``H_S(t) (x) I_B + I_S (x) H_B(t) + H_SB(t)``.

    ``h_s``/``h_b`` may be matrices or callables of time; ``h_sb`` is a callable
    on the composite space (an object with a vectorised ``many(ts)`` method is
    used when available) or ``None``.
    """

    dim_s: int
    dim_b: int
    h_s: Generator = None
    h_b: Generator = None
    h_sb: Generator = None

    @property
    def dim(self):
        return self.dim_s * self.dim_b

    def many(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        hs = _stack(self.h_s, ts, self.dim_s)
        hb = _stack(self.h_b, ts, self.dim_b)
        hsb = _stack(self.h_sb, ts, self.dim)
        if hs.shape[1:] != (self.dim_s,) * 2 or hb.shape[1:] != (self.dim_b,) * 2:
            raise DimensionMismatch("system/bath Hamiltonian dimensions do not match dim_s/dim_b")
        if hsb.shape[1:] != (self.dim,) * 2:
            raise DimensionMismatch(f"interaction must be {self.dim}x{self.dim}")
        for name, part in (("H_S", hs), ("H_B", hb), ("H_SB", hsb)):
            res = np.max(qmath.hermiticity_residual(part), initial=0.0)
            if res > qmath.HERMITIAN_TOL:
                raise NonHermitianComponent(f"{name} is not Hermitian (residual {res:.2e})")
        eye_s = np.eye(self.dim_s)
        eye_b = np.eye(self.dim_b)
        total = np.einsum("tij,kl->tikjl", hs, eye_b).reshape(len(ts), self.dim, self.dim)
        total = total + np.einsum("ij,tkl->tikjl", eye_s, hb).reshape(len(ts), self.dim, self.dim)
        return total + hsb

    def __call__(self, t):
        return assemble_total(self, t)


def assemble_total(ht, t):
    return ht.many([t])[0]


@dataclass
class PurifiedTrajectory:
    times: np.ndarray
    purified_states: np.ndarray  # (K, dim_s * dim_b)
    reduced_states: np.ndarray  # (K, dim_s, dim_s)
    dim_s: int
    dim_b: int

    def bath_states(self):
        c = self.purified_states.reshape(-1, self.dim_s, self.dim_b)
        return np.einsum("kia,kib->kab", c, c.conj())


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValueError("time grid must be a non-empty 1-D sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _step_unitaries(ht, t, max_step, phase_limit=PHASE_LIMIT):
    """Yield ``(unitaries, grid_index_or_-1)`` chunks covering the grid.

    The second array marks, for every substep, the grid index it ends on
    (-1 when the substep ends strictly inside an interval).
    """
    dts = np.diff(t)
    counts = np.maximum(1, np.ceil(dts / max_step - 1e-9)).astype(int)
    owner = np.repeat(np.arange(len(dts)), counts)
    frac_lo = np.concatenate([np.arange(c) / c for c in counts]) if len(counts) else np.zeros(0)
    frac_hi = np.concatenate([np.arange(1, c + 1) / c for c in counts]) if len(counts) else np.zeros(0)
    lefts = t[owner] + dts[owner] * frac_lo
    rights = np.where(frac_hi == 1.0, t[owner + 1], t[owner] + dts[owner] * frac_hi)
    ends = np.where(frac_hi == 1.0, owner + 1, -1)

    for start in range(0, len(lefts), CHUNK):
        lo = lefts[start:start + CHUNK]
        hi = rights[start:start + CHUNK]
        en = ends[start:start + CHUNK]
        for _ in range(MAX_HALVINGS + 1):
            steps = hi - lo
            us, spread = qmath.herm_expm_many(ht.many(0.5 * (lo + hi)), steps)
            if phase_limit is None:
                break
            bad = steps * spread * 0.5 > phase_limit
            if not bad.any():
                break
            reps = np.where(bad, 2, 1)
            mid = 0.5 * (lo + hi)
            new_lo = np.repeat(lo, reps)
            new_hi = np.repeat(hi, reps)
            new_en = np.repeat(en, reps)
            first = np.concatenate([[0], np.cumsum(reps)[:-1]])
            split = first[bad]
            new_hi[split] = mid[bad]
            new_en[split] = -1
            new_lo[split + 1] = mid[bad]
            lo, hi, en = new_lo, new_hi, new_en
        else:
            raise StepTooLarge("substep halving failed to bound the per-step phase")
        yield us, en


def propagate(ht, psi0, t_grid, max_step=DEFAULT_MAX_STEP, phase_limit=PHASE_LIMIT):
    """Propagate a purified state; reduced states are taken by partial trace.

    Each grid interval is split into equal substeps no longer than
    ``max_step``; a substep is halved further while ``dt`` times the spectral
    half-width of ``H_T`` exceeds ``phase_limit`` (``None`` disables this).
    """
    psi = np.asarray(psi0, dtype=complex).ravel()
    if psi.shape != (ht.dim,):
        raise DimensionMismatch(f"state has {psi.size} amplitudes, expected {ht.dim}")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("initial purified state is not normalised")
    t = _check_grid(t_grid)
    out = np.empty((len(t), ht.dim), dtype=complex)
    out[0] = psi
    for us, ends in _step_unitaries(ht, t, max_step, phase_limit):
        for u, e in zip(us, ends):
            psi = u @ psi
            if e >= 0:
                out[e] = psi
    c = out.reshape(len(t), ht.dim_s, ht.dim_b)
    reduced = np.einsum("kia,kja->kij", c, c.conj())
    return PurifiedTrajectory(t, out, reduced, ht.dim_s, ht.dim_b)


def propagator_ode(ht, t_grid, max_step=DEFAULT_MAX_STEP, phase_limit=PHASE_LIMIT):
    """Cumulative propagators ``U(t_k, t_0)`` solving ``dU/dt = -i H_T U``."""
    t = _check_grid(t_grid)
    u_cum = np.eye(ht.dim, dtype=complex)
    out = np.empty((len(t), ht.dim, ht.dim), dtype=complex)
    out[0] = u_cum
    for us, ends in _step_unitaries(ht, t, max_step, phase_limit):
        for u, e in zip(us, ends):
            u_cum = u @ u_cum
            if e >= 0:
                out[e] = u_cum
    return out


def effective_dissipator(h_sb_at_t, rho_s, bath_basis=None):
    """``-i Tr_B [H_SB, |Psi><Psi|]`` with ``|Psi>`` a fresh purification of ``rho_s``."""
    rho_s = check_density(rho_s, "rho_s")
    d = rho_s.shape[0]
    h = np.asarray(h_sb_at_t, dtype=complex)
    if h.shape != (d * d, d * d):
        raise DimensionMismatch(f"interaction must be {d * d}x{d * d}, got {h.shape}")
    psi = purify(rho_s, bath_basis)
    proj = np.outer(psi, psi.conj())
    return -1j * qmath.partial_trace(qmath.commutator(h, proj), d, d, keep="A")
