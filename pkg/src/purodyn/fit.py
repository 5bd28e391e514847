"""Bounded L-BFGS fitting with finite-difference gradients, and the objectives
used to shape system-bath interactions and circuit parameters."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from . import qmath
from .errors import DimensionMismatch, GridMismatch, NonUnitaryTarget, ObjectiveNonFinite
from .lindblad import dissipator
from .purified_dynamics import DEFAULT_MAX_STEP, PHASE_LIMIT, TotalHamiltonian, effective_dissipator, propagate
from .shapes import InteractionSpec, params_to_hermitian


@dataclass
class OptimizerConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    fd_step: float = 1e-6
    bounds: Optional[Sequence[Tuple[Optional[float], Optional[float]]]] = None
    restarts: int = 8
    seed: int = 0
    memory: int = 10
    value_tolerance: float = 1e-12
    init_range: Tuple[float, float] = (-1.0, 1.0)
    # stop launching restarts once a run reaches this value
    target_value: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.bounds is not None:
            for i, (lo, hi) in enumerate(self.bounds):
                if lo is not None and hi is not None and lo > hi:
                    raise ValueError(f"bound {i}: lo > hi")

    def to_dict(self):
        return {
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "fd_step": self.fd_step,
            "restarts": self.restarts,
            "seed": self.seed,
            "memory": self.memory,
            "value_tolerance": self.value_tolerance,
            "init_range": list(self.init_range),
            "target_value": self.target_value,
        }


@dataclass
class FitResult:
    best_params: np.ndarray
    best_value: float
    iterations: int
    value_history: List[float]
    converged: bool
    evaluations: int = 0
    restart_values: List[float] = field(default_factory=list)
    message: str = ""

    def to_dict(self):
        return {
            "best_params": [float(x) for x in self.best_params],
            "best_value": float(self.best_value),
            "iterations": int(self.iterations),
            "value_history": [float(v) for v in self.value_history],
            "converged": bool(self.converged),
            "evaluations": int(self.evaluations),
            "restart_values": [float(v) for v in self.restart_values],
            "message": self.message,
        }


def _bounds_arrays(bounds, n):
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    if bounds is not None:
        if len(bounds) != n:
            raise DimensionMismatch(f"{len(bounds)} bounds for {n} coordinates")
        for i, (a, b) in enumerate(bounds):
            lo[i] = -np.inf if a is None else a
            hi[i] = np.inf if b is None else b
    return lo, hi


def central_gradient(fun, x, h, lo=None, hi=None, f0=None):
    """Central differences, switching to one-sided stencils at active bounds."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        if hi is not None and up[i] > hi[i]:
            f0 = fun(x) if f0 is None else f0
            g[i] = (f0 - fun(dn)) / h
        elif lo is not None and dn[i] < lo[i]:
            f0 = fun(x) if f0 is None else f0
            g[i] = (fun(up) - f0) / h
        else:
            g[i] = (fun(up) - fun(dn)) / (2 * h)
    return g


class _Counted:
    def __init__(self, fun):
        self.fun = fun
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        v = float(self.fun(x))
        if not np.isfinite(v):
            raise ObjectiveNonFinite(f"objective returned {v} at {np.array2string(np.asarray(x))}",
                                     coordinates=np.array(x, dtype=float))
        return v


def _run_once(fun, x0, cfg, lo, hi, gradient):
    history = [fun(x0)]

    def value_and_grad(x):
        f = fun(x)
        g = gradient(x) if gradient is not None else central_gradient(fun, x, cfg.fd_step, lo, hi, f)
        return f, np.asarray(g, dtype=float)

    def record(intermediate_result):
        history.append(float(intermediate_result.fun))

    bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))
    res = minimize(
        value_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        callback=record,
        options={
            "maxiter": cfg.max_iterations,
            "maxcor": cfg.memory,
            "gtol": cfg.gradient_tolerance,
            "ftol": cfg.value_tolerance,
        },
    )
    x = np.asarray(res.x, dtype=float)
    f = fun(x)
    if f > history[0]:
        x, f = np.asarray(x0, dtype=float), history[0]
    return x, f, int(res.nit), history, bool(res.success), str(res.message)


def optimize(objective, x0, cfg=None, gradient=None):
    """Minimise ``objective`` with bounded L-BFGS and multi-restart.

    Restart 0 starts at ``x0``; the others draw uniformly inside finite bounds
    or ``cfg.init_range`` otherwise, from ``numpy.random.default_rng(cfg.seed)``.
    ``gradient`` overrides the generic central-difference gradient.
    """
    cfg = cfg or OptimizerConfig()
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    lo, hi = _bounds_arrays(cfg.bounds, n)
    fun = _Counted(objective)
    fun(x0)

    rng = np.random.default_rng(cfg.seed)
    starts = [np.clip(x0, lo, hi)]
    boxed = np.isfinite(lo) & np.isfinite(hi)
    a = np.where(boxed, lo, cfg.init_range[0])
    b = np.where(boxed, hi, cfg.init_range[1])
    for _ in range(max(cfg.restarts, 1) - 1):
        starts.append(np.clip(rng.uniform(a, b), lo, hi))

    runs = []
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(lambda s: _run_once(fun, s, cfg, lo, hi, gradient), starts))
    else:
        for s in starts:
            runs.append(_run_once(fun, s, cfg, lo, hi, gradient))
            if cfg.target_value is not None and runs[-1][1] <= cfg.target_value:
                break

    best = min(range(len(runs)), key=lambda i: (runs[i][1], i))
    x, f, nit, hist, ok, msg = runs[best]
    return FitResult(
        best_params=x,
        best_value=float(f),
        iterations=nit,
        value_history=hist,
        converged=ok,
        evaluations=fun.calls,
        restart_values=[float(r[1]) for r in runs],
        message=msg,
    )


@dataclass
class PurificationScenario:
    """Propagation context for the interaction-fitting objectives.

    ``template`` fixes the envelope family; a parameter vector is decoded
    with ``template.from_vector``.
    """

    dim_s: int
    dim_b: int
    h_s: np.ndarray
    h_b: np.ndarray
    psi0: np.ndarray
    template: InteractionSpec
    max_step: float = DEFAULT_MAX_STEP
    t0: float = 0.0
    t_grid: Optional[np.ndarray] = None
    phase_limit: Optional[float] = PHASE_LIMIT

    def interaction(self, params):
        return self.template.from_vector(params)

    def hamiltonian(self, params):
        return TotalHamiltonian(self.dim_s, self.dim_b, self.h_s, self.h_b, self.interaction(params))

    def run(self, params, times=None):
        times = self.t_grid if times is None else times
        return propagate(self.hamiltonian(params), self.psi0, times, self.max_step, self.phase_limit)


def _frob2(a, b):
    d = np.asarray(a) - np.asarray(b)
    return float(np.sum(np.abs(d) ** 2))


def objective_dissipator_match(interaction_params, model, probe_states, bath_basis=None):
    """Sum over probes of ``||D_GKSL(rho) - effective_dissipator(H, rho)||_F^2``
    for a static generator ``H`` decoded from ``interaction_params``."""
    if len(probe_states) == 0:
        raise ValueError("need at least one probe state")
    d = model.dim
    h = params_to_hermitian(interaction_params, d * d)
    total = 0.0
    for rho in probe_states:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (d, d):
            raise DimensionMismatch(f"probe shape {rho.shape} vs model dim {d}")
        total += _frob2(dissipator(model, rho), effective_dissipator(h, rho, bath_basis))
    return total


def _grid_indices(grid, times):
    idx = np.searchsorted(grid, times)
    idx = np.clip(idx, 0, len(grid) - 1)
    lower = np.clip(idx - 1, 0, len(grid) - 1)
    pick = np.where(np.abs(grid[lower] - times) < np.abs(grid[idx] - times), lower, idx)
    if np.any(np.abs(grid[pick] - times) > 1e-9 * max(1.0, float(np.max(np.abs(grid))))):
        raise GridMismatch("target times are not on the propagation grid")
    return pick


def objective_trajectory(interaction_params, target, scenario):
    """Mean squared Frobenius distance between purified and target reduced states."""
    times = np.asarray(target.times, dtype=float)
    if scenario.t_grid is None:
        traj = scenario.run(interaction_params, times)
        reduced = traj.reduced_states
    else:
        grid = np.asarray(scenario.t_grid, dtype=float)
        traj = scenario.run(interaction_params, grid)
        reduced = traj.reduced_states[_grid_indices(grid, times)]
    diff = reduced - np.asarray(target.states)
    return float(np.sum(np.abs(diff) ** 2) / len(times))


def objective_terminal(interaction_params, rho_target, t_c, scenario):
    """``||rho_S(t_c) - rho_target||_F^2`` for the purified propagation."""
    if not t_c > scenario.t0:
        raise GridMismatch("t_c must lie after the scenario start time")
    traj = scenario.run(interaction_params, [scenario.t0, t_c])
    return _frob2(traj.reduced_states[-1], rho_target)


def objective_unitary_fidelity(params, u_target, ansatz=None):
    """``1 - |Tr(U(params)^+ u_target)| / N`` (global-phase invariant)."""
    from .circuit import ansatz_unitary, default_ansatz

    u_target = np.asarray(u_target, dtype=complex)
    n = u_target.shape[0]
    if u_target.shape != (n, n) or np.linalg.norm(qmath.dag(u_target) @ u_target - np.eye(n)) > 1e-8:
        raise NonUnitaryTarget("target is not a unitary matrix")
    u = ansatz_unitary(ansatz or default_ansatz(), params)
    return 1.0 - abs(np.trace(qmath.dag(u) @ u_target)) / n
