import numpy as np
import pytest

from purodyn import circuit
from purodyn.errors import GridMismatch, NonUnitaryTarget, ObjectiveNonFinite
from purodyn.fit import (
    OptimizerConfig,
    PurificationScenario,
    central_gradient,
    objective_dissipator_match,
    objective_terminal,
    objective_trajectory,
    objective_unitary_fidelity,
    optimize,
)
from purodyn.lindblad import LindbladModel, decay_channel_model, dissipator, integrate
from purodyn.purified_dynamics import effective_dissipator
from purodyn.shapes import Exponential, InteractionSpec, params_to_hermitian
from purodyn.states import projector, purify, random_unitary

H = np.diag([0.0, 1.0])


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_quadratic_converges():
    c = np.array([0.3, -1.2, 2.0, 0.5])
    x0 = np.random.default_rng(0).uniform(-1, 1, 4)
    r = optimize(lambda x: np.sum((x - c) ** 2), x0, OptimizerConfig(restarts=1))
    assert np.abs(r.best_params - c).max() < 1e-6
    assert r.iterations < 50


def test_rosenbrock():
    r = optimize(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig(restarts=1, max_iterations=500))
    assert r.best_value < 1e-6
    assert np.abs(r.best_params - 1).max() < 1e-2


def test_corner_bound():
    cfg = OptimizerConfig(restarts=3, bounds=[(0, 1), (0, 1)])
    r = optimize(lambda x: np.sum((x - 2) ** 2), np.array([0.2, 0.4]), cfg)
    assert np.abs(r.best_params - 1).max() < 1e-8


def test_history_monotone_and_never_worse_than_start():
    x0 = np.array([-1.2, 1.0])
    r = optimize(rosenbrock, x0, OptimizerConfig(restarts=4, seed=3))
    assert np.all(np.diff(r.value_history) <= 1e-15)
    assert r.best_value <= rosenbrock(x0)
    # a start at the optimum is kept even if restarts wander
    r0 = optimize(rosenbrock, np.ones(2), OptimizerConfig(restarts=2))
    assert r0.best_value == 0.0


def test_deterministic():
    cfg = OptimizerConfig(restarts=4, seed=11)
    a = optimize(rosenbrock, np.array([0.5, -0.5]), cfg)
    b = optimize(rosenbrock, np.array([0.5, -0.5]), cfg)
    assert np.array_equal(a.best_params, b.best_params)
    assert a.value_history == b.value_history
    assert a.restart_values == b.restart_values


def test_non_finite_objective_reports_coordinates():
    with pytest.raises(ObjectiveNonFinite) as e:
        optimize(lambda x: np.nan if x[0] > 0.5 else x[0] ** 2, np.array([1.0]), OptimizerConfig(restarts=1))
    assert e.value.coordinates is not None


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(fd_step=0)
    with pytest.raises(ValueError):
        OptimizerConfig(bounds=[(1, 0)])


def test_central_difference_richardson():
    f = lambda x: np.sin(3 * x[0]) * np.exp(x[1])  # noqa: E731
    x = np.array([0.4, -0.3])
    exact = np.array([3 * np.cos(1.2) * np.exp(-0.3), np.sin(1.2) * np.exp(-0.3)])
    e1 = np.abs(central_gradient(f, x, 1e-2) - exact).max()
    e2 = np.abs(central_gradient(f, x, 5e-3) - exact).max()
    assert 3 <= e1 / e2 <= 6


def test_one_sided_gradient_at_bounds():
    f = lambda x: (x[0] - 3) ** 2  # noqa: E731
    g = central_gradient(f, np.array([1.0]), 1e-6, lo=np.array([0.0]), hi=np.array([1.0]))
    assert abs(g[0] + 4) < 1e-5


# ---------------------------------------------------------------- objectives

def test_dissipator_match_trivial_cases():
    zero_rate = LindbladModel(H, [(0.0, np.array([[0, 1], [1, 0]]))])
    probes = [np.eye(2) / 2, np.diag([0.7, 0.3])]
    assert objective_dissipator_match(np.zeros(16), zero_rate, probes) == 0.0
    # empty channel list: the value is the summed squared effective dissipator
    v = np.random.default_rng(1).normal(size=16)
    empty = LindbladModel(H, [])
    ref = sum(np.sum(np.abs(effective_dissipator(params_to_hermitian(v, 4), p)) ** 2) for p in probes)
    assert abs(objective_dissipator_match(v, empty, probes) - ref) < 1e-14


def _lstsq_floor(model, probes):
    # the objective is a linear least-squares problem in the 16 coordinates
    cols = []
    for k in range(16):
        e = np.zeros(16)
        e[k] = 1
        h = params_to_hermitian(e, 4)
        cols.append(np.concatenate([effective_dissipator(h, p).ravel() for p in probes]))
    a = np.array(cols).T
    b = np.concatenate([dissipator(model, p).ravel() for p in probes])
    a_r = np.vstack([a.real, a.imag])
    b_r = np.concatenate([b.real, b.imag])
    x = np.linalg.lstsq(a_r, b_r, rcond=None)[0]
    return float(np.sum((a_r @ x - b_r) ** 2)), x


def test_dissipator_match_reaches_least_squares_floor():
    model = decay_channel_model()
    probes = [np.eye(2) / 2, np.diag([0.7, 0.3]), np.diag([0.3, 0.7])]
    floor, x = _lstsq_floor(model, probes)
    assert abs(objective_dissipator_match(x, model, probes) - floor) < 1e-14
    r = optimize(lambda v: objective_dissipator_match(v, model, probes), np.zeros(16), OptimizerConfig(restarts=2))
    assert abs(r.best_value - floor) < 1e-9
    # regression baseline: with the canonical bath pairing the I/2 probe and
    # diag(0.7, 0.3) compete for the same matrix element, leaving 0.04 / 23
    assert abs(r.best_value - 0.04 / 23) < 1e-9


def test_dissipator_match_without_competing_probe():
    model = decay_channel_model()
    probes = [np.diag([0.7, 0.3]), np.diag([0.3, 0.7])]
    r = optimize(lambda v: objective_dissipator_match(v, model, probes), np.zeros(16), OptimizerConfig(restarts=1))
    assert r.best_value < 1e-10


def _decay_scenario(rho0, t, envelope=Exponential(0.2)):
    tmpl = InteractionSpec(envelope, np.zeros(16))
    return PurificationScenario(2, 2, H, H, purify(rho0), tmpl, max_step=0.05, t_grid=t)


def test_trajectory_objective_self_match_is_zero():
    rho0 = np.diag([0.3, 0.7])
    t = np.arange(0, 5.0001, 0.05)
    sc = _decay_scenario(rho0, t)
    v = np.concatenate([[0.3], np.random.default_rng(2).normal(scale=0.2, size=16)])
    traj = sc.run(v)

    class Target:
        times = t
        states = traj.reduced_states

    assert objective_trajectory(v, Target, sc) < 1e-28


def test_trajectory_objective_zero_interaction_oracle():
    rho0 = np.array([[0.4, 0.2 - 0.1j], [0.2 + 0.1j, 0.6]])
    t = np.arange(0, 10.0001, 0.05)
    target = integrate(decay_channel_model(), rho0, t)
    # closed-form unitary evolution under H = diag(0, 1)
    phase = np.exp(-1j * t)
    unitary_only = np.array([[[rho0[0, 0], rho0[0, 1] * np.conj(f)], [rho0[1, 0] * f, rho0[1, 1]]] for f in phase])
    expected = np.mean(np.sum(np.abs(unitary_only - target.states) ** 2, axis=(1, 2)))
    got = objective_trajectory(np.zeros(17), target, _decay_scenario(rho0, t))
    assert expected > 0
    assert abs(got - expected) < 1e-9


def test_trajectory_objective_off_grid_raises():
    t = np.arange(0, 1.0001, 0.1)
    target = integrate(decay_channel_model(), np.eye(2) / 2, t + 0.013)
    with pytest.raises(GridMismatch):
        objective_trajectory(np.zeros(17), target, _decay_scenario(np.eye(2) / 2, t))


def test_terminal_objective_examples():
    sc = PurificationScenario(2, 2, H, H, purify(projector(1, 2)), InteractionSpec(Exponential(0.1), np.zeros(16)),
                              max_step=0.05)
    assert abs(objective_terminal(np.zeros(17), projector(0, 2), 5.0, sc) - 2.0) < 1e-12
    v = np.concatenate([[0.1], np.random.default_rng(3).normal(scale=0.1, size=16)])
    reached = sc.run(v, [0.0, 5.0]).reduced_states[-1]
    assert objective_terminal(v, reached, 5.0, sc) < 1e-28
    with pytest.raises(GridMismatch):
        objective_terminal(v, reached, 0.0, sc)


def test_unitary_fidelity_objective():
    a = circuit.default_ansatz()
    rng = np.random.default_rng(4)
    p = rng.uniform(-np.pi, np.pi, a.parameter_count)
    u = circuit.ansatz_unitary(a, p)
    assert abs(objective_unitary_fidelity(p, u, a)) < 1e-12
    assert abs(objective_unitary_fidelity(p, np.exp(0.7j) * u, a)) < 1e-12
    v = objective_unitary_fidelity(p, random_unitary(16, rng), a)
    assert 0 < v <= 1
    with pytest.raises(NonUnitaryTarget):
        objective_unitary_fidelity(p, 2 * u, a)
