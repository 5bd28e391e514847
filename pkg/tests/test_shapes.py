import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purodyn.errors import LengthMismatch
from purodyn.shapes import (
    Constant,
    Exponential,
    GaussianTrain,
    InteractionSpec,
    SinSquared,
    build_interaction,
    envelope_from_dict,
    hermitian_to_params,
    params_to_hermitian,
)


def test_envelope_examples():
    assert Exponential(0.3)(0.0) == 1.0
    assert SinSquared()(0.0) == 0.0
    peak = 2 / (0.5 * np.sqrt(2 * np.pi))
    assert abs(GaussianTrain(((5.0, 2.0, 0.5),))(5.0) - peak) < 1e-14
    assert abs(peak - 1.59577) < 1e-5
    assert Constant(2.5)(np.arange(3)).tolist() == [2.5, 2.5, 2.5]


def test_gaussian_superposition():
    pulses = ((1.0, 0.7, 0.4), (2.5, -1.2, 1.1), (4.0, 0.3, 0.2))
    t = np.linspace(-2, 8, 301)
    total = GaussianTrain(pulses)(t)
    parts = sum(GaussianTrain((p,))(t) for p in pulses)
    assert np.abs(total - parts).max() < 1e-14


def test_gaussian_rejects_nonpositive_width():
    with pytest.raises(ValueError, match="pulse 1"):
        GaussianTrain(((0, 1, 1), (1, 1, -0.5)))


@pytest.mark.parametrize("env,deriv", [
    (Exponential(0.4), lambda t: -0.4 * np.exp(-0.4 * t)),
    (GaussianTrain(((1.0, 0.8, 0.6), (3.0, -0.5, 1.3))),
     lambda t: sum(-a * (t - c) / b**2 / (b * np.sqrt(2 * np.pi)) * np.exp(-0.5 * ((t - c) / b) ** 2)
                   for c, a, b in ((1.0, 0.8, 0.6), (3.0, -0.5, 1.3)))),
])
def test_envelope_central_difference(env, deriv):
    t = np.linspace(0, 5, 41)
    h = 1e-5
    fd = (env(t + h) - env(t - h)) / (2 * h)
    assert np.abs(fd - deriv(t)).max() < 1e-6


def test_params_to_hermitian_examples():
    assert np.abs(params_to_hermitian(np.zeros(9), 3)).max() == 0
    h = params_to_hermitian(np.array([0.0, 1.0, 1.0, 0.0]), 2)
    # layout: diagonal (0, 1), then the (0, 1) entry as (re, im) = (1, 0)
    assert np.abs(h - np.array([[0, 1], [1, 1]])).max() == 0
    with pytest.raises(LengthMismatch):
        params_to_hermitian(np.zeros(5), 2)


def test_params_layout_sigma_x():
    h = params_to_hermitian(np.array([0.0, 0.0, 1.0, 0.0]), 2)
    assert np.abs(h - np.array([[0, 1], [1, 0]])).max() == 0
    assert np.abs(h.imag).max() == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_params_round_trip(seed, n):
    v = np.random.default_rng(seed).normal(size=n * n)
    h = params_to_hermitian(v, n)
    assert np.abs(h - h.conj().T).max() == 0
    assert np.abs(hermitian_to_params(h) - v).max() < 1e-15


def test_build_interaction_examples():
    rng = np.random.default_rng(0)
    base = rng.normal(size=16)
    spec = InteractionSpec(Constant(0.0), base)
    for t in (0.0, 1.3, 50.0):
        assert np.abs(build_interaction(spec, t)).max() == 0
    exp = InteractionSpec(Exponential(0.5), base)
    assert np.abs(build_interaction(exp, 0.0) - params_to_hermitian(base, 4)).max() == 0
    # at t = 100 / alpha the bound is attained exactly, so allow rounding
    late = build_interaction(exp, 100 / 0.5)
    assert np.linalg.norm(late) <= np.exp(-100) * np.linalg.norm(params_to_hermitian(base, 4)) * (1 + 1e-12)
    assert np.linalg.norm(build_interaction(exp, 101 / 0.5)) < np.exp(-100) * np.linalg.norm(params_to_hermitian(base, 4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 40))
def test_build_interaction_hermitian(seed, t):
    rng = np.random.default_rng(seed)
    env = GaussianTrain(tuple((rng.uniform(0, 20), rng.normal(), rng.uniform(0.1, 5)) for _ in range(3)))
    h = build_interaction(InteractionSpec(env, rng.normal(size=16)), t)
    assert np.abs(h - h.conj().T).max() < 1e-14


def test_vector_and_dict_round_trip():
    spec = InteractionSpec(GaussianTrain(((1, 2, 3), (4, 5, 6))), np.arange(16.0))
    again = spec.from_vector(spec.to_vector())
    assert again == spec
    assert InteractionSpec.from_dict(spec.to_dict()) == spec
    for env in (Exponential(0.2), SinSquared(), Constant(3.0)):
        assert envelope_from_dict(env.to_dict()) == env
    with pytest.raises(LengthMismatch):
        spec.from_vector(np.zeros(3))
    with pytest.raises(ValueError):
        envelope_from_dict({"kind": "triangle"})


def test_many_matches_pointwise():
    spec = InteractionSpec(Exponential(0.3), np.random.default_rng(1).normal(size=16))
    ts = np.linspace(0, 3, 7)
    batch = spec.many(ts)
    for t, h in zip(ts, batch):
        assert np.abs(h - spec(t)).max() < 1e-15
