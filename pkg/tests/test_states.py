import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purodyn import qmath
from purodyn.errors import BlochNormExceeded, DimensionMismatch, InvalidDensityMatrix, NonUnitaryBasis
from purodyn.states import (
    bloch_to_density,
    density_to_bloch,
    extend_product,
    maximally_mixed,
    projector,
    purify,
    random_density,
    random_unitary,
    reduce_purified,
    spectral_decompose,
    state_fidelity,
    trace_distance,
)


def test_spectral_decompose_examples():
    w, _ = spectral_decompose(maximally_mixed(2))
    assert np.allclose(w, [0.5, 0.5])
    w, v = spectral_decompose(projector(1, 2))
    assert np.allclose(w, [1, 0])
    assert np.abs(v[:, 0] - [0, 1]).max() < 1e-15
    w, _ = spectral_decompose(np.diag([0.7, 0.3]))
    assert np.abs(w - [0.7, 0.3]).max() < 1e-15


def test_spectral_decompose_reconstructs():
    rng = np.random.default_rng(0)
    for dim in (2, 3, 4):
        rho = random_density(dim, rng)
        w, v = spectral_decompose(rho)
        assert abs(w.sum() - 1) < 1e-10
        assert np.all(w >= -1e-10) and np.all(w <= 1 + 1e-10)
        assert np.abs((v * w) @ v.conj().T - rho).max() < 1e-10


@pytest.mark.parametrize("bad", [
    np.diag([0.6, 0.6]),                      # trace
    np.array([[0.5, 0.1], [0.3, 0.5]]),       # not Hermitian
    np.diag([1.2, -0.2]),                     # negative
])
def test_invalid_density_rejected(bad):
    with pytest.raises(InvalidDensityMatrix):
        spectral_decompose(bad)


def test_purify_maximally_mixed_is_bell():
    psi = purify(maximally_mixed(2))
    assert np.abs(psi - np.array([1, 0, 0, 1]) / np.sqrt(2)).max() < 1e-15


def test_purify_pure_state_is_product():
    psi = purify(projector(1, 2))
    assert np.abs(psi - np.kron([0, 1], [1, 0])).max() < 1e-15


def test_purify_round_trip_100_states():
    rng = np.random.default_rng(1)
    for dim in (2, 4):
        for _ in range(100):
            rho = random_density(dim, rng)
            psi = purify(rho)
            assert abs(np.linalg.norm(psi) - 1) < 1e-12
            red = qmath.partial_trace(np.outer(psi, psi.conj()), dim, dim, "A")
            assert np.abs(red - rho).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3, 4]))
def test_purify_bath_gauge_freedom(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_density(dim, rng)
    basis = random_unitary(dim, rng)
    assert np.abs(reduce_purified(purify(rho, basis), dim) - rho).max() < 1e-12


def test_purify_rejects_non_unitary_basis():
    with pytest.raises(NonUnitaryBasis):
        purify(maximally_mixed(2), np.array([[1, 1], [0, 1]]))
    with pytest.raises(DimensionMismatch):
        purify(maximally_mixed(2), np.eye(3))


def test_extend_product():
    out = extend_product(projector(1, 2), projector(0, 2))
    assert np.abs(out - projector(2, 4)).max() == 0  # |10><10|
    assert np.abs(extend_product(maximally_mixed(2), maximally_mixed(2)) - np.eye(4) / 4).max() < 1e-16
    rng = np.random.default_rng(2)
    rho, sig = random_density(2, rng), random_density(3, rng)
    assert np.abs(qmath.partial_trace(extend_product(rho, sig), 2, 3, "A") - rho).max() < 1e-14


def test_bloch_conversions():
    assert np.allclose(density_to_bloch(projector(0, 2)), [0, 0, 1])
    assert np.allclose(density_to_bloch(maximally_mixed(2)), [0, 0, 0])
    assert np.abs(bloch_to_density([0, 0, 1]) - projector(0, 2)).max() == 0
    v = np.array([0.3, -0.4, 0.5])
    assert np.abs(density_to_bloch(bloch_to_density(v)) - v).max() < 1e-14
    with pytest.raises(BlochNormExceeded):
        bloch_to_density([1, 1, 0])
    with pytest.raises(DimensionMismatch):
        density_to_bloch(np.eye(3) / 3)


def test_trace_distance_examples():
    rng = np.random.default_rng(3)
    rho = random_density(3, rng)
    assert trace_distance(rho, rho) < 1e-15
    assert abs(trace_distance(projector(0, 2), projector(1, 2)) - 1) < 1e-15
    assert abs(trace_distance(maximally_mixed(2), projector(0, 2)) - 0.5) < 1e-15
    with pytest.raises(DimensionMismatch):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)


def test_trace_distance_triangle_inequality():
    rng = np.random.default_rng(4)
    for _ in range(200):
        a, b, c = (random_density(3, rng) for _ in range(3))
        assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-10


def test_fidelity_examples():
    rng = np.random.default_rng(5)
    rho = random_density(2, rng)
    assert abs(state_fidelity(rho, rho) - 1) < 1e-10
    assert state_fidelity(projector(0, 2), projector(1, 2)) < 1e-15
    assert abs(state_fidelity(maximally_mixed(2), projector(0, 2)) - 0.5) < 1e-12
    # pure states: |<a|b>|^2
    a = np.array([1, 1j]) / np.sqrt(2)
    b = np.array([1, 0])
    assert abs(state_fidelity(np.outer(a, a.conj()), np.outer(b, b)) - 0.5) < 1e-12
