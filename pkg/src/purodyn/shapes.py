"""Time envelopes for the system-bath interaction and the real coordinates of
the static Hermitian generator it multiplies.

Envelopes are small frozen dataclasses. Calling one evaluates it on a scalar
or an array of times. ``params()``/``with_params()`` expose the free
coordinates so the optimizer can treat envelope and generator uniformly.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import qmath
from .errors import LengthMismatch, NonHermitianInput

_SQRT_2PI = np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class Exponential:
    alpha: float = 0.0

    def __call__(self, t):
        return np.exp(-self.alpha * np.asarray(t, dtype=float))

    def params(self):
        return np.array([self.alpha])

    def with_params(self, v):
        return Exponential(float(v[0]))

    def to_dict(self):
        return {"kind": "exponential", "alpha": self.alpha}


@dataclass(frozen=True)
class GaussianTrain:
    """Sum of normalised Gaussians; each pulse is ``(center, area, width)``."""

    pulses: Tuple[Tuple[float, float, float], ...] = ()

    def __post_init__(self):
        pulses = tuple(tuple(float(x) for x in p) for p in self.pulses)
        for i, (t0, _, b) in enumerate(pulses):
            if not b > 0:
                raise ValueError(f"pulse {i}: width must be positive, got {b}")
            if not np.isfinite(t0):
                raise ValueError(f"pulse {i}: center must be finite")
        object.__setattr__(self, "pulses", pulses)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for t0, a, b in self.pulses:
            out = out + a / (b * _SQRT_2PI) * np.exp(-0.5 * ((t - t0) / b) ** 2)
        return out

    def params(self):
        return np.array([x for p in self.pulses for x in p], dtype=float)

    def with_params(self, v):
        v = np.asarray(v, dtype=float)
        return GaussianTrain(tuple(tuple(row) for row in v.reshape(-1, 3)))

    def to_dict(self):
        return {"kind": "gaussian_train", "pulses": [list(p) for p in self.pulses]}


@dataclass(frozen=True)
class SinSquared:
    """``sin(t**2 + t)**2``; no free parameters."""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.sin(t * t + t) ** 2

    def params(self):
        return np.zeros(0)

    def with_params(self, v):
        return self

    def to_dict(self):
        return {"kind": "sin_squared"}


@dataclass(frozen=True)
class Constant:
    c: float = 1.0

    def __call__(self, t):
        return np.full(np.shape(t), float(self.c)) if np.ndim(t) else float(self.c)

    def params(self):
        return np.array([self.c])

    def with_params(self, v):
        return Constant(float(v[0]))

    def to_dict(self):
        return {"kind": "constant", "c": self.c}


def eval_envelope(envelope, t):
    return envelope(t)


def envelope_from_dict(d):
    kind = d.get("kind")
    if kind == "exponential":
        return Exponential(float(d.get("alpha", 0.0)))
    if kind == "gaussian_train":
        return GaussianTrain(tuple(tuple(p) for p in d.get("pulses", ())))
    if kind == "sin_squared":
        return SinSquared()
    if kind == "constant":
        return Constant(float(d.get("c", 1.0)))
    raise ValueError(f"unknown envelope kind {kind!r}")


def params_to_hermitian(v, n):
    """Decode ``n**2`` reals: ``n`` diagonal entries, then (re, im) pairs of
    the strict upper triangle in row-major order."""
    v = np.asarray(v, dtype=float)
    if v.shape != (n * n,):
        raise LengthMismatch(f"need {n * n} parameters for a {n}x{n} Hermitian, got {v.size}")
    h = np.diag(v[:n]).astype(complex)
    iu, ju = np.triu_indices(n, k=1)
    off = v[n:].reshape(-1, 2)
    vals = off[:, 0] + 1j * off[:, 1]
    h[iu, ju] = vals
    h[ju, iu] = np.conj(vals)
    return h


def hermitian_to_params(h):
    h = qmath.as_square(h)
    qmath.check_hermitian(h, tol=1e-12)
    n = h.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    off = h[iu, ju]
    return np.concatenate([h.diagonal().real, np.column_stack([off.real, off.imag]).reshape(-1)])


@dataclass(frozen=True)
class InteractionSpec:
    """``H_SB(t) = envelope(t) * H'`` with ``H'`` decoded from ``base_params``."""

    envelope: object
    base_params: Tuple[float, ...]

    def __post_init__(self):
        base = tuple(float(x) for x in np.asarray(self.base_params, dtype=float).ravel())
        n = int(round(np.sqrt(len(base))))
        if n * n != len(base):
            raise LengthMismatch(f"base_params length {len(base)} is not a square")
        object.__setattr__(self, "base_params", base)

    @property
    def dim(self):
        return int(round(np.sqrt(len(self.base_params))))

    @property
    def generator(self):
        return params_to_hermitian(self.base_params, self.dim)

    def __call__(self, t):
        return build_interaction(self, t)

    def many(self, ts):
        return np.asarray(self.envelope(np.asarray(ts, dtype=float)))[:, None, None] * self.generator

    def to_vector(self):
        return np.concatenate([self.envelope.params(), np.asarray(self.base_params)])

    def from_vector(self, v):
        v = np.asarray(v, dtype=float)
        k = len(self.envelope.params())
        if len(v) != k + len(self.base_params):
            raise LengthMismatch(f"expected {k + len(self.base_params)} coordinates, got {len(v)}")
        return InteractionSpec(self.envelope.with_params(v[:k]), tuple(v[k:]))

    def to_dict(self):
        return {"envelope": self.envelope.to_dict(), "base_params": list(self.base_params)}

    @classmethod
    def from_dict(cls, d):
        return cls(envelope_from_dict(d["envelope"]), tuple(d["base_params"]))


def build_interaction(spec, t):
    h = float(spec.envelope(float(t))) * spec.generator
    if qmath.hermiticity_residual(h) > 1e-12:
        raise NonHermitianInput("decoded interaction is not Hermitian")
    return h
