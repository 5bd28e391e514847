"""Scenario configs, validation and end-to-end runs with file output.

A config is a JSON object with ``schema_version``, ``scenario``, ``seed``
and scenario-specific fields. Matrices are ``{"re": [[...]], "im": [[...]]}``
(``im`` optional). Every run writes CSV/JSON artifacts atomically and returns
a :class:`RunSummary`; ``summary.json`` carries everything except wall-clock
time so that identical configs give byte-identical files.
"""

import copy
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from . import channels, circuit, network, qmath
from .errors import ConfigInvalid, ObjectiveNonFinite, StateInvariantViolated
from .fit import OptimizerConfig, PurificationScenario, objective_dissipator_match, objective_terminal, objective_trajectory, optimize
from .lindblad import LindbladModel, integrate
from .purified_dynamics import propagate
from .shapes import Constant, InteractionSpec, envelope_from_dict
from .states import bloch_to_density, purify

SCHEMA_VERSION = 1
SCENARIOS = ("lindblad-match", "noncp-disc", "tls-decay", "tls-network", "compile-circuit")

TRACE_TOL = 1e-10
NORM_TOL = 1e-10
POSITIVITY_TOL = 1e-9
HERMITICITY_TOL = 1e-10

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NOT_CONVERGED = 3


# ---------------------------------------------------------------- encoding

def encode_matrix(m):
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def decode_matrix(obj):
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise ValueError("re and im parts differ in shape")
    return re + 1j * im


def _exchange_base(g=0.05):
    # |10><01| + h.c. on the 4x4 system-bath space (upper element (1, 2))
    v = np.zeros(16)
    v[4 + 2 * 3] = g
    return v.tolist()


# ---------------------------------------------------------------- defaults

def _default_optimizer(**kw):
    d = {
        "max_iterations": 500,
        "gradient_tolerance": 1e-8,
        "fd_step": 1e-6,
        "restarts": 1,
        "memory": 10,
        "value_tolerance": 1e-12,
        "init_range": [-1.0, 1.0],
        "target_value": None,
    }
    d.update(kw)
    return d


def _network_defaults():
    return {
        "e0": -0.5,
        "e1": 0.5,
        "coupling_c": 0.2,
        "edge_mode": "exchange",
        "edge_envelopes": [
            {"kind": "gaussian_train", "pulses": [[40.0, 1.0, 10.0], [150.0, 0.6, 10.0], [300.0, -0.5, 10.0]]},
            {"kind": "gaussian_train", "pulses": [[90.0, 1.0, 10.0], [225.0, -0.5, 10.0], [350.0, 0.6, 10.0]]},
        ],
        "edge_base_params": [[1.0, 0.0], [1.0, 0.0]],
    }


def default_config(name):
    """Built-in config for scenario ``name`` (a fresh copy)."""
    h = np.diag([0.0, 1.0])
    common = {"schema_version": SCHEMA_VERSION, "scenario": name, "seed": 0}
    if name == "lindblad-match":
        base = np.zeros(16)
        base[4 + 2 * 3] = 0.15
        cfg = {
            "model": {
                "hamiltonian": encode_matrix(h),
                "channels": [{"rate": 0.1, "operator": encode_matrix(qmath.PAULI_X)}],
            },
            "probes": [encode_matrix(np.diag([0.3, 0.7])), encode_matrix(np.diag([0.0, 1.0]))],
            "bath_hamiltonian": encode_matrix(h),
            "grid": {"t0": 0.0, "t1": 50.0, "dt": 0.05},
            "objective": "trajectory",
            "envelope": {"kind": "exponential", "alpha": 0.2},
            "initial_base_params": base.tolist(),
            "bounds": {"envelope": [[0.0, 2.0]], "base": [-2.0, 2.0]},
            "propagation_max_step": 0.05,
            "optimizer": _default_optimizer(max_iterations=200, target_value=1e-5),
            "objective_tolerance": 1e-3,
        }
    elif name == "noncp-disc":
        cfg = {
            "n_samples": 200,
            "radii": [1.0],
            "map": [1.0, 1.0, 0.0],
            "comparator": [0.5, 0.5, 0.0],
        }
    elif name == "tls-decay":
        cfg = {
            "system_hamiltonian": encode_matrix(h),
            "bath_hamiltonian": encode_matrix(h),
            "initial_state": encode_matrix(np.diag([0.0, 1.0])),
            "t_c": 20.0,
            "grid_dt": 0.01,
            "initial_base_params": _exchange_base(0.05),
            "base_bounds": [-2.0, 2.0],
            "optimizer": _default_optimizer(max_iterations=200, restarts=2, target_value=1e-8),
            "envelopes": [
                {"envelope": {"kind": "exponential", "alpha": 0.1}, "bounds": [[0.0, 2.0]],
                 "max_step": 0.01, "min_ground_population": 0.99},
                {"envelope": {"kind": "gaussian_train", "pulses": [[5.0, 1.0, 2.0], [10.0, 1.0, 2.0], [15.0, 1.0, 2.0]]},
                 "bounds": [[0.0, 20.0], [-5.0, 5.0], [0.2, 10.0]] * 3,
                 "max_step": 0.01, "min_ground_population": 0.95},
                {"envelope": {"kind": "sin_squared"}, "bounds": [],
                 "max_step": 0.005, "min_ground_population": 0.95},
            ],
        }
    elif name == "tls-network":
        cfg = {
            "network": _network_defaults(),
            "initial_excited": ["S1"],
            "target_profile": {"decay_time": 150.0, "bump_amplitude": 0.06, "bump_center": 225.0, "bump_width": 12.0},
            "fit_grid_dt": 2.0,
            "fit_max_step": 1.0,
            "grid": {"t0": 0.0, "t1": 400.0, "dt": 0.04},
            "max_step": 0.04,
            "bounds": {"pulse": [[0.0, 400.0], [-5.0, 5.0], [4.0, 40.0]], "base": [-2.0, 2.0]},
            "optimizer": _default_optimizer(max_iterations=150),
            "max_final_fraction": 0.2,
            "backflow": {"window": 25, "threshold": 1e-4},
        }
    elif name == "compile-circuit":
        cfg = {
            "network": _network_defaults(),
            "initial_excited": ["S1"],
            "interval": 4.04,
            "steps": 99,
            "max_step": 0.04,
            "optimizer": _default_optimizer(max_iterations=2000, gradient_tolerance=1e-10, restarts=32,
                                            init_range=[-np.pi, np.pi], target_value=1e-9),
            "warm_restarts": 4,
            "recovery_checks": 20,
            "min_recovery_fidelity": 1 - 1e-5,
        }
    else:
        raise ConfigInvalid([f"scenario: unknown scenario {name!r}"])
    common.update(cfg)
    return copy.deepcopy(common)


# ---------------------------------------------------------------- validation

class _Diag:
    def __init__(self):
        self.items: List[str] = []

    def add(self, path, msg):
        self.items.append(f"{path}: {msg}")


def _num(cfg, key, path, d, positive=False, required=True):
    if key not in cfg:
        if required:
            d.add(f"{path}{key}", "missing")
        return None
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        d.add(f"{path}{key}", "must be a finite number")
        return None
    if positive and not v > 0:
        d.add(f"{path}{key}", "must be positive")
        return None
    return float(v)


def _int(cfg, key, path, d, minimum=0):
    if key not in cfg:
        d.add(f"{path}{key}", "missing")
        return None
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int):
        d.add(f"{path}{key}", "must be an integer")
        return None
    if v < minimum:
        d.add(f"{path}{key}", f"must be >= {minimum}")
        return None
    return v


def _matrix(cfg, key, path, d, dim=None, kind="any"):
    if key not in cfg:
        d.add(f"{path}{key}", "missing")
        return None
    try:
        m = decode_matrix(cfg[key])
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        d.add(f"{path}{key}", f"cannot decode matrix ({e})")
        return None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        d.add(f"{path}{key}", f"must be square, got shape {m.shape}")
        return None
    if dim is not None and m.shape[0] != dim:
        d.add(f"{path}{key}", f"must be {dim}x{dim}, got {m.shape[0]}x{m.shape[1]}")
        return None
    if kind in ("hermitian", "density") and qmath.hermiticity_residual(m) > 1e-10:
        d.add(f"{path}{key}", "must be Hermitian")
        return None
    if kind == "density":
        if abs(np.trace(m).real - 1) > 1e-10:
            d.add(f"{path}{key}", "must have unit trace")
            return None
        if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -1e-9:
            d.add(f"{path}{key}", "must be positive semidefinite")
            return None
    return m


def _envelope(env, path, d):
    if not isinstance(env, dict):
        d.add(path, "must be an object")
        return None
    kind = env.get("kind")
    if kind == "gaussian_train":
        pulses = env.get("pulses")
        if not isinstance(pulses, list):
            d.add(f"{path}.pulses", "must be a list of [center, area, width]")
            return None
        ok = True
        for i, p in enumerate(pulses):
            if not isinstance(p, (list, tuple)) or len(p) != 3:
                d.add(f"{path}.pulses[{i}]", "must be [center, area, width]")
                ok = False
                continue
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x) for x in p):
                d.add(f"{path}.pulses[{i}]", "entries must be finite numbers")
                ok = False
            elif not p[2] > 0:
                d.add(f"{path}.pulses[{i}].width", f"must be positive, got {p[2]}")
                ok = False
        if not ok:
            return None
    elif kind == "exponential":
        if _num(env, "alpha", f"{path}.", d) is None:
            return None
    elif kind == "constant":
        if _num(env, "c", f"{path}.", d) is None:
            return None
    elif kind != "sin_squared":
        d.add(f"{path}.kind", f"unknown envelope kind {kind!r}")
        return None
    return envelope_from_dict(env)


def _grid(cfg, key, path, d):
    g = cfg.get(key)
    if not isinstance(g, dict):
        d.add(f"{path}{key}", "missing or not an object")
        return None
    t0 = _num(g, "t0", f"{path}{key}.", d)
    t1 = _num(g, "t1", f"{path}{key}.", d)
    dt = _num(g, "dt", f"{path}{key}.", d, positive=True)
    if None in (t0, t1, dt):
        return None
    if not t1 > t0:
        d.add(f"{path}{key}", "t1 must exceed t0")
        return None
    return t0, t1, dt


_OPT_KEYS = {"max_iterations", "gradient_tolerance", "fd_step", "restarts", "memory", "value_tolerance",
             "init_range", "target_value", "bounds"}


def _optimizer(cfg, key, path, d):
    o = cfg.get(key)
    if not isinstance(o, dict):
        d.add(f"{path}{key}", "missing or not an object")
        return
    p = f"{path}{key}."
    for k in o:
        if k not in _OPT_KEYS:
            d.add(f"{p}{k}", "unknown optimizer field")
    if "max_iterations" in o:
        _int(o, "max_iterations", p, d, 1)
    if "restarts" in o:
        _int(o, "restarts", p, d, 1)
    if "memory" in o:
        _int(o, "memory", p, d, 1)
    for k in ("gradient_tolerance", "fd_step", "value_tolerance"):
        if k in o:
            _num(o, k, p, d, positive=True)
    r = o.get("init_range")
    if r is not None and (not isinstance(r, list) or len(r) != 2 or not r[0] < r[1]):
        d.add(f"{p}init_range", "must be [lo, hi] with lo < hi")


def _bounds_pair(b, path, d):
    if not isinstance(b, (list, tuple)) or len(b) != 2:
        d.add(path, "must be [lo, hi]")
        return False
    lo, hi = b
    if lo is not None and hi is not None and lo > hi:
        d.add(path, "lo exceeds hi")
        return False
    return True


def _network(cfg, path, d):
    net = cfg.get("network")
    if not isinstance(net, dict):
        d.add(f"{path}network", "missing or not an object")
        return None
    p = f"{path}network."
    e0 = _num(net, "e0", p, d)
    e1 = _num(net, "e1", p, d)
    _num(net, "coupling_c", p, d)
    if e0 is not None and e1 is not None and not e1 > e0:
        d.add(f"{p}e1", "must exceed e0")
    mode = net.get("edge_mode", "exchange")
    if mode not in network.EDGE_PARAM_COUNT:
        d.add(f"{p}edge_mode", f"unknown edge mode {mode!r}")
    envs = net.get("edge_envelopes")
    if not isinstance(envs, list) or len(envs) != 2:
        d.add(f"{p}edge_envelopes", "need one envelope per edge (2)")
    else:
        for i, e in enumerate(envs):
            _envelope(e, f"{p}edge_envelopes[{i}]", d)
    bases = net.get("edge_base_params")
    if not isinstance(bases, list) or len(bases) != 2:
        d.add(f"{p}edge_base_params", "need one parameter list per edge (2)")
    elif mode in network.EDGE_PARAM_COUNT:
        for i, b in enumerate(bases):
            if not isinstance(b, list) or len(b) != network.EDGE_PARAM_COUNT[mode]:
                d.add(f"{p}edge_base_params[{i}]", f"{mode} edges take {network.EDGE_PARAM_COUNT[mode]} numbers")
    if "nodes" in net and net["nodes"] != 2:
        d.add(f"{p}nodes", "only two system nodes are supported")
    exc = cfg.get("initial_excited", ["S1"])
    if not isinstance(exc, list) or any(n not in network.NODE_NAMES for n in exc):
        d.add(f"{path}initial_excited", f"must list node names from {network.NODE_NAMES}")


def validate(config) -> List[str]:
    """Every problem found in ``config``; an empty list means runnable."""
    d = _Diag()
    if not isinstance(config, dict):
        return ["<root>: config must be a JSON object"]
    if config.get("schema_version") != SCHEMA_VERSION:
        d.add("schema_version", f"must be {SCHEMA_VERSION}")
    name = config.get("scenario")
    if "seed" not in config:
        d.add("seed", "missing (needed for reproducible runs)")
    else:
        _int(config, "seed", "", d, 0)
    if name not in SCENARIOS:
        d.add("scenario", f"must be one of {', '.join(SCENARIOS)}")
        return d.items

    if name == "lindblad-match":
        m = config.get("model")
        if not isinstance(m, dict):
            d.add("model", "missing or not an object")
        else:
            h = _matrix(m, "hamiltonian", "model.", d, kind="hermitian")
            dim = None if h is None else h.shape[0]
            chans = m.get("channels", [])
            if not isinstance(chans, list):
                d.add("model.channels", "must be a list")
            else:
                for i, c in enumerate(chans):
                    cp = f"model.channels[{i}]."
                    if not isinstance(c, dict):
                        d.add(cp[:-1], "must be an object")
                        continue
                    r = _num(c, "rate", cp, d)
                    if r is not None and r < 0:
                        d.add(f"{cp}rate", "must be non-negative")
                    _matrix(c, "operator", cp, d, dim=dim)
            if dim is not None and dim != 2:
                d.add("model.hamiltonian", "the scenario fits a 16-parameter interaction; system must be a qubit")
        probes = config.get("probes")
        if not isinstance(probes, list) or not probes:
            d.add("probes", "need at least one initial state")
        else:
            for i in range(len(probes)):
                _matrix({"p": probes[i]}, "p", f"probes[{i}]", d, dim=2, kind="density")
        _matrix(config, "bath_hamiltonian", "", d, dim=2, kind="hermitian")
        _grid(config, "grid", "", d)
        if config.get("objective") not in ("trajectory", "dissipator"):
            d.add("objective", "must be 'trajectory' or 'dissipator'")
        env = _envelope(config.get("envelope"), "envelope", d)
        base = config.get("initial_base_params")
        if not isinstance(base, list) or len(base) != 16:
            d.add("initial_base_params", "need 16 numbers")
        b = config.get("bounds", {})
        if env is not None and len(b.get("envelope", [])) != len(env.params()):
            d.add("bounds.envelope", f"need {len(env.params())} [lo, hi] pairs")
        for i, pair in enumerate(b.get("envelope", [])):
            _bounds_pair(pair, f"bounds.envelope[{i}]", d)
        _bounds_pair(b.get("base"), "bounds.base", d)
        _num(config, "propagation_max_step", "", d, positive=True)
        _num(config, "objective_tolerance", "", d, positive=True)
        _optimizer(config, "optimizer", "", d)

    elif name == "noncp-disc":
        _int(config, "n_samples", "", d, 1)
        radii = config.get("radii", [1.0])
        if not isinstance(radii, list) or not radii or any(not 0 <= r <= 1 for r in radii):
            d.add("radii", "must be a non-empty list in [0, 1]")
        for key in ("map", "comparator"):
            v = config.get(key)
            if not isinstance(v, list) or len(v) != 3 or any(abs(x) > 1 for x in v):
                d.add(key, "must be three scalings with |l| <= 1")

    elif name == "tls-decay":
        _matrix(config, "system_hamiltonian", "", d, dim=2, kind="hermitian")
        _matrix(config, "bath_hamiltonian", "", d, dim=2, kind="hermitian")
        _matrix(config, "initial_state", "", d, dim=2, kind="density")
        _num(config, "t_c", "", d, positive=True)
        _num(config, "grid_dt", "", d, positive=True)
        base = config.get("initial_base_params")
        if not isinstance(base, list) or len(base) != 16:
            d.add("initial_base_params", "need 16 numbers")
        _bounds_pair(config.get("base_bounds"), "base_bounds", d)
        _optimizer(config, "optimizer", "", d)
        envs = config.get("envelopes")
        if not isinstance(envs, list) or not envs:
            d.add("envelopes", "need at least one envelope entry")
        else:
            for i, e in enumerate(envs):
                p = f"envelopes[{i}]"
                if not isinstance(e, dict):
                    d.add(p, "must be an object")
                    continue
                env = _envelope(e.get("envelope"), f"{p}.envelope", d)
                bnds = e.get("bounds", [])
                if env is not None and len(bnds) != len(env.params()):
                    d.add(f"{p}.bounds", f"need {len(env.params())} [lo, hi] pairs")
                for j, pair in enumerate(bnds):
                    _bounds_pair(pair, f"{p}.bounds[{j}]", d)
                _num(e, "max_step", f"{p}.", d, positive=True)
                g = _num(e, "min_ground_population", f"{p}.", d)
                if g is not None and not 0 <= g <= 1:
                    d.add(f"{p}.min_ground_population", "must lie in [0, 1]")

    elif name == "tls-network":
        _network(config, "", d)
        tp = config.get("target_profile")
        if not isinstance(tp, dict):
            d.add("target_profile", "missing or not an object")
        else:
            _num(tp, "decay_time", "target_profile.", d, positive=True)
            _num(tp, "bump_amplitude", "target_profile.", d)
            _num(tp, "bump_center", "target_profile.", d)
            _num(tp, "bump_width", "target_profile.", d, positive=True)
        _num(config, "fit_grid_dt", "", d, positive=True)
        _num(config, "fit_max_step", "", d, positive=True)
        _grid(config, "grid", "", d)
        _num(config, "max_step", "", d, positive=True)
        b = config.get("bounds")
        if not isinstance(b, dict):
            d.add("bounds", "missing or not an object")
        else:
            pulse = b.get("pulse")
            if not isinstance(pulse, list) or len(pulse) != 3:
                d.add("bounds.pulse", "need [center, area, width] bound pairs")
            else:
                for j, pair in enumerate(pulse):
                    _bounds_pair(pair, f"bounds.pulse[{j}]", d)
            _bounds_pair(b.get("base"), "bounds.base", d)
        _optimizer(config, "optimizer", "", d)
        _num(config, "max_final_fraction", "", d, positive=True)
        bf = config.get("backflow", {})
        _int(bf, "window", "backflow.", d, 1)
        _num(bf, "threshold", "backflow.", d)

    elif name == "compile-circuit":
        _network(config, "", d)
        _num(config, "interval", "", d, positive=True)
        _int(config, "steps", "", d, 1)
        _num(config, "max_step", "", d, positive=True)
        _optimizer(config, "optimizer", "", d)
        _int(config, "warm_restarts", "", d, 1)
        _int(config, "recovery_checks", "", d, 0)
        f = _num(config, "min_recovery_fidelity", "", d)
        if f is not None and not 0 <= f <= 1:
            d.add("min_recovery_fidelity", "must lie in [0, 1]")
    return d.items


# ---------------------------------------------------------------- output

def _fmt(x):
    return format(float(x) + 0.0, ".17g")  # + 0.0 drops negative zero


def csv_text(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_matrix(obj) if obj.ndim == 2 else {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Writer:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.artifacts: List[Dict[str, str]] = []

    def write(self, rel, text):
        atomic_write(os.path.join(self.out_dir, rel), text)
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        self.artifacts.append({"path": rel, "sha256": digest})

    def csv(self, rel, header, rows):
        self.write(rel, csv_text(header, rows))

    def json(self, rel, obj):
        self.write(rel, json_text(obj))


# ---------------------------------------------------------------- invariants

class _Invariants:
    """Running maxima of the state invariants over every executed trajectory."""

    def __init__(self):
        self.trace = 0.0
        self.norm = 0.0
        self.hermiticity = 0.0
        self.min_eig = np.inf
        self.extra: Dict[str, dict] = {}

    def densities(self, rhos):
        rhos = np.asarray(rhos)
        if rhos.ndim == 2:
            rhos = rhos[None]
        self.trace = max(self.trace, float(np.abs(np.trace(rhos, axis1=1, axis2=2) - 1).max()))
        herm = np.abs(rhos - np.conj(np.swapaxes(rhos, 1, 2))).max()
        self.hermiticity = max(self.hermiticity, float(herm))
        sym = (rhos + np.conj(np.swapaxes(rhos, 1, 2))) / 2
        self.min_eig = min(self.min_eig, float(np.linalg.eigvalsh(sym)[:, 0].min()))

    def vectors(self, psis):
        psis = np.asarray(psis)
        if psis.ndim == 1:
            psis = psis[None]
        self.norm = max(self.norm, float(np.abs(np.linalg.norm(psis, axis=1) - 1).max()))

    def check(self, name, value, tol, below=True):
        ok = value <= tol if below else value >= tol
        self.extra[name] = {"value": float(value), "tolerance": float(tol), "ok": bool(ok)}

    def report(self):
        min_eig = 0.0 if not np.isfinite(self.min_eig) else self.min_eig
        out = {
            "trace": {"max_error": self.trace, "tolerance": TRACE_TOL, "ok": self.trace <= TRACE_TOL},
            "norm": {"max_error": self.norm, "tolerance": NORM_TOL, "ok": self.norm <= NORM_TOL},
            "hermiticity": {"max_error": self.hermiticity, "tolerance": HERMITICITY_TOL,
                            "ok": self.hermiticity <= HERMITICITY_TOL},
            "positivity": {"min_eigenvalue": min_eig, "tolerance": -POSITIVITY_TOL,
                           "ok": min_eig >= -POSITIVITY_TOL},
        }
        out.update(self.extra)
        return out

    def ok(self):
        return all(v["ok"] for v in self.report().values())


# ---------------------------------------------------------------- summary

@dataclass
class RunSummary:
    scenario: str
    objective_values: Dict[str, object] = field(default_factory=dict)
    fitted_params: Dict[str, object] = field(default_factory=dict)
    invariants: Dict[str, dict] = field(default_factory=dict)
    config: Dict[str, object] = field(default_factory=dict)
    artifacts: List[Dict[str, str]] = field(default_factory=list)
    exit_code: int = EXIT_OK
    converged: bool = True
    messages: List[str] = field(default_factory=list)
    wall_clock: float = 0.0

    def to_dict(self, include_wall_clock=False):
        d = {
            "scenario": self.scenario,
            "objective_values": self.objective_values,
            "fitted_params": self.fitted_params,
            "invariants": self.invariants,
            "config": self.config,
            "artifacts": self.artifacts,
            "exit_code": self.exit_code,
            "converged": self.converged,
            "messages": self.messages,
        }
        if include_wall_clock:
            d["wall_clock"] = self.wall_clock
        return _jsonable(d)


def optimizer_config(d, seed, bounds=None, workers=1):
    d = dict(d or {})
    kw = {k: d[k] for k in ("max_iterations", "gradient_tolerance", "fd_step", "restarts", "memory",
                            "value_tolerance", "target_value") if k in d and d[k] is not None}
    if "init_range" in d:
        kw["init_range"] = tuple(d["init_range"])
    if "bounds" in d and bounds is None:
        bounds = [tuple(b) for b in d["bounds"]]
    restarts = kw.get("restarts", 1)
    return OptimizerConfig(seed=seed, bounds=bounds, workers=max(1, min(workers, restarts)), **kw)


def thread_cap():
    """Worker cap from ``PURODYN_THREADS`` (default 1)."""
    raw = os.environ.get("PURODYN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _grid_points(t0, t1, dt):
    n = int(round((t1 - t0) / dt))
    return t0 + dt * np.arange(n + 1)


# ---------------------------------------------------------------- scenarios

def _run_lindblad_match(cfg, w, summary, inv, workers):
    m = cfg["model"]
    model = LindbladModel(decode_matrix(m["hamiltonian"]),
                          [(float(c["rate"]), decode_matrix(c["operator"])) for c in m["channels"]])
    h_b = decode_matrix(cfg["bath_hamiltonian"])
    g = cfg["grid"]
    times = _grid_points(g["t0"], g["t1"], g["dt"])
    env = envelope_from_dict(cfg["envelope"])
    base0 = np.asarray(cfg["initial_base_params"], dtype=float)
    b = cfg["bounds"]
    tol = float(cfg["objective_tolerance"])
    best = np.inf
    for i, probe in enumerate(cfg["probes"]):
        rho0 = decode_matrix(probe)
        target = integrate(model, rho0, times)
        inv.densities(target.states)
        psi0 = purify(rho0)
        if cfg["objective"] == "trajectory":
            template = InteractionSpec(env, base0)
            bounds = [tuple(x) for x in b["envelope"]] + [tuple(b["base"])] * 16
            fun = None
        else:
            template = InteractionSpec(Constant(1.0), base0)
            bounds = [(1.0, 1.0)] + [tuple(b["base"])] * 16
            probes = [decode_matrix(p) for p in cfg["probes"]]
            fun = lambda v: objective_dissipator_match(v[1:], model, probes)  # noqa: E731
        scen = PurificationScenario(2, 2, model.hamiltonian, h_b, psi0, template,
                                    max_step=float(cfg["propagation_max_step"]), t0=times[0], t_grid=times)
        if fun is None:
            fun = lambda v: objective_trajectory(v, target, scen)  # noqa: E731
        res = optimize(fun, template.to_vector(), optimizer_config(cfg["optimizer"], cfg["seed"] + i, bounds, workers))
        traj = scen.run(res.best_params)
        inv.densities(traj.reduced_states)
        inv.vectors(traj.purified_states)
        value = objective_trajectory(res.best_params, target, scen)
        best = min(best, value)
        resid = np.linalg.norm(traj.reduced_states - target.states, axis=(1, 2))
        rows = np.column_stack([times, target.states[:, 0, 0].real, target.states[:, 1, 1].real,
                                traj.reduced_states[:, 0, 0].real, traj.reduced_states[:, 1, 1].real, resid])
        w.csv(f"lindblad_match_probe{i}.csv", ["t", "rho00_lind", "rho11_lind", "rho00_pur", "rho11_pur", "residual"], rows)
        summary.objective_values[f"probe{i}"] = {"trajectory_objective": value, "fit_objective": res.best_value}
        summary.fitted_params[f"probe{i}"] = template.from_vector(res.best_params).to_dict()
        w.json(f"lindblad_match_fit{i}.json", {"probe": encode_matrix(rho0), "fit": res.to_dict(),
                                               "interaction": template.from_vector(res.best_params).to_dict()})
    summary.objective_values["best_trajectory_objective"] = best
    summary.objective_values["tolerance"] = tol
    if not best <= tol:
        summary.converged = False
        summary.messages.append(f"best trajectory objective {best:.3e} exceeds {tol:.1e}")


def _run_noncp_disc(cfg, w, summary, inv, workers):
    m = channels.PauliDiagonalMap(*cfg["map"])
    comp = channels.PauliDiagonalMap(*cfg["comparator"])
    pts = channels.sample_bloch_sphere(int(cfg["n_samples"]), seed=cfg["seed"], radii=tuple(cfg.get("radii", [1.0])))
    rows = channels.transfer_samples(pts, m)
    w.csv("noncp_disc_samples.csv", ["x", "y", "z", "x_out", "y_out", "z_out", "unitarity_residual"], rows)
    expected = pts * np.asarray(m.scalings)
    out_err = float(np.abs(rows[:, 3:6] - expected).max())
    inv.check("unitarity_residual", rows[:, 6].max(), 1e-12)
    inv.check("output_bloch_error", out_err, 1e-10)
    outs = np.array([bloch_to_density(r) for r in rows[:, 3:6]])
    inv.densities(outs)
    choi_map = channels.choi_eigenvalues(m)
    choi_comp = channels.choi_eigenvalues(comp)
    info = {
        "map": list(m.scalings),
        "map_choi_eigenvalues": choi_map,
        "map_is_cp": channels.is_cp(m),
        "comparator": list(comp.scalings),
        "comparator_choi_eigenvalues": choi_comp,
        "comparator_is_cp": channels.is_cp(comp),
        "boundary_certificate": channels.cp_boundary_certificate(comp),
    }
    w.json("noncp_disc_choi.json", info)
    summary.objective_values.update({
        "map_min_choi_eigenvalue": float(np.min(choi_map)),
        "comparator_min_choi_eigenvalue": float(np.min(choi_comp)),
        "max_abs_z_out": float(np.abs(rows[:, 5]).max()),
        "max_unitarity_residual": float(rows[:, 6].max()),
    })


def _run_tls_decay(cfg, w, summary, inv, workers):
    h_s = decode_matrix(cfg["system_hamiltonian"])
    h_b = decode_matrix(cfg["bath_hamiltonian"])
    rho0 = decode_matrix(cfg["initial_state"])
    psi0 = purify(rho0)
    t_c = float(cfg["t_c"])
    times = _grid_points(0.0, t_c, float(cfg["grid_dt"]))
    ground = np.zeros((2, 2), dtype=complex)
    ground[0, 0] = 1
    base0 = np.asarray(cfg["initial_base_params"], dtype=float)
    for i, entry in enumerate(cfg["envelopes"]):
        env = envelope_from_dict(entry["envelope"])
        kind = entry["envelope"]["kind"]
        template = InteractionSpec(env, base0)
        scen = PurificationScenario(2, 2, h_s, h_b, psi0, template, max_step=float(entry["max_step"]))
        bounds = [tuple(x) for x in entry.get("bounds", [])] + [tuple(cfg["base_bounds"])] * 16
        res = optimize(lambda v: objective_terminal(v, ground, t_c, scen), template.to_vector(),
                       optimizer_config(cfg["optimizer"], cfg["seed"] + i, bounds, workers))
        fitted = template.from_vector(res.best_params)
        traj = scen.run(res.best_params, times)
        inv.densities(traj.reduced_states)
        inv.vectors(traj.purified_states)
        rho = traj.reduced_states
        rows = np.column_stack([times, np.broadcast_to(fitted.envelope(times), times.shape), rho[:, 0, 0].real,
                                rho[:, 1, 1].real, rho[:, 0, 1].real, rho[:, 0, 1].imag])
        w.csv(f"tls_decay_{i}_{kind}.csv", ["t", "gamma", "rho00", "rho11", "re_rho01", "im_rho01"], rows)
        pop = float(rho[-1, 0, 0].real)
        need = float(entry["min_ground_population"])
        key = f"{i}_{kind}"
        summary.objective_values[key] = {"terminal_objective": res.best_value, "ground_population": pop,
                                         "min_ground_population": need}
        summary.fitted_params[key] = fitted.to_dict()
        w.json(f"tls_decay_{i}_{kind}_fit.json", {"fit": res.to_dict(), "interaction": fitted.to_dict()})
        if pop < need:
            summary.converged = False
            summary.messages.append(f"{key}: ground population {pop:.6f} below {need}")


def network_spec_from_config(cfg):
    net = dict(cfg["network"])
    return network.TLSNetworkSpec.from_dict(net)


def population_profile(times, decay_time, bump_amplitude, bump_center, bump_width):
    """Decaying system population with a transient revival bump."""
    t = np.asarray(times, dtype=float)
    return np.exp(-t / decay_time) + bump_amplitude * np.exp(-0.5 * ((t - bump_center) / bump_width) ** 2)


def objective_population_profile(params, template, psi0, times, target, max_step, phase_limit=None):
    """Mean squared deviation of the summed system population from ``target``."""
    spec = template.from_vector(params)
    tr = propagate(network.network_hamiltonian(spec), psi0, times, max_step=max_step, phase_limit=phase_limit)
    p = network.node_populations(tr.purified_states)
    return float(np.mean((p[:, 0] + p[:, 1] - target) ** 2))


def _network_bounds(spec, b):
    bounds = []
    for env, base in zip(spec.edge_envelopes, spec.edge_base_params):
        bounds += [tuple(x) for x in b["pulse"]] * (len(env.params()) // 3)
        bounds += [tuple(b["base"])] * len(base)
    return bounds


def _run_tls_network(cfg, w, summary, inv, workers):
    spec0 = network_spec_from_config(cfg)
    psi0 = network.initial_state(tuple(cfg.get("initial_excited", ["S1"])))
    g = cfg["grid"]
    tp = cfg["target_profile"]
    fit_times = _grid_points(g["t0"], g["t1"], float(cfg["fit_grid_dt"]))
    target = population_profile(fit_times, tp["decay_time"], tp["bump_amplitude"], tp["bump_center"], tp["bump_width"])
    fit_step = float(cfg["fit_max_step"])
    res = optimize(lambda v: objective_population_profile(v, spec0, psi0, fit_times, target, fit_step),
                   spec0.to_vector(), optimizer_config(cfg["optimizer"], cfg["seed"], _network_bounds(spec0, cfg["bounds"]), workers))
    spec = spec0.from_vector(res.best_params)
    times = _grid_points(g["t0"], g["t1"], g["dt"])
    tr = propagate(network.network_hamiltonian(spec), psi0, times, max_step=float(cfg["max_step"]))
    inv.vectors(tr.purified_states)
    inv.densities(tr.reduced_states)
    series = network.population_series(times, tr.purified_states)
    gam = network.EdgeInteractions(spec).envelopes(times)
    rows = np.column_stack([times] + [series.populations[n] for n in network.NODE_NAMES] + [gam[0], gam[1]])
    w.csv("tls_network.csv", ["t", "S1", "S2", "B1", "B2", "gamma1", "gamma2"], rows)
    total = series.total(("S1", "S2"))
    frac = float(total[-1] / total[0]) if total[0] > 0 else float("nan")
    bf = cfg["backflow"]
    intervals = network.detect_backflow(series, ("S1", "S2"), int(bf["window"]), float(bf["threshold"]))
    summary.objective_values.update({"profile_objective": res.best_value, "final_system_fraction": frac,
                                     "max_final_fraction": cfg["max_final_fraction"],
                                     "backflow_interval_count": len(intervals)})
    summary.fitted_params["network"] = spec.to_dict()
    w.json("tls_network_fit.json", {"fit": res.to_dict(), "network": spec.to_dict(), "backflow_intervals": intervals,
                                    "target_profile": tp})
    if not frac <= cfg["max_final_fraction"]:
        summary.converged = False
        summary.messages.append(f"system population fraction {frac:.4f} above {cfg['max_final_fraction']}")
    if not intervals:
        summary.converged = False
        summary.messages.append("no population backflow interval detected")


def recovery_checks(count, seed, ansatz, cfg):
    """Compile ``count`` targets that the ansatz realises exactly; returns fidelities."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        theta = rng.uniform(-np.pi, np.pi, ansatz.parameter_count)
        target = circuit.ansatz_unitary(ansatz, theta)
        _, fid, _ = circuit.compile_unitary(target, replace(cfg, seed=seed + 1 + k), ansatz)
        out.append(fid)
    return np.array(out)


def _run_compile_circuit(cfg, w, summary, inv, workers):
    spec = network_spec_from_config(cfg)
    ht = network.network_hamiltonian(spec)
    ansatz = circuit.default_ansatz()
    ocfg = optimizer_config(cfg["optimizer"], cfg["seed"], None, workers)
    sched = circuit.compile_schedule(ht, float(cfg["interval"]), int(cfg["steps"]), ocfg, ansatz,
                                     max_step=float(cfg["max_step"]), warm_restarts=int(cfg["warm_restarts"]))
    parse_err = 0.0
    for k, step in enumerate(sched.steps):
        text = circuit.emit_circuit_text(ansatz, step.params)
        w.write(f"circuits/step_{k:03d}.qasm", text)
        a2, p2 = circuit.parse_circuit_text(text)
        parse_err = max(parse_err, float(np.abs(circuit.ansatz_unitary(a2, p2) - circuit.ansatz_unitary(ansatz, step.params)).max()))
    inv.check("parse_back_max_error", parse_err, 1e-12)
    psi0 = network.initial_state(tuple(cfg.get("initial_excited", ["S1"])))
    played = circuit.playback(sched, psi0)
    grid = float(cfg["interval"]) * np.arange(len(sched.steps) + 1)
    exact = propagate(ht, psi0, grid, max_step=float(cfg["max_step"]))
    inv.vectors(played)
    inv.vectors(exact.purified_states)
    pp = network.node_populations(played)
    pe = network.node_populations(exact.purified_states)
    overlap = np.abs(np.einsum("ki,ki->k", played.conj(), exact.purified_states)) ** 2
    rows = np.column_stack([grid, pp, pe, overlap])
    header = ["t"] + [f"{n}_circuit" for n in network.NODE_NAMES] + [f"{n}_exact" for n in network.NODE_NAMES] + ["state_fidelity"]
    w.csv("playback.csv", header, rows)
    rec = recovery_checks(int(cfg["recovery_checks"]), cfg["seed"] + 1000, ansatz,
                          optimizer_config(cfg["optimizer"], cfg["seed"], None, workers))
    need = float(cfg["min_recovery_fidelity"])
    manifest = sched.to_dict()
    manifest.update({
        "network": spec.to_dict(),
        "recovery_fidelities": rec,
        "min_recovery_fidelity": need,
        "circuit_files": [f"circuits/step_{k:03d}.qasm" for k in range(len(sched.steps))],
    })
    w.json("manifest.json", manifest)
    fids = sched.fidelities()
    summary.objective_values.update({
        "min_step_fidelity": float(fids.min()),
        "mean_step_fidelity": float(fids.mean()),
        "min_recovery_fidelity": float(rec.min()) if len(rec) else None,
        "final_state_fidelity": float(overlap[-1]),
    })
    if len(rec) and rec.min() < need:
        summary.converged = False
        summary.messages.append(f"recovery fidelity {rec.min():.8f} below {need}")


_RUNNERS = {
    "lindblad-match": _run_lindblad_match,
    "noncp-disc": _run_noncp_disc,
    "tls-decay": _run_tls_decay,
    "tls-network": _run_tls_network,
    "compile-circuit": _run_compile_circuit,
}


def run(config, out_dir=None, seed: Optional[int] = None, workers: Optional[int] = None) -> RunSummary:
    """Execute one scenario end to end and write its artifacts to ``out_dir``.

    Raises :class:`ConfigInvalid` listing every diagnostic when the config
    does not validate. The returned summary's ``exit_code`` is 0 on success,
    2 when a state invariant fails and 3 when the fit misses its target;
    files are written in every case.
    """
    config = copy.deepcopy(config)
    if seed is not None:
        config["seed"] = int(seed)
    diags = validate(config)
    if diags:
        raise ConfigInvalid(diags)
    out_dir = out_dir or config.get("output_dir") or os.path.join("runs", config["scenario"])
    workers = thread_cap() if workers is None else workers
    start = time.perf_counter()
    w = _Writer(out_dir)
    inv = _Invariants()
    summary = RunSummary(config["scenario"], config=config)
    try:
        _RUNNERS[config["scenario"]](config, w, summary, inv, workers)
    except ObjectiveNonFinite as e:
        summary.converged = False
        summary.messages.append(f"objective not finite: {e}")
    except StateInvariantViolated as e:
        summary.messages.append(f"{type(e).__name__}: {e}")
        inv.check("state_invariant_error", 1.0, 0.0)
    summary.invariants = inv.report()
    if not inv.ok():
        summary.exit_code = EXIT_INVARIANT
    elif not summary.converged:
        summary.exit_code = EXIT_NOT_CONVERGED
    summary.artifacts = list(w.artifacts)
    summary.wall_clock = time.perf_counter() - start
    atomic_write(os.path.join(out_dir, "summary.json"), json_text(summary.to_dict()))
    return summary
