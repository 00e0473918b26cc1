"""Scenario files (JSON, schema version 1) and result serialization.

A scenario names a Hamiltonian family with its parameters, the duration,
optional step count and inverse temperature, the initial ``eta`` and state,
and invariant tolerances. Relative file paths inside a scenario resolve
against the directory of the scenario file.
"""
from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import families
from .dynamics import HamiltonianSchedule, default_steps
from .linalg import eig_biorthonormal
from .metric import biorthonormal_eta

__all__ = [
    "InvalidConfig",
    "Scenario",
    "DEFAULT_TOLERANCES",
    "load_scenario",
    "parse_scenario",
    "complex_vector",
    "to_jsonable",
    "dump_json",
    "write_series_csv",
]

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {
    "step_error": 1e-6,
    "conservation": 1e-8,
    "hermiticity": 1e-9,
    "reconstruction": 1e-12,
    "imag_energy": 1e-8,
    "jarzynski": 1e-8,
    "crooks": 1e-8,
    "cyclic_trace": 1e-12,
    "cyclic": 1e-6,
    "decomposition": 1e-6,
    "dilation_orthonormality": 1e-8,
    "dilation_hermiticity": 1e-6,
    "dilation_probability": 1e-8,
    "schrodinger": 1e-6,
}

DEFAULT_DILATION = {"margin": 1.0, "rescale": True}


class InvalidConfig(ValueError):
    """The scenario file is unreadable, violates the schema or is inconsistent."""


def _schema() -> dict:
    text = resources.files("ptmetric").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


def _scalar(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    return complex(x[0], x[1])


def complex_vector(data) -> np.ndarray:
    """List of numbers or ``[re, im]`` pairs to a complex vector."""
    out = np.array([_scalar(x) for x in data], dtype=complex)
    if not np.all(np.isfinite(out)):
        raise InvalidConfig("non-finite numbers in complex data")
    return out


def _matrix(data, what: str) -> np.ndarray:
    if not isinstance(data, list) or not all(isinstance(r, list) for r in data):
        raise InvalidConfig(f"{what} must be a list of rows")
    try:
        rows = [complex_vector(r) for r in data]
    except (TypeError, IndexError):
        raise InvalidConfig(f"{what} entries must be numbers or [re, im] pairs") from None
    if len({len(r) for r in rows}) != 1 or len(rows) != len(rows[0]):
        raise InvalidConfig(f"{what} must be a square matrix")
    return np.array(rows)


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise InvalidConfig(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path} is not valid JSON: {exc}") from None


@dataclass(frozen=True)
class Scenario:
    """A validated scenario. ``raw`` is the normalized dict echoed into reports."""

    name: str
    schedule: HamiltonianSchedule
    steps: int
    beta: float | None
    eta0: np.ndarray
    psi0_spec: Any
    dilation: dict
    tolerances: dict
    raw: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return self.schedule.dim

    def psi0(self) -> np.ndarray:
        """Initial state, normalized under ``W(0) = eta0^+ eta0``."""
        d = self.dim
        spec = self.psi0_spec
        if isinstance(spec, dict) and "basis" in spec:
            k = spec["basis"]
            if k >= d:
                raise InvalidConfig(f"psi0 basis index {k} out of range for dim {d}")
            psi = np.zeros(d, dtype=complex)
            psi[k] = 1.0
        elif isinstance(spec, dict):
            k = spec["eigenvector"]
            if k >= d:
                raise InvalidConfig(f"psi0 eigenvector index {k} out of range for dim {d}")
            psi = eig_biorthonormal(self.schedule(0.0)).right[:, k]
        else:
            psi = complex_vector(spec)
            if psi.shape != (d,) or not np.any(psi):
                raise InvalidConfig(f"psi0 must be a nonzero vector of length {d}")
        v = self.eta0 @ psi
        return psi / np.linalg.norm(v)


def _build_schedule(ham: dict, tau: float, base: Path) -> HamiltonianSchedule:
    fam = ham["family"]
    if fam == "pt2x2":
        return families.pt2x2(float(ham["kappa"]), float(ham["alpha"]), tau)
    if fam == "diagonal":
        return families.diagonal(complex_vector(ham["entries"]), tau)
    if fam == "random":
        kw = {k: float(ham[k]) for k in ("norm", "breaking", "drive", "frequency") if k in ham}
        return families.random_schedule(int(ham["dim"]), int(ham["seed"]), tau, **kw)
    # grid
    data = _read_json(base / ham["file"])
    if not isinstance(data, dict) or "times" not in data or "matrices" not in data:
        raise InvalidConfig("grid file needs 'times' and 'matrices'")
    times = np.asarray(data["times"], dtype=float)
    mats = np.array([_matrix(m, "grid sample") for m in data["matrices"]])
    if len(times) < 2 or abs(times[0]) > 1e-12 or abs(times[-1] - tau) > 1e-9 * tau:
        raise InvalidConfig("grid times must run from 0 to tau")
    try:
        return HamiltonianSchedule.from_grid(times, mats)
    except ValueError as exc:
        raise InvalidConfig(f"bad grid: {exc}") from None


def _build_eta0(spec, schedule: HamiltonianSchedule, base: Path) -> np.ndarray:
    d = schedule.dim
    if spec == "identity":
        return np.eye(d, dtype=complex)
    if spec == "biorthonormal":
        return biorthonormal_eta(schedule(0.0))
    data = spec["matrix"] if "matrix" in spec else _read_json(base / spec["file"])
    eta0 = _matrix(data, "eta0")
    if eta0.shape != (d, d):
        raise InvalidConfig(f"eta0 must be {d}x{d}")
    return eta0


def parse_scenario(data: dict, base: Path | str = ".", *, steps: int | None = None,
                   seed: int | None = None, tolerances: dict | None = None) -> Scenario:
    """Validate a scenario dict and build its objects.

    ``steps``, ``seed`` and ``tolerances`` override the file's values.
    """
    base = Path(base)
    data = copy.deepcopy(data)
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidConfig(f"{where}: {exc.message}") from None

    ham = data["hamiltonian"]
    if seed is not None:
        if ham["family"] != "random":
            raise InvalidConfig("--seed only applies to the random family")
        ham["seed"] = int(seed)
    if steps is not None:
        if steps < 4:
            raise InvalidConfig("steps must be >= 4")
        data["steps"] = int(steps)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(data.get("tolerances", {}))
    for key, value in (tolerances or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise InvalidConfig(f"unknown tolerance {key!r}")
        if not (value > 0 and math.isfinite(value)):
            raise InvalidConfig(f"tolerance {key!r} must be positive")
        tol[key] = float(value)
    data["tolerances"] = tol
    dil = dict(DEFAULT_DILATION)
    dil.update(data.get("dilation", {}))
    data["dilation"] = dil
    data.setdefault("name", "scenario")
    data.setdefault("eta0", "identity")
    data.setdefault("psi0", {"basis": 0})

    tau = float(data["tau"])
    schedule = _build_schedule(ham, tau, base)
    if "dim" in data and data["dim"] != schedule.dim:
        raise InvalidConfig(f"dim {data['dim']} does not match the Hamiltonian ({schedule.dim})")
    data["dim"] = schedule.dim
    n = data.get("steps")
    if n is None:
        n = default_steps(schedule)
        n += n % 2  # even step counts keep Simpson quadrature on the full grid
    data["steps"] = int(n)
    eta0 = _build_eta0(data["eta0"], schedule, base)
    beta = data.get("beta")
    return Scenario(data["name"], schedule, int(n), None if beta is None else float(beta),
                    eta0, data["psi0"], dil, tol, data)


def load_scenario(path, **overrides) -> Scenario:
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InvalidConfig("scenario must be a JSON object")
    return parse_scenario(data, path.parent, **overrides)


def to_jsonable(obj):
    """Convert numpy data to JSON types; complex numbers become ``[re, im]``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_finite(obj.real), _finite(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(obj)
    return obj


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def dump_json(obj, path: Path | str):
    """Deterministic JSON: sorted keys, shortest round-trip float repr."""
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=1, allow_nan=False)
    Path(path).write_text(text + "\n")


def write_series_csv(path: Path | str, times, values, name: str = "M"):
    """One row per time: ``t`` then row-major ``re, im`` pairs of each entry."""
    values = np.asarray(values)
    n = len(times)
    flat = values.reshape(n, -1)
    idx = list(np.ndindex(values.shape[1:]))
    header = ["t"]
    for ij in idx:
        tag = "_".join(str(i) for i in ij)
        header += [f"{name}_{tag}_re", f"{name}_{tag}_im"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in zip(times, flat):
            cells = [format(float(t), ".17g")]
            for z in row:
                z = complex(z)
                cells += [format(z.real, ".17g"), format(z.imag, ".17g")]
            w.writerow(cells)
