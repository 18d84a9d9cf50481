"""JSON problem files: parsing, validation and canonical re-serialization.

Complex numbers are two-element ``[re, im]`` arrays and matrices are
row-major nested lists of them. A minimal file::

    {
      "dim": 2,
      "state": {"bloch": [0, 0, 0.3535533905932738]},
      "X": {"matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]},
      "Y": {"coords": {"x0": 0, "x": [0, 1.4142135623730951, 0]}},
      "measurement": {"projective": "X"},
      "params": {"seed": 7}
    }

``measurement`` (and the optional ``second_measurement``) is either a list of
outcomes, each a list of Kraus matrices, or ``{"projective": "X" | "Y"}``.
``second_measurement`` may also be the string ``"optimal"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .quantum_core import DensityMatrix, KrausMeasurement, Observable, projective_measurement
from .su_basis import build_su_basis, reconstruct, state_from_coords

DEFAULT_PARAMS = {
    "tol": 1e-8,
    "seed": 0,
    "n": 10_000,
    "trials": 2000,
    "grid": None,
    "samples": 1000,
    "estimator": "linear",
}


class SpecError(ValueError):
    """Invalid problem file; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def default_grid() -> list[float]:
    return [float(w) for w in np.linspace(0.0, 1.0, 103)[1:-1]]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    dim: int
    state: DensityMatrix | None = None
    x: Observable | None = None
    y: Observable | None = None
    measurement: KrausMeasurement | None = None
    second: KrausMeasurement | str | None = None
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                label = {"x": "X", "y": "Y", "second": "second_measurement"}.get(name, name)
                raise SpecError(label, "required for this command")

    def with_params(self, **overrides) -> "ProblemSpec":
        params = dict(self.params)
        params.update({k: v for k, v in overrides.items() if v is not None})
        return replace(self, params=params)

    @property
    def grid(self) -> list[float]:
        return self.params["grid"] if self.params.get("grid") is not None else default_grid()


def _complex(value: Any, path: str) -> complex:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise SpecError(path, "complex entries must be [re, im] number pairs")
    return complex(value[0], value[1])


def parse_matrix(value: Any, path: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise SpecError(path, "matrix must be a non-empty list of rows")
    width = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != width:
            raise SpecError(f"{path}[{i}]", f"row has {len(row)} entries, expected {width}")
        rows.append([_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    mat = np.array(rows, dtype=complex)
    if shape is not None and mat.shape != shape:
        raise SpecError(path, f"matrix has shape {mat.shape}, expected {shape}")
    return mat


def _real_vector(value: Any, path: str, length: int) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise SpecError(path, "expected a list of real numbers")
    if len(value) != length:
        raise SpecError(path, f"expected {length} entries, got {len(value)}")
    return np.array(value, dtype=float)


def _parse_state(value: Any, d: int) -> DensityMatrix:
    if not isinstance(value, dict) or len(value.keys() & {"matrix", "bloch"}) != 1:
        raise SpecError("state", 'expected {"matrix": ...} or {"bloch": [...]}')
    try:
        if "matrix" in value:
            return DensityMatrix(parse_matrix(value["matrix"], "state.matrix", (d, d)))
        theta = _real_vector(value["bloch"], "state.bloch", d * d - 1)
        return state_from_coords(theta, build_su_basis(d))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError("state", str(exc)) from exc


def _parse_observable(value: Any, name: str, d: int) -> Observable:
    if not isinstance(value, dict) or len(value.keys() & {"matrix", "coords"}) != 1:
        raise SpecError(name, 'expected {"matrix": ...} or {"coords": {"x0": ..., "x": [...]}}')
    try:
        if "matrix" in value:
            return Observable(parse_matrix(value["matrix"], f"{name}.matrix", (d, d)))
        coords = value["coords"]
        if not isinstance(coords, dict) or "x0" not in coords or "x" not in coords:
            raise SpecError(f"{name}.coords", "needs x0 and x")
        x0 = coords["x0"]
        if not isinstance(x0, (int, float)) or isinstance(x0, bool):
            raise SpecError(f"{name}.coords.x0", "expected a real number")
        x = _real_vector(coords["x"], f"{name}.coords.x", d * d - 1)
        return Observable(reconstruct(float(x0), x, build_su_basis(d)))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(name, str(exc)) from exc


def _parse_measurement(value: Any, path: str, d_in: int, observables: dict) -> KrausMeasurement:
    if isinstance(value, dict):
        target = value.get("projective")
        if set(value) != {"projective"} or target not in observables:
            raise SpecError(path, 'expected a list of outcomes or {"projective": "X" | "Y"}')
        if observables[target] is None:
            raise SpecError(path, f"observable {target} is not defined")
        return projective_measurement(observables[target])
    if not isinstance(value, list) or not value:
        raise SpecError(path, "expected a non-empty list of outcomes")
    outcomes = []
    shape = None
    for i, ops in enumerate(value):
        if not isinstance(ops, list) or not ops:
            raise SpecError(f"{path}[{i}]", "each outcome is a non-empty list of matrices")
        mats = []
        for a, op in enumerate(ops):
            mat = parse_matrix(op, f"{path}[{i}][{a}]", shape)
            shape = mat.shape
            mats.append(mat)
        outcomes.append(mats)
    if shape[1] != d_in:
        raise SpecError(path, f"Kraus operators take dimension {shape[1]}, expected {d_in}")
    try:
        return KrausMeasurement(outcomes)
    except ValueError as exc:
        raise SpecError(path, str(exc)) from exc


def _parse_params(value: Any) -> dict:
    if value is None:
        value = {}
    if not isinstance(value, dict):
        raise SpecError("params", "expected an object")
    unknown = set(value) - set(DEFAULT_PARAMS)
    if unknown:
        raise SpecError("params", f"unknown keys {sorted(unknown)}")
    params = dict(DEFAULT_PARAMS)
    params.update(value)
    for key in ("seed", "n", "trials", "samples"):
        v = params[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise SpecError(f"params.{key}", "expected a non-negative integer")
    if params["seed"] >= 2**64:
        raise SpecError("params.seed", "seed must fit in 64 bits")
    if not isinstance(params["tol"], (int, float)) or not params["tol"] >= 0:
        raise SpecError("params.tol", "expected a non-negative number")
    if params["estimator"] not in ("linear", "mle"):
        raise SpecError("params.estimator", 'expected "linear" or "mle"')
    grid = params["grid"]
    if grid is not None:
        if not isinstance(grid, list) or not grid or not all(isinstance(w, (int, float)) for w in grid):
            raise SpecError("params.grid", "expected a non-empty list of numbers")
        if not all(0 < w < 1 for w in grid):
            raise SpecError("params.grid", "weights must lie strictly between 0 and 1")
        params["grid"] = [float(w) for w in grid]
    return params


def parse_problem(doc: Any) -> ProblemSpec:
    if not isinstance(doc, dict):
        raise SpecError("", "top level must be an object")
    known = {"dim", "state", "X", "Y", "measurement", "second_measurement", "params"}
    unknown = set(doc) - known
    if unknown:
        raise SpecError("", f"unknown keys {sorted(unknown)}")
    d = doc.get("dim")
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise SpecError("dim", "expected an integer >= 2")
    state = _parse_state(doc["state"], d) if "state" in doc else None
    x = _parse_observable(doc["X"], "X", d) if "X" in doc else None
    y = _parse_observable(doc["Y"], "Y", d) if "Y" in doc else None
    obs = {"X": x, "Y": y}
    meas = _parse_measurement(doc["measurement"], "measurement", d, obs) if "measurement" in doc else None
    second = None
    if "second_measurement" in doc:
        raw = doc["second_measurement"]
        if raw == "optimal":
            second = "optimal"
        else:
            if meas is None:
                raise SpecError("second_measurement", "needs a first measurement")
            second = _parse_measurement(raw, "second_measurement", meas.d_out, obs)
    return ProblemSpec(d, state, x, y, meas, second, _parse_params(doc.get("params")))


def load_problem(path: str) -> ProblemSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    except OSError as exc:
        raise SpecError("", f"cannot read {path}: {exc.strerror}") from exc
    return parse_problem(doc)


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _measurement_to_json(m: KrausMeasurement) -> list:
    return [[matrix_to_json(op) for op in ops] for ops in m.outcomes]


def problem_to_json(spec: ProblemSpec) -> dict:
    """Canonical form: explicit matrices everywhere, all params filled in."""
    doc: dict[str, Any] = {"dim": spec.dim}
    if spec.state is not None:
        doc["state"] = {"matrix": matrix_to_json(spec.state.matrix)}
    if spec.x is not None:
        doc["X"] = {"matrix": matrix_to_json(spec.x.matrix)}
    if spec.y is not None:
        doc["Y"] = {"matrix": matrix_to_json(spec.y.matrix)}
    if spec.measurement is not None:
        doc["measurement"] = _measurement_to_json(spec.measurement)
    if spec.second is not None:
        doc["second_measurement"] = spec.second if isinstance(spec.second, str) else _measurement_to_json(spec.second)
    params = dict(spec.params)
    params = {k: v for k, v in params.items() if not (k == "grid" and v is None)}
    doc["params"] = params
    return doc
