"""Reading and writing every on-disk artifact.

Formats
-------
machine     JSON ``{"alphabet_size", "states", "transitions": [{"from","symbol","to","prob"}]}``
sequence    one ASCII integer per line
model       JSON ``{"dim", "alphabet_size", "kraus": [x][row][col] -> [re, im], "anchor", "metadata"}``
matrix      JSON ``{"rows", "cols", "data": [row][col] -> [re, im]}``
reports     JSON (distortion, bound, training run)
sweep/bloch CSV with a header row

Floats go through ``repr``, which round-trips doubles exactly.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bound import BoundReport, CoarseGrainedModel, StatePartition
from .distortion import DistortionReport, EvalProtocol
from .errors import ValidationError
from .process import EpsilonMachine, load_machine, machine_to_document
from .quantum import KrausModel

SWEEP_COLUMNS = (
    "family",
    "machine",
    "param",
    "dim",
    "quantum_distortion",
    "classical_bound",
    "bound_K",
    "clamped_terms",
    "final_cost",
    "seed",
)
_SWEEP_INT = {"dim", "bound_K", "clamped_terms", "seed"}
_SWEEP_FLOAT = {"quantum_distortion", "classical_bound", "final_cost"}


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _complex_to_pairs(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    if arr.shape[-1] != 2:
        raise ValidationError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def data_path(name: str) -> Path:
    """Path of a file shipped in the package's data directory."""
    return Path(str(resources.files("qpredict") / "data" / name))


# -- machines and sequences --------------------------------------------------


def read_machine(path) -> EpsilonMachine:
    return load_machine(_read_json(path))


def write_machine(path, machine: EpsilonMachine) -> None:
    _write_json(path, machine_to_document(machine))


def read_sequence(path) -> np.ndarray:
    try:
        with open(path) as fh:
            values = [int(line) for line in fh if line.strip()]
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read sequence {path}: {exc}") from exc
    return np.asarray(values, dtype=np.int64)


def write_sequence(path, seq: Iterable[int]) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(x)}\n" for x in seq)


# -- models and matrices -----------------------------------------------------


def model_document(model: KrausModel, metadata: dict | None = None) -> dict:
    return {
        "dim": model.dim,
        "alphabet_size": model.alphabet_size,
        "anchor": model.anchor,
        "kraus": _complex_to_pairs(model.kraus),
        "metadata": metadata or {},
    }


def write_model(path, model: KrausModel, metadata: dict | None = None) -> None:
    _write_json(path, model_document(model, metadata))


def read_model(path, tol: float = 1e-10) -> tuple[KrausModel, dict]:
    """Load a model file; ``tol`` is the completeness tolerance to accept."""
    doc = _read_json(path)
    try:
        kraus = _pairs_to_complex(doc["kraus"])
        dim, alphabet = int(doc["dim"]), int(doc["alphabet_size"])
        anchor = int(doc.get("anchor", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed model file {path}: {exc!r}") from exc
    if kraus.shape != (alphabet, dim, dim):
        raise ValidationError(f"kraus shape {kraus.shape} does not match dim/alphabet_size")
    return KrausModel.from_kraus(kraus, anchor=anchor, tol=tol), doc.get("metadata", {})


def write_matrix(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix)
    _write_json(
        path, {"rows": matrix.shape[0], "cols": matrix.shape[1], "data": _complex_to_pairs(matrix)}
    )


def read_matrix(path) -> np.ndarray:
    doc = _read_json(path)
    m = _pairs_to_complex(doc["data"])
    if m.shape != (doc["rows"], doc["cols"]):
        raise ValidationError("matrix shape does not match its header")
    return m


# -- reports -----------------------------------------------------------------


def _finite(value, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{what} is not finite: {value!r}")
    return value


def distortion_document(report: DistortionReport) -> dict:
    p = report.protocol
    return {
        "value": report.value,
        "clamped_terms": report.clamped_terms,
        "protocol": {
            "past_length": p.past_length,
            "future_length": p.future_length,
            "probability_floor": p.probability_floor,
            "log_base": 2,
        },
    }


def write_distortion_report(path, report: DistortionReport) -> None:
    _write_json(path, distortion_document(report))


def read_distortion_report(path) -> DistortionReport:
    doc = _read_json(path)
    try:
        p = doc["protocol"]
        protocol = EvalProtocol(p["past_length"], int(p["future_length"]), float(p["probability_floor"]))
        return DistortionReport(_finite(doc["value"], "value"), int(doc["clamped_terms"]), protocol)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed distortion report: {exc!r}") from exc


def bound_document(report: BoundReport) -> dict:
    best = report.best
    return {
        "bound": report.bound,
        "K": report.K,
        "tight": report.tight,
        "markov_order": report.markov_order,
        "machine": machine_to_document(best.machine),
        "best": {
            "partition": [list(b) for b in best.partition.blocks],
            "morphs": best.morphs.tolist(),
        },
        "per_partition": [
            {"partition": [list(b) for b in part.blocks], "value": value}
            for part, value in report.per_partition
        ],
    }


def write_bound_report(path, report: BoundReport) -> None:
    _write_json(path, bound_document(report))


def _partition(doc) -> StatePartition:
    return StatePartition(tuple(tuple(int(s) for s in block) for block in doc))


def read_bound_report(path) -> BoundReport:
    doc = _read_json(path)
    try:
        machine = load_machine(doc["machine"])
        best = CoarseGrainedModel(
            machine,
            _partition(doc["best"]["partition"]),
            np.asarray(doc["best"]["morphs"], dtype=float),
            int(doc["K"]),
        )
        per_partition = tuple(
            (_partition(item["partition"]), _finite(item["value"], "partition value"))
            for item in doc["per_partition"]
        )
        return BoundReport(
            bound=_finite(doc["bound"], "bound"),
            best=best,
            K=int(doc["K"]),
            tight=bool(doc["tight"]),
            markov_order=int(doc["markov_order"]),
            per_partition=per_partition,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed bound report: {exc!r}") from exc


# -- CSV tables --------------------------------------------------------------


def write_sweep_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_sweep_csv(path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
                raise ValidationError(f"unexpected sweep columns {reader.fieldnames}")
            rows = []
            for raw in reader:
                row: dict = dict(raw)
                for key in _SWEEP_INT:
                    row[key] = int(raw[key])
                for key in _SWEEP_FLOAT:
                    row[key] = _finite(raw[key], key)
                rows.append(row)
    except (OSError, ValueError, TypeError) as exc:
        raise ValidationError(f"malformed sweep file {path}: {exc}") from exc
    return rows


def write_bloch_csv(path, rows: Sequence[dict]) -> None:
    fields = ("past", "probability", "causal_state", "x", "y", "z")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_bloch_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            rows.append(
                {
                    "past": raw["past"],
                    "probability": _finite(raw["probability"], "probability"),
                    "causal_state": raw["causal_state"],
                    **{k: _finite(raw[k], k) for k in ("x", "y", "z")},
                }
            )
    return rows
