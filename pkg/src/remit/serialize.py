"""JSON schemas for models, calibration data, circuits, shots and results.

Bit strings serialize as '0'/'1' strings with qubit 1 leftmost, everywhere.
Dense matrices serialize row-major; columns are indexed by the input string
read as a binary number (qubit 1 = most significant bit).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import BitString, DiagonalObservable, ShotSet
from .errors import ConfigError
from .calibration import CalibrationData
from .noise import (CTMPGeneratorTerm, CTMPModel, FullNoiseMatrix, NoiseModel,
                    TPNoise)
from .stabilizer import CliffordCircuit, Gate

_COLUMN_ORDER_NOTE = ("entry [y][x]; x and y index outcome strings read as binary "
                      "numbers with qubit 1 as the most significant bit")


def model_to_dict(model: NoiseModel) -> dict:
    if isinstance(model, TPNoise):
        return {"n": model.n, "kind": "tp",
                "eps": model.eps.tolist(), "eta": model.eta.tolist()}
    if isinstance(model, CTMPModel):
        return {"n": model.n, "kind": "ctmp",
                "terms": [{"kind": t.kind, "qubits": list(t.qubits), "rate": t.rate}
                          for t in model.terms]}
    if isinstance(model, FullNoiseMatrix):
        return {"n": model.n, "kind": "full", "matrix": model.a.tolist(),
                "order": _COLUMN_ORDER_NOTE}
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(d: dict) -> NoiseModel:
    try:
        kind = d["kind"]
        n = int(d["n"])
        if kind == "tp":
            return TPNoise(n, np.asarray(d["eps"], dtype=float),
                           np.asarray(d["eta"], dtype=float))
        if kind == "ctmp":
            terms = [CTMPGeneratorTerm(t["kind"], tuple(t["qubits"]), float(t["rate"]))
                     for t in d["terms"]]
            return CTMPModel(n, terms)
        if kind == "full":
            return FullNoiseMatrix(n, np.asarray(d["matrix"], dtype=float))
    except KeyError as exc:
        raise ConfigError(f"noise-model JSON is missing key {exc}") from exc
    raise ConfigError(f"unknown noise-model kind {kind!r}")


def calibration_to_dict(data: CalibrationData) -> dict:
    return {
        "n": data.n,
        "n_cal": data.n_cal,
        "records": [{"input": str(x),
                     "counts": {str(y): c for y, c in counts.items()}}
                    for x, counts in data.records.items()],
    }


def calibration_from_dict(d: dict) -> CalibrationData:
    try:
        records = {
            BitString.from_str(rec["input"]):
                {BitString.from_str(y): int(c) for y, c in rec["counts"].items()}
            for rec in d["records"]}
        return CalibrationData(int(d["n"]), int(d["n_cal"]), records)
    except KeyError as exc:
        raise ConfigError(f"calibration JSON is missing key {exc}") from exc


def circuit_to_dict(circuit: CliffordCircuit) -> dict:
    gates = []
    for g in circuit.gates:
        entry = {"g": g.g, "q": list(g.q)}
        if g.idx is not None:
            entry["idx"] = g.idx
        gates.append(entry)
    return {"n": circuit.n, "gates": gates}


def circuit_from_dict(d: dict) -> CliffordCircuit:
    try:
        gates = tuple(Gate(g["g"], tuple(g["q"]), g.get("idx")) for g in d["gates"])
        return CliffordCircuit(int(d["n"]), gates)
    except KeyError as exc:
        raise ConfigError(f"circuit JSON is missing key {exc}") from exc


def shots_to_dict(shots: ShotSet) -> dict:
    return {"n": shots.n, "shots": [str(s) for s in shots]}


def shots_from_dict(d: dict) -> ShotSet:
    try:
        return ShotSet.from_strings(d["shots"])
    except KeyError as exc:
        raise ConfigError(f"shots JSON is missing key {exc}") from exc


def observable_from_str(s: str) -> DiagonalObservable:
    """Parse a signed Z-mask like '-ZIZ' (Z marks the support)."""
    sign = 1
    if s and s[0] in "+-":
        sign = -1 if s[0] == "-" else 1
        s = s[1:]
    if not s or set(s) - set("IZ"):
        raise ConfigError(f"bad diagonal observable {s!r}: use I/Z letters "
                          "with an optional sign prefix")
    return DiagonalObservable(tuple(j + 1 for j, c in enumerate(s) if c == "Z"), sign)


def save_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_json(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}") from exc
