"""JSON formats for matrices, ensembles and Quantum OR instances.

Matrix:    ``{"dim": d, "entries": [[re, im], ...]}`` with ``d*d`` row-major entries.
Ensemble:  ``{"dim": d, "measurements": [matrix, ...], "labels": [...], "counts": [...]}``
           (``labels`` and ``counts`` optional).
Instance:  ``{"ensemble": ensemble, "state": matrix, "case_tag": ..., "eps": ...,
           "delta": ..., "label": ...}``.

Every dump uses sorted keys so equal objects serialise to equal bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .measurements import MeasurementEnsemble
from .protocols import OrInstance
from .qla import ContractError, DensityMatrix

__all__ = [
    "ConfigError",
    "matrix_to_json",
    "matrix_from_json",
    "ensemble_to_json",
    "ensemble_from_json",
    "instance_to_json",
    "instance_from_json",
    "instance_hash",
    "canonical_dumps",
    "load_json_source",
    "write_jsonl",
]


class ConfigError(ContractError):
    """Malformed JSON input; the message names the offending field."""


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def matrix_to_json(mat) -> dict:
    a = np.asarray(getattr(mat, "mat", mat), dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    return {"dim": int(a.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in a.ravel()]}


def matrix_from_json(obj, field: str = "matrix") -> np.ndarray:
    try:
        d = int(obj["dim"])
        entries = obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{field}: needs integer 'dim' and list 'entries'") from exc
    if d < 1 or len(entries) != d * d:
        raise ConfigError(f"{field}.entries: expected {d * d} entries for dim {d}, got {len(entries)}")
    vals = []
    for i, e in enumerate(entries):
        try:
            re, im = (float(e[0]), float(e[1]))
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"{field}.entries[{i}]: expected [re, im]") from exc
        if not (math.isfinite(re) and math.isfinite(im)):
            raise ConfigError(f"{field}.entries[{i}]: non-finite value")
        vals.append(complex(re, im))
    return np.array(vals, dtype=complex).reshape(d, d)


def ensemble_to_json(ens: MeasurementEnsemble) -> dict:
    out = {"dim": ens.dim, "measurements": [matrix_to_json(g.mat) for g in ens.groups]}
    if any(lbl is not None for lbl in ens.labels):
        out["labels"] = [lbl if lbl is not None else "" for lbl in ens.labels]
    if np.any(ens.counts != 1):
        out["counts"] = [int(c) for c in ens.counts]
    return out


def ensemble_from_json(obj, field: str = "ensemble") -> MeasurementEnsemble:
    if not isinstance(obj, dict) or "measurements" not in obj:
        raise ConfigError(f"{field}: needs a 'measurements' list")
    mats = [matrix_from_json(m, f"{field}.measurements[{i}]") for i, m in enumerate(obj["measurements"])]
    if "dim" in obj and any(m.shape[0] != int(obj["dim"]) for m in mats):
        raise ConfigError(f"{field}.dim: does not match the measurement sizes")
    labels = obj.get("labels")
    counts = obj.get("counts")
    if labels is not None and len(labels) != len(mats):
        raise ConfigError(f"{field}.labels: expected {len(mats)} labels")
    if counts is not None and len(counts) != len(mats):
        raise ConfigError(f"{field}.counts: expected {len(mats)} counts")
    try:
        return MeasurementEnsemble(mats, counts=counts, labels=labels)
    except ContractError as exc:
        raise ConfigError(f"{field}: {exc}") from exc


def instance_to_json(inst: OrInstance) -> dict:
    return {
        "ensemble": ensemble_to_json(inst.ens),
        "state": matrix_to_json(inst.rho.mat),
        "case_tag": inst.case_tag,
        "eps": inst.eps,
        "delta": inst.delta,
        "label": inst.label,
    }


def instance_from_json(obj) -> OrInstance:
    if not isinstance(obj, dict):
        raise ConfigError("instance: expected a JSON object")
    for key in ("ensemble", "state"):
        if key not in obj:
            raise ConfigError(f"instance.{key}: missing")
    ens = ensemble_from_json(obj["ensemble"], "instance.ensemble")
    try:
        rho = DensityMatrix(matrix_from_json(obj["state"], "instance.state"))
    except ConfigError:
        raise
    except ContractError as exc:
        raise ConfigError(f"instance.state: {exc}") from exc
    try:
        return OrInstance(ens, rho, obj.get("case_tag", "unknown"), float(obj.get("eps", 0.0)),
                          float(obj.get("delta", 0.0)), obj.get("label"))
    except ContractError as exc:
        raise ConfigError(f"instance: {exc}") from exc


def instance_hash(obj) -> str:
    """SHA-256 of the canonical JSON form of an instance (or its JSON dict)."""
    if isinstance(obj, OrInstance):
        obj = instance_to_json(obj)
    return hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()


def load_json_source(source: str, field: str = "instance"):
    """Parse ``source`` as inline JSON if it looks like an object, else as a file path."""
    text = source.strip()
    try:
        if text.startswith("{"):
            return json.loads(text)
        return json.loads(Path(source).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{field}: file not found: {source}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{field}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
