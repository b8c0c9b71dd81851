"""File formats: dataset CSV, descriptor JSON, model JSON and run manifests.

CSV files may start with ``#`` comment lines (the run manifest is written as
``# manifest: {...}``); readers skip them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from importlib import metadata

import numpy as np
import scipy.linalg as sla

from .core import (
    Dataset,
    DimensionMismatch,
    FittedModel,
    FullParams,
    ModelConfig,
    SingularSystem,
    ValidationError,
    validate_dataset,
)
from .likelihood import build_correlation

FORMAT_VERSION = 1


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # running from a source tree
        return "0+unknown"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    with open(path, "rb") as fh:
        return sha256_bytes(fh.read())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def make_manifest(command: str, seed, config=None, inputs=None, wall_time: float = 0.0) -> dict:
    """Provenance record embedded in every output file.

    ``inputs`` maps a role name (``data``, ``descriptor``...) to a file path.
    """
    return {
        "command": command,
        "seed": seed,
        "config_digest": None if config is None else sha256_bytes(
            canonical_json(config).encode()),
        "input_digests": {k: sha256_file(v) for k, v in sorted((inputs or {}).items())},
        "version": tool_version(),
        "wall_time": round(float(wall_time), 6),
    }


def _data_lines(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [ln for ln in fh.read().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def read_table(path) -> tuple:
    """Header and rows of a CSV file, skipping comment lines."""
    lines = _data_lines(path)
    if not lines:
        raise ValidationError(f"{path}: no header row")
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = [h.strip() for h in next(reader)]
    rows = [r for r in reader]
    for i, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DimensionMismatch(f"{path}: row {i} has {len(r)} fields, header has {len(header)}")
    return header, rows


def _split_columns(header) -> tuple:
    uc = [i for i, h in enumerate(header) if h.lower().startswith("u")]
    vc = [i for i, h in enumerate(header) if h.lower().startswith("v")]
    yc = [i for i, h in enumerate(header) if h.lower() == "y"]
    other = set(range(len(header))) - set(uc) - set(vc) - set(yc)
    if other:
        bad = ", ".join(header[i] for i in sorted(other))
        raise ValidationError(f"unrecognised columns: {bad} (expected u1..uI, v1..vJ, y)")
    return uc, vc, yc


def _to_float(rows, cols, what) -> np.ndarray:
    try:
        return np.array([[float(r[c]) for c in cols] for r in rows], float).reshape(len(rows), len(cols))
    except ValueError as exc:
        raise ValidationError(f"non-numeric {what} value: {exc}") from exc


def _to_levels(rows, cols) -> np.ndarray:
    try:
        vals = [[float(r[c]) for c in cols] for r in rows]
    except ValueError as exc:
        raise ValidationError(f"non-numeric level: {exc}") from exc
    arr = np.array(vals, float).reshape(len(rows), len(cols))
    if np.any(arr != np.round(arr)):
        raise ValidationError("qualitative columns must hold integer levels")
    return arr.astype(np.int64)


def read_descriptor(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return normalize_descriptor(d, path)


def normalize_descriptor(d, where="descriptor") -> dict:
    """``level_counts`` plus ``ordinal_flags`` (default all nominal)."""
    if not isinstance(d, dict) or "level_counts" not in d:
        raise ValidationError(f"{where}: descriptor needs 'level_counts'")
    try:
        counts = [int(a) for a in d["level_counts"]]
        flags = [bool(f) for f in d.get("ordinal_flags", [False] * len(counts))]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: malformed descriptor: {exc}") from exc
    return {"level_counts": counts, "ordinal_flags": flags}


def read_dataset(csv_path, descriptor) -> Dataset:
    """Dataset from a ``u1..uI,v1..vJ,y`` CSV and a descriptor dict or path."""
    if isinstance(descriptor, dict):
        descriptor = normalize_descriptor(descriptor)
    else:
        descriptor = read_descriptor(descriptor)
    header, rows = read_table(csv_path)
    uc, vc, yc = _split_columns(header)
    if len(yc) != 1:
        raise ValidationError("dataset CSV needs exactly one 'y' column")
    U = _to_float(rows, uc, "quantitative")
    V = _to_levels(rows, vc)
    y = _to_float(rows, yc, "response")[:, 0] if rows else np.zeros(0)
    if len(descriptor["level_counts"]) != len(vc):
        raise DimensionMismatch(
            f"{len(vc)} qualitative columns but descriptor lists "
            f"{len(descriptor['level_counts'])} level counts")
    d = Dataset(U, V, y, descriptor["level_counts"], descriptor["ordinal_flags"])
    validate_dataset(d)
    return d


def read_points(csv_path) -> tuple:
    """Query points ``(header, U, V)``; a ``y`` column, if present, is ignored."""
    header, rows = read_table(csv_path)
    uc, vc, _ = _split_columns(header)
    return header, rows, _to_float(rows, uc, "quantitative"), _to_levels(rows, vc)


def fmt(x) -> str:
    """Shortest round-tripping text for numbers; blanks for None."""
    if x is None or x == "":
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_csv(fh, header, rows, manifest=None) -> None:
    """Write rows (sequences or dicts keyed by header) with ``\\n`` line endings."""
    if manifest is not None:
        fh.write("# manifest: " + canonical_json(manifest) + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if isinstance(r, dict):
            r = [r[h] for h in header]
        w.writerow([fmt(x) for x in r])


def dataset_to_csv(fh, d: Dataset, manifest=None) -> None:
    header = [f"u{i + 1}" for i in range(d.I)] + [f"v{j + 1}" for j in range(d.J)] + ["y"]
    rows = [list(d.U[i]) + [int(v) for v in d.V[i]] + [d.y[i]] for i in range(d.n)]
    write_csv(fh, header, rows, manifest)


def model_to_dict(model: FittedModel, manifest=None) -> dict:
    d = model.train
    out = {
        "format_version": FORMAT_VERSION,
        "method": model.method_name,
        "config": model.config.to_dict(),
        "params": model.params.to_dict(),
        "delta": model.delta,
        "epsilon_star": model.epsilon_star,
        "neg_loglik": model.neg_loglik,
        "train": {
            "U": d.U.tolist(), "V": d.V.tolist(), "y": d.y.tolist(),
            "level_counts": list(d.level_counts), "ordinal_flags": list(d.ordinal_flags),
        },
        "info": model.info,
    }
    if manifest is not None:
        out["manifest"] = manifest
    return out


def model_to_json(model: FittedModel, manifest=None) -> str:
    return json.dumps(model_to_dict(model, manifest), sort_keys=True, indent=1) + "\n"


def model_from_dict(obj: dict) -> FittedModel:
    """Rebuild a model; the factorisation and weights are recomputed."""
    try:
        t = obj["train"]
        n = len(t["y"])
        data = Dataset(np.asarray(t["U"], float).reshape(n, -1) if n else np.zeros((0, 0)),
                       np.asarray(t["V"], np.int64).reshape(n, -1) if n else np.zeros((0, 0)),
                       t["y"], t["level_counts"], t["ordinal_flags"])
        config = ModelConfig.from_dict(obj["config"])
        params = FullParams.from_dict(obj["params"])
        delta = float(obj["delta"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model file: {exc}") from exc
    R = build_correlation(data, config, params)
    try:
        L = sla.cholesky(R + delta * np.eye(data.n), lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("stored model does not factorise") from exc
    alpha = sla.cho_solve((L, True), data.y - params.mu, check_finite=False)
    return FittedModel(config, params, delta, float(obj["epsilon_star"]), L, alpha, data,
                       float(obj["neg_loglik"]), dict(obj.get("info", {})))


def model_from_json(text: str) -> FittedModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid model JSON: {exc}") from exc
    return model_from_dict(obj)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def read_matrix(path) -> np.ndarray:
    """Numeric CSV without header (comment lines allowed)."""
    lines = _data_lines(path)
    try:
        rows = [[float(x) for x in ln.split(",")] for ln in lines]
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise DimensionMismatch(f"{path}: rows must be non-empty and equally long")
    return np.array(rows, float)
