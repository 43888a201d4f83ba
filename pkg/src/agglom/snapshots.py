"""Snapshot and metrics file I/O.

Snapshot layout: a short self-describing text header (key=value lines,
utf-8) terminated by a blank line, then the raw payload as little-endian
float64, row-major. The header carries grid geometry, time, scenario
name, seed, code version and a sha256 of the payload, so round-trips are
bit-exact and verifiable from any language.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, NumericError
from .grid import Grid2D, ScalarField, make_grid

FORMAT_VERSION = "1"
MAGIC = "agglom-snapshot"

_HEADER_ORDER = (
    "format", "version", "kind", "name", "seed", "t",
    "Lx", "Ly", "nx", "ny", "count", "sha256",
)


def _payload_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def write_snapshot(path, obj: Union[ScalarField, np.ndarray], meta: Optional[dict] = None) -> None:
    """Write a field or an (N, 2) position array.

    meta may carry name/seed/t/version keys; geometry comes from the
    object itself.
    """
    meta = dict(meta or {})
    path = Path(path)
    header = {
        "format": MAGIC,
        "version": str(meta.pop("version", FORMAT_VERSION)),
        "name": str(meta.pop("name", "")),
        "seed": str(meta.pop("seed", 0)),
        "t": repr(float(meta.pop("t", 0.0))),
    }
    if isinstance(obj, ScalarField):
        g = obj.grid
        header.update(
            kind="field",
            Lx=repr(g.Lx), Ly=repr(g.Ly), nx=str(g.nx), ny=str(g.ny),
        )
        payload = _payload_bytes(obj.values)
    else:
        arr = np.asarray(obj, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ConfigurationError(f"positions must be (N, 2), got {arr.shape}")
        header.update(kind="positions", count=str(arr.shape[0]))
        for key in ("Lx", "Ly"):
            if key in meta:
                header[key] = repr(float(meta.pop(key)))
        payload = _payload_bytes(arr)
    for key, value in meta.items():
        header[str(key)] = str(value)
    header["sha256"] = hashlib.sha256(payload).hexdigest()

    lines = []
    for key in _HEADER_ORDER:
        if key in header:
            lines.append(f"{key}={header.pop(key)}")
    for key in sorted(header):
        lines.append(f"{key}={header[key]}")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n\n").encode("utf-8"))
        fh.write(payload)


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    """Read a snapshot back: (header dict, payload array).

    Fields come back shaped (nx, ny), positions shaped (count, 2).
    Payload checksums are verified.
    """
    raw = Path(path).read_bytes()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise ConfigurationError(f"{path}: not a snapshot file (no header terminator)")
    header: dict = {}
    for line in raw[:sep].decode("utf-8").splitlines():
        if "=" not in line:
            raise ConfigurationError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        header[key] = value
    if header.get("format") != MAGIC:
        raise ConfigurationError(f"{path}: not an {MAGIC} file")
    payload = raw[sep + 2:]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("sha256"):
        raise NumericError(f"{path}: payload checksum mismatch")
    data = np.frombuffer(payload, dtype="<f8").astype(float)
    kind = header.get("kind")
    if kind == "field":
        nx, ny = int(header["nx"]), int(header["ny"])
        if data.size != nx * ny:
            raise ConfigurationError(f"{path}: payload has {data.size} values, expected {nx * ny}")
        return header, data.reshape(nx, ny)
    if kind == "positions":
        count = int(header["count"])
        if data.size != 2 * count:
            raise ConfigurationError(f"{path}: payload has {data.size} values, expected {2 * count}")
        return header, data.reshape(count, 2)
    raise ConfigurationError(f"{path}: unknown snapshot kind {kind!r}")


def read_field(path, grid: Optional[Grid2D] = None) -> ScalarField:
    """Load a field snapshot; with `grid` given, geometry must match."""
    header, data = read_snapshot(path)
    if header.get("kind") != "field":
        raise ConfigurationError(f"{path}: expected a field snapshot, got {header.get('kind')}")
    file_grid = make_grid(float(header["Lx"]), float(header["Ly"]),
                          int(header["nx"]), int(header["ny"]))
    if grid is not None and file_grid != grid:
        raise ConfigurationError(
            f"{path}: snapshot grid {file_grid.nx}x{file_grid.ny} on "
            f"[{file_grid.Lx}, {file_grid.Ly}] does not match target "
            f"{grid.nx}x{grid.ny} on [{grid.Lx}, {grid.Ly}]"
        )
    return ScalarField(file_grid, data)


METRICS_COLUMNS = (
    "t", "mass", "SU", "aggregate_v", "entropy_term", "theil",
    "total_output", "max_density", "cluster_count", "rep_drift_norm",
    "equilibrium_residual",
)


def write_metrics_csv(path, rows) -> None:
    """Fixed-column metrics series; floats via repr so identical runs
    produce identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([
                repr(float(row.t)), repr(float(row.mass)), repr(float(row.SU)),
                repr(float(row.aggregate_v)), repr(float(row.entropy_term)),
                repr(float(row.theil)), repr(float(row.total_output)),
                repr(float(row.max_density)), str(int(row.cluster_count)),
                repr(float(row.rep_drift_norm)), repr(float(row.equilibrium_residual)),
            ])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k == "cluster_count" else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
