"""On-disk formats: diagnostics CSV, binary snapshots and JSON reports.

Snapshot layout (all little-endian)::

    header   struct "<8sIIIdI"   magic b"PCFLOW01", version, n, N, t, flags
    payload  complex128 pairs    g[a, b, x1, y1, ...] row-major, then φ if flags & 1
    trailer  uint32              CRC-32 of the payload bytes

Floats in the CSV are written with ``repr`` (shortest round-trip form), so a
rerun with the same config produces the same bytes and reading a file back
recovers every value exactly.
"""

from __future__ import annotations

import csv
import json
import math
import struct
import subprocess
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .field import HermitianMetric, TensorField, TorusChart
from .flow import CSV_FIELDS, DiagnosticsRecord, FlowState

MAGIC = b"PCFLOW01"
VERSION = 1
HEADER = struct.Struct("<8sIIIdI")
TRAILER = struct.Struct("<I")
FLAG_PHI = 1

AUX_FIELDS = ("t", "max_ric_s", "hermitian_residual", "trace_q_residual")


class FormatError(ValueError):
    """A CSV or snapshot file does not match its schema."""


# --------------------------------------------------------------------------
# CSV

def _fmt(x: float) -> str:
    return repr(float(x))


def write_diagnostics_csv(path, records) -> Path:
    """Write the CSV schema; the extra per-record fields go to ``<stem>.aux.csv``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([_fmt(v) for v in r.row()])
    with open(aux_path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUX_FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in AUX_FIELDS])
    return path


def aux_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".aux.csv")


def _read_table(path, fields) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: cannot read: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty file")
    if tuple(rows[0]) != tuple(fields):
        raise FormatError(f"{path}: header {rows[0]} does not match {list(fields)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(fields):
            raise FormatError(f"{path}:{lineno}: expected {len(fields)} columns, got {len(row)}")
        try:
            out.append({f: float(v) for f, v in zip(fields, row)})
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise FormatError(f"{path}: no data rows")
    ts = [r["t"] for r in out]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise FormatError(f"{path}: t is not strictly increasing")
    return out


def read_diagnostics_csv(path) -> list[DiagnosticsRecord]:
    """Read a diagnostics CSV (and its aux file when present) back into records."""
    rows = _read_table(path, CSV_FIELDS)
    aux = aux_path(path)
    extra = _read_table(aux, AUX_FIELDS) if aux.exists() else None
    if extra is not None and [r["t"] for r in extra] != [r["t"] for r in rows]:
        raise FormatError(f"{aux}: times do not match {path}")
    recs = []
    for k, row in enumerate(rows):
        rec = DiagnosticsRecord(**row)
        if extra is not None:
            for f in AUX_FIELDS[1:]:
                setattr(rec, f, extra[k][f])
        else:
            rec.max_ric_s = math.nan
        recs.append(rec)
    return recs


# --------------------------------------------------------------------------
# snapshots

def _le_complex(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<c16").tobytes()


def write_snapshot(path, state: FlowState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chart = state.chart
    flags = FLAG_PHI if state.phi is not None else 0
    payload = _le_complex(state.metric.g.data)
    if state.phi is not None:
        payload += _le_complex(state.phi.data)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, chart.n, chart.N, float(state.t), flags))
        fh.write(payload)
        fh.write(TRAILER.pack(zlib.crc32(payload)))
    return path


def read_snapshot(path) -> FlowState:
    """Load a snapshot; the arrays are bit-identical to the ones written."""
    blob = Path(path).read_bytes()
    if len(blob) < HEADER.size + TRAILER.size:
        raise FormatError(f"{path}: truncated snapshot")
    magic, version, n, N, t, flags = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if flags & ~FLAG_PHI:
        raise FormatError(f"{path}: unknown flags {flags:#x}")
    try:
        chart = TorusChart(n, N)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    npts = N ** (2 * n)
    sizes = [n * n * npts] + ([n * n * npts] if flags & FLAG_PHI else [])
    expected = HEADER.size + 16 * sum(sizes) + TRAILER.size
    if len(blob) != expected:
        raise FormatError(f"{path}: size {len(blob)} bytes, expected {expected}")
    payload = blob[HEADER.size:-TRAILER.size]
    (crc,) = TRAILER.unpack_from(blob, len(blob) - TRAILER.size)
    if zlib.crc32(payload) != crc:
        raise FormatError(f"{path}: checksum mismatch")
    arr = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    shape = (n, n) + chart.shape
    g = arr[:sizes[0]].reshape(shape)
    try:
        metric = HermitianMetric(TensorField(chart, g, "ub"))
    except ValueError as exc:
        raise FormatError(f"{path}: stored metric invalid: {exc}") from exc
    phi = TensorField(chart, arr[sizes[0]:].reshape(shape), "uu") if flags & FLAG_PHI else None
    return FlowState(t, metric, phi)


# --------------------------------------------------------------------------
# JSON

def build_id() -> str:
    """``pcflow <version>`` plus ``git describe`` output when run from a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5, check=True)
        desc = out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"pcflow {__version__}" + (f" ({desc})" if desc else "")


def _clean(obj):
    """Recursively turn NaN/inf into None and numpy scalars into Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path
