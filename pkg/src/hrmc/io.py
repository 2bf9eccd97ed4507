"""Plain-text matrix formats and atomic file output.

Sparse (observed) matrices::

    %%sparse-matrix <n_rows> <n_cols> <nnz>
    <row> <col> <value>        # 1-based, one entry per line

Dense matrices::

    %%dense-matrix <n_rows> <n_cols>
    <v11> <v12> ...            # one matrix row per line

Lines starting with ``%`` (after the header) are comments. Floats are written
with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import ObservedMatrix
from .errors import FormatError

__all__ = [
    "fmt_float",
    "atomic_write",
    "read_sparse",
    "write_sparse",
    "read_dense",
    "write_dense",
    "read_dense_blocks",
    "write_dense_blocks",
    "read_labels",
    "write_labels",
    "write_csv",
    "write_json",
]

SPARSE_HEADER = "%%sparse-matrix"
DENSE_HEADER = "%%dense-matrix"


def fmt_float(x) -> str:
    return format(float(x), ".17g")


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        # mkstemp creates 0600; give the file the usual umask-based mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _content_lines(lines):
    """Yield (line_number, stripped_text) skipping blanks and % comments."""
    for no, raw in lines:
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        yield no, text


def _parse_header(line: str, tag: str, nfields: int, path, no):
    parts = line.split()
    if not parts or parts[0] != tag:
        raise FormatError(f"expected header '{tag}'", path, no)
    if len(parts) != nfields + 1:
        raise FormatError(f"header needs {nfields} integers", path, no)
    try:
        vals = [int(p) for p in parts[1:]]
    except ValueError:
        raise FormatError("header fields must be integers", path, no) from None
    if any(v < 0 for v in vals):
        raise FormatError("header fields must be nonnegative", path, no)
    return vals


def _read_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        return list(enumerate(fh.read().splitlines(), start=1))


def read_sparse(path) -> ObservedMatrix:
    lines = _read_lines(path)
    if not lines:
        raise FormatError("empty file", path, 1)
    n, m, nnz = _parse_header(lines[0][1], SPARSE_HEADER, 3, path, 1)
    rows, cols, vals = [], [], []
    seen = set()
    for no, text in _content_lines(lines[1:]):
        parts = text.split()
        if len(parts) != 3:
            raise FormatError("expected 'row col value'", path, no)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"cannot parse entry {text!r}", path, no) from None
        if not (1 <= i <= n and 1 <= j <= m):
            raise FormatError(f"entry ({i}, {j}) outside {n}x{m}", path, no)
        if (i, j) in seen:
            raise FormatError(f"duplicate entry ({i}, {j})", path, no)
        seen.add((i, j))
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != nnz:
        raise FormatError(f"header declares {nnz} entries, found {len(vals)}", path, len(lines))
    return ObservedMatrix(n, m, rows, cols, vals)


def write_sparse(path, m: ObservedMatrix) -> None:
    buf = _io.StringIO()
    buf.write(f"{SPARSE_HEADER} {m.n_rows} {m.n_cols} {m.nnz}\n")
    for i, j, v in zip(m.rows.tolist(), m.cols.tolist(), m.values.tolist()):
        buf.write(f"{i + 1} {j + 1} {fmt_float(v)}\n")
    with atomic_write(path) as fh:
        fh.write(buf.getvalue())


def _dense_text(a: np.ndarray) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    out = [f"{DENSE_HEADER} {a.shape[0]} {a.shape[1]}\n"]
    for row in a.tolist():
        out.append(" ".join(fmt_float(v) for v in row) + "\n")
    return "".join(out)


def write_dense(path, a) -> None:
    with atomic_write(path) as fh:
        fh.write(_dense_text(a))


def _parse_dense(lines, path, start=0):
    """Parse one dense block beginning at ``lines[start]``; return (array, next)."""
    no, text = lines[start]
    n, m = _parse_header(text, DENSE_HEADER, 2, path, no)
    data = []
    pos = start + 1
    while len(data) < n:
        if pos >= len(lines):
            raise FormatError(f"expected {n} rows, found {len(data)}", path, lines[-1][0])
        no, text = lines[pos]
        pos += 1
        try:
            row = [float(v) for v in text.split()]
        except ValueError:
            raise FormatError(f"cannot parse row {text!r}", path, no) from None
        if len(row) != m:
            raise FormatError(f"expected {m} values, found {len(row)}", path, no)
        data.append(row)
    return np.array(data, dtype=float).reshape(n, m), pos


def read_dense(path) -> np.ndarray:
    lines = _read_lines(path)
    if not lines:
        raise FormatError("empty file", path, 1)
    body = [lines[0]] + list(_content_lines(lines[1:]))
    a, pos = _parse_dense(body, path)
    if pos != len(body):
        raise FormatError("trailing data after matrix", path, body[pos][0])
    return a


def write_dense_blocks(path, arrays, labels=None) -> None:
    parts = []
    for i, a in enumerate(arrays):
        tag = labels[i] if labels is not None else f"block {i}"
        parts.append(f"% {tag}\n")
        parts.append(_dense_text(a))
    with atomic_write(path) as fh:
        fh.write("".join(parts))


def read_dense_blocks(path) -> list:
    lines = [(no, t.strip()) for no, t in _read_lines(path) if t.strip()]
    body = [(no, t) for no, t in lines if t.startswith(DENSE_HEADER) or not t.startswith("%")]
    out, pos = [], 0
    while pos < len(body):
        a, pos = _parse_dense(body, path, pos)
        out.append(a)
    return out


def read_labels(path) -> np.ndarray:
    labels = []
    for no, text in _content_lines(_read_lines(path)):
        try:
            labels.append(int(text))
        except ValueError:
            raise FormatError(f"label must be an integer, got {text!r}", path, no) from None
    return np.array(labels, dtype=int)


def write_labels(path, labels) -> None:
    with atomic_write(path) as fh:
        fh.write("".join(f"{int(v)}\n" for v in labels))


def write_csv(path, header, rows) -> None:
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])


def write_json(path, obj) -> None:
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
