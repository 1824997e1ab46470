"""CSV emission with ``#`` metadata headers.

Numbers are written with ``repr``-exact round-tripping so repeated runs with
the same configuration and seed give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__

TOOL = f"timebin-teleport {__version__}"


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=repr).encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return repr(v.real) + ("+" if v.imag >= 0 else "") + repr(v.imag) + "j"
    if v is None:
        return ""
    return str(v)


def csv_text(columns: Sequence[str], rows, meta: Mapping[str, object], notes: Sequence[str] = ()) -> str:
    """Header lines ``# key: value``, then the column row, then data."""
    lines = [f"# tool: {TOOL}"]
    for k, v in meta.items():
        lines.append(f"# {k}: {v}")
    for n in notes:
        lines.append(f"# {n}")
    lines.append(",".join(columns))
    for r in rows:
        if isinstance(r, Mapping):
            r = [r.get(c) for c in columns]
        lines.append(",".join(_fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, meta, notes=()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows, meta, notes))
    return path


def _parse(x):
    if not x:
        return float("nan")
    try:
        return float(x)
    except ValueError:
        return x


def read_csv_table(path):
    """``(meta, columns, rows)`` from a file written by :func:`write_csv`."""
    meta, columns, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if ": " in body:
                k, v = body.split(": ", 1)
                meta[k] = v
            continue
        if columns is None:
            columns = line.split(",")
        elif line:
            rows.append([_parse(x) for x in line.split(",")])
    return meta, columns, rows
