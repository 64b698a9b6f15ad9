"""Chain files and tabular output.

Chain text format::

    # comments run to end of line
    n=3
    0 1 0.5
    0 2 0.5
    ...

Triplets ``row col value`` may come in any order; missing entries are zero.
Files ending in ``.csv`` hold the dense matrix instead, one row per line.

Tables are written as an aligned text table, as CSV, or as JSON lines.
Floats always go through :func:`fmt_float` (15 significant digits), so a
table written, parsed and written again is byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .chain import DENSE_LIMIT, Chain, validate_chain
from .errors import ChainFormatError

_HEADER = re.compile(r"^n\s*=\s*(\S+)$")
FORMATS = ("table", "csv", "json")


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_chain_text(text: str, *, renormalize: bool = False, dense_limit: int = DENSE_LIMIT) -> Chain:
    n = None
    rows, cols, vals = [], [], []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if n is None:
            m = _HEADER.match(line)
            if not m:
                raise ChainFormatError("expected header 'n=<int>'", lineno)
            try:
                n = int(m.group(1))
            except ValueError:
                raise ChainFormatError(f"state count {m.group(1)!r} is not an integer", lineno) from None
            if n < 2:
                raise ChainFormatError(f"state count must be >= 2, got {n}", lineno)
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ChainFormatError(f"expected '<row> <col> <value>', got {line!r}", lineno)
        try:
            r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ChainFormatError(f"cannot parse triplet {line!r}", lineno) from None
        if not (0 <= r < n and 0 <= c < n):
            raise ChainFormatError(f"index ({r}, {c}) out of range for n={n}", lineno)
        if (r, c) in seen:
            raise ChainFormatError(f"duplicate entry ({r}, {c})", lineno)
        seen.add((r, c))
        rows.append(r)
        cols.append(c)
        vals.append(v)
    if n is None:
        raise ChainFormatError("empty chain file: missing header 'n=<int>'", 1)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    raw = mat.toarray() if n <= dense_limit else mat
    return validate_chain(raw, renormalize=renormalize, dense_limit=dense_limit)


def parse_chain_csv(text: str, *, renormalize: bool = False, dense_limit: int = DENSE_LIMIT) -> Chain:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError:
            raise ChainFormatError(f"cannot parse CSV row {line!r}", lineno) from None
        if len(rows[-1]) != len(rows[0]):
            raise ChainFormatError(f"row has {len(rows[-1])} values, expected {len(rows[0])}", lineno)
    if not rows:
        raise ChainFormatError("empty CSV chain file", 1)
    return validate_chain(np.array(rows), renormalize=renormalize, dense_limit=dense_limit)


def read_chain(path, *, renormalize: bool = False, dense_limit: int = DENSE_LIMIT) -> Chain:
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ChainFormatError(f"cannot read {path}: {exc}") from None
    parse = parse_chain_csv if path.suffix.lower() == ".csv" else parse_chain_text
    return parse(text, renormalize=renormalize, dense_limit=dense_limit)


def chain_to_text(chain: Chain) -> str:
    """Triplet form, values in shortest round-trip notation (exact reload)."""
    coo = sp.coo_matrix(chain.csr)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"n={chain.n}"]
    for k in order:
        lines.append(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}")
    return "\n".join(lines) + "\n"


def chain_to_csv(chain: Chain) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in chain.dense())


def write_chain(chain: Chain, path) -> None:
    path = Path(path)
    text = chain_to_csv(chain) if path.suffix.lower() == ".csv" else chain_to_text(chain)
    path.write_text(text)


# -- tables -----------------------------------------------------------------

def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.15g}"
    # rounding up can overflow right next to the largest double
    return s if math.isfinite(float(s)) else repr(x)


def fmt_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    if isinstance(v, Mapping):
        return " ".join(f"{k}={fmt_value(x)}" for k, x in v.items())
    return str(v)


def _json_value(v: Any):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # round to 15 significant digits; json then prints the short repr
        return float(fmt_float(v)) if math.isfinite(v) else None
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, Mapping):
        return {str(k): _json_value(x) for k, x in v.items()}
    return v


def flatten(record: Mapping[str, Any]) -> dict:
    """Turn nested maps into ``key[subkey]`` columns."""
    out = {}
    for k, v in record.items():
        if isinstance(v, Mapping):
            for sub, x in v.items():
                out[f"{k}[{sub}]"] = x
        elif isinstance(v, (list, tuple)):
            out[k] = " ".join(fmt_value(x) for x in v)
        else:
            out[k] = v
    return out


def _columns(records: Sequence[Mapping[str, Any]]) -> list:
    cols = {}
    for r in records:
        for k in r:
            cols.setdefault(k, None)
    return list(cols)


def format_table(records: Sequence[Mapping[str, Any]], fmt: str = "table") -> str:
    """Render flat records; all records share the union of their columns."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown output format {fmt!r}")
    if fmt == "json":
        return "".join(
            json.dumps({k: _json_value(v) for k, v in r.items()}, allow_nan=False) + "\n"
            for r in records
        )
    cols = _columns(records)
    cells = [[fmt_value(r.get(c)) for c in cols] for r in records]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows(cells)
        return buf.getvalue()
    if not cols:
        return ""
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(x.rjust(w) for x, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _parse_cell(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def parse_table(text: str, fmt: str) -> list:
    """Read back what :func:`format_table` wrote (csv or json)."""
    if fmt == "json":
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            return []
        head = rows[0]
        return [{k: _parse_cell(v) for k, v in zip(head, row)} for row in rows[1:]]
    raise ValueError(f"cannot parse format {fmt!r}")


def write_curves(directory, x_name: str, xs: Iterable, curves: Mapping[str, Iterable]) -> list:
    """One two-column CSV per curve in ``directory``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    xs = list(xs)
    paths = []
    for name, ys in curves.items():
        safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", name)
        path = directory / f"{safe}.csv"
        path.write_text(format_table([{x_name: x, name: y} for x, y in zip(xs, ys)], "csv"))
        paths.append(path)
    return paths
