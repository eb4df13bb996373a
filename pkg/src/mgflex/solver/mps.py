"""MPS export and import.

Records follow the fixed-format field order (type, name, name, value,
name, value) with one coefficient per line. Field widths grow to fit the
longest identifier, so descriptive names like ``P_g1_t4_k2_s0`` stay
aligned in columns; names never contain blanks, so any whitespace-splitting
MPS reader (including HiGHS) loads the file. Values are written with
``repr`` which is the shortest decimal that round-trips exactly.

Bounds: binaries get a ``BV`` record, followed by ``FX`` when history pins
them. Continuous columns use ``FX``, ``FR``, ``MI``, ``LO`` and ``UP`` as
needed against the default ``[0, +inf)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..model import MilpModel

OBJ = "OBJ"
RHS_SET = "RHS"
BND_SET = "BND"


@dataclass
class MpsExport:
    text: str
    renamed: dict = field(default_factory=dict)  # ("row"|"col", original) -> written name


def _unique(names, kind, taken, renamed):
    out = []
    for name in names:
        clean = re.sub(r"\s+", "_", name) or kind
        base, n = clean, 1
        while clean in taken:
            n += 1
            clean = f"{base}~{n}"
        if clean != name:
            renamed[(kind, name)] = clean
        taken.add(clean)
        out.append(clean)
    return out


def _num(x: float) -> str:
    return repr(float(x))


def to_mps(model: MilpModel) -> MpsExport:
    renamed: dict = {}
    rows = _unique(model.row_names, "row", {OBJ}, renamed)
    cols = _unique(model.col_names, "col", set(), renamed)
    w = max([8] + [len(n) for n in rows + cols])
    lines = [f"NAME          {model.name}", "ROWS", f" N  {OBJ}"]
    lines += [f" {s}  {r}" for s, r in zip(model.sense, rows)]

    def rec(kind, a, b, value):
        v = _num(value)
        return f" {kind:<2} {a:<{w}}  {b:<{w}}  {v:>12}".rstrip()

    lines.append("COLUMNS")
    A = sp.csc_matrix(model.A)
    A.sort_indices()
    for j, name in enumerate(cols):
        entries = list(zip(A.indices[A.indptr[j]:A.indptr[j + 1]], A.data[A.indptr[j]:A.indptr[j + 1]]))
        if model.c[j] != 0 or not entries:
            lines.append(rec("", name, OBJ, model.c[j]))
        lines += [rec("", name, rows[i], v) for i, v in entries]

    lines.append("RHS")
    if model.obj_offset:
        # the objective constant enters with a negated sign by convention
        lines.append(rec("", RHS_SET, OBJ, -model.obj_offset))
    lines += [rec("", RHS_SET, rows[i], v) for i, v in enumerate(model.rhs) if v != 0]

    lines.append("BOUNDS")
    for j, name in enumerate(cols):
        lo, hi = model.lb[j], model.ub[j]
        if model.binary[j] and lo != hi:
            lines.append(f" BV {BND_SET:<{w}}  {name}")
            continue
        # fixed binaries go out as plain fixed columns: some readers apply BV
        # after every other bound record and would reopen them to [0, 1]
        if lo == hi:
            lines.append(rec("FX", BND_SET, name, lo))
            continue
        if lo == -np.inf and hi == np.inf:
            lines.append(f" FR {BND_SET:<{w}}  {name}")
            continue
        if lo == -np.inf:
            lines.append(f" MI {BND_SET:<{w}}  {name}")
        elif lo != 0:
            lines.append(rec("LO", BND_SET, name, lo))
        if hi != np.inf:
            lines.append(rec("UP", BND_SET, name, hi))
    lines.append("ENDATA")
    return MpsExport("\n".join(lines) + "\n", renamed)


def write_mps(model: MilpModel, path) -> MpsExport:
    out = to_mps(model)
    Path(path).write_text(out.text)
    return out


class MpsParseError(ValueError):
    pass


def parse_mps(text: str) -> MilpModel:
    """Read a model written by :func:`to_mps` (or any plain MPS without RANGES)."""
    name = "MODEL"
    section = None
    row_names: list[str] = []
    senses: list[str] = []
    row_index: dict[str, int] = {}
    obj_row = None
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    c: list[float] = []
    entries: list[tuple[int, int, float]] = []
    rhs_vals: dict[int, float] = {}
    offset = 0.0
    bounds: dict[int, list] = {}
    binaries: set[int] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME":
                name = head[1] if len(head) > 1 else name
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS"):
                raise MpsParseError(f"line {lineno}: unsupported section {section!r}")
            continue
        f = raw.split()
        try:
            if section == "ROWS":
                sense, rname = f
                if sense == "N":
                    obj_row = obj_row or rname
                    continue
                if sense not in ("L", "E", "G"):
                    raise MpsParseError(f"line {lineno}: unknown row type {sense!r}")
                row_index[rname] = len(row_names)
                row_names.append(rname)
                senses.append(sense)
            elif section == "COLUMNS":
                if "'MARKER'" in f:
                    raise MpsParseError(f"line {lineno}: integer markers are not supported; use BV bounds")
                cname = f[0]
                if cname not in col_index:
                    col_index[cname] = len(col_names)
                    col_names.append(cname)
                    c.append(0.0)
                j = col_index[cname]
                for rname, val in zip(f[1::2], f[2::2]):
                    if rname == obj_row:
                        c[j] = float(val)
                    else:
                        entries.append((row_index[rname], j, float(val)))
            elif section == "RHS":
                for rname, val in zip(f[1::2], f[2::2]):
                    if rname == obj_row:
                        offset = -float(val)
                    else:
                        rhs_vals[row_index[rname]] = float(val)
            elif section == "BOUNDS":
                kind, cname = f[0], f[2]
                j = col_index[cname]
                b = bounds.setdefault(j, [0.0, np.inf])
                val = float(f[3]) if len(f) > 3 else None
                if kind == "BV":
                    binaries.add(j)
                    b[0], b[1] = 0.0, 1.0
                elif kind == "FX":
                    b[0] = b[1] = val
                elif kind == "FR":
                    b[0], b[1] = -np.inf, np.inf
                elif kind == "MI":
                    b[0] = -np.inf
                elif kind == "PL":
                    b[1] = np.inf
                elif kind == "LO":
                    b[0] = val
                elif kind == "UP":
                    b[1] = val
                else:
                    raise MpsParseError(f"line {lineno}: unsupported bound type {kind!r}")
        except (KeyError, IndexError, ValueError) as exc:
            if isinstance(exc, MpsParseError):
                raise
            raise MpsParseError(f"line {lineno}: cannot read {raw.strip()!r} ({exc})") from None

    m, n = len(row_names), len(col_names)
    if entries:
        r, cidx, v = zip(*entries)
    else:
        r, cidx, v = (), (), ()
    A = sp.csr_matrix((np.array(v, dtype=float), (np.array(r, dtype=np.int64), np.array(cidx, dtype=np.int64))),
                      shape=(m, n))
    A.sort_indices()
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for j, (lo, hi) in bounds.items():
        lb[j], ub[j] = lo, hi
    binary = np.zeros(n, dtype=bool)
    binary[list(binaries)] = True
    rhs = np.zeros(m)
    for i, val in rhs_vals.items():
        rhs[i] = val
    return MilpModel(c=np.array(c, dtype=float), A=A, sense=np.array(senses, dtype="<U1"), rhs=rhs, lb=lb, ub=ub,
                     binary=binary, col_names=col_names, row_names=row_names, obj_offset=offset, name=name)


def read_mps(path) -> MilpModel:
    return parse_mps(Path(path).read_text())
