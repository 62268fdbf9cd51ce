"""MPS export (fixed-column layout) and a matching reader for round-trip checks.

Numbers are written with ``repr`` so a parse-back reproduces every
coefficient bit for bit. Names may exceed eight characters; they are
whitespace-free so free-format readers (HiGHS included) accept the file.
"""

from __future__ import annotations

import math
from collections import defaultdict

from .model import Model, ModelError, Sense, VarKind

OBJ_ROW = "OBJ"
_SENSE_CODE = {Sense.LE: "L", Sense.GE: "G", Sense.EQ: "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


def _num(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "") -> str:
    out = f" {f1:<2} {f2:<8}"
    if f3:
        out += f"  {f3:<8}  {f4:>12}"
    return out.rstrip()


def _check_name(kind: str, name: str) -> None:
    if not name or any(ch.isspace() for ch in name):
        raise ModelError(f"{kind} name {name!r} is empty or contains whitespace")


def write_mps(model: Model) -> str:
    for v in model.variables:
        _check_name("variable", v.name)
    for r in model.constraints:
        _check_name("constraint", r.name)
        if r.name == OBJ_ROW:
            raise ModelError(f"constraint name {OBJ_ROW!r} is reserved for the objective")
    _check_name("model", model.name)

    lines = [f"NAME          {model.name}"]
    if model.maximize:
        lines += ["OBJSENSE", "    MAX"]
    lines.append("ROWS")
    lines.append(_line("N", OBJ_ROW))
    for r in model.constraints:
        lines.append(_line(_SENSE_CODE[r.sense], r.name))

    columns: dict[int, list[tuple[str, float]]] = defaultdict(list)
    for j, a in model.objective.items():
        if a != 0.0:
            columns[j].append((OBJ_ROW, a))
    for r in model.constraints:
        for j, a in zip(r.indices.tolist(), r.coefs.tolist()):
            columns[j].append((r.name, a))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for j, v in enumerate(model.variables):
        is_bin = v.kind is VarKind.BINARY
        if is_bin != in_int:
            tag = "'INTORG'" if is_bin else "'INTEND'"
            lines.append(_line("", f"MARKER{marker}", "'MARKER'", tag))
            marker += 1
            in_int = is_bin
        entries = columns.get(j) or [(OBJ_ROW, 0.0)]
        for row, a in entries:
            lines.append(_line("", v.name, row, _num(a)))
    if in_int:
        lines.append(_line("", f"MARKER{marker}", "'MARKER'", "'INTEND'"))

    lines.append("RHS")
    if model.objective_constant:
        lines.append(_line("", "RHS", OBJ_ROW, _num(-model.objective_constant)))
    for r in model.constraints:
        if r.rhs != 0.0:
            lines.append(_line("", "RHS", r.name, _num(r.rhs)))

    bounds = []
    for v in model.variables:
        lb, ub = v.lb, v.ub
        if v.kind is VarKind.BINARY:
            if lb == 0.0 and ub == 1.0:
                bounds.append(_line("BV", "BND", v.name))
                continue
            bounds.append(_line("LO", "BND", v.name, _num(lb)))
            bounds.append(_line("UP", "BND", v.name, _num(ub)))
            continue
        if lb == ub:
            bounds.append(_line("FX", "BND", v.name, _num(lb)))
        elif lb == -math.inf and ub == math.inf:
            bounds.append(_line("FR", "BND", v.name))
        else:
            if lb == -math.inf:
                bounds.append(_line("MI", "BND", v.name))
            elif lb != 0.0:
                bounds.append(_line("LO", "BND", v.name, _num(lb)))
            if ub != math.inf:
                bounds.append(_line("UP", "BND", v.name, _num(ub)))
    if bounds:
        lines.append("BOUNDS")
        lines += bounds
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def read_mps(text: str) -> Model:
    """Parse MPS produced by :func:`write_mps` (and plain free-format MPS)."""
    model = Model()
    section = None
    rows: dict[str, tuple[Sense | None, dict[int, float]]] = {}
    row_order: list[str] = []
    rhs: dict[str, float] = {}
    obj_name = None
    integer = False
    bounds: list[tuple[str, str, float | None]] = []
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME" and len(head) > 1:
                model.name = head[1]
            if section == "OBJSENSE" and len(head) > 1:
                model.maximize = head[1].upper().startswith("MAX")
            continue
        tok = raw.split()
        if section == "OBJSENSE":
            model.maximize = tok[0].upper().startswith("MAX")
        elif section == "ROWS":
            code, name = tok
            if code == "N":
                obj_name = obj_name or name
            else:
                rows[name] = (_CODE_SENSE[code], {})
                row_order.append(name)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                integer = tok[2] == "'INTORG'"
                continue
            col = tok[0]
            if col not in model._names:
                model.add_var(col, 0.0, math.inf)
                if integer:
                    # bounds arrive with the BOUNDS section
                    model.variables[-1].kind = VarKind.BINARY
            j = model.index(col)
            for k in range(1, len(tok) - 1, 2):
                row, val = tok[k], float(tok[k + 1])
                if row == obj_name:
                    if val != 0.0:
                        model.objective[j] = val
                else:
                    rows[row][1][j] = val
        elif section == "RHS":
            for k in range(1, len(tok) - 1, 2):
                rhs[tok[k]] = float(tok[k + 1])
        elif section == "BOUNDS":
            code, name = tok[0], tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            bounds.append((code, name, val))
    for name in row_order:
        sense, coefs = rows[name]
        model.add_constraint(coefs, sense, rhs.get(name, 0.0), name=name)
    if obj_name in rhs:
        model.objective_constant = -rhs[obj_name]
    for code, name, val in bounds:
        v = model.variables[model.index(name)]
        if code == "BV":
            v.lb, v.ub, v.kind = 0.0, 1.0, VarKind.BINARY
        elif code == "LO":
            v.lb = val
        elif code == "UP":
            v.ub = val
        elif code == "FX":
            v.lb = v.ub = val
        elif code == "FR":
            v.lb, v.ub = -math.inf, math.inf
        elif code == "MI":
            v.lb = -math.inf
        elif code == "PL":
            v.ub = math.inf
    return model
