"""Linear / mixed-integer model container shared by every model builder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

INF = math.inf


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


class ModelError(ValueError):
    """Raised when a model is assembled inconsistently."""


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    kind: VarKind = VarKind.CONTINUOUS


@dataclass
class Constraint:
    indices: np.ndarray
    coefs: np.ndarray
    sense: Sense
    rhs: float
    name: str


@dataclass
class ModelArrays:
    """Column-ordered numeric view of a model (objective always minimised)."""

    c: np.ndarray
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    obj_sign: float
    obj_constant: float


class Model:
    """A linear model with optional binary variables and SOS2 metadata.

    Constraints and variables keep declaration order, which fixes the column
    and row order of every export and every solve.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self.maximize = False
        self.sos2_groups: list[list[int]] = []
        self._names: dict[str, int] = {}
        self._row_names: dict[str, int] = {}

    # -- building -----------------------------------------------------------
    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                kind: VarKind | str = VarKind.CONTINUOUS) -> int:
        kind = VarKind(kind)
        if kind is VarKind.BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ModelError(f"variable {name!r}: lower bound {lb} exceeds upper bound {ub}")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        self._names[name] = idx
        return idx

    def add_constraint(self, coefs: Mapping[int, float] | Iterable[tuple[int, float]],
                       sense: Sense | str, rhs: float, name: str | None = None) -> int:
        items = coefs.items() if isinstance(coefs, Mapping) else coefs
        merged: dict[int, float] = {}
        n = len(self.variables)
        for j, a in items:
            j = int(j)
            if not 0 <= j < n:
                raise ModelError(f"constraint references undeclared variable index {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        idx = np.fromiter(merged.keys(), dtype=np.int64, count=len(merged))
        val = np.fromiter(merged.values(), dtype=float, count=len(merged))
        keep = val != 0.0
        order = np.argsort(idx[keep], kind="stable")
        row = len(self.constraints)
        name = name if name is not None else f"r{row}"
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        self._row_names[name] = row
        self.constraints.append(Constraint(idx[keep][order], val[keep][order],
                                           Sense(sense), float(rhs), name))
        return row

    def add_row(self, indices: np.ndarray, coefs: np.ndarray, sense: Sense | str, rhs: float,
                name: str) -> int:
        """Fast path for builders: ``indices`` must be unique and declared."""
        indices = np.asarray(indices, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=float)
        if indices.size and (indices.min() < 0 or indices.max() >= len(self.variables)):
            raise ModelError(f"row {name!r} references an undeclared variable")
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        keep = coefs != 0.0
        order = np.argsort(indices[keep], kind="stable")
        row = len(self.constraints)
        self._row_names[name] = row
        self.constraints.append(Constraint(indices[keep][order], coefs[keep][order],
                                           Sense(sense), float(rhs), name))
        return row

    def set_objective(self, coefs: Mapping[int, float] | Iterable[tuple[int, float]],
                      maximize: bool = False, constant: float = 0.0) -> None:
        items = coefs.items() if isinstance(coefs, Mapping) else coefs
        obj: dict[int, float] = {}
        for j, a in items:
            if not 0 <= int(j) < len(self.variables):
                raise ModelError(f"objective references undeclared variable index {j}")
            obj[int(j)] = obj.get(int(j), 0.0) + float(a)
        self.objective = obj
        self.maximize = bool(maximize)
        self.objective_constant = float(constant)

    def set_bounds(self, j: int, lb: float | None = None, ub: float | None = None) -> None:
        v = self.variables[j]
        if lb is not None:
            v.lb = float(lb)
        if ub is not None:
            v.ub = float(ub)

    # -- queries ------------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_cons(self) -> int:
        return len(self.constraints)

    @property
    def n_binaries(self) -> int:
        return sum(v.kind is VarKind.BINARY for v in self.variables)

    def index(self, name: str) -> int:
        return self._names[name]

    def validate(self) -> None:
        seen: set[int] = set()
        for group in self.sos2_groups:
            for j in group:
                if j in seen:
                    raise ModelError(f"variable {self.variables[j].name!r} in more than one SOS2 group")
                seen.add(j)
        for v in self.variables:
            if v.kind is VarKind.BINARY and (v.lb < 0 or v.ub > 1):
                raise ModelError(f"binary {v.name!r} has bounds outside [0, 1]")

    def arrays(self) -> ModelArrays:
        n, m = self.n_vars, self.n_cons
        sign = -1.0 if self.maximize else 1.0
        c = np.zeros(n)
        for j, a in self.objective.items():
            c[j] = sign * a
        counts = np.array([len(r.indices) for r in self.constraints], dtype=np.int64)
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        if m:
            indices = np.concatenate([r.indices for r in self.constraints])
            data = np.concatenate([r.coefs for r in self.constraints])
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        A = sparse.csr_matrix((data, indices, indptr), shape=(m, n))
        row_lo = np.full(m, -INF)
        row_hi = np.full(m, INF)
        for i, r in enumerate(self.constraints):
            if r.sense is not Sense.GE:
                row_hi[i] = r.rhs
            if r.sense is not Sense.LE:
                row_lo[i] = r.rhs
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        binary = np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=bool)
        return ModelArrays(c, A, row_lo, row_hi, lb, ub, binary, sign, self.objective_constant)

    def objective_value(self, x: np.ndarray) -> float:
        return self.objective_constant + sum(a * x[j] for j, a in self.objective.items())

    def max_violation(self, x: np.ndarray, scaled: bool = True) -> float:
        """Largest bound or row violation of ``x``; rows optionally scaled by their max |coef|."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for j, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[j], x[j] - v.ub)
        for r in self.constraints:
            act = float(r.coefs @ x[r.indices]) if len(r.indices) else 0.0
            scale = max(1.0, float(np.max(np.abs(r.coefs)))) if (scaled and len(r.coefs)) else 1.0
            if r.sense is Sense.LE:
                viol = act - r.rhs
            elif r.sense is Sense.GE:
                viol = r.rhs - act
            else:
                viol = abs(act - r.rhs)
            worst = max(worst, viol / scale)
        return max(worst, 0.0)

    def copy(self) -> "Model":
        other = Model(self.name)
        other.variables = [Variable(v.name, v.lb, v.ub, v.kind) for v in self.variables]
        other.constraints = [Constraint(r.indices.copy(), r.coefs.copy(), r.sense, r.rhs, r.name)
                             for r in self.constraints]
        other.objective = dict(self.objective)
        other.objective_constant = self.objective_constant
        other.maximize = self.maximize
        other.sos2_groups = [list(g) for g in self.sos2_groups]
        other._names = dict(self._names)
        other._row_names = dict(self._row_names)
        return other

    def summary(self) -> dict:
        return {"rows": self.n_cons, "columns": self.n_vars, "binaries": self.n_binaries}


def encode_sos2(model: Model, group: list[int], prefix: str | None = None) -> Model:
    """Restrict ``group`` to SOS2 points with one binary per adjacent pair.

    Adds ``z_g`` for each segment with ``sum z = 1`` and
    ``lam_g <= z_{g-1} + z_g`` (truncated at both ends). The caller supplies
    the convexity row ``sum lam = 1``. Mutates and returns ``model``.
    """
    group = [int(j) for j in group]
    if len(group) < 2:
        raise ModelError(f"SOS2 group needs at least 2 members, got {len(group)}")
    for j in group:
        v = model.variables[j]
        if v.kind is not VarKind.CONTINUOUS or v.lb < 0 or v.ub > 1:
            raise ModelError(f"SOS2 member {v.name!r} must be continuous within [0, 1]")
    members = set(group)
    for g in model.sos2_groups:
        if members.intersection(g):
            raise ModelError("variable already belongs to an SOS2 group")
    prefix = prefix or f"sos{len(model.sos2_groups)}"
    segs = [model.add_var(f"{prefix}_z{s}", 0, 1, VarKind.BINARY) for s in range(len(group) - 1)]
    model.add_constraint({z: 1.0 for z in segs}, Sense.EQ, 1.0, name=f"{prefix}_onesegment")
    for g, lam in enumerate(group):
        terms = [(lam, 1.0)]
        if g > 0:
            terms.append((segs[g - 1], -1.0))
        if g < len(segs):
            terms.append((segs[g], -1.0))
        model.add_constraint(terms, Sense.LE, 0.0, name=f"{prefix}_adj{g}")
    model.sos2_groups.append(group)
    return model
