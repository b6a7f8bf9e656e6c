"""Generic linear model container shared by the formulation and the engine.

A MilpProblem is a plain list of bounded variables, tagged linear
constraints, and one linear minimization objective. Constraint tags record
which model equation emitted each row; bounds carry tags too when they
stand in for a whole equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

SENSES = ("<=", "=", ">=")

INF = math.inf


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    is_integer: bool = False
    tag: str = ""


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float
    tag: str = ""


class ModelError(ValueError):
    pass


@dataclass
class Arrays:
    """Dense/sparse view of a MilpProblem for the solvers."""

    c: np.ndarray
    obj_const: float
    A: sp.csr_matrix
    senses: np.ndarray        # 0: <=, 1: =, 2: >=
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    int_mask: np.ndarray


class MilpProblem:
    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant: float = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_cons(self) -> int:
        return len(self.constraints)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = INF,
                     is_integer: bool = False, tag: str = "") -> int:
        self.variables.append(Variable(name, lb, ub, is_integer, tag))
        return len(self.variables) - 1

    def add_constraint(self, name: str, coeffs: dict[int, float], sense: str,
                       rhs: float, tag: str = "") -> int:
        if sense not in SENSES:
            raise ModelError(f"bad sense {sense!r} for {name}")
        self.constraints.append(Constraint(name, dict(coeffs), sense, rhs, tag))
        return len(self.constraints) - 1

    def add_objective_term(self, var: int, coef: float) -> None:
        if coef != 0.0:
            self.objective[var] = self.objective.get(var, 0.0) + coef

    def set_bounds(self, var: int, lb: float, ub: float, tag: str = "") -> None:
        v = self.variables[var]
        v.lb, v.ub = lb, ub
        if tag:
            v.tag = tag

    def validate(self) -> None:
        """Structural invariants: coefficient references, integer bounds."""
        n = self.n_vars
        for con in self.constraints:
            for j in con.coeffs:
                if not 0 <= j < n:
                    raise ModelError(f"{con.name} references unknown var {j}")
        for j in self.objective:
            if not 0 <= j < n:
                raise ModelError(f"objective references unknown var {j}")
        for v in self.variables:
            if v.lb > v.ub:
                raise ModelError(f"{v.name}: lb {v.lb} > ub {v.ub}")
            if v.is_integer and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise ModelError(f"{v.name}: integer variables need finite bounds")

    def tags(self) -> set[str]:
        """Provenance tags on rows and on tagged bounds."""
        out = {c.tag for c in self.constraints if c.tag}
        out |= {v.tag for v in self.variables if v.tag}
        return out

    def objective_value(self, x: np.ndarray) -> float:
        return (sum(coef * x[j] for j, coef in self.objective.items())
                + self.objective_constant)

    def to_arrays(self) -> Arrays:
        n, m = self.n_vars, self.n_cons
        c = np.zeros(n)
        for j, coef in self.objective.items():
            c[j] = coef
        rows, cols, vals = [], [], []
        senses = np.zeros(m, dtype=np.int8)
        b = np.zeros(m)
        for i, con in enumerate(self.constraints):
            senses[i] = SENSES.index(con.sense)
            b[i] = con.rhs
            for j, coef in con.coeffs.items():
                if coef != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(coef)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        int_mask = np.array([v.is_integer for v in self.variables], dtype=bool)
        return Arrays(c=c, obj_const=self.objective_constant, A=A,
                      senses=senses, b=b, lb=lb, ub=ub, int_mask=int_mask)


class VariableIndex:
    """Bijection between structured symbol keys and model variable ids.

    Keys are tuples like ("P", g, t) or ("EH", b, t, d); the flattened name
    doubles as the LP-file identifier.
    """

    def __init__(self, problem: MilpProblem):
        self.problem = problem
        self._ids: dict[tuple, int] = {}
        self._keys: list[tuple] = []

    def add(self, key: tuple, lb: float = 0.0, ub: float = INF,
            is_integer: bool = False, tag: str = "") -> int:
        if key in self._ids:
            raise ModelError(f"duplicate variable key {key}")
        name = "_".join(str(k) for k in key)
        vid = self.problem.add_variable(name, lb, ub, is_integer, tag)
        self._ids[key] = vid
        self._keys.append(key)
        return vid

    def __getitem__(self, key: tuple) -> int:
        return self._ids[key]

    def __contains__(self, key: tuple) -> bool:
        return key in self._ids

    def get(self, key: tuple) -> int | None:
        return self._ids.get(key)

    def keys(self) -> list[tuple]:
        return list(self._keys)

    def value(self, x: np.ndarray, key: tuple) -> float:
        return float(x[self._ids[key]])
