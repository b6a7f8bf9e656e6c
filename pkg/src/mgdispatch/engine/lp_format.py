"""LP text interchange format: deterministic writer and a matching parser.

The dialect is the widely used CPLEX-style LP file: Minimize / Subject To /
Bounds / Binaries / Generals / End. Variable names are the model's own
names. The writer is byte-deterministic for a given model; the parser reads
back everything the writer emits (constraint tags are not serialized).
"""

from __future__ import annotations

import math
import re

from ..model import INF, MilpProblem


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _term(coef: float, name: str, lead: bool) -> str:
    sign = "-" if coef < 0 else ("" if lead else "+")
    mag = abs(coef)
    return f"{sign} {_num(mag)} {name}" if not lead else f"{sign}{_num(mag)} {name}"


def _expr(coeffs: dict[int, float], names: list[str], const: float = 0.0) -> str:
    parts = []
    first = True
    for j in sorted(coeffs):
        coef = coeffs[j]
        if coef == 0.0:
            continue
        parts.append(_term(coef, names[j], first))
        first = False
    if const != 0.0 or not parts:
        sign = "-" if const < 0 else ("" if first else "+")
        parts.append(f"{sign}{_num(abs(const))}" if first
                     else f"{sign} {_num(abs(const))}")
    return " ".join(parts)


def write_lp(problem: MilpProblem, path: str) -> None:
    names = [v.name for v in problem.variables]
    lines = [f"\\ {problem.name}", "Minimize",
             f" obj: {_expr(problem.objective, names, problem.objective_constant)}"]
    lines.append("Subject To")
    for i, con in enumerate(problem.constraints):
        op = {"<=": "<=", "=": "=", ">=": ">="}[con.sense]
        name = con.name or f"c{i}"
        lines.append(f" {name}: {_expr(con.coeffs, names)} {op} {_num(con.rhs)}")
    lines.append("Bounds")
    for v in problem.variables:
        lo_inf, hi_inf = not math.isfinite(v.lb), not math.isfinite(v.ub)
        if lo_inf and hi_inf:
            lines.append(f" {v.name} free")
        elif v.lb == v.ub:
            lines.append(f" {v.name} = {_num(v.lb)}")
        else:
            lo = "-inf" if lo_inf else _num(v.lb)
            hi = "+inf" if hi_inf else _num(v.ub)
            lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = [v.name for v in problem.variables
                if v.is_integer and v.lb == 0.0 and v.ub == 1.0]
    generals = [v.name for v in problem.variables
                if v.is_integer and not (v.lb == 0.0 and v.ub == 1.0)]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_TOKEN = re.compile(r"(<=|>=|=|\+|-|\[|\]|[A-Za-z_][A-Za-z0-9_.]*"
                    r"|[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|:)")


class LpParseError(ValueError):
    pass


def _parse_terms(tokens: list[str]) -> tuple[dict[str, float], float]:
    """Linear expression tokens -> (name coefficients, constant)."""
    coeffs: dict[str, float] = {}
    const = 0.0
    sign = 1.0
    pending: float | None = None
    for tok in tokens:
        if tok == "+":
            if pending is not None:
                const += sign * pending
                pending = None
            sign = 1.0
        elif tok == "-":
            if pending is not None:
                const += sign * pending
                pending = None
            sign = -1.0
        elif re.fullmatch(r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?", tok):
            if pending is not None:
                const += sign * pending
            pending = float(tok)
        else:
            coef = sign * (pending if pending is not None else 1.0)
            coeffs[tok] = coeffs.get(tok, 0.0) + coef
            pending = None
            sign = 1.0
    if pending is not None:
        const += sign * pending
    return coeffs, const


def parse_lp(path: str) -> MilpProblem:
    with open(path) as fh:
        raw = fh.read()
    lines = []
    for line in raw.splitlines():
        line = line.split("\\")[0].strip()
        if line:
            lines.append(line)

    section = None
    obj_tokens: list[str] = []
    con_specs: list[tuple[str, list[str]]] = []
    bound_lines: list[str] = []
    binaries: list[str] = []
    generals: list[str] = []
    headers = {"minimize": "obj", "subject to": "cons", "subject": "cons",
               "st": "cons", "s.t.": "cons", "bounds": "bounds",
               "binaries": "bin", "binary": "bin", "generals": "gen",
               "general": "gen", "end": "end"}
    for line in lines:
        low = line.lower()
        if low in headers:
            section = headers[low]
            continue
        if low.startswith("subject to"):
            section = "cons"
            rest = line[len("subject to"):].strip()
            if rest:
                con_specs.append(_split_named(rest))
            continue
        if section == "obj":
            body = line.split(":", 1)[1] if ":" in line else line
            obj_tokens.extend(_TOKEN.findall(body))
        elif section == "cons":
            con_specs.append(_split_named(line))
        elif section == "bounds":
            bound_lines.append(line)
        elif section == "bin":
            binaries.extend(line.split())
        elif section == "gen":
            generals.extend(line.split())
        elif section == "end":
            pass
        elif section is None:
            raise LpParseError(f"content before a section header: {line!r}")

    problem = MilpProblem(name="parsed")
    ids: dict[str, int] = {}

    def var(name: str) -> int:
        if name not in ids:
            ids[name] = problem.add_variable(name)
        return ids[name]

    obj_coeffs, obj_const = _parse_terms(obj_tokens)
    for name, coef in obj_coeffs.items():
        problem.add_objective_term(var(name), coef)
    problem.objective_constant = obj_const

    for name, tokens in con_specs:
        op_idx = next((k for k, t in enumerate(tokens) if t in ("<=", ">=", "=")),
                      None)
        if op_idx is None:
            raise LpParseError(f"constraint without relational operator: {name}")
        lhs, rhs_tokens = tokens[:op_idx], tokens[op_idx + 1:]
        coeffs, const = _parse_terms(lhs)
        rcoeffs, rconst = _parse_terms(rhs_tokens)
        if rcoeffs:
            raise LpParseError(f"variables on the rhs of {name}")
        problem.add_constraint(name,
                               {var(n): c for n, c in coeffs.items()},
                               tokens[op_idx], rconst - const)

    for line in bound_lines:
        _apply_bound(line, problem, var)

    for name in binaries:
        j = var(name)
        problem.variables[j].is_integer = True
        problem.variables[j].lb = max(problem.variables[j].lb, 0.0)
        problem.variables[j].ub = min(problem.variables[j].ub, 1.0)
    for name in generals:
        problem.variables[var(name)].is_integer = True
    return problem


def _split_named(line: str) -> tuple[str, list[str]]:
    if ":" in line:
        name, body = line.split(":", 1)
        return name.strip(), _TOKEN.findall(body)
    return "", _TOKEN.findall(line)


_BOUND_NUM = r"[+-]?(?:inf|[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)"


def _to_float(tok: str) -> float:
    t = tok.strip().lower()
    if t in ("inf", "+inf"):
        return INF
    if t == "-inf":
        return -INF
    return float(tok)


def _apply_bound(line: str, problem: MilpProblem, var) -> None:
    low = line.strip()
    m = re.fullmatch(rf"({_BOUND_NUM})\s*<=\s*(\w[\w.]*)\s*<=\s*({_BOUND_NUM})",
                     low)
    if m:
        j = var(m.group(2))
        problem.variables[j].lb = _to_float(m.group(1))
        problem.variables[j].ub = _to_float(m.group(3))
        return
    m = re.fullmatch(rf"(\w[\w.]*)\s*<=\s*({_BOUND_NUM})", low)
    if m:
        problem.variables[var(m.group(1))].ub = _to_float(m.group(2))
        return
    m = re.fullmatch(rf"(\w[\w.]*)\s*>=\s*({_BOUND_NUM})", low)
    if m:
        problem.variables[var(m.group(1))].lb = _to_float(m.group(2))
        return
    m = re.fullmatch(rf"(\w[\w.]*)\s*=\s*({_BOUND_NUM})", low)
    if m:
        j = var(m.group(1))
        problem.variables[j].lb = _to_float(m.group(2))
        problem.variables[j].ub = _to_float(m.group(2))
        return
    m = re.fullmatch(r"(\w[\w.]*)\s+free", low, flags=re.IGNORECASE)
    if m:
        j = var(m.group(1))
        problem.variables[j].lb = -INF
        problem.variables[j].ub = INF
        return
    raise LpParseError(f"cannot parse bound line: {line!r}")
