"""Two-stage robust solution loop: master problem over accumulated
uncertainty points, feasibility subproblem (dualized bilinear MILP or a
vertex-enumeration oracle), convergence bookkeeping, and a post-hoc
robustness audit.

The subproblem measures, for the worst uncertainty realization in the box,
the minimal total slack needed on the PV-pinning, recourse-cost, balance,
and solar-storage rows (everything else is hard). The inner LP's value is
convex in the realization, so the maximum sits at a box vertex; the dual
MILP substitutes vertex coordinates eps_i = u_i (2 w_i - 1) with binary
w_i and linearizes the products w_i * lambda exactly via McCormick rows.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import CG_MAX_ITERATIONS, ENUM_MAX_DIMENSION, MIP_GAP, OMEGA_TOL
from .engine import SolveResult, solve_lp, solve_milp
from .formulation import (DEFAULT_SEGMENTS, CommitmentPlan, DispatchSchedule,
                          WcTemplate, assemble_master,
                          build_worst_case_template, extract_schedule,
                          first_stage_values, piecewise_linearize_cost)
from .model import INF, MilpProblem, VariableIndex
from .scenario import (Scenario, UncertaintyBox, UncertaintyRealization,
                       build_uncertainty_box)


class CgError(RuntimeError):
    pass


@dataclass
class CgConfig:
    tol_omega: float = OMEGA_TOL
    max_iterations: int = CG_MAX_ITERATIONS
    n_segments: int = DEFAULT_SEGMENTS
    include_subhourly: bool = True
    robust: bool = True              # False: deterministic model, no subproblem
    fix_zero_reserves: bool = False
    constancy_all_hours: bool = False
    engine: str = "auto"
    gap: float = MIP_GAP
    oracle: bool = False             # subproblem by vertex enumeration
    oracle_cross_check: bool = False # run both subproblems, record both


@dataclass
class SubproblemResult:
    omega: float
    realization: UncertaintyRealization
    lambdas: dict[str, float]
    mus: dict[str, float]
    lp_solves: int = 0


@dataclass
class CgIteration:
    iteration: int
    master_objective: float
    omega: float
    point_id: int        # -1 when no point was generated
    wall_time: float
    omega_oracle: float = math.nan


@dataclass
class CgTrace:
    iterations: list[CgIteration] = field(default_factory=list)
    status: str = "converged"


@dataclass
class CgResult:
    plan: CommitmentPlan
    schedule: DispatchSchedule
    trace: CgTrace
    points: list[UncertaintyRealization]
    master_result: SolveResult
    master_problem: MilpProblem
    master_idx: VariableIndex
    scenario: Scenario
    config: CgConfig

    @property
    def objective(self) -> float:
        return self.master_result.objective

    @property
    def converged(self) -> bool:
        return self.trace.status == "converged"


# ---------------------------------------------------------------------------
# split-row view of the worst-case template
# ---------------------------------------------------------------------------

@dataclass
class _SplitRow:
    name: str
    rec: dict[tuple, float]
    eps: dict[tuple, float]
    rhs: float               # first stage already folded in
    d1: bool


def _split_rows(s: Scenario, template: WcTemplate,
                fs_values: dict[tuple, float]) -> list[_SplitRow]:
    """All template rows plus recourse-variable bounds as <= rows with the
    first stage folded into the rhs."""
    out: list[_SplitRow] = []
    for r in template.rows:
        rhs = template.fold_first_stage(r, fs_values)
        if r.sense in ("<=", "="):
            out.append(_SplitRow(r.name + "_le", dict(r.rec), dict(r.eps),
                                 rhs, r.d1))
        if r.sense in (">=", "="):
            neg_rec = {k: -c for k, c in r.rec.items()}
            neg_eps = {k: -c for k, c in r.eps.items()}
            out.append(_SplitRow(r.name + "_ge", neg_rec, neg_eps, -rhs, r.d1))
    for key, (lb, ub, _tag) in template.rec_bounds.items():
        name = "_".join(str(k) for k in key)
        if math.isfinite(ub):
            out.append(_SplitRow(f"bound_hi_{name}", {key: 1.0}, {}, ub, False))
        if math.isfinite(lb):
            out.append(_SplitRow(f"bound_lo_{name}", {key: -1.0}, {}, -lb,
                                 False))
    return out


def _recourse_slack_lp(s: Scenario, rows: list[_SplitRow],
                       eps: UncertaintyRealization) -> MilpProblem:
    """min total slack over the d1 rows at a fixed realization."""
    p = MilpProblem(name="recourse_slack")
    idx: dict[tuple, int] = {}

    def rec(key: tuple) -> int:
        if key not in idx:
            idx[key] = p.add_variable("_".join(str(k) for k in key),
                                      lb=-INF, ub=INF)
        return idx[key]

    for i, r in enumerate(rows):
        coeffs = {rec(k): c for k, c in r.rec.items()}
        rhs = r.rhs - sum(c * eps.value(k) for k, c in r.eps.items())
        if r.d1:
            sid = p.add_variable(f"slack_{i}", lb=0.0)
            p.add_objective_term(sid, 1.0)
            coeffs[sid] = -1.0
        p.add_constraint(r.name, coeffs, "<=", rhs)
    return p


def evaluate_realization(s: Scenario, template: WcTemplate,
                         fs_values: dict[tuple, float],
                         eps: UncertaintyRealization,
                         engine: str = "auto") -> float:
    """Minimal recourse slack at one realization (0 means fully absorbed)."""
    rows = _split_rows(s, template, fs_values)
    lp = _recourse_slack_lp(s, rows, eps)
    res = solve_lp(lp, backend=engine)
    if res.status != "optimal":
        raise CgError(f"recourse slack LP ended {res.status}")
    return max(0.0, res.objective)


# ---------------------------------------------------------------------------
# subproblems
# ---------------------------------------------------------------------------

def solve_subproblem_vertex_enum(s: Scenario, fs_values: dict[tuple, float],
                                 box: UncertaintyBox,
                                 template: WcTemplate | None = None,
                                 engine: str = "auto") -> SubproblemResult:
    """Oracle: evaluate the slack LP at every vertex of the box (ambient
    coordinates, so zero-width coordinates contribute a double visit)."""
    n_pv, T = len(s.pv_units), s.n_hours
    coords = ([("pv", p, t) for p in range(n_pv) for t in s.hours]
              + [("ld", t) for t in s.hours])
    if len(coords) > ENUM_MAX_DIMENSION:
        raise CgError(f"enumeration dimension {len(coords)} exceeds "
                      f"{ENUM_MAX_DIMENSION}")
    template = template or build_worst_case_template(
        s, constancy_all_hours=False)
    rows = _split_rows(s, template, fs_values)
    best = -math.inf
    best_eps = UncertaintyRealization.zero(n_pv, T)
    solves = 0
    for mask in range(1 << len(coords)):
        values = {key: (box.width(key) if (mask >> i) & 1 else -box.width(key))
                  for i, key in enumerate(coords)}
        eps = UncertaintyRealization.from_coords(box, values, n_pv, T)
        lp = _recourse_slack_lp(s, rows, eps)
        res = solve_lp(lp, backend=engine)
        solves += 1
        if res.status != "optimal":
            raise CgError(f"inner LP ended {res.status} at vertex {mask}")
        if res.objective > best + 1e-12:
            best = res.objective
            best_eps = eps
    return SubproblemResult(max(0.0, best), best_eps, {}, {}, lp_solves=solves)


def solve_subproblem_dual(s: Scenario, fs_values: dict[tuple, float],
                          box: UncertaintyBox,
                          template: WcTemplate | None = None,
                          engine: str = "auto",
                          gap: float = 1e-9) -> SubproblemResult:
    """Dualized max-min as one MILP: lambda per slack row in [-1, 0], mu per
    hard row <= 0, stationarity over recourse variables, and exact McCormick
    products for the vertex substitution."""
    template = template or build_worst_case_template(
        s, constancy_all_hours=False)
    rows = _split_rows(s, template, fs_values)
    coords = box.coordinates()      # only nonzero widths need w variables

    p = MilpProblem(name="subproblem_dual")
    lam_ids: dict[int, int] = {}
    mu_ids: dict[int, int] = {}
    for i, r in enumerate(rows):
        if r.d1:
            lam_ids[i] = p.add_variable(f"lam_{r.name}", lb=-1.0, ub=0.0)
        else:
            mu_ids[i] = p.add_variable(f"mu_{r.name}", lb=-INF, ub=0.0)
    # stationarity: columns of the recourse variables
    cols: dict[tuple, dict[int, float]] = {}
    for i, r in enumerate(rows):
        did = lam_ids.get(i, mu_ids.get(i))
        for key, coef in r.rec.items():
            cols.setdefault(key, {})[did] = coef
    for key, coeffs in sorted(cols.items(), key=lambda kv: repr(kv[0])):
        p.add_constraint("stat_" + "_".join(str(k) for k in key), coeffs,
                         "=", 0.0)

    # objective: max sum rhs_r * dual_r - sum_i u_i (2 p_i - q_i)
    for i, r in enumerate(rows):
        p.add_objective_term(lam_ids.get(i, mu_ids.get(i)), -r.rhs)
    w_ids, q_ids = {}, {}
    for key in coords:
        u = box.width(key)
        name = "_".join(str(k) for k in key)
        w = p.add_variable(f"w_{name}", lb=0.0, ub=1.0, is_integer=True)
        # q = sum of eps coefficients times lambda over the rows touching key
        terms: dict[int, float] = {}
        qmin = qmax = 0.0
        for i, r in enumerate(rows):
            coef = r.eps.get(key, 0.0)
            if coef and i in lam_ids:
                terms[lam_ids[i]] = terms.get(lam_ids[i], 0.0) + coef
                qmin += min(0.0, -coef)
                qmax += max(0.0, -coef)
            elif coef:
                raise CgError(f"uncertainty coefficient on hard row {r.name}")
        q = p.add_variable(f"q_{name}", lb=qmin, ub=qmax)
        pid = p.add_variable(f"p_{name}", lb=min(qmin, 0.0), ub=max(qmax, 0.0))
        terms[q] = -1.0
        p.add_constraint(f"qdef_{name}", terms, "=", 0.0)
        # exact envelope of p = w * q for binary w
        p.add_constraint(f"mc1_{name}", {pid: 1.0, q: -1.0, w: -qmin}, "<=",
                         -qmin)
        p.add_constraint(f"mc2_{name}", {pid: 1.0, q: -1.0, w: -qmax}, ">=",
                         -qmax)
        p.add_constraint(f"mc3_{name}", {pid: 1.0, w: -qmax}, "<=", 0.0)
        p.add_constraint(f"mc4_{name}", {pid: 1.0, w: -qmin}, ">=", 0.0)
        p.add_objective_term(pid, 2.0 * u)
        p.add_objective_term(q, -u)
        w_ids[key] = w
        q_ids[key] = q

    res = solve_milp(p, gap=gap, backend=engine)
    if res.status != "optimal":
        d1 = sum(1 for r in rows if r.d1)
        raise CgError(
            f"dual subproblem ended {res.status}: formulation bug suspected "
            f"({d1} slack rows, {len(rows) - d1} hard rows, "
            f"{len(coords)} box coordinates)")
    omega = -res.objective
    values = {key: (box.width(key) if res.primal[w_ids[key]] > 0.5
                    else -box.width(key)) for key in coords}
    eps = UncertaintyRealization.from_coords(box, values, len(s.pv_units),
                                             s.n_hours)
    lambdas = {rows[i].name: float(res.primal[vid])
               for i, vid in lam_ids.items()}
    mus = {rows[i].name: float(res.primal[vid]) for i, vid in mu_ids.items()}
    return SubproblemResult(max(0.0, omega), eps, lambdas, mus, lp_solves=1)


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def first_stage_from_schedule(s: Scenario, plan: CommitmentPlan,
                              sched: DispatchSchedule) -> dict[tuple, float]:
    vals: dict[tuple, float] = {}
    for g in range(len(s.thermal_units)):
        for t in s.hours:
            vals[("I", g, t)] = float(plan.thermal_on[g][t - 1])
            vals[("P", g, t)] = sched.thermal_power[g][t - 1]
            vals[("RU", g, t)] = sched.reserve_up[g][t - 1]
            vals[("RD", g, t)] = sched.reserve_down[g][t - 1]
    for pu in range(len(s.pv_units)):
        for t in s.hours:
            vals[("PPV", pu, t)] = sched.pv_power[pu][t - 1]
    for b in range(len(s.bess_units)):
        for t in s.hours:
            vals[("IDIS", b, t)] = float(plan.bess_discharge_mode[b][t - 1])
            vals[("IC", b, t)] = float(plan.bess_charge_mode[b][t - 1])
            vals[("PDIS", b, t)] = sched.bess_discharge[b][t - 1]
            vals[("PC", b, t)] = sched.bess_charge[b][t - 1]
            vals[("RUDIS", b, t)] = sched.bess_reserve_dis[b][t - 1]
            vals[("RUC", b, t)] = sched.bess_reserve_ch[b][t - 1]
    for t in s.hours:
        vals[("ZT", t)] = sched.recourse_bound[t - 1]
    return vals


def cg_solve(s: Scenario, config: CgConfig | None = None) -> CgResult:
    """Alternate master solves with feasibility subproblems until the worst
    remaining slack is at most tol_omega (or the iteration cap hits)."""
    config = config or CgConfig()
    box = build_uncertainty_box(s)
    template = build_worst_case_template(
        s, constancy_all_hours=config.constancy_all_hours)
    points: list[UncertaintyRealization] = []
    trace = CgTrace()
    degenerate_box = not box.coordinates()

    for iteration in range(1, config.max_iterations + 1):
        t0 = time.monotonic()
        problem, idx = assemble_master(
            s, points, n_segments=config.n_segments,
            include_subhourly=config.include_subhourly,
            fix_zero_reserves=config.fix_zero_reserves,
            constancy_all_hours=config.constancy_all_hours)
        res = solve_milp(problem, gap=config.gap, backend=config.engine)
        if res.status != "optimal":
            raise CgError(f"master problem ended {res.status} at iteration "
                          f"{iteration}")
        if not config.robust or degenerate_box:
            trace.iterations.append(CgIteration(
                iteration, res.objective, 0.0, -1,
                time.monotonic() - t0))
            trace.status = "converged"
            break
        fs_vals = first_stage_values(s, idx, res.primal, template)
        if config.oracle:
            sp = solve_subproblem_vertex_enum(s, fs_vals, box, template,
                                              engine=config.engine)
        else:
            sp = solve_subproblem_dual(s, fs_vals, box, template,
                                       engine=config.engine)
        omega_oracle = math.nan
        if config.oracle_cross_check and not config.oracle:
            omega_oracle = solve_subproblem_vertex_enum(
                s, fs_vals, box, template, engine=config.engine).omega
        converged = sp.omega <= config.tol_omega
        point_id = -1 if converged else len(points)
        trace.iterations.append(CgIteration(
            iteration, res.objective, sp.omega, point_id,
            time.monotonic() - t0, omega_oracle))
        if converged:
            trace.status = "converged"
            break
        points.append(sp.realization)
    else:
        trace.status = "iteration_cap"

    plan, sched = extract_schedule(s, res, idx, n_segments=config.n_segments,
                                   include_subhourly=config.include_subhourly)
    return CgResult(plan=plan, schedule=sched, trace=trace, points=points,
                    master_result=res, master_problem=problem, master_idx=idx,
                    scenario=s, config=config)


def audit_robustness(s: Scenario, plan: CommitmentPlan,
                     sched: DispatchSchedule, n_samples: int = 100,
                     seed: int = 0, engine: str = "auto",
                     constancy_all_hours: bool = False) -> float:
    """Max recourse slack over n_samples random box vertices plus every
    single-coordinate extreme (one coordinate at +-u, the rest zero)."""
    box = build_uncertainty_box(s)
    template = build_worst_case_template(
        s, constancy_all_hours=constancy_all_hours)
    fs_vals = first_stage_from_schedule(s, plan, sched)
    rows = _split_rows(s, template, fs_values=fs_vals)
    coords = box.coordinates()
    n_pv, T = len(s.pv_units), s.n_hours
    worst = 0.0
    rng = np.random.default_rng(seed)

    def evaluate(eps: UncertaintyRealization) -> float:
        lp = _recourse_slack_lp(s, rows, eps)
        res = solve_lp(lp, backend=engine)
        if res.status != "optimal":
            raise CgError(f"audit LP ended {res.status}")
        return max(0.0, res.objective)

    for key in coords:
        for sign in (1.0, -1.0):
            eps = UncertaintyRealization.from_coords(
                box, {key: sign * box.width(key)}, n_pv, T)
            worst = max(worst, evaluate(eps))
    for _ in range(n_samples):
        signs = rng.integers(0, 2, size=len(coords))
        values = {key: (box.width(key) if signs[i] else -box.width(key))
                  for i, key in enumerate(coords)}
        worst = max(worst, evaluate(
            UncertaintyRealization.from_coords(box, values, n_pv, T)))
    return worst


# ---------------------------------------------------------------------------
# worst-case dispatch for reporting
# ---------------------------------------------------------------------------

@dataclass
class WorstCaseDispatch:
    thermal_cost: float          # piecewise energy + commitment + start/stop
    bess_cost: float             # charge/discharge throughput cost
    exchange_cost: float
    curtailment_cost: float
    values: dict[tuple, float]


def stress_vertex(s: Scenario) -> UncertaintyRealization:
    """Canonical reporting vertex: every coordinate at +u (PV above
    forecast, load above forecast)."""
    box = build_uncertainty_box(s)
    values = {key: box.width(key) for key in box.coordinates()}
    return UncertaintyRealization.from_coords(box, values, len(s.pv_units),
                                              s.n_hours)


def solve_worst_case_dispatch(s: Scenario, plan: CommitmentPlan,
                              sched: DispatchSchedule,
                              eps: UncertaintyRealization,
                              n_segments: int = DEFAULT_SEGMENTS,
                              engine: str = "auto") -> WorstCaseDispatch:
    """Minimum-operating-cost recourse at a fixed realization, with the
    first stage held at the given plan/schedule. Used for the worst-case
    cost columns of the reports.

    The dispatch objective mirrors the hourly cost structure of the master
    (thermal fuel, exchange, curtailment; hourly BESS throughput carries no
    direct cost there), so the recourse reproduces whatever battery cycling
    the base case runs. Reported BESS cost is the throughput priced at the
    unit's charge/discharge prices, accounting-style."""
    template = build_worst_case_template(s, constancy_all_hours=False)
    fs_vals = first_stage_from_schedule(s, plan, sched)
    rows = _split_rows(s, template, fs_values=fs_vals)
    pw = [piecewise_linearize_cost(u, n_segments) for u in s.thermal_units]

    p = MilpProblem(name="worst_case_dispatch")
    ids: dict[tuple, int] = {}

    def rec(key: tuple) -> int:
        if key not in ids:
            ids[key] = p.add_variable("_".join(str(k) for k in key),
                                      lb=-INF, ub=INF)
        return ids[key]

    for r in rows:
        coeffs = {rec(k): c for k, c in r.rec.items()}
        rhs = r.rhs - sum(c * eps.value(k) for k, c in r.eps.items())
        p.add_constraint(r.name, coeffs, "<=", rhs)
    # operating-cost objective over the recourse copies
    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            on = plan.thermal_on[g][t - 1]
            if not on:
                continue
            seg_ids = []
            for k in range(len(pw[g].slopes)):
                sid = p.add_variable(f"wseg_{g}_{t}_{k}", lb=0.0,
                                     ub=pw[g].widths[k])
                p.add_objective_term(sid, pw[g].slopes[k])
                seg_ids.append(sid)
            coeffs = {rec(("WP", g, t)): 1.0}
            for sid in seg_ids:
                coeffs[sid] = -1.0
            p.add_constraint(f"wpw_{g}_{t}", coeffs, "=", u.p_min)
    for b in range(len(s.bess_units)):
        for t in s.hours:
            rec(("WPDIS", b, t))
            rec(("WPC", b, t))
    for t in s.hours:
        imp = p.add_variable(f"wexi_{t}", lb=0.0)
        exp = p.add_variable(f"wexe_{t}", lb=0.0)
        p.add_objective_term(imp, s.grid.exchange_price)
        p.add_objective_term(exp, s.grid.exchange_price)
        p.add_constraint(f"wex_split_{t}",
                         {rec(("WPEX", t)): 1.0, imp: -1.0, exp: 1.0}, "=", 0.0)
        p.add_objective_term(rec(("WLC", t)), s.curtailment_price)
    res = solve_lp(p, backend=engine)
    if res.status != "optimal":
        raise CgError(f"worst-case dispatch LP ended {res.status} "
                      "(was the plan produced by a converged robust run?)")
    x = res.primal
    thermal = 0.0
    for g, u in enumerate(s.thermal_units):
        for t in s.hours:
            if plan.thermal_on[g][t - 1]:
                thermal += pw[g].value(x[ids[("WP", g, t)]])
            thermal += (u.su_cost * plan.thermal_start[g][t - 1]
                        + u.sd_cost * plan.thermal_stop[g][t - 1])
    bess = sum(bu.discharge_price * x[ids[("WPDIS", b, t)]]
               + bu.charge_price * x[ids[("WPC", b, t)]]
               for b, bu in enumerate(s.bess_units) for t in s.hours)
    exch = sum(s.grid.exchange_price * abs(x[ids[("WPEX", t)]])
               for t in s.hours)
    curt = sum(s.curtailment_price * x[ids[("WLC", t)]] for t in s.hours)
    values = {key: float(x[v]) for key, v in ids.items()}
    return WorstCaseDispatch(thermal, bess, exch, curt, values)
