"""Domain data model: units, profiles, scenarios, uncertainty boxes.

All types are frozen dataclasses; hours are 1-indexed (t = 1..n_hours) in
every public interface, sub-hourly slots are 1-indexed (d = 1..n_seg).
Powers are kW, energies kWh, prices $ per kWh or $ per kW.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable


@dataclass(frozen=True)
class Violation:
    """One failed invariant: dotted field path, message, offending value."""

    field: str
    message: str
    value: object

    def __str__(self) -> str:
        return f"{self.field}: {self.message} (got {self.value!r})"


class ScenarioValidationError(ValueError):
    """Raised by validate_scenario with the complete list of violations."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"{len(violations)} invariant violation(s): {lines}")


@dataclass(frozen=True)
class ThermalUnit:
    name: str
    a: float                 # $ fixed cost while committed
    b: float                 # $/kWh linear cost
    c: float                 # $/kWh^2 quadratic cost
    p_min: float             # kW
    p_max: float             # kW
    ramp_up: float           # kW/h
    ramp_down: float         # kW/h
    t_on: int                # minimum on time, hours
    t_off: int               # minimum off time, hours
    su_cost: float           # $
    sd_cost: float           # $
    reserve_price: float     # $/kW
    init_status: str         # "on" | "off"
    init_hours: int          # hours already spent in init_status
    init_power: float        # kW at t = 0


@dataclass(frozen=True)
class BessUnit:
    name: str
    e_min: float             # kWh
    e_max: float             # kWh
    e_cap: float             # kWh nameplate
    e_init: float            # kWh at t = 0
    p_charge_max: float      # kW
    p_discharge_max: float   # kW
    eta_c: float             # charging efficiency in (0, 1]
    eta_dis: float           # discharging efficiency in (0, 1]
    charge_price: float      # $/kWh
    discharge_price: float   # $/kWh
    reserve_price: float     # $/kW


@dataclass(frozen=True)
class Profile:
    """Hourly series plus the sub-hourly series it refines.

    hourly[t-1] is the value for hour t; sub_hourly[t-1][d-1] the value for
    slot d of hour t.
    """

    hourly: tuple[float, ...]
    sub_hourly: tuple[tuple[float, ...], ...]

    def hourly_at(self, t: int) -> float:
        return self.hourly[t - 1]

    def sub_at(self, t: int, d: int) -> float:
        return self.sub_hourly[t - 1][d - 1]


@dataclass(frozen=True)
class GridInterface:
    p_ex_max: float          # kW
    k_ex: float              # hourly exchange ramp fraction in [0, 1]
    exchange_price: float    # $/kWh
    connected: bool          # I_ex


@dataclass(frozen=True)
class Scenario:
    thermal_units: tuple[ThermalUnit, ...]
    bess_units: tuple[BessUnit, ...]
    pv_units: tuple[Profile, ...]
    load: Profile
    critical_load_fraction: float
    grid: GridInterface
    curtailment_price: float
    n_hours: int
    sub_step_minutes: int
    alpha: float
    beta: float
    name: str = "scenario"

    @property
    def n_seg(self) -> int:
        return 60 // self.sub_step_minutes

    @property
    def delta_h(self) -> float:
        """Sub-hourly step length in hours."""
        return self.sub_step_minutes / 60.0

    @property
    def hours(self) -> range:
        return range(1, self.n_hours + 1)

    @property
    def segs(self) -> range:
        return range(1, self.n_seg + 1)

    def critical_load(self, t: int) -> float:
        return self.critical_load_fraction * self.load.hourly_at(t)

    def with_mode(self, connected: bool) -> "Scenario":
        return replace(self, grid=replace(self.grid, connected=connected))

    def with_rates(self, alpha: float, beta: float) -> "Scenario":
        return replace(self, alpha=alpha, beta=beta)


@dataclass(frozen=True)
class UncertaintyBox:
    """Per-coordinate half-widths: |eps| <= u, elementwise."""

    u_pv: tuple[tuple[float, ...], ...]   # [pv][t-1]
    u_ld: tuple[float, ...]               # [t-1]

    def coordinates(self) -> list[tuple]:
        """Coordinate keys with nonzero width, in deterministic order."""
        coords = []
        for p, series in enumerate(self.u_pv):
            for ti, u in enumerate(series):
                if u > 0.0:
                    coords.append(("pv", p, ti + 1))
        for ti, u in enumerate(self.u_ld):
            if u > 0.0:
                coords.append(("ld", ti + 1))
        return coords

    def width(self, key: tuple) -> float:
        if key[0] == "pv":
            return self.u_pv[key[1]][key[2] - 1]
        return self.u_ld[key[1] - 1]


@dataclass(frozen=True)
class UncertaintyRealization:
    """One point eps inside an UncertaintyBox."""

    eps_pv: tuple[tuple[float, ...], ...]
    eps_ld: tuple[float, ...]

    @staticmethod
    def zero(n_pv: int, n_hours: int) -> "UncertaintyRealization":
        z = tuple(0.0 for _ in range(n_hours))
        return UncertaintyRealization(tuple(z for _ in range(n_pv)), z)

    @staticmethod
    def from_coords(box: UncertaintyBox, values: dict[tuple, float],
                    n_pv: int, n_hours: int) -> "UncertaintyRealization":
        eps_pv = [[0.0] * n_hours for _ in range(n_pv)]
        eps_ld = [0.0] * n_hours
        for key, val in values.items():
            if key[0] == "pv":
                eps_pv[key[1]][key[2] - 1] = val
            else:
                eps_ld[key[1] - 1] = val
        return UncertaintyRealization(
            tuple(tuple(row) for row in eps_pv), tuple(eps_ld))

    def value(self, key: tuple) -> float:
        if key[0] == "pv":
            return self.eps_pv[key[1]][key[2] - 1]
        return self.eps_ld[key[1] - 1]

    def inside(self, box: UncertaintyBox, tol: float = 1e-9) -> bool:
        for p, series in enumerate(self.eps_pv):
            for ti, e in enumerate(series):
                if abs(e) > box.u_pv[p][ti] + tol:
                    return False
        return all(abs(e) <= box.u_ld[ti] + tol
                   for ti, e in enumerate(self.eps_ld))


def _check_profile(prefix: str, prof: Profile, n_hours: int, n_seg: int,
                   require_contiguous_window: bool,
                   out: list[Violation]) -> None:
    if len(prof.hourly) != n_hours:
        out.append(Violation(f"{prefix}.hourly", f"expected {n_hours} values",
                             len(prof.hourly)))
    if len(prof.sub_hourly) != n_hours:
        out.append(Violation(f"{prefix}.sub_hourly",
                             f"expected {n_hours} rows", len(prof.sub_hourly)))
    for ti, row in enumerate(prof.sub_hourly):
        if len(row) != n_seg:
            out.append(Violation(f"{prefix}.sub_hourly[{ti + 1}]",
                                 f"expected {n_seg} values", len(row)))
    for ti, v in enumerate(prof.hourly):
        if v < 0.0:
            out.append(Violation(f"{prefix}.hourly[{ti + 1}]",
                                 "must be >= 0", v))
    for ti, row in enumerate(prof.sub_hourly):
        for di, v in enumerate(row):
            if v < 0.0:
                out.append(Violation(
                    f"{prefix}.sub_hourly[{ti + 1}][{di + 1}]",
                    "must be >= 0", v))
    if require_contiguous_window and len(prof.hourly) == n_hours:
        active = [t for t in range(1, n_hours + 1) if prof.hourly[t - 1] > 0.0]
        if active and active != list(range(active[0], active[-1] + 1)):
            out.append(Violation(f"{prefix}.hourly",
                                 "active window (values > 0) must be one "
                                 "contiguous block of hours", active))


def list_violations(s: Scenario) -> list[Violation]:
    """Every violated invariant, with field paths; empty when valid."""
    out: list[Violation] = []

    if s.n_hours < 1:
        out.append(Violation("n_hours", "must be >= 1", s.n_hours))
    if s.sub_step_minutes < 1 or 60 % s.sub_step_minutes != 0:
        out.append(Violation("sub_step_minutes", "must divide 60",
                             s.sub_step_minutes))
    for rate, field in ((s.alpha, "alpha"), (s.beta, "beta")):
        if not 0.0 <= rate <= 1.0:
            out.append(Violation(field, "must be in [0, 1]", rate))
    if not 0.0 <= s.critical_load_fraction <= 1.0:
        out.append(Violation("critical_load_fraction", "must be in [0, 1]",
                             s.critical_load_fraction))
    if s.curtailment_price < 0.0:
        out.append(Violation("curtailment_price", "must be >= 0",
                             s.curtailment_price))

    g = s.grid
    if g.p_ex_max < 0.0:
        out.append(Violation("grid.p_ex_max", "must be >= 0", g.p_ex_max))
    if not 0.0 <= g.k_ex <= 1.0:
        out.append(Violation("grid.k_ex", "must be in [0, 1]", g.k_ex))

    for i, u in enumerate(s.thermal_units):
        pre = f"thermal_units[{i}].{u.name}" if u.name else f"thermal_units[{i}]"
        if not 0.0 <= u.p_min <= u.p_max:
            out.append(Violation(f"{pre}.p_min", "need 0 <= p_min <= p_max",
                                 (u.p_min, u.p_max)))
        if u.ramp_up <= 0.0:
            out.append(Violation(f"{pre}.ramp_up", "must be > 0", u.ramp_up))
        if u.ramp_down <= 0.0:
            out.append(Violation(f"{pre}.ramp_down", "must be > 0",
                                 u.ramp_down))
        if u.t_on < 1:
            out.append(Violation(f"{pre}.t_on", "must be >= 1", u.t_on))
        if u.t_off < 1:
            out.append(Violation(f"{pre}.t_off", "must be >= 1", u.t_off))
        if u.init_status not in ("on", "off"):
            out.append(Violation(f"{pre}.init_status", "must be 'on' or 'off'",
                                 u.init_status))
        if u.init_hours < 0:
            out.append(Violation(f"{pre}.init_hours", "must be >= 0",
                                 u.init_hours))
        if u.init_status == "on" and not (u.p_min <= u.init_power <= u.p_max):
            out.append(Violation(f"{pre}.init_power",
                                 "on units need p_min <= init_power <= p_max",
                                 u.init_power))

    for i, b in enumerate(s.bess_units):
        pre = f"bess_units[{i}].{b.name}" if b.name else f"bess_units[{i}]"
        if not 0.0 <= b.e_min <= b.e_init <= b.e_max <= b.e_cap:
            out.append(Violation(
                f"{pre}.e_init",
                "need 0 <= e_min <= e_init <= e_max <= e_cap",
                (b.e_min, b.e_init, b.e_max, b.e_cap)))
        for eta, field in ((b.eta_c, "eta_c"), (b.eta_dis, "eta_dis")):
            if not 0.0 < eta <= 1.0:
                out.append(Violation(f"{pre}.{field}", "must be in (0, 1]",
                                     eta))
        if b.p_charge_max < 0.0:
            out.append(Violation(f"{pre}.p_charge_max", "must be >= 0",
                                 b.p_charge_max))
        if b.p_discharge_max < 0.0:
            out.append(Violation(f"{pre}.p_discharge_max", "must be >= 0",
                                 b.p_discharge_max))

    n_seg = 60 // s.sub_step_minutes if 60 % s.sub_step_minutes == 0 else None
    if n_seg is not None:
        for p, prof in enumerate(s.pv_units):
            _check_profile(f"pv_units[{p}]", prof, s.n_hours, n_seg,
                           require_contiguous_window=True, out=out)
        _check_profile("load", s.load, s.n_hours, n_seg,
                       require_contiguous_window=False, out=out)
    return out


def validate_scenario(s: Scenario) -> Scenario:
    """Return s unchanged iff every invariant holds, else raise with all
    violations. Idempotent."""
    violations = list_violations(s)
    if violations:
        raise ScenarioValidationError(violations)
    return s


def build_uncertainty_box(s: Scenario) -> UncertaintyBox:
    """Half-widths u_pv = alpha * hourly PV forecast, u_ld = beta * load."""
    u_pv = tuple(tuple(s.alpha * v for v in prof.hourly)
                 for prof in s.pv_units)
    u_ld = tuple(s.beta * v for v in s.load.hourly)
    return UncertaintyBox(u_pv=u_pv, u_ld=u_ld)


def pv_active_hours(s: Scenario) -> set[int]:
    """Hours where the summed PV forecast is strictly positive."""
    return {t for t in s.hours
            if sum(prof.hourly_at(t) for prof in s.pv_units) > 0.0}


def total_pv_forecast(s: Scenario, t: int) -> float:
    return sum(prof.hourly_at(t) for prof in s.pv_units)


def iter_box_vertices(box: UncertaintyBox, n_pv: int, n_hours: int
                      ) -> Iterable[UncertaintyRealization]:
    """All 2**dim vertices of the box, in deterministic order."""
    coords = box.coordinates()
    for mask in range(1 << len(coords)):
        values = {key: (box.width(key) if (mask >> i) & 1 else -box.width(key))
                  for i, key in enumerate(coords)}
        yield UncertaintyRealization.from_coords(box, values, n_pv, n_hours)
