"""Built-in study instances: the two-unit community-microgrid case and a
three-hour toy used by the solver-equivalence tests.

The desk case uses the published unit and price parameters; the grid
interface limit and the profiles themselves are not published, so the
profiles come from the synthetic generator and the exchange limit is set
to 1000 kW (tight enough that load uncertainty engages thermal reserves
in grid-connected mode).
"""

from __future__ import annotations

from .profiles import generate_synthetic_profiles
from .scenario import (BessUnit, GridInterface, Profile, Scenario,
                       ThermalUnit, validate_scenario)

DESK_PEAK_LOAD = 7000.0      # kW
DESK_PV_CAPACITY = 750.0     # kW
DESK_EXCHANGE_LIMIT = 800.0  # kW
DESK_PROFILE_SEED = 20240801


def desk_thermal_units() -> tuple[ThermalUnit, ThermalUnit]:
    g1 = ThermalUnit(name="G1", a=50.0, b=0.07, c=5e-6, p_min=200.0,
                     p_max=6000.0, ramp_up=2000.0, ramp_down=2000.0,
                     t_on=4, t_off=4, su_cost=100.0, sd_cost=20.0,
                     reserve_price=0.01, init_status="on", init_hours=4,
                     init_power=800.0)
    g2 = ThermalUnit(name="G2", a=60.0, b=0.20, c=6e-6, p_min=100.0,
                     p_max=3000.0, ramp_up=1500.0, ramp_down=1500.0,
                     t_on=3, t_off=2, su_cost=300.0, sd_cost=20.0,
                     reserve_price=0.01, init_status="on", init_hours=3,
                     init_power=800.0)
    return g1, g2


def desk_bess_unit() -> BessUnit:
    return BessUnit(name="B1", e_min=200.0, e_max=1800.0, e_cap=2000.0,
                    e_init=500.0, p_charge_max=500.0, p_discharge_max=500.0,
                    eta_c=0.95, eta_dis=0.95, charge_price=0.01,
                    discharge_price=0.01, reserve_price=0.01)


def desk_scenario(connected: bool = True, alpha: float = 0.05,
                  beta: float = 0.05, dt: int = 5,
                  seed: int = DESK_PROFILE_SEED) -> Scenario:
    pv, load = generate_synthetic_profiles(DESK_PEAK_LOAD, DESK_PV_CAPACITY,
                                           n_hours=24, dt=dt, seed=seed)
    s = Scenario(
        thermal_units=desk_thermal_units(),
        bess_units=(desk_bess_unit(),),
        pv_units=(pv,),
        load=load,
        critical_load_fraction=0.5,
        grid=GridInterface(p_ex_max=DESK_EXCHANGE_LIMIT, k_ex=0.5,
                           exchange_price=0.15, connected=connected),
        curtailment_price=1.0,
        n_hours=24,
        sub_step_minutes=dt,
        alpha=alpha,
        beta=beta,
        name=f"desk_{'grid' if connected else 'island'}")
    return validate_scenario(s)


def toy_scenario(connected: bool = True, alpha: float = 0.2,
                 beta: float = 0.2) -> Scenario:
    """Three hours, one unit of each kind, PV active only in hour 2, 15 min
    sub-steps. The ambient uncertainty box has dimension 6 (3 pv + 3 load
    coordinates), so the full vertex set has 64 sign patterns."""
    thermal = ThermalUnit(name="T1", a=10.0, b=0.1, c=1e-5, p_min=50.0,
                          p_max=1000.0, ramp_up=500.0, ramp_down=500.0,
                          t_on=1, t_off=1, su_cost=15.0, sd_cost=5.0,
                          reserve_price=0.01, init_status="on", init_hours=5,
                          init_power=200.0)
    bess = BessUnit(name="B1", e_min=20.0, e_max=180.0, e_cap=200.0,
                    e_init=100.0, p_charge_max=100.0, p_discharge_max=100.0,
                    eta_c=0.95, eta_dis=0.95, charge_price=0.01,
                    discharge_price=0.01, reserve_price=0.01)

    def flat(h: list[float], n_seg: int = 4) -> Profile:
        return Profile(tuple(h),
                       tuple(tuple(v for _ in range(n_seg)) for v in h))

    s = Scenario(
        thermal_units=(thermal,),
        bess_units=(bess,),
        pv_units=(flat([0.0, 60.0, 0.0]),),
        load=flat([300.0, 420.0, 360.0]),
        critical_load_fraction=0.5,
        grid=GridInterface(p_ex_max=200.0, k_ex=0.5, exchange_price=0.15,
                           connected=connected),
        curtailment_price=1.0,
        n_hours=3,
        sub_step_minutes=15,
        alpha=alpha,
        beta=beta,
        name="toy")
    return validate_scenario(s)


def tiny_scenario(connected: bool = True) -> Scenario:
    """Two hours, one thermal unit, no PV activity; quick CLI/test runs."""
    thermal = ThermalUnit(name="T1", a=5.0, b=0.1, c=1e-5, p_min=20.0,
                          p_max=500.0, ramp_up=400.0, ramp_down=400.0,
                          t_on=1, t_off=1, su_cost=10.0, sd_cost=2.0,
                          reserve_price=0.01, init_status="on", init_hours=2,
                          init_power=100.0)
    bess = BessUnit(name="B1", e_min=10.0, e_max=90.0, e_cap=100.0,
                    e_init=50.0, p_charge_max=50.0, p_discharge_max=50.0,
                    eta_c=0.95, eta_dis=0.95, charge_price=0.01,
                    discharge_price=0.01, reserve_price=0.01)

    def flat(h: list[float], n_seg: int = 2) -> Profile:
        return Profile(tuple(h),
                       tuple(tuple(v for _ in range(n_seg)) for v in h))

    s = Scenario(
        thermal_units=(thermal,),
        bess_units=(bess,),
        pv_units=(flat([30.0, 0.0]),),
        load=flat([200.0, 260.0]),
        critical_load_fraction=0.5,
        grid=GridInterface(p_ex_max=100.0, k_ex=0.5, exchange_price=0.15,
                           connected=connected),
        curtailment_price=1.0,
        n_hours=2,
        sub_step_minutes=30,
        alpha=0.1,
        beta=0.1,
        name="tiny")
    return validate_scenario(s)
