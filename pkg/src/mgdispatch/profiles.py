"""Synthetic PV and load profiles for desk-scale experiments.

The case-study profiles are only pictured in the source material, never
tabulated, so experiments run on deterministic synthetic curves with the
same shape: a PV bell over hours 7-18 and a double-peak load curve.
"""

from __future__ import annotations

import math

import numpy as np

from .scenario import Profile

PV_WINDOW = (7, 18)          # first and last hour with nonzero PV output
# Sub-hourly noise amplitudes, as fractions of the hourly value. The PV
# amplitude is kept small so a battery pinned to the hourly PV target does
# not accumulate round-trip losses while absorbing the wiggle.
PV_NOISE_FRACTION = 0.0025
LOAD_NOISE_FRACTION = 0.015


def _pv_shape(t: int) -> float:
    lo, hi = PV_WINDOW
    if t < lo or t > hi:
        return 0.0
    # sin^4 bell over (6, 19), symmetric about 12.5
    x = math.pi * (t - 6.0) / 13.0
    return math.sin(x) ** 4


def _load_shape(t: int) -> float:
    # commercial-district profile: dominant midday peak at hour 13, a
    # secondary evening peak near hour 19, shallow night valley
    return (0.862
            + 0.138 * math.exp(-((t - 13.0) / 3.1) ** 2)
            + 0.052 * math.exp(-((t - 19.3) / 1.8) ** 2))


def _sub_series(hourly: list[float], n_seg: int, noise_fraction: float,
                rng: np.random.Generator, interpolate: bool) -> list[list[float]]:
    n = len(hourly)
    rows = []
    for ti in range(n):
        base = []
        for d in range(1, n_seg + 1):
            if interpolate and n > 1:
                # linear between hour centers; flat in the outer half-hours
                pos = ti + (d - 0.5) / n_seg      # 0..n, hour ti+1 centered at ti+0.5
                lo = min(max(int(pos - 0.5), 0), n - 1)
                hi = min(lo + 1, n - 1)
                frac = pos - 0.5 - lo
                frac = min(max(frac, 0.0), 1.0)
                val = (1.0 - frac) * hourly[lo] + frac * hourly[hi]
            else:
                val = hourly[ti]
            base.append(val)
        noise = rng.uniform(-1.0, 1.0, size=n_seg) * noise_fraction * hourly[ti]
        row = [max(0.0, v + e) for v, e in zip(base, noise)]
        rows.append(row)
    return rows


def generate_synthetic_profiles(peak_load: float, pv_capacity: float,
                                n_hours: int = 24, dt: int = 5,
                                seed: int = 0) -> tuple[Profile, Profile]:
    """Deterministic (pv, load) profile pair.

    Load: smooth double-peak curve with max exactly peak_load. PV: bell
    nonzero exactly over hours 7-18 with max exactly pv_capacity at hours
    12-13. Sub-hourly series carry seeded bounded noise so hourly means
    differ from the hourly values.
    """
    if peak_load <= 0 or pv_capacity <= 0:
        raise ValueError("peak_load and pv_capacity must be > 0")
    if 60 % dt != 0:
        raise ValueError("dt must divide 60")
    n_seg = 60 // dt
    rng = np.random.default_rng(seed)

    pv_shape = [_pv_shape(t) for t in range(1, n_hours + 1)]
    pv_scale = pv_capacity / max(max(pv_shape), 1e-12)
    pv_hourly = [v * pv_scale for v in pv_shape]

    load_shape = [_load_shape(t) for t in range(1, n_hours + 1)]
    load_scale = peak_load / max(load_shape)
    load_hourly = [v * load_scale for v in load_shape]

    pv_sub = _sub_series(pv_hourly, n_seg, PV_NOISE_FRACTION, rng,
                         interpolate=False)
    load_sub = _sub_series(load_hourly, n_seg, LOAD_NOISE_FRACTION, rng,
                           interpolate=True)

    pv = Profile(hourly=tuple(pv_hourly),
                 sub_hourly=tuple(tuple(r) for r in pv_sub))
    load = Profile(hourly=tuple(load_hourly),
                   sub_hourly=tuple(tuple(r) for r in load_sub))
    return pv, load


def perturb_profiles(pv_units: tuple[Profile, ...], load: Profile,
                     alpha: float, beta: float, seed: int,
                     perturb_pv: bool = False,
                     perturb_load: bool = True) -> tuple[tuple[Profile, ...], Profile]:
    """Realized profiles: forecasts plus seeded noise bounded by the
    uncertainty rates.

    Load noise is drawn per sub-hourly slot within +-beta * hourly load.
    PV noise, when enabled, is one draw per hour (the uncertainty set is
    hourly) within +-alpha * hourly forecast, applied to every slot.
    """
    rng = np.random.default_rng(seed)
    out_pv = []
    for prof in pv_units:
        if not perturb_pv or alpha == 0.0:
            out_pv.append(prof)
            continue
        eps = [rng.uniform(-1.0, 1.0) * alpha * h for h in prof.hourly]
        sub = tuple(tuple(max(0.0, v + eps[ti]) for v in row)
                    for ti, row in enumerate(prof.sub_hourly))
        out_pv.append(Profile(hourly=prof.hourly, sub_hourly=sub))

    if perturb_load and beta > 0.0:
        sub = []
        for ti, row in enumerate(load.sub_hourly):
            bound = beta * load.hourly[ti]
            noise = rng.uniform(-bound, bound, size=len(row))
            sub.append(tuple(max(0.0, v + e) for v, e in zip(row, noise)))
        load = Profile(hourly=load.hourly, sub_hourly=tuple(sub))
    return tuple(out_pv), load
