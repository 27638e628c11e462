"""Synthetic Bristol-like day: flight schedule, PV profiles, two-tier tariff.

Produces the bundled ``bristol_summer``, ``bristol_winter`` and
``bristol_cancel`` scenario directories. Everything is seeded, so rerunning
``write_bristol_analogue`` reproduces the bundled files byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .costs import write_profile
from .workload import FlightEvent, format_hhmm, write_schedule

N_ARRIVALS = 88
N_DEPARTURES = 86
FIRST_STAGE = 72    # 06:00
LAST_STAGE = 275    # 22:55
CANCELLED_STAGE = 129  # 10:45
SCHEDULE_SEED = 20181116
# night tier above the library default: keeps end-of-day deferral from dominating
BRISTOL_TARIFF = (("00:00", "07:00", 0.09), ("07:00", "24:00", 0.15))

# (sunrise h, sunset h, peak kW) of a clear day on the site's PV array
PV_SHAPE = {
    "summer": (5.0, 21.5, 33.0),
    "winter": (8.0, 16.25, 18.0),
}


def _draw_stages(rng, n, peaks):
    """``n`` stages in [FIRST_STAGE, LAST_STAGE] from a mixture of daily waves."""
    centers = np.array([c for c, _, _ in peaks])
    widths = np.array([w for _, w, _ in peaks])
    weights = np.array([p for _, _, p in peaks], dtype=float)
    weights /= weights.sum()
    out = []
    while len(out) < n:
        k = rng.choice(len(peaks), p=weights)
        s = int(round(rng.normal(centers[k], widths[k])))
        if FIRST_STAGE <= s <= LAST_STAGE:
            out.append(s)
    return sorted(out)


def bristol_schedule(seed: int = SCHEDULE_SEED) -> list[FlightEvent]:
    """88 arrivals and 86 departures between 06:00 and 22:55 with morning/evening waves."""
    rng = np.random.default_rng(seed)
    # (center stage, spread in stages, weight)
    dep_peaks = [(78, 8, 0.40), (140, 24, 0.30), (200, 20, 0.30)]
    arr_peaks = [(125, 22, 0.30), (185, 22, 0.30), (255, 14, 0.40)]
    dep = _draw_stages(rng, N_DEPARTURES - 1, dep_peaks) + [FIRST_STAGE]
    arr = _draw_stages(rng, N_ARRIVALS - 2, arr_peaks) + [LAST_STAGE, CANCELLED_STAGE]
    events = [FlightEvent(f"D{n + 1:03d}", "departure", s) for n, s in enumerate(sorted(dep))]
    events += [FlightEvent(f"A{n + 1:03d}", "arrival", s) for n, s in enumerate(sorted(arr))]
    events.sort(key=lambda e: (e.scheduled_stage, e.flight_id))
    return events


def pv_power_kw(season: str, horizon: int = 288, stage_minutes: float = 5.0) -> np.ndarray:
    """Clear-sky bell curve of PV output (kW) sampled at each stage midpoint."""
    rise, sset, peak = PV_SHAPE[season]
    hours = (np.arange(horizon) + 0.5) * stage_minutes / 60.0
    x = (hours - rise) / (sset - rise)
    out = np.where((x > 0) & (x < 1), peak * np.sin(np.pi * np.clip(x, 0, 1)) ** 1.5, 0.0)
    return np.round(out, 3)


def cancelled_flight(events) -> FlightEvent:
    return next(e for e in events if e.kind == "arrival" and e.scheduled_stage == CANCELLED_STAGE)


def write_bristol_analogue(out_dir, season: str = "summer", cancel: bool = False, seed: int = 2019) -> Path:
    """Write ``scenario.yaml`` plus schedule and profile CSVs into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events = bristol_schedule()
    write_schedule(out / "schedule.csv", events)
    write_profile(out / "renewable_kw.csv", pv_power_kw(season), fmt="{:.3f}")

    name = f"bristol_{'cancel' if cancel else season}"
    doc = {
        "name": name,
        "seed": seed,
        "fleet": {"n_ev": 25, "capacity_kwh": 50.0, "soc_min": 0.2, "soc_max": 0.8,
                  "charge_power_kw": 22.0, "efficiency": 0.9, "e_work_kwh_per_stage": 2.0,
                  "d_thre": 1, "horizon": 288, "stage_minutes": 5.0},
        "initial_soc": 0.8,
        "cycles_to_failure": 3000.0,
        "degradation": {"a0": 200.0, "a1": 400.0},
        "prices": {"renewable_price": 0.04,
                   "grid": {"tiers": [list(t) for t in BRISTOL_TARIFF]}},
        "renewable": {"file": "renewable_kw.csv"},
        "schedule": {"file": "schedule.csv",
                     "default_workload": {"mu_min": 22.5, "sigma_min": 5.0, "lower_min": 15.0, "upper_min": 30.0}},
        "events": [],
        "policy": {"workload_mode": "certainty-equivalent", "samples": 1, "parallel_eval": False},
    }
    if cancel:
        f = cancelled_flight(events)
        doc["events"] = [{"kind": "cancellation", "flight_id": f.flight_id,
                          "announce_hhmm": format_hhmm(f.scheduled_stage - 12)}]
    with open(out / "scenario.yaml", "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
    return out / "scenario.yaml"


def write_bundled(root) -> None:
    root = Path(root)
    write_bristol_analogue(root / "bristol_summer", "summer")
    write_bristol_analogue(root / "bristol_winter", "winter")
    write_bristol_analogue(root / "bristol_cancel", "summer", cancel=True)


if __name__ == "__main__":
    write_bundled(Path(__file__).parent / "data" / "scenarios")
