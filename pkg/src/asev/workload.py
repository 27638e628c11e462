"""Ground-transport workload model.

Service time per flight is a truncated normal in minutes, discretized into
integer stage counts on a 5-minute grid. Also reads flight schedule CSVs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

STAGE_MINUTES = 5.0
HORIZON = 288
_WINDOW_EPS = 1e-12


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class TruncatedNormalSpec:
    """Parent normal N(mu, sigma^2) truncated to the open window (lower, upper), minutes.

    ``sigma == 0`` is accepted as a deterministic workload (point mass).
    """

    mu: float
    sigma: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise WorkloadError(f"lower bound {self.lower} must be below upper bound {self.upper}")
        if self.lower <= 0:
            raise WorkloadError("truncation bounds must be positive")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise WorkloadError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def deterministic(self) -> bool:
        return self.sigma == 0


DEFAULT_WORKLOAD = TruncatedNormalSpec(mu=22.5, sigma=5.0, lower=15.0, upper=30.0)


@dataclass(frozen=True)
class DiscreteWorkloadDist:
    stage_length: float
    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.support:
            raise WorkloadError("empty support")
        ks = [k for k, _ in self.support]
        if any(k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
            raise WorkloadError("support must be strictly increasing stage counts >= 1")
        ps = [p for _, p in self.support]
        if any(p < 0 for p in ps) or abs(sum(ps) - 1.0) > 1e-9:
            raise WorkloadError("probabilities must be non-negative and sum to 1")

    @property
    def values(self) -> np.ndarray:
        return np.array([k for k, _ in self.support], dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.support], dtype=float)

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))


@dataclass(frozen=True)
class FlightEvent:
    flight_id: str
    kind: str
    scheduled_stage: int
    workload: TruncatedNormalSpec = DEFAULT_WORKLOAD

    def __post_init__(self):
        if self.kind not in ("arrival", "departure"):
            raise WorkloadError(f"flight kind must be arrival or departure, got {self.kind!r}")


def _window(spec: TruncatedNormalSpec) -> tuple[float, float]:
    lo = norm.cdf(spec.lower, loc=spec.mu, scale=spec.sigma)
    hi = norm.cdf(spec.upper, loc=spec.mu, scale=spec.sigma)
    if hi - lo < _WINDOW_EPS:
        raise WorkloadError("empty truncation window")
    return lo, hi - lo


def truncated_pdf_cdf(spec: TruncatedNormalSpec, x: float) -> tuple[float, float]:
    """Density and cumulative probability of the truncated normal at ``x`` minutes."""
    if spec.deterministic:
        if not spec.lower < spec.mu < spec.upper:
            raise WorkloadError("empty truncation window")
        return 0.0, 1.0 if x >= spec.mu else 0.0
    lo, mass = _window(spec)
    if x <= spec.lower:
        return 0.0, 0.0
    if x >= spec.upper:
        return 0.0, 1.0
    density = norm.pdf(x, loc=spec.mu, scale=spec.sigma) / mass
    cumulative = (norm.cdf(x, loc=spec.mu, scale=spec.sigma) - lo) / mass
    return float(density), float(min(max(cumulative, 0.0), 1.0))


def _aligned(value: float, dt: float) -> bool:
    ratio = value / dt
    return abs(ratio - round(ratio)) < 1e-9


def discretize(spec: TruncatedNormalSpec, dt: float = STAGE_MINUTES) -> DiscreteWorkloadDist:
    """Stage-count distribution with cells [k*dt, (k+1)*dt) for k = lower/dt .. upper/dt - 1."""
    if not (_aligned(spec.lower, dt) and _aligned(spec.upper, dt)):
        raise WorkloadError("bounds not stage-aligned")
    k_lo = int(round(spec.lower / dt))
    k_hi = int(round(spec.upper / dt))
    ks = np.arange(k_lo, k_hi)

    if spec.deterministic:
        if not spec.lower < spec.mu < spec.upper:
            raise WorkloadError("empty truncation window")
        k = int(min(max(math.floor(spec.mu / dt), k_lo), k_hi - 1))
        return DiscreteWorkloadDist(dt, ((k, 1.0),))

    lo, mass = _window(spec)
    edges = np.arange(k_lo, k_hi + 1) * dt
    cdf = norm.cdf(edges, loc=spec.mu, scale=spec.sigma)
    p = np.diff(cdf) / mass
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    return DiscreteWorkloadDist(dt, tuple((int(k), float(pk)) for k, pk in zip(ks, p)))


def sample(dist: DiscreteWorkloadDist, rng: np.random.Generator) -> int:
    """One draw by inverse-CDF lookup on the discrete support."""
    u = rng.random()
    cum = np.cumsum(dist.probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    idx = min(idx, len(cum) - 1)
    return int(dist.values[idx])


def expected_stages(dist: DiscreteWorkloadDist) -> int:
    # round half up, never below one stage
    return max(1, int(math.floor(dist.mean() + 0.5)))


def parse_hhmm(text: str, dt: float = STAGE_MINUTES) -> int:
    """``"HH:MM"`` to a stage index; raises if not on the stage grid."""
    try:
        hh, mm = text.strip().split(":")
        minutes = 60 * int(hh) + int(mm)
    except ValueError:
        raise WorkloadError(f"cannot parse time {text!r}, expected HH:MM") from None
    if int(mm) >= 60 or minutes < 0:
        raise WorkloadError(f"invalid time {text!r}")
    if not _aligned(minutes, dt):
        raise WorkloadError(f"time not stage-aligned: {text}")
    return int(round(minutes / dt))


def format_hhmm(stage: int, dt: float = STAGE_MINUTES) -> str:
    minutes = int(round(stage * dt))
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


SCHEDULE_FIELDS = ("flight_id", "kind", "time_hhmm")
WORKLOAD_FIELDS = ("mu_min", "sigma_min", "lower_min", "upper_min")


def load_schedule(
    path,
    default_workload: TruncatedNormalSpec = DEFAULT_WORKLOAD,
    dt: float = STAGE_MINUTES,
    horizon: int = HORIZON,
) -> list[FlightEvent]:
    """Read a schedule CSV into flight events sorted by (stage, flight_id)."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return []
    reader = csv.DictReader(text.splitlines())
    header = reader.fieldnames or []
    missing = [f for f in SCHEDULE_FIELDS if f not in header]
    if missing:
        raise WorkloadError(f"{path}: line 1: missing column(s) {', '.join(missing)}")

    events: list[FlightEvent] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            fid = (row["flight_id"] or "").strip()
            if not fid:
                raise WorkloadError("empty flight_id")
            if fid in seen:
                raise WorkloadError(f"duplicate flight_id {fid}")
            stage = parse_hhmm(row["time_hhmm"] or "", dt)
            if not 0 <= stage < horizon:
                raise WorkloadError(f"stage out of horizon: {stage} (horizon {horizon})")
            workload = default_workload
            given = [(row.get(f) or "").strip() for f in WORKLOAD_FIELDS]
            if any(given):
                if not all(given):
                    raise WorkloadError("workload columns must be all given or all empty")
                workload = TruncatedNormalSpec(*(float(v) for v in given))
            events.append(FlightEvent(fid, (row["kind"] or "").strip(), stage, workload))
            seen.add(fid)
        except (WorkloadError, ValueError) as exc:
            raise WorkloadError(f"{path}: line {lineno}: {exc}") from None
    events.sort(key=lambda e: (e.scheduled_stage, e.flight_id))
    return events


def write_schedule(path, events: Sequence[FlightEvent], dt: float = STAGE_MINUTES,
                   default_workload: TruncatedNormalSpec = DEFAULT_WORKLOAD) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCHEDULE_FIELDS + WORKLOAD_FIELDS)
        for e in events:
            row = [e.flight_id, e.kind, format_hhmm(e.scheduled_stage, dt)]
            if e.workload == default_workload:
                row += [""] * 4
            else:
                w = e.workload
                row += [repr(w.mu), repr(w.sigma), repr(w.lower), repr(w.upper)]
            writer.writerow(row)
