"""Stop Sign Gap Assist application hosted on the RSU.

The app keeps a per-sender track built from the messages that actually reach
it and advises the minor-road vehicle at the stop line whether the projected
gap in major-road traffic is safe.  Track positions may be extrapolated when
data goes stale; a track extrapolated past the conflict point stops
constraining the advisory, which is exactly how starvation turns into wrong
GO decisions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import Bsm, RoadGeometry, SsgaConfig, StarvationMode

EPS_SPEED = 0.1  # m/s floor so stopped traffic never divides by zero


class Verdict(enum.Enum):
    GO = "go"
    WAIT = "wait"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Advisory:
    target: str
    verdict: Verdict
    issued_at: float
    min_gap: float | None = None


@dataclass
class TrackedVehicle:
    id: str
    position: tuple[float, float]
    velocity: tuple[float, float]
    last_seen: float


@dataclass
class SsgaView:
    """The app's picture of the intersection plus per-window receipt counters."""

    tracks: dict[str, TrackedVehicle] = field(default_factory=dict)
    window_received: dict[str, int] = field(default_factory=dict)
    total_received: int = 0

    def begin_window(self) -> None:
        self.window_received = {}


def update_view(view: SsgaView, batch: Mapping[str, tuple[int, Bsm]], now: float) -> SsgaView:
    """Apply one window of app-ingested traffic; last writer wins per sender."""
    for sender in sorted(batch):
        count, bsm = batch[sender]
        if count <= 0:
            continue
        view.tracks[sender] = TrackedVehicle(
            id=sender, position=bsm.position, velocity=bsm.speed_vec, last_seen=now)
        view.window_received[sender] = view.window_received.get(sender, 0) + count
        view.total_received += count
    return view


def _apparent_state(track: TrackedVehicle, cfg: SsgaConfig, now: float
                    ) -> tuple[tuple[float, float], tuple[float, float]]:
    age = max(0.0, now - track.last_seen)
    if cfg.starvation_mode is StarvationMode.EXTRAPOLATE_STALE and age > 0:
        px = track.position[0] + track.velocity[0] * age
        py = track.position[1] + track.velocity[1] * age
        return (px, py), track.velocity
    return track.position, track.velocity


def approach_time(track: TrackedVehicle, geometry: RoadGeometry, cfg: SsgaConfig,
                  now: float) -> float | None:
    """Apparent arrival time (s from now) at the conflict point, or None.

    Only tracks on the major road and still upstream of the conflict point
    constrain the gap; anything at or past the point yields no positive
    arrival time.
    """
    pos, vel = _apparent_state(track, cfg, now)
    axis = geometry.major_axis
    if axis.distance_to(pos) > geometry.lane_halfwidth:
        return None
    conflict_s = axis.coordinate_of(geometry.conflict_point())
    s = axis.coordinate_of(pos) - conflict_s
    if s >= -0.5:
        return None
    u = axis.unit
    vs = vel[0] * u[0] + vel[1] * u[1]
    return -s / max(vs, EPS_SPEED)


def compute_advisory(view: SsgaView, minor: str, geometry: RoadGeometry,
                     cfg: SsgaConfig, now: float) -> Advisory:
    """Advise the minor vehicle waiting at the stop line."""
    if cfg.starvation_mode is StarvationMode.FAIL_SAFE:
        for track in view.tracks.values():
            if now - track.last_seen > cfg.staleness_limit:
                return Advisory(target=minor, verdict=Verdict.UNKNOWN, issued_at=now)

    gaps = []
    for tid in sorted(view.tracks):
        if tid == minor:
            continue
        arrival = approach_time(view.tracks[tid], geometry, cfg, now)
        if arrival is not None:
            gaps.append(arrival)

    if not gaps:
        return Advisory(target=minor, verdict=Verdict.GO, issued_at=now, min_gap=math.inf)
    min_gap = min(gaps)
    if min_gap >= cfg.critical_gap:
        return Advisory(target=minor, verdict=Verdict.GO, issued_at=now, min_gap=min_gap)
    return Advisory(target=minor, verdict=Verdict.WAIT, issued_at=now, min_gap=min_gap)


def app_drr(view: SsgaView, expected_senders: Iterable[str], expected_rate: float,
            window: float) -> float:
    """Fraction of the expected legitimate traffic that reached the app.

    Counts only messages from the expected legitimate senders; flood traffic
    reaching the app never raises this number.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    expected = list(expected_senders)
    if not expected:
        return 1.0
    got = sum(view.window_received.get(s, 0) for s in expected)
    denom = len(expected) * expected_rate * window
    return min(1.0, got / denom)
