"""Vehicle motion, minor-road stop-and-cross behavior, and conflict detection.

Major-road vehicles hold their desired speed with hard minimum spacing behind
the leader (no overtaking).  Minor-road vehicles decelerate to the stop line,
wait for a GO advisory, cross at a fixed departure speed, and continue away.
Conflicts are post-encroachment events: a major vehicle projected to reach
the conflict point within the threshold of a crossing minor's clearance time.

All positions are arc-length coordinates along the owning axis with the
conflict point at 0; negative is upstream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import (LEGIT_BSM_RATE, RoadGeometry, Role, ScenarioConfig, Segment,
                    VehicleState, VehiclesConfig)
from .ssga import Advisory, Verdict

BRAKE_COMFORT = 2.0  # m/s^2: brake once the exact-stop profile demands this much
ACCEL = 1.5          # m/s^2 for queue move-up


@dataclass(frozen=True)
class ConflictEvent:
    minor_id: str
    major_id: str
    time: float
    headway: float


class MinorPhase(enum.Enum):
    APPROACHING = "approaching"
    QUEUED = "queued"
    CROSSING = "crossing"
    DEPARTED = "departed"


@dataclass
class _Major:
    id: str
    s: float
    v: float
    v_des: float


@dataclass
class _Minor:
    id: str
    s: float
    v: float
    phase: MinorPhase
    attempt: int | None = None
    entry_time: float | None = None
    clearance_time: float | None = None


def _axis_frame(axis: Segment, conflict: tuple[float, float]) -> tuple[float, float]:
    """(entry, exit) coordinates of the axis relative to the conflict point."""
    c = axis.coordinate_of(conflict)
    return -c, axis.length - c


class WorldState:
    """Mutable per-run world; confined to a single scenario run."""

    def __init__(self, cfg: ScenarioConfig, rng: np.random.Generator):
        self.time = 0.0
        self.geometry = cfg.road
        self.vcfg = cfg.vehicles
        self.conflict = cfg.road.conflict_point()
        self.major_entry, self.major_exit = _axis_frame(cfg.road.major_axis, self.conflict)
        self.minor_entry, self.minor_exit = _axis_frame(cfg.road.minor_axis, self.conflict)
        self.stop_target = -cfg.road.stop_line_offset
        self.clear_at = self.stop_target + cfg.road.crossing_length
        self.crossing_time = cfg.road.crossing_length / cfg.vehicles.departure_speed

        self.majors: list[_Major] = []
        self.minors: list[_Minor] = []
        self.last_advisory: dict[str, Advisory] = {}
        self.crossing_attempts = 0
        self._conflict_seen: set[tuple[int, str]] = set()
        self._spawn_plan: list[tuple[float, float]] = []  # (due time, desired speed)
        self._next_spawn = 0
        self._spawned = 0

        self._seed_traffic(cfg, rng)

    # -- construction -------------------------------------------------------

    def _seed_traffic(self, cfg: ScenarioConfig, rng: np.random.Generator) -> None:
        v = cfg.vehicles
        n = cfg.n_major
        speeds = rng.uniform(v.major_speed_min, v.major_speed_max, size=n)
        mean_headway = 1.0 / v.major_flow_vps if v.major_flow_vps > 0 else math.inf
        extra = max(mean_headway - v.min_headway, 0.05)
        headways = v.min_headway + rng.exponential(extra, size=n)
        spawn_times = np.cumsum(headways)

        warm = 0.0
        if v.warm_start and n > 0:
            mean_speed = 0.5 * (v.major_speed_min + v.major_speed_max)
            warm = 0.6 * (self.major_exit - self.major_entry) / mean_speed
        spawn_times = spawn_times - headways[0] - warm

        prev_s = math.inf
        for i in range(n):
            t, vd = float(spawn_times[i]), float(speeds[i])
            if t < 0:  # already on the road at t=0
                s = min(self.major_entry + vd * (-t), prev_s - v.min_spacing)
                if s < self.major_entry:
                    self._spawn_plan.append((0.0, vd))
                    continue
                if s < self.major_exit:
                    self.majors.append(_Major(id=f"MJ{self._spawned:03d}", s=s, v=vd, v_des=vd))
                    self._spawned += 1
                    prev_s = s
            else:
                self._spawn_plan.append((t, vd))

        for i in range(cfg.n_minor):
            s = self.stop_target - i * v.minor_spacing
            if s < self.minor_entry:
                break
            self.minors.append(_Minor(id=f"MN{i:03d}", s=s, v=0.0, phase=MinorPhase.QUEUED))

    # -- views ---------------------------------------------------------------

    @property
    def minor_queue(self) -> list[str]:
        return [m.id for m in self.minors
                if m.phase in (MinorPhase.APPROACHING, MinorPhase.QUEUED)]

    @property
    def crossing(self) -> set[str]:
        return {m.id for m in self.minors if m.phase is MinorPhase.CROSSING}

    def head_at_line(self) -> str | None:
        """Id of the queue head if it is stopped at the stop line."""
        queue = [m for m in self.minors
                 if m.phase in (MinorPhase.APPROACHING, MinorPhase.QUEUED)]
        if not queue:
            return None
        head = queue[0]
        if abs(head.s - self.stop_target) < 0.05 and head.v < 0.01:
            return head.id
        return None

    def sender_snapshot(self) -> list[tuple[str, tuple[float, float], tuple[float, float]]]:
        """(id, position, velocity) of every active legitimate vehicle."""
        out = []
        axis = self.geometry.major_axis
        c = axis.coordinate_of(self.conflict)
        ux, uy = axis.unit
        x0, y0 = axis.start
        for m in self.majors:
            s = c + m.s
            out.append((m.id, (x0 + ux * s, y0 + uy * s), (ux * m.v, uy * m.v)))
        axis = self.geometry.minor_axis
        c = axis.coordinate_of(self.conflict)
        ux, uy = axis.unit
        x0, y0 = axis.start
        for m in self.minors:
            s = c + m.s
            out.append((m.id, (x0 + ux * s, y0 + uy * s), (ux * m.v, uy * m.v)))
        return out

    def vehicle_states(self) -> list[VehicleState]:
        """Snapshot of every active legitimate vehicle."""
        out = []
        roles = {m.id: Role.MAJOR_LEGIT for m in self.majors}
        for vid, pos, vel in self.sender_snapshot():
            out.append(VehicleState(id=vid, position=pos, speed_vec=vel,
                                    role=roles.get(vid, Role.MINOR_LEGIT),
                                    bsm_rate=LEGIT_BSM_RATE))
        return out

    def neighbor_graph(self, mu: float) -> dict[str, set[str]]:
        """Symmetric, irreflexive relation: neighbors iff distance < mu."""
        states = self.vehicle_states()
        ids = [s.id for s in states]
        pos = np.array([s.position for s in states], dtype=float)
        graph: dict[str, set[str]] = {i: set() for i in ids}
        if len(ids) > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt((diff ** 2).sum(axis=2))
            close = dist < mu
            np.fill_diagonal(close, False)
            for i, j in zip(*np.nonzero(close)):
                graph[ids[i]].add(ids[j])
        return graph


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

def _advance_toward_stop(s: float, v: float, target: float, dt: float,
                         cruise: float) -> tuple[float, float]:
    """One tick of approach motion ending exactly at rest on the target.

    Uses the constant-deceleration profile a = v^2 / (2 d), which is
    invariant under re-evaluation, so the vehicle arrives at the target with
    zero speed in exactly v / a seconds.
    """
    d = target - s
    if d <= 1e-9:
        return target, 0.0
    a_stop = (v * v) / (2.0 * d) if v > 0 else 0.0
    if a_stop >= BRAKE_COMFORT - 1e-9:
        s1 = s + v * dt - 0.5 * a_stop * dt * dt
        v1 = max(0.0, v - a_stop * dt)
        if s1 >= target - 1e-9:
            return target, 0.0
        return s1, v1
    v1 = min(cruise, v + ACCEL * dt, math.sqrt(2.0 * BRAKE_COMFORT * d))
    return min(target, s + v1 * dt), v1


def step(world: WorldState, advisories: Mapping[str, Advisory], dt: float) -> WorldState:
    """Advance the world by dt under the given per-minor advisories."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    world.last_advisory.update(advisories)
    if dt == 0:
        return world

    vcfg = world.vcfg
    now = world.time

    # Major road: inject due vehicles when the entry area is clear.
    while world._next_spawn < len(world._spawn_plan):
        due, vd = world._spawn_plan[world._next_spawn]
        if due > now:
            break
        tail_clear = (not world.majors
                      or world.majors[-1].s >= world.major_entry + vcfg.min_spacing)
        if not tail_clear:
            break
        world.majors.append(_Major(id=f"MJ{world._spawned:03d}",
                                   s=world.major_entry, v=vd, v_des=vd))
        world._spawned += 1
        world._next_spawn += 1

    # Leader-first advance with a hard spacing floor; no overtaking.
    lead_s = math.inf
    for m in world.majors:
        new_s = min(m.s + m.v_des * dt, lead_s - vcfg.min_spacing)
        new_s = max(new_s, m.s)
        m.v = (new_s - m.s) / dt
        m.s = new_s
        lead_s = new_s
    world.majors = [m for m in world.majors if m.s < world.major_exit]

    # Minor road.
    queue_target = world.stop_target
    for m in world.minors:
        if m.phase in (MinorPhase.APPROACHING, MinorPhase.QUEUED):
            adv = world.last_advisory.get(m.id)
            at_line = abs(m.s - world.stop_target) < 0.05 and m.v < 0.01
            if (at_line and adv is not None and adv.verdict is Verdict.GO
                    and adv.issued_at >= now - 1.5 / LEGIT_BSM_RATE):
                world.crossing_attempts += 1
                m.phase = MinorPhase.CROSSING
                m.attempt = world.crossing_attempts
                m.entry_time = now
                m.clearance_time = now + world.crossing_time
                m.v = vcfg.departure_speed
                m.s += m.v * dt
            else:
                m.s, m.v = _advance_toward_stop(m.s, m.v, queue_target, dt,
                                                vcfg.approach_speed)
                m.phase = (MinorPhase.QUEUED
                           if abs(m.s - queue_target) < 1e-6 and m.v == 0.0
                           else MinorPhase.APPROACHING)
                queue_target = m.s - vcfg.minor_spacing
                continue
        elif m.phase is MinorPhase.CROSSING:
            m.s += vcfg.departure_speed * dt
            m.v = vcfg.departure_speed
            if now + dt >= m.clearance_time - 1e-9:
                m.phase = MinorPhase.DEPARTED
        elif m.phase is MinorPhase.DEPARTED:
            m.s += vcfg.departure_speed * dt
            m.v = vcfg.departure_speed
    world.minors = [m for m in world.minors
                    if not (m.phase is MinorPhase.DEPARTED and m.s >= world.minor_exit)]

    world.time = now + dt
    return world


def detect_conflicts(world: WorldState, threshold: float = 1.5) -> list[ConflictEvent]:
    """Conflict events that became evident at the current world time.

    For every minor vehicle occupying the crossing, each approaching major's
    projected arrival at the conflict point is compared with the minor's
    clearance time; a pair yields at most one event per crossing attempt.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    now = world.time
    events: list[ConflictEvent] = []
    for minor in world.minors:
        if minor.phase is not MinorPhase.CROSSING or minor.clearance_time is None:
            continue
        for major in world.majors:
            if major.s >= -1e-9 or major.v <= 1e-9:
                continue
            arrival = now + (-major.s) / major.v
            headway = abs(arrival - minor.clearance_time)
            if headway < threshold:
                key = (minor.attempt, major.id)
                if key not in world._conflict_seen:
                    world._conflict_seen.add(key)
                    events.append(ConflictEvent(minor_id=minor.id, major_id=major.id,
                                                time=now, headway=headway))
    return events


def build_world(cfg: ScenarioConfig, rng: np.random.Generator) -> WorldState:
    return WorldState(cfg, rng)
