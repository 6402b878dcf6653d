"""Domain types, scenario configuration, validation and config file IO.

Every other module builds on the value types defined here.  All types are
plain frozen dataclasses; after validation they are safe to share freely.
Coordinates are planar meters in a local Cartesian frame centered near the
intersection; speeds are m/s, rates are packets/s unless a field name says
otherwise.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

Vec2 = tuple[float, float]


def _vec(value: Any) -> Vec2:
    x, y = value
    return (float(x), float(y))


def norm2(v: Vec2) -> float:
    return math.hypot(v[0], v[1])


class Role(enum.Enum):
    MAJOR_LEGIT = "major"
    MINOR_LEGIT = "minor"
    ATTACKER = "attacker"


LEGIT_BSM_RATE = 10.0  # Hz, fixed broadcast cadence of well-behaved vehicles


# ---------------------------------------------------------------------------
# Vehicles and messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VehicleState:
    """Kinematic state and identity of one simulated vehicle."""

    id: str
    position: Vec2
    speed_vec: Vec2
    role: Role
    comm_range: float = 300.0
    bsm_rate: float = LEGIT_BSM_RATE
    speed: float = None  # type: ignore[assignment]  # derived when omitted

    def __post_init__(self) -> None:
        derived = norm2(self.speed_vec)
        if self.speed is None:
            object.__setattr__(self, "speed", derived)
        elif abs(self.speed - derived) > 1e-9:
            raise ValueError(
                f"speed {self.speed!r} inconsistent with speed_vec (norm {derived!r})"
            )
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if self.comm_range <= 0:
            raise ValueError("comm_range must be > 0")
        if self.role in (Role.MAJOR_LEGIT, Role.MINOR_LEGIT) and self.bsm_rate != LEGIT_BSM_RATE:
            raise ValueError("legitimate vehicles broadcast at 10 Hz")


@dataclass(frozen=True)
class Bsm:
    """One basic safety message as it goes over the air."""

    sender: str
    timestamp: float
    position: Vec2
    speed_vec: Vec2
    payload_bytes: int = 220

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")


def bsm_from_vehicle(v: VehicleState, t: float, payload_bytes: int = 220) -> Bsm:
    """Project a vehicle's current state into a safety message; pure."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return Bsm(sender=v.id, timestamp=t, position=v.position,
               speed_vec=v.speed_vec, payload_bytes=payload_bytes)


# ---------------------------------------------------------------------------
# Static environment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Directed line segment; vehicles travel from start toward end."""

    start: Vec2
    end: Vec2

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def unit(self) -> Vec2:
        ln = self.length
        return ((self.end[0] - self.start[0]) / ln, (self.end[1] - self.start[1]) / ln)

    def point_at(self, s: float) -> Vec2:
        """Point at arc length s from the segment start."""
        u = self.unit
        return (self.start[0] + u[0] * s, self.start[1] + u[1] * s)

    def coordinate_of(self, p: Vec2) -> float:
        """Arc-length coordinate of p projected onto the segment's line."""
        u = self.unit
        return (p[0] - self.start[0]) * u[0] + (p[1] - self.start[1]) * u[1]

    def distance_to(self, p: Vec2) -> float:
        """Euclidean distance from p to the segment (not the infinite line)."""
        s = min(max(self.coordinate_of(p), 0.0), self.length)
        q = self.point_at(s)
        return math.hypot(p[0] - q[0], p[1] - q[1])


def segment_intersection(a: Segment, b: Segment) -> Vec2 | None:
    """Unique interior intersection of two segments, or None."""
    ax, ay = a.start
    rx, ry = a.end[0] - ax, a.end[1] - ay
    bx, by = b.start
    sx, sy = b.end[0] - bx, b.end[1] - by
    denom = rx * sy - ry * sx
    if abs(denom) < 1e-12:
        return None  # parallel or collinear: no unique crossing
    t = ((bx - ax) * sy - (by - ay) * sx) / denom
    u = ((bx - ax) * ry - (by - ay) * rx) / denom
    if -1e-9 <= t <= 1 + 1e-9 and -1e-9 <= u <= 1 + 1e-9:
        return (ax + t * rx, ay + t * ry)
    return None


@dataclass(frozen=True)
class RoadGeometry:
    """Two crossing road axes and the tolerances that describe them."""

    major_axis: Segment
    minor_axis: Segment
    stop_line_offset: float = 4.0   # m upstream of the conflict point, minor axis
    lane_halfwidth: float = 3.5     # m, on-road containment tolerance
    speed_min: float = 0.0
    speed_max: float = 25.0
    d_safe: float = 1.0             # m, minimum distance for safe app operation
    crossing_length: float = 10.0   # m of minor axis occupied while crossing

    def conflict_point(self) -> Vec2:
        p = segment_intersection(self.major_axis, self.minor_axis)
        if p is None:
            raise ValueError("road axes must intersect at exactly one point")
        return p

    def distance_to_roads(self, p: Vec2) -> float:
        return min(self.major_axis.distance_to(p), self.minor_axis.distance_to(p))


@dataclass(frozen=True)
class RsuConfig:
    """Roadside unit placement and receive-side characteristics."""

    position: Vec2 = (0.0, 6.0)
    comm_range: float = 300.0
    receive_line_rate: float = 12_000_000.0  # bits/s
    sch_fraction: float = 0.46               # service-channel duty cycle
    vehicle_capacity: int = 150              # bound on vehicles in range


# ---------------------------------------------------------------------------
# Channel / attack / SSGA / traffic configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelConfig:
    packet_bytes: int = 220
    overhead: float = 0.003456        # s per packet: inter-packet gap + tx overhead
    sender_rate: float = 3_000_000.0  # bits/s, one flooding radio
    receiver_rate: float = 12_000_000.0
    sch_fraction: float = 0.46
    window: float = 0.1               # s, accounting window
    capacity_pps: float | None = None  # explicit budget; derived when None
    baseline_loss: float = 0.07       # per-packet loss on an uncontended channel


@dataclass(frozen=True)
class AttackConfig:
    n_attackers: int = 0
    tx_pps: float = 500.0
    start: float = 0.0
    stop: float = math.inf
    spoof_position: Vec2 = (-25.0, 2.5)
    spoof_spacing: float = 4.0  # m between the poses claimed by distinct attackers


class StarvationMode(enum.Enum):
    EXTRAPOLATE_STALE = "extrapolate"
    FAIL_SAFE = "failsafe"


@dataclass(frozen=True)
class SsgaConfig:
    critical_gap: float = 6.5        # s, smallest acceptable major-road gap
    staleness_limit: float = 0.5     # s, fail-safe data-age bound
    starvation_mode: StarvationMode = StarvationMode.EXTRAPOLATE_STALE
    app_rate: float = 10.0           # Hz, advisory recomputation rate
    intake_capacity_pps: float = 600.0  # message-processing budget of the app host
    overload_exponent: float = 1.0   # goodput collapse exponent once saturated


@dataclass(frozen=True)
class VehiclesConfig:
    """Traffic-process parameters (all seeded-deterministic)."""

    major_speed_min: float = 12.0
    major_speed_max: float = 18.0
    major_flow_vps: float = 0.45     # vehicles/s injected upstream
    min_spacing: float = 6.0         # m, hard car-following floor
    min_headway: float = 1.2         # s, floor on injected headways
    minor_spacing: float = 7.0       # m, queue spacing on the minor road
    approach_speed: float = 8.0      # m/s, minor-road approach speed
    departure_speed: float = 5.0     # m/s while crossing
    warm_start: bool = True          # pre-populate the corridor at t=0


# ---------------------------------------------------------------------------
# Detection policy
# ---------------------------------------------------------------------------

class RuleKind(enum.Enum):
    """Behavioral rules a well-behaved vehicle never violates."""

    RANGE = "range"                      # reported position within RSU range
    ROAD_GEOMETRY = "road_geometry"      # reported position on a road
    POSITION_JUMP = "position_jump"      # bounded displacement between reports
    MIN_SEPARATION = "min_separation"    # vehicles keep a minimum distance
    RATE_CEILING = "rate_ceiling"        # delivered rate no higher than C1
    RATE_FLOOR = "rate_floor"            # delivered rate no lower than C2
    RSU_LOAD = "rsu_load"                # sender population within RSU capacity
    NEIGHBOR_CAP = "neighbor_cap"        # neighbor count within capacity
    NEIGHBOR_CONSISTENCY = "neighbor_consistency"  # relation matches distances
    SPEED_BOUNDS = "speed_bounds"        # speed within the corridor's band
    DWELL_TIME = "dwell_time"            # bounded time spent inside RSU range


@dataclass(frozen=True)
class Rule:
    kind: RuleKind
    threshold: float | None = None
    expected_headway: float | None = None  # carried for MIN_SEPARATION; informational

    def __post_init__(self) -> None:
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError(f"{self.kind.value}: threshold must be > 0")


@dataclass(frozen=True)
class PolicySet:
    """Parameterized rule instances plus violation-signature -> attack-class map."""

    rules: tuple[Rule, ...]
    signatures: dict[str, frozenset[RuleKind]]

    def rule(self, kind: RuleKind) -> Rule | None:
        for r in self.rules:
            if r.kind == kind:
                return r
        return None

    def enabled_kinds(self) -> frozenset[RuleKind]:
        return frozenset(r.kind for r in self.rules)


DEFAULT_SIGNATURES: dict[str, tuple[str, ...]] = {
    "ddos": ("rate_ceiling", "rate_floor"),
    "position-falsification": ("range", "road_geometry"),
    "track-anomaly": ("road_geometry", "position_jump", "min_separation"),
}


@dataclass(frozen=True)
class CvguardConfig:
    """Thresholds and engine knobs for the security function."""

    rate_ceiling: float = 15.0        # pkt/s, per-sender delivery bound (C1)
    rate_floor: float = 5.0           # pkt/s, per-sender service floor (C2)
    aggregate_floor: bool = True      # also check the mean legitimate rate
    jump_limit: float | None = None   # m per report; auto from speed_max when None
    min_separation: float = 2.0       # m
    expected_headway: float | None = None
    neighbor_range: float = 50.0      # m, neighborhood predicate distance
    neighbor_cap: int = 40
    dwell_limit: float = 120.0        # s allowed inside RSU range
    debounce_windows: int = 3         # consecutive windows before a report is acted on
    quiet_period: float = 2.0         # s without re-confirmation before teardown
    beta: float = 1.0                 # upper-bound scale on per-vehicle app rate
    base_alpha_pps: float = 10.0      # app's nominal minimum per-vehicle rate
    signatures: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_SIGNATURES))


def build_policy(cvg: CvguardConfig, geometry: RoadGeometry, rsu: RsuConfig,
                 tick: float) -> PolicySet:
    """Instantiate the full rule set from configured thresholds."""
    jump = cvg.jump_limit if cvg.jump_limit is not None else geometry.speed_max * tick * 1.2
    rules = (
        Rule(RuleKind.RANGE),
        Rule(RuleKind.ROAD_GEOMETRY),
        Rule(RuleKind.POSITION_JUMP, threshold=jump),
        Rule(RuleKind.MIN_SEPARATION, threshold=cvg.min_separation,
             expected_headway=cvg.expected_headway),
        Rule(RuleKind.RATE_CEILING, threshold=cvg.rate_ceiling),
        Rule(RuleKind.RATE_FLOOR, threshold=cvg.rate_floor),
        Rule(RuleKind.RSU_LOAD, threshold=float(rsu.vehicle_capacity)),
        Rule(RuleKind.NEIGHBOR_CAP, threshold=float(cvg.neighbor_cap)),
        Rule(RuleKind.NEIGHBOR_CONSISTENCY, threshold=cvg.neighbor_range),
        Rule(RuleKind.SPEED_BOUNDS),
        Rule(RuleKind.DWELL_TIME, threshold=cvg.dwell_limit),
    )
    signatures = {
        label: frozenset(RuleKind(k) for k in kinds)
        for label, kinds in cvg.signatures.items()
    }
    return PolicySet(rules=rules, signatures=signatures)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

def _default_geometry() -> RoadGeometry:
    return RoadGeometry(
        major_axis=Segment((-340.0, 0.0), (140.0, 0.0)),
        minor_axis=Segment((0.0, -380.0), (0.0, 40.0)),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float = 60.0
    tick: float = 0.1
    seed: int = 42
    n_major: int = 50
    n_minor: int = 10
    cvguard_enabled: bool = True
    road: RoadGeometry = field(default_factory=_default_geometry)
    rsu: RsuConfig = field(default_factory=RsuConfig)
    vehicles: VehiclesConfig = field(default_factory=VehiclesConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    cvguard: CvguardConfig = field(default_factory=CvguardConfig)
    ssga: SsgaConfig = field(default_factory=SsgaConfig)

    @property
    def policy(self) -> PolicySet:
        return build_policy(self.cvguard, self.road, self.rsu, self.tick)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfigViolation:
    path: str
    constraint: str
    value: Any

    def __str__(self) -> str:
        return f"{self.path}: requires {self.constraint}, got {self.value!r}"


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[ConfigViolation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def scenario_violations(cfg: ScenarioConfig) -> list[ConfigViolation]:
    """Every violated invariant, each with a field path."""
    out: list[ConfigViolation] = []

    def need(ok: bool, path: str, constraint: str, value: Any) -> None:
        if not ok:
            out.append(ConfigViolation(path, constraint, value))

    need(cfg.duration > 0, "duration", "duration > 0", cfg.duration)
    need(cfg.tick > 0, "tick", "tick > 0", cfg.tick)
    need(cfg.n_major >= 0, "n_major", "n_major >= 0", cfg.n_major)
    need(cfg.n_minor >= 0, "n_minor", "n_minor >= 0", cfg.n_minor)

    ch = cfg.channel
    need(ch.packet_bytes > 0, "channel.packet_bytes", "> 0", ch.packet_bytes)
    need(ch.overhead >= 0, "channel.overhead", ">= 0", ch.overhead)
    need(ch.sender_rate > 0, "channel.sender_rate", "> 0", ch.sender_rate)
    need(ch.receiver_rate > 0, "channel.receiver_rate", "> 0", ch.receiver_rate)
    need(0 < ch.sch_fraction <= 1, "channel.sch_fraction", "0 < value <= 1", ch.sch_fraction)
    need(ch.window > 0, "channel.window", "> 0", ch.window)
    need(ch.capacity_pps is None or ch.capacity_pps > 0,
         "channel.capacity_pps", "> 0 when set", ch.capacity_pps)
    need(0 <= ch.baseline_loss < 1, "channel.baseline_loss", "0 <= value < 1", ch.baseline_loss)

    rsu = cfg.rsu
    need(rsu.comm_range > 0, "rsu.comm_range", "> 0", rsu.comm_range)
    need(rsu.receive_line_rate > 0, "rsu.receive_line_rate", "> 0", rsu.receive_line_rate)
    need(0 < rsu.sch_fraction <= 1, "rsu.sch_fraction", "0 < value <= 1", rsu.sch_fraction)
    need(rsu.vehicle_capacity > 0, "rsu.vehicle_capacity", "> 0", rsu.vehicle_capacity)

    geom = cfg.road
    need(0 <= geom.speed_min < geom.speed_max, "road.speed_min",
         "0 <= speed_min < speed_max", (geom.speed_min, geom.speed_max))
    need(geom.lane_halfwidth > 0, "road.lane_halfwidth", "> 0", geom.lane_halfwidth)
    need(geom.stop_line_offset >= 0, "road.stop_line_offset", ">= 0", geom.stop_line_offset)
    need(geom.crossing_length > 0, "road.crossing_length", "> 0", geom.crossing_length)
    need(geom.d_safe >= 0, "road.d_safe", ">= 0", geom.d_safe)
    if segment_intersection(geom.major_axis, geom.minor_axis) is None:
        out.append(ConfigViolation("road", "axes intersect at exactly one point",
                                   (geom.major_axis, geom.minor_axis)))

    atk = cfg.attack
    need(atk.n_attackers >= 0, "attack.n_attackers", ">= 0", atk.n_attackers)
    need(atk.tx_pps >= 0, "attack.tx_pps", ">= 0", atk.tx_pps)
    need(0 <= atk.start <= atk.stop, "attack.start", "0 <= start <= stop",
         (atk.start, atk.stop))

    ssga = cfg.ssga
    need(ssga.critical_gap > 0, "ssga.critical_gap", "> 0", ssga.critical_gap)
    need(ssga.staleness_limit > 0, "ssga.staleness_limit", "> 0", ssga.staleness_limit)
    need(ssga.app_rate > 0, "ssga.app_rate", "> 0", ssga.app_rate)
    need(ssga.intake_capacity_pps > 0, "ssga.intake_capacity_pps", "> 0",
         ssga.intake_capacity_pps)
    need(ssga.overload_exponent >= 0, "ssga.overload_exponent", ">= 0",
         ssga.overload_exponent)

    cvg = cfg.cvguard
    need(cvg.rate_ceiling > 0, "cvguard.rate_ceiling", "> 0", cvg.rate_ceiling)
    need(cvg.rate_floor > 0, "cvguard.rate_floor", "> 0", cvg.rate_floor)
    need(cvg.rate_ceiling > cvg.rate_floor, "cvguard.rate_ceiling",
         "rate_ceiling > rate_floor", (cvg.rate_ceiling, cvg.rate_floor))
    need(cvg.min_separation > 0, "cvguard.min_separation", "> 0", cvg.min_separation)
    need(cvg.jump_limit is None or cvg.jump_limit > 0, "cvguard.jump_limit",
         "> 0 when set", cvg.jump_limit)
    need(cvg.neighbor_range > 0, "cvguard.neighbor_range", "> 0", cvg.neighbor_range)
    need(cvg.neighbor_cap > 0, "cvguard.neighbor_cap", "> 0", cvg.neighbor_cap)
    need(cvg.dwell_limit > 0, "cvguard.dwell_limit", "> 0", cvg.dwell_limit)
    need(cvg.debounce_windows >= 1, "cvguard.debounce_windows", ">= 1",
         cvg.debounce_windows)
    need(cvg.quiet_period > 0, "cvguard.quiet_period", "> 0", cvg.quiet_period)
    need(cvg.beta > 0, "cvguard.beta", "> 0", cvg.beta)
    need(cvg.base_alpha_pps > 0, "cvguard.base_alpha_pps", "> 0", cvg.base_alpha_pps)
    known = {k.value for k in RuleKind}
    for label, kinds in cvg.signatures.items():
        if not kinds:
            out.append(ConfigViolation(f"cvguard.signatures.{label}",
                                       "non-empty rule set", kinds))
        for k in kinds:
            if k not in known:
                out.append(ConfigViolation(f"cvguard.signatures.{label}",
                                           "known rule kind", k))
    return out


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Return the config unchanged iff every invariant holds; otherwise raise
    ScenarioValidationError carrying every violation."""
    violations = scenario_violations(cfg)
    if violations:
        raise ScenarioValidationError(violations)
    return cfg


# ---------------------------------------------------------------------------
# Scenario file IO
# ---------------------------------------------------------------------------
#
# The scenario file is YAML with fixed sections
#   scenario / road / vehicles / channel / attack / cvguard / ssga
# and like-named keys for every config field.  Unknown sections or keys are
# rejected with a path in the error message.

_SECTION_FIELDS: dict[str, tuple[str, ...]] = {
    "scenario": ("duration", "tick", "seed", "cvguard_enabled"),
    "road": ("major_axis", "minor_axis", "stop_line_offset", "lane_halfwidth",
             "speed_min", "speed_max", "d_safe", "crossing_length", "rsu"),
    "vehicles": ("n_major", "n_minor") + tuple(f.name for f in fields(VehiclesConfig)),
    "channel": tuple(f.name for f in fields(ChannelConfig)),
    "attack": tuple(f.name for f in fields(AttackConfig)),
    "cvguard": tuple(f.name for f in fields(CvguardConfig)),
    "ssga": tuple(f.name for f in fields(SsgaConfig)),
}
_RSU_FIELDS = tuple(f.name for f in fields(RsuConfig))


def _reject_unknown(mapping: Mapping[str, Any], allowed: Iterable[str], where: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ValueError(f"unknown key(s) under {where}: {', '.join(unknown)}")


def _segment_from(value: Any, where: str) -> Segment:
    if not isinstance(value, Mapping) or set(value) != {"start", "end"}:
        raise ValueError(f"{where}: expected mapping with keys start, end")
    return Segment(start=_vec(value["start"]), end=_vec(value["end"]))


def scenario_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    _reject_unknown(data, _SECTION_FIELDS, "top level")
    cfg = ScenarioConfig()

    sc = dict(data.get("scenario") or {})
    _reject_unknown(sc, _SECTION_FIELDS["scenario"], "scenario")
    cfg = replace(cfg,
                  duration=float(sc.get("duration", cfg.duration)),
                  tick=float(sc.get("tick", cfg.tick)),
                  seed=int(sc.get("seed", cfg.seed)),
                  cvguard_enabled=bool(sc.get("cvguard_enabled", cfg.cvguard_enabled)))

    rd = dict(data.get("road") or {})
    _reject_unknown(rd, _SECTION_FIELDS["road"], "road")
    geom = cfg.road
    if "major_axis" in rd:
        geom = replace(geom, major_axis=_segment_from(rd["major_axis"], "road.major_axis"))
    if "minor_axis" in rd:
        geom = replace(geom, minor_axis=_segment_from(rd["minor_axis"], "road.minor_axis"))
    for key in ("stop_line_offset", "lane_halfwidth", "speed_min", "speed_max",
                "d_safe", "crossing_length"):
        if key in rd:
            geom = replace(geom, **{key: float(rd[key])})
    rsu = cfg.rsu
    if "rsu" in rd:
        rsu_d = dict(rd["rsu"] or {})
        _reject_unknown(rsu_d, _RSU_FIELDS, "road.rsu")
        kw: dict[str, Any] = {}
        if "position" in rsu_d:
            kw["position"] = _vec(rsu_d["position"])
        for key in ("comm_range", "receive_line_rate", "sch_fraction"):
            if key in rsu_d:
                kw[key] = float(rsu_d[key])
        if "vehicle_capacity" in rsu_d:
            kw["vehicle_capacity"] = int(rsu_d["vehicle_capacity"])
        rsu = replace(rsu, **kw)
    cfg = replace(cfg, road=geom, rsu=rsu)

    vh = dict(data.get("vehicles") or {})
    _reject_unknown(vh, _SECTION_FIELDS["vehicles"], "vehicles")
    cfg = replace(cfg,
                  n_major=int(vh.pop("n_major", cfg.n_major)),
                  n_minor=int(vh.pop("n_minor", cfg.n_minor)))
    if vh:
        vkw = {k: (bool(v) if k == "warm_start" else float(v)) for k, v in vh.items()}
        cfg = replace(cfg, vehicles=replace(cfg.vehicles, **vkw))

    ch = dict(data.get("channel") or {})
    _reject_unknown(ch, _SECTION_FIELDS["channel"], "channel")
    if ch:
        ckw: dict[str, Any] = {}
        for k, v in ch.items():
            if k == "packet_bytes":
                ckw[k] = int(v)
            elif k == "capacity_pps":
                ckw[k] = None if v is None else float(v)
            else:
                ckw[k] = float(v)
        cfg = replace(cfg, channel=replace(cfg.channel, **ckw))

    atk = dict(data.get("attack") or {})
    _reject_unknown(atk, _SECTION_FIELDS["attack"], "attack")
    if atk:
        akw: dict[str, Any] = {}
        for k, v in atk.items():
            if k == "n_attackers":
                akw[k] = int(v)
            elif k == "spoof_position":
                akw[k] = _vec(v)
            elif k == "stop":
                akw[k] = math.inf if v is None else float(v)
            else:
                akw[k] = float(v)
        cfg = replace(cfg, attack=replace(cfg.attack, **akw))

    cvg = dict(data.get("cvguard") or {})
    _reject_unknown(cvg, _SECTION_FIELDS["cvguard"], "cvguard")
    if cvg:
        gkw: dict[str, Any] = {}
        for k, v in cvg.items():
            if k == "signatures":
                gkw[k] = {str(label): tuple(str(x) for x in kinds)
                          for label, kinds in dict(v).items()}
            elif k in ("neighbor_cap", "debounce_windows"):
                gkw[k] = int(v)
            elif k == "aggregate_floor":
                gkw[k] = bool(v)
            elif k in ("jump_limit", "expected_headway"):
                gkw[k] = None if v is None else float(v)
            else:
                gkw[k] = float(v)
        cfg = replace(cfg, cvguard=replace(cfg.cvguard, **gkw))

    sg = dict(data.get("ssga") or {})
    _reject_unknown(sg, _SECTION_FIELDS["ssga"], "ssga")
    if sg:
        skw: dict[str, Any] = {}
        for k, v in sg.items():
            if k == "starvation_mode":
                skw[k] = StarvationMode(str(v))
            else:
                skw[k] = float(v)
        cfg = replace(cfg, ssga=replace(cfg.ssga, **skw))

    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise ValueError(f"{path}: scenario file must be a mapping of sections")
    return validate_scenario(scenario_from_dict(data))


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    """Plain-data dump with the same sections the loader accepts."""
    def seg(s: Segment) -> dict[str, list[float]]:
        return {"start": list(s.start), "end": list(s.end)}

    return {
        "scenario": {"duration": cfg.duration, "tick": cfg.tick, "seed": cfg.seed,
                     "cvguard_enabled": cfg.cvguard_enabled},
        "road": {
            "major_axis": seg(cfg.road.major_axis),
            "minor_axis": seg(cfg.road.minor_axis),
            "stop_line_offset": cfg.road.stop_line_offset,
            "lane_halfwidth": cfg.road.lane_halfwidth,
            "speed_min": cfg.road.speed_min,
            "speed_max": cfg.road.speed_max,
            "d_safe": cfg.road.d_safe,
            "crossing_length": cfg.road.crossing_length,
            "rsu": {"position": list(cfg.rsu.position),
                    "comm_range": cfg.rsu.comm_range,
                    "receive_line_rate": cfg.rsu.receive_line_rate,
                    "sch_fraction": cfg.rsu.sch_fraction,
                    "vehicle_capacity": cfg.rsu.vehicle_capacity},
        },
        "vehicles": {"n_major": cfg.n_major, "n_minor": cfg.n_minor,
                     **{f.name: getattr(cfg.vehicles, f.name)
                        for f in fields(VehiclesConfig)}},
        "channel": {f.name: getattr(cfg.channel, f.name) for f in fields(ChannelConfig)},
        "attack": {
            "n_attackers": cfg.attack.n_attackers,
            "tx_pps": cfg.attack.tx_pps,
            "start": cfg.attack.start,
            "stop": None if math.isinf(cfg.attack.stop) else cfg.attack.stop,
            "spoof_position": list(cfg.attack.spoof_position),
            "spoof_spacing": cfg.attack.spoof_spacing,
        },
        "cvguard": {
            **{f.name: getattr(cfg.cvguard, f.name) for f in fields(CvguardConfig)
               if f.name != "signatures"},
            "signatures": {k: list(v) for k, v in cfg.cvguard.signatures.items()},
        },
        "ssga": {
            "critical_gap": cfg.ssga.critical_gap,
            "staleness_limit": cfg.ssga.staleness_limit,
            "starvation_mode": cfg.ssga.starvation_mode.value,
            "app_rate": cfg.ssga.app_rate,
            "intake_capacity_pps": cfg.ssga.intake_capacity_pps,
            "overload_exponent": cfg.ssga.overload_exponent,
        },
    }


def config_hash(cfg: ScenarioConfig) -> str:
    canon = json.dumps(scenario_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
