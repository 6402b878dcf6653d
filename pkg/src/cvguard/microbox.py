"""Per-RSU security function: rule evaluation, attack classification, and
the DDoS prevention filter.

The engine consumes one completed channel window at a time.  Rule evaluation
is a pure function over per-sender contexts; classification matches the
violated rule kinds against configured signatures; a confirmation debounce
keeps single-window noise from spawning prevention instances.  The
prevention filter passes non-implicated traffic through a per-sender rate
cap and samples implicated traffic down to one packet per sampling interval,
because the application still needs the attackers' claimed positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import Bsm, PolicySet, RoadGeometry, RsuConfig, Rule, RuleKind, norm2

Batch = dict[str, tuple[int, Bsm]]  # per-sender (delivered count, latest message)


@dataclass(slots=True)
class SenderContext:
    """What the RSU observed about one sender during one window."""

    sender: str
    positions: tuple[tuple[float, float], ...]  # reported this window
    speeds: tuple[float, ...]                   # resultant speeds reported
    delivered: int
    first_seen: float
    last_seen: float
    neighbor_count: int = 0
    prev_position: tuple[float, float] | None = None  # latest earlier-window report
    seen_prior: bool = False

    def __post_init__(self) -> None:
        if self.first_seen > self.last_seen:
            raise ValueError("first_seen must be <= last_seen")


@dataclass(frozen=True)
class Violation:
    kind: RuleKind
    sender: str | None  # None for whole-window rules
    observed: float
    threshold: float
    window_index: int


@dataclass(frozen=True)
class AttackReport:
    attack_class: str
    implicated: tuple[str, ...]
    window_index: int
    evidence: tuple[Violation, ...]


@dataclass(frozen=True)
class WorldFacts:
    """Static environment facts rule evaluation needs."""

    rsu: RsuConfig
    geometry: RoadGeometry
    window_index: int
    window_s: float
    neighbor_edges: Mapping[str, set[str]] | None = None
    aggregate_floor: bool = True


# ---------------------------------------------------------------------------
# Rule evaluation
# ---------------------------------------------------------------------------

def _latest_positions(contexts: Sequence[SenderContext]) -> tuple[list[int], np.ndarray]:
    idx = [i for i, c in enumerate(contexts) if c.positions]
    pos = np.array([contexts[i].positions[-1] for i in idx], dtype=float) \
        if idx else np.empty((0, 2))
    return idx, pos


def evaluate_rules(contexts: Mapping[str, SenderContext], facts: WorldFacts,
                   policy: PolicySet) -> list[Violation]:
    """Emit one Violation per sender (or one global one) per failed rule."""
    ordered = [contexts[s] for s in sorted(contexts)]
    w = facts.window_index
    window_s = facts.window_s
    out: list[Violation] = []

    def enabled(kind: RuleKind) -> Rule | None:
        return policy.rule(kind)

    idx, pos = _latest_positions(ordered)
    reporting = [ordered[i] for i in idx]

    # Pairwise distances between reported positions; reused by three rules.
    if len(idx) > 1:
        diff = pos[:, None, :] - pos[None, :, :]
        dists = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dists, np.inf)
    else:
        dists = np.full((len(idx), len(idx)), np.inf)

    rule = enabled(RuleKind.RANGE)
    if rule is not None and len(idx):
        rx, ry = facts.rsu.position
        d = np.sqrt((pos[:, 0] - rx) ** 2 + (pos[:, 1] - ry) ** 2)
        for i in np.flatnonzero(d >= facts.rsu.comm_range):
            out.append(Violation(RuleKind.RANGE, reporting[i].sender,
                                 float(d[i]), facts.rsu.comm_range, w))

    rule = enabled(RuleKind.ROAD_GEOMETRY)
    if rule is not None:
        for c, p in zip(reporting, pos):
            d = facts.geometry.distance_to_roads((float(p[0]), float(p[1])))
            if d > facts.geometry.lane_halfwidth:
                out.append(Violation(RuleKind.ROAD_GEOMETRY, c.sender, d,
                                     facts.geometry.lane_halfwidth, w))

    rule = enabled(RuleKind.POSITION_JUMP)
    if rule is not None:
        for c in reporting:
            if c.prev_position is None:
                continue
            p0, p1 = c.prev_position, c.positions[-1]
            disp = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
            if disp > rule.threshold:
                out.append(Violation(RuleKind.POSITION_JUMP, c.sender, disp,
                                     rule.threshold, w))

    rule = enabled(RuleKind.MIN_SEPARATION)
    if rule is not None and len(idx) > 1:
        nearest = dists.min(axis=1)
        for i in np.flatnonzero(nearest <= rule.threshold):
            out.append(Violation(RuleKind.MIN_SEPARATION, reporting[i].sender,
                                 float(nearest[i]), rule.threshold, w))

    rule = enabled(RuleKind.RATE_CEILING)
    if rule is not None:
        for c in ordered:
            rate = c.delivered / window_s
            if rate > rule.threshold:
                out.append(Violation(RuleKind.RATE_CEILING, c.sender, rate,
                                     rule.threshold, w))

    rule = enabled(RuleKind.RATE_FLOOR)
    if rule is not None:
        ceiling = enabled(RuleKind.RATE_CEILING)
        cap = ceiling.threshold if ceiling is not None else math.inf
        eligible_rates = []
        for c in ordered:
            rate = c.delivered / window_s
            if not c.seen_prior:
                continue
            if rate <= cap:
                eligible_rates.append(rate)
            if rate < rule.threshold:
                out.append(Violation(RuleKind.RATE_FLOOR, c.sender, rate,
                                     rule.threshold, w))
        if facts.aggregate_floor and eligible_rates:
            mean_rate = sum(eligible_rates) / len(eligible_rates)
            if mean_rate < rule.threshold:
                out.append(Violation(RuleKind.RATE_FLOOR, None, mean_rate,
                                     rule.threshold, w))

    rule = enabled(RuleKind.RSU_LOAD)
    if rule is not None:
        present = sum(1 for c in ordered if c.delivered > 0)
        if present > rule.threshold:
            out.append(Violation(RuleKind.RSU_LOAD, None, float(present),
                                 rule.threshold, w))

    rule = enabled(RuleKind.NEIGHBOR_CAP)
    if rule is not None:
        for c in ordered:
            if c.neighbor_count > rule.threshold:
                out.append(Violation(RuleKind.NEIGHBOR_CAP, c.sender,
                                     float(c.neighbor_count), rule.threshold, w))

    rule = enabled(RuleKind.NEIGHBOR_CONSISTENCY)
    if rule is not None and facts.neighbor_edges is not None and len(idx) > 1:
        mu = rule.threshold
        senders = [c.sender for c in reporting]
        for i, ci in enumerate(reporting):
            edges = facts.neighbor_edges.get(ci.sender, set())
            for j, cj in enumerate(reporting):
                if i == j:
                    continue
                related = cj.sender in edges
                should = dists[i, j] < mu
                if related != should:
                    out.append(Violation(RuleKind.NEIGHBOR_CONSISTENCY, ci.sender,
                                         float(dists[i, j]), mu, w))
                    break

    rule = enabled(RuleKind.SPEED_BOUNDS)
    if rule is not None:
        lo, hi = facts.geometry.speed_min, facts.geometry.speed_max
        for c in ordered:
            for sp in c.speeds:
                if sp < lo - 1e-9 or sp > hi + 1e-9:
                    out.append(Violation(RuleKind.SPEED_BOUNDS, c.sender, sp,
                                         hi if sp > hi else lo, w))
                    break

    rule = enabled(RuleKind.DWELL_TIME)
    if rule is not None:
        for c in ordered:
            dwell = c.last_seen - c.first_seen
            if dwell > rule.threshold:
                out.append(Violation(RuleKind.DWELL_TIME, c.sender, dwell,
                                     rule.threshold, w))

    return out


def classify_attack(violations: Sequence[Violation], policy: PolicySet
                    ) -> list[AttackReport]:
    """One report per signature whose rule set is covered by this window's
    violations; ordered by signature label for determinism."""
    if not violations:
        return []
    kinds_present = {v.kind for v in violations}
    window = max(v.window_index for v in violations)
    reports = []
    for label in sorted(policy.signatures):
        sig = policy.signatures[label]
        if not sig or not sig <= kinds_present:
            continue
        evidence = tuple(v for v in violations if v.kind in sig)
        if RuleKind.RATE_CEILING in sig:
            implicated = tuple(sorted({v.sender for v in evidence
                                       if v.kind is RuleKind.RATE_CEILING
                                       and v.sender is not None}))
        else:
            implicated = tuple(sorted({v.sender for v in evidence
                                       if v.sender is not None}))
        reports.append(AttackReport(attack_class=label, implicated=implicated,
                                    window_index=window, evidence=evidence))
    return reports


def compute_t_interval(d_safe: float, v_avg: float, floor: float = 0.1) -> float:
    """Sampling period: at least the floor, and long enough that traffic moves
    the safe distance between samples."""
    if v_avg <= 0:
        raise ValueError("v_avg must be > 0")
    if floor <= 0:
        raise ValueError("floor must be > 0")
    return max(floor, d_safe / v_avg)


# ---------------------------------------------------------------------------
# Prevention filter
# ---------------------------------------------------------------------------

@dataclass
class MitigationFilter:
    """Stream filter installed between the channel and the application.

    Non-implicated senders pass through a per-sender rate cap of cap_pps;
    implicated senders are sampled down to one packet per t_interval so the
    application keeps seeing their claimed positions without being flooded.
    """

    implicated: frozenset[str]
    t_interval: float
    cap_pps: float
    alpha_pps: float
    start_time: float
    _next_bucket: dict[str, int] = field(default_factory=dict)
    _passed: dict[str, int] = field(default_factory=dict)

    def apply(self, batch: Batch, window_start: float, window: float) -> Batch:
        out: Batch = {}
        for sid in sorted(batch):
            count, msg = batch[sid]
            if count <= 0:
                continue
            if sid in self.implicated:
                rel0 = max(0.0, window_start - self.start_time)
                rel1 = max(0.0, window_start + window - self.start_time)
                b0 = int(math.floor(rel0 / self.t_interval + 1e-9))
                b1 = int(math.floor(rel1 / self.t_interval - 1e-9))
                lo = max(b0, self._next_bucket.get(sid, 0))
                take = min(count, max(0, b1 - lo + 1))
                if take > 0:
                    self._next_bucket[sid] = lo + take
                    out[sid] = (take, msg)
            else:
                elapsed = max(0.0, window_start + window - self.start_time)
                allowed = int(math.floor(elapsed * self.cap_pps + 1e-9))
                passed = self._passed.get(sid, 0)
                take = min(count, max(0, allowed - passed))
                if take > 0:
                    self._passed[sid] = passed + take
                    out[sid] = (take, msg)
        return out


# ---------------------------------------------------------------------------
# The microBox itself
# ---------------------------------------------------------------------------

class MicroBox:
    """One security function instance guarding one RSU.

    Keeps the little state detection needs across windows (sender history and
    the confirmation debounce) and hosts the active prevention filter, if
    any.  Detection always runs on the pre-filter delivered stream so an
    ongoing attack keeps re-confirming while it is being mitigated.
    """

    def __init__(self, rsu: RsuConfig, geometry: RoadGeometry, policy: PolicySet,
                 window_s: float, debounce_windows: int = 3,
                 aggregate_floor: bool = True, neighbor_range: float | None = None):
        self.rsu = rsu
        self.geometry = geometry
        self.policy = policy
        self.window_s = window_s
        self.debounce = debounce_windows
        self.aggregate_floor = aggregate_floor
        self._pending_policy: PolicySet | None = None
        self._first_seen: dict[str, float] = {}
        self._last_seen: dict[str, float] = {}
        self._prev_pos: dict[str, tuple[float, float]] = {}
        self._streak: dict[str, int] = {}
        self.filter: MitigationFilter | None = None

    def set_policy(self, policy: PolicySet) -> None:
        """Stage a policy; it takes effect at the next window boundary."""
        self._pending_policy = policy

    def begin_window(self) -> None:
        if self._pending_policy is not None:
            self.policy = self._pending_policy
            self._pending_policy = None

    def build_contexts(self, delivered: Mapping[str, int],
                       contents: Mapping[str, Bsm], now: float
                       ) -> dict[str, SenderContext]:
        contexts: dict[str, SenderContext] = {}
        known = set(self._first_seen)
        for sid in set(delivered) | known:
            n = int(delivered.get(sid, 0))
            if n <= 0 and sid not in known:
                continue
            msg = contents.get(sid) if n > 0 else None
            first = self._first_seen.get(sid, now)
            last = now if n > 0 else self._last_seen.get(sid, first)
            contexts[sid] = SenderContext(
                sender=sid,
                positions=(msg.position,) if msg is not None else (),
                speeds=(norm2(msg.speed_vec),) if msg is not None else (),
                delivered=n,
                first_seen=first,
                last_seen=last,
                prev_position=self._prev_pos.get(sid),
                seen_prior=sid in known,
            )
        return contexts

    def _neighbor_counts(self, contexts: dict[str, SenderContext]
                         ) -> Mapping[str, set[str]] | None:
        rule = self.policy.rule(RuleKind.NEIGHBOR_CONSISTENCY)
        cap_rule = self.policy.rule(RuleKind.NEIGHBOR_CAP)
        if rule is None and cap_rule is None:
            return None
        mu = rule.threshold if rule is not None else 50.0
        ids = [s for s in sorted(contexts) if contexts[s].positions]
        if len(ids) < 2:
            return {s: set() for s in ids}
        pos = np.array([contexts[s].positions[-1] for s in ids])
        diff = pos[:, None, :] - pos[None, :, :]
        close = (diff ** 2).sum(axis=2) < mu * mu
        np.fill_diagonal(close, False)
        edges: dict[str, set[str]] = {s: set() for s in ids}
        for i, j in zip(*np.nonzero(close)):
            edges[ids[i]].add(ids[j])
        for s in ids:
            contexts[s].neighbor_count = len(edges[s])
        return edges

    def observe(self, delivered: Mapping[str, int], contents: Mapping[str, Bsm],
                window_index: int, window_start: float
                ) -> tuple[list[Violation], list[AttackReport], list[AttackReport]]:
        """Process one completed window.

        Returns (violations, reports, newly confirmed reports).  A report is
        confirmed once its class has appeared in `debounce` consecutive
        windows; re-confirmations keep appearing in `reports`.
        """
        now = window_start + self.window_s
        contexts = self.build_contexts(delivered, contents, now)
        edges = self._neighbor_counts(contexts)
        facts = WorldFacts(rsu=self.rsu, geometry=self.geometry,
                           window_index=window_index, window_s=self.window_s,
                           neighbor_edges=edges, aggregate_floor=self.aggregate_floor)
        violations = evaluate_rules(contexts, facts, self.policy)
        reports = classify_attack(violations, self.policy)

        present = {r.attack_class for r in reports}
        confirmed: list[AttackReport] = []
        for label in list(self._streak):
            if label not in present:
                self._streak[label] = 0
        for r in reports:
            streak = self._streak.get(r.attack_class, 0) + 1
            self._streak[r.attack_class] = streak
            if streak == self.debounce:
                confirmed.append(r)

        # Update history after evaluation so next window's contexts see this
        # window's reports as "previous".
        for sid, n in delivered.items():
            if n > 0:
                self._first_seen.setdefault(sid, now)
                self._last_seen[sid] = now
                msg = contents.get(sid)
                if msg is not None:
                    self._prev_pos[sid] = msg.position

        return violations, reports, confirmed

    # -- prevention ----------------------------------------------------------

    def install_filter(self, filt: MitigationFilter) -> None:
        self.filter = filt

    def remove_filter(self) -> None:
        self.filter = None

    def mitigate(self, batch: Batch, window_start: float, window: float) -> Batch:
        if self.filter is None:
            return batch
        return self.filter.apply(batch, window_start, window)
