"""Logically centralized orchestration of the per-RSU security functions.

The controller provisions policy sets, turns confirmed attack reports into
prevention instances sized from current traffic facts, disseminates attack
information to topology neighbors, and tears instances down after a quiet
period without re-confirmation.  It is an in-process orchestrator with
message-passing semantics; all mutation happens at window boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .microbox import AttackReport, compute_t_interval
from .model import PolicySet


@dataclass(frozen=True)
class MitigationFacts:
    """Snapshot of the facts needed to size a prevention instance."""

    d_safe: float
    v_avg: float
    capacity_pps: float   # app-side consumption capacity (C)
    n_vehicles: int
    beta: float = 1.0
    base_alpha_pps: float = 10.0
    t_floor: float = 0.1


@dataclass(frozen=True)
class MitigationParams:
    attack_class: str
    implicated: tuple[str, ...]
    t_interval: float
    alpha_pps: float
    cap_pps: float
    installed_at: float


@dataclass(frozen=True)
class ControllerAction:
    kind: str     # provision | spawn | notify | destroy
    rsu: str
    time: float
    detail: str


@dataclass
class ControllerState:
    policies: dict[str, PolicySet] = field(default_factory=dict)
    instances: dict[tuple[str, str], MitigationParams] = field(default_factory=dict)
    topology: dict[str, tuple[str, ...]] = field(default_factory=dict)


class Controller:
    def __init__(self, topology: Mapping[str, tuple[str, ...]] | None = None,
                 quiet_period: float = 2.0):
        self.state = ControllerState(topology={k: tuple(v) for k, v in (topology or {}).items()})
        self.quiet_period = quiet_period
        self.actions: list[ControllerAction] = []
        self._last_confirmed: dict[tuple[str, str], float] = {}
        # Parameters pre-armed at neighbor RSUs from disseminated reports.
        self.prearmed: dict[tuple[str, str], MitigationParams] = {}

    # -- policy management ----------------------------------------------------

    def register_rsu(self, rsu_id: str, policy: PolicySet) -> None:
        self.state.policies[rsu_id] = policy
        self.state.topology.setdefault(rsu_id, ())

    def provision_policy(self, rsu_id: str, policy: PolicySet) -> PolicySet:
        """Stage a policy for an RSU; effective from the next window boundary.

        Returns the staged policy; raises KeyError for unregistered RSUs.
        Re-provisioning an identical policy leaves the state unchanged.
        """
        if rsu_id not in self.state.policies:
            raise KeyError(f"unknown RSU {rsu_id!r}")
        if self.state.policies[rsu_id] != policy:
            self.state.policies[rsu_id] = policy
            self.actions.append(ControllerAction("provision", rsu_id, -1.0,
                                                 "policy updated"))
        return policy

    # -- prevention lifecycle --------------------------------------------------

    def on_attack_report(self, rsu_id: str, report: AttackReport,
                         facts: MitigationFacts, now: float) -> MitigationParams | None:
        """Handle a confirmed report.

        Spawns at most one prevention instance per (RSU, attack class); a
        duplicate report only refreshes the quiet timer.  Attack information
        is disseminated to every topology neighbor of the reporting RSU.
        """
        if rsu_id not in self.state.policies:
            raise KeyError(f"unknown RSU {rsu_id!r}")
        key = (rsu_id, report.attack_class)
        self._last_confirmed[key] = now
        if key in self.state.instances:
            return None
        t_interval = compute_t_interval(facts.d_safe, facts.v_avg, facts.t_floor)
        params = MitigationParams(
            attack_class=report.attack_class,
            implicated=report.implicated,
            t_interval=t_interval,
            alpha_pps=min(facts.base_alpha_pps, 1.0 / t_interval),
            cap_pps=facts.beta * facts.capacity_pps / max(1, facts.n_vehicles),
            installed_at=now,
        )
        self.state.instances[key] = params
        self.actions.append(ControllerAction(
            "spawn", rsu_id, now,
            f"{report.attack_class}: sample every {t_interval:.3f}s, "
            f"cap {params.cap_pps:.3f} pkt/s, "
            f"senders {','.join(report.implicated)}"))
        for neighbor in self.state.topology.get(rsu_id, ()):
            self.prearmed[(neighbor, report.attack_class)] = params
            self.actions.append(ControllerAction(
                "notify", neighbor, now,
                f"{report.attack_class} reported by {rsu_id}"))
        return params

    def reconfirm(self, rsu_id: str, attack_class: str, now: float) -> None:
        key = (rsu_id, attack_class)
        if key in self.state.instances:
            self._last_confirmed[key] = now

    def expire(self, now: float) -> list[tuple[str, str]]:
        """Destroy instances whose attack went quiet; returns what was torn down."""
        destroyed = []
        for key in sorted(self.state.instances):
            if now - self._last_confirmed.get(key, now) > self.quiet_period:
                destroyed.append(key)
        for key in destroyed:
            del self.state.instances[key]
            rsu_id, label = key
            self.actions.append(ControllerAction(
                "destroy", rsu_id, now, f"{label}: quiet period elapsed"))
        return destroyed

    def active_instance(self, rsu_id: str, attack_class: str) -> MitigationParams | None:
        return self.state.instances.get((rsu_id, attack_class))
