"""Flood traffic generation.

Attackers are stationary roadside radios inside RSU range.  Each one floods
syntactically valid safety messages under its own stable identity at a fixed
packet rate; the claimed poses are plausible on-road positions so that rules
about location alone cannot distinguish them.
"""

from __future__ import annotations

import math

from .model import AttackConfig, Bsm, Role, VehicleState


def attacker_ids(cfg: AttackConfig) -> list[str]:
    return [f"A{i:02d}" for i in range(cfg.n_attackers)]


def attacker_pose(cfg: AttackConfig, index: int) -> tuple[float, float]:
    """Claimed position of one attacker; spaced so poses stay distinct."""
    x, y = cfg.spoof_position
    return (x + index * cfg.spoof_spacing, y)


def attacker_vehicle(cfg: AttackConfig, index: int) -> VehicleState:
    return VehicleState(id=attacker_ids(cfg)[index], position=attacker_pose(cfg, index),
                        speed_vec=(0.0, 0.0), role=Role.ATTACKER, bsm_rate=cfg.tx_pps)


def attacker_bsm(cfg: AttackConfig, index: int, t: float, payload_bytes: int = 220) -> Bsm:
    return Bsm(sender=attacker_ids(cfg)[index], timestamp=t,
               position=attacker_pose(cfg, index), speed_vec=(0.0, 0.0),
               payload_bytes=payload_bytes)


def _active_time(cfg: AttackConfig, t: float) -> float:
    """Cumulative active attack time in [0, t]."""
    return max(0.0, min(t, cfg.stop) - cfg.start)


def flood_packets(cfg: AttackConfig, window_start: float, window: float) -> dict[str, int]:
    """Per-attacker packet counts for one window.

    Emission counts come from the cumulative-floor grid floor(tx_pps * active
    time), so fractional packets carry across windows and the long-run rate
    equals tx_pps exactly.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    a0 = _active_time(cfg, window_start)
    a1 = _active_time(cfg, window_start + window)
    n = int(math.floor(cfg.tx_pps * a1 + 1e-9) - math.floor(cfg.tx_pps * a0 + 1e-9))
    return {aid: n for aid in attacker_ids(cfg)}
