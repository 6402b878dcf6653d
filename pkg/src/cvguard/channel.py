"""Shared service-channel model.

Per-window receive capacity derives from the receiver line rate, packet size
and service-channel duty cycle.  When the offered load exceeds the window
budget, delivery is proportional fair thinning: every sender keeps its exact
proportional share rounded down, and the leftover packets are raffled among
senders with probability equal to their fractional remainder.  The raffle is
driven by the caller's seeded generator, so outcomes are reproducible and
unbiased: the expected delivery of every sender equals its proportional
share in every window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import ChannelConfig


@dataclass(frozen=True)
class WindowOutcome:
    """Per-window channel result with per-sender accounting."""

    window_index: int
    sent: dict[str, int]
    delivered: dict[str, int]
    budget: int  # packets this window was allowed to deliver


def derive_capacity(cfg: ChannelConfig) -> float:
    """Receiver packet capacity in packets/s.

    The receiver drains its line rate only during the service-channel
    fraction of each cycle: sch_fraction * receiver_rate / (8 * packet_bytes).
    This is the normative interpretation used everywhere in this package.
    """
    return cfg.sch_fraction * cfg.receiver_rate / (8.0 * cfg.packet_bytes)


def effective_capacity_pps(cfg: ChannelConfig) -> float:
    """Explicit capacity override when configured, else the derived value."""
    return cfg.capacity_pps if cfg.capacity_pps is not None else derive_capacity(cfg)


def attacker_packet_rate(cfg: ChannelConfig) -> float:
    """Effective packets/s one flooding radio can push: airtime plus overhead."""
    if cfg.sender_rate <= 0:
        raise ValueError("sender_rate must be > 0")
    per_packet = 8.0 * cfg.packet_bytes / cfg.sender_rate + cfg.overhead
    return 1.0 / per_packet


def min_attackers(cfg: ChannelConfig) -> tuple[float, int]:
    """Smallest attacker fleet able to saturate the receiver.

    Returns the real-valued bound capacity / attacker_packet_rate, which
    algebraically equals sch_fraction * (receiver_rate / sender_rate +
    receiver_rate * overhead / (8 * packet_bytes)), and its integer ceiling.
    """
    bound = derive_capacity(cfg) / attacker_packet_rate(cfg)
    return bound, int(math.ceil(bound - 1e-12))


def window_budget(capacity_pps: float, window: float, window_index: int) -> int:
    """Integer packet budget of one window.

    Fractional per-window budgets are realized exactly in the long run by
    alternating on the cumulative-floor grid, e.g. 46.5/window becomes
    46, 47, 46, 47, ...
    """
    b = capacity_pps * window
    return int(math.floor(b * (window_index + 1) + 1e-9) - math.floor(b * window_index + 1e-9))


def deliver(sent: Mapping[str, int], cfg: ChannelConfig, rng: np.random.Generator,
            window_index: int = 0) -> WindowOutcome:
    """Resolve one window of contention.

    Each packet first survives the uncontended baseline loss independently
    (seeded).  If the survivors fit the window budget they all deliver;
    otherwise each sender receives floor(share) plus at most one raffled
    leftover packet.  Fully deterministic given (sent, cfg, rng state).
    """
    senders = sorted(sent)
    counts = np.array([int(sent[s]) for s in senders], dtype=np.int64)
    if (counts < 0).any():
        raise ValueError("sent counts must be >= 0")

    surviving = counts
    if cfg.baseline_loss > 0 and counts.sum() > 0:
        surviving = rng.binomial(counts, 1.0 - cfg.baseline_loss)

    budget = window_budget(effective_capacity_pps(cfg), cfg.window, window_index)
    total = int(surviving.sum())

    if total <= budget:
        delivered = surviving.astype(np.int64)
    else:
        shares = surviving * (budget / total)
        delivered = np.floor(shares + 1e-9).astype(np.int64)
        frac = np.maximum(shares - delivered, 0.0)
        spare = budget - int(delivered.sum())
        # Raffle leftovers without replacement, weighted by remainders.
        for _ in range(spare):
            mass = frac.sum()
            if mass <= 0.0:
                open_slots = np.flatnonzero(delivered < surviving)
                if open_slots.size == 0:
                    break
                j = int(open_slots[0])
            else:
                r = rng.random() * mass
                j = int(np.searchsorted(np.cumsum(frac), r, side="right"))
                j = min(j, len(frac) - 1)
            delivered[j] += 1
            frac[j] = 0.0

    return WindowOutcome(
        window_index=window_index,
        sent={s: int(c) for s, c in zip(senders, counts)},
        delivered={s: int(d) for s, d in zip(senders, delivered)},
        budget=budget,
    )
