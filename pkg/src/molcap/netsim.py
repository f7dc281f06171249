"""Deterministic one-step-latency transport and initial molecule placement.

Every message sent at step t is delivered at step t+1, exactly once, with
no loss or reordering between a fixed sender/receiver pair. Deliveries to
one node within a step are handed over ordered by (sender id, send order)
so a whole run is a pure function of its configuration and seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any

from .chemistry import Molecule


@dataclass(slots=True)
class Envelope:
    src: int
    dst: int
    sent_at: int
    seq: int
    msg: Any


class Transport:
    """Message queue with uniform latency of one simulation step."""

    def __init__(self):
        self.step = 0
        self.sent_total = 0
        self.delivered_total = 0
        self._seq = 0
        self._due: dict[int, dict[int, list[Envelope]]] = {}

    def send(self, src: int, dst: int, msg: Any) -> Envelope:
        """Queue a message for delivery at the next step. Self-sends pay
        the same latency as everything else."""
        self._seq += 1
        env = Envelope(src, dst, self.step, self._seq, msg)
        per_dst = self._due.setdefault(self.step + 1, {})
        per_dst.setdefault(dst, []).append(env)
        self.sent_total += 1
        return env

    def tick(self) -> dict[int, list[Envelope]]:
        """Advance the clock one step and return the deliveries now due,
        grouped by destination."""
        self.step += 1
        batch = self._due.pop(self.step, {})
        for envs in batch.values():
            envs.sort(key=lambda e: (e.src, e.seq))
            self.delivered_total += len(envs)
        return batch

    def in_flight(self) -> int:
        return self.sent_total - self.delivered_total


def disseminate(
    molecules: list[Molecule], nodes: int, rng: random.Random
) -> dict[int, int]:
    """Assign each molecule a holder node uniformly at random.

    The returned mapping doubles as the global registry that stands in for
    a real discovery layer.
    """
    if nodes < 1:
        raise ValueError("need at least one node")
    return {m.id: rng.randrange(nodes) for m in molecules}
