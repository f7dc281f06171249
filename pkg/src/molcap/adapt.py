"""Success-rate bookkeeping and the optimistic/pessimistic decision rule.

Each node scores its own recent capture attempts and mixes that with
success rates gossiped by every peer it hears from. The blended rate sigma
drives protocol choice: grabbing r molecules optimistically is worth it
only while sigma**r stays at or above the switch threshold.
"""

from __future__ import annotations

from collections import deque


class SuccessTracker:
    """Windowed view of local attempt outcomes plus gossiped peer rates."""

    __slots__ = ("local_weight", "_local", "_local_sum", "_remote", "_remote_sum")

    def __init__(self, w_local: int = 20, w_remote: int = 20, local_weight: float = 0.3):
        if w_local < 1 or w_remote < 1:
            raise ValueError("window sizes must be positive")
        if not 0.0 <= local_weight <= 1.0:
            raise ValueError("local_weight must lie in [0, 1]")
        self.local_weight = local_weight
        self._local: deque[int] = deque(maxlen=w_local)
        self._local_sum = 0
        self._remote: deque[float] = deque(maxlen=w_remote)
        self._remote_sum = 0.0

    def record_outcome(self, success: bool) -> None:
        """Log one finished attempt, evicting the oldest when full."""
        if len(self._local) == self._local.maxlen:
            self._local_sum -= self._local[0]
        v = 1 if success else 0
        self._local.append(v)
        self._local_sum += v

    def record_remote_sigma(self, sigma: float) -> None:
        """Log a success rate piggybacked on a received message."""
        if not 0.0 <= sigma <= 1.0:
            raise ValueError(f"success rate out of range: {sigma}")
        if len(self._remote) == self._remote.maxlen:
            self._remote_sum -= self._remote[0]
        self._remote.append(sigma)
        self._remote_sum += sigma

    def sigma_local(self) -> float:
        """Fraction of recent attempts that succeeded; 1.0 with no history,
        so fresh nodes lean optimistic."""
        if not self._local:
            return 1.0
        return self._local_sum / len(self._local)

    def sigma_overall(self) -> float:
        """Weighted mean of the local rate and the gossiped ones."""
        local = self.sigma_local()
        if not self._remote:
            return local
        remote = self._remote_sum / len(self._remote)
        return self.local_weight * local + (1.0 - self.local_weight) * remote


def choose_protocol(sigma: float, arity: int, threshold: float) -> str:
    """Pick "optimistic" iff sigma**arity >= threshold, else "pessimistic".

    The boundary is inclusive: a blend exactly at the threshold still goes
    optimistic.
    """
    if arity < 1:
        raise ValueError("arity must be at least 1")
    return "optimistic" if sigma**arity >= threshold else "pessimistic"
