"""Shared evaluation budget for one valuation round."""

from __future__ import annotations

import threading


class BudgetExceeded(RuntimeError):
    """A charge was refused because it would overrun the budget."""


class BudgetMeter:
    """Counter of utility evaluations with a hard limit.

    Charges are atomic: a request either fits entirely and is recorded, or is
    refused and leaves the meter unchanged.
    """

    def __init__(self, limit: int) -> None:
        if limit < 0:
            raise ValueError(f"budget limit must be >= 0, got {limit}")
        self.limit = int(limit)
        self._used = 0
        self._lock = threading.Lock()

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self.limit - self._used

    def try_charge(self, k: int = 1) -> bool:
        if k < 0:
            raise ValueError(f"charge must be >= 0, got {k}")
        with self._lock:
            if self._used + k > self.limit:
                return False
            self._used += k
            return True

    def charge(self, k: int = 1) -> int:
        """Record ``k`` evaluations and return the remaining budget.

        Raises:
            BudgetExceeded: if fewer than ``k`` evaluations remain.
        """
        if not self.try_charge(k):
            raise BudgetExceeded(f"charge of {k} refused: {self._used}/{self.limit} used")
        return self.remaining

    def __repr__(self) -> str:
        return f"BudgetMeter(used={self._used}, limit={self.limit})"


def budget_charge(meter: BudgetMeter, k: int) -> int:
    return meter.charge(k)
