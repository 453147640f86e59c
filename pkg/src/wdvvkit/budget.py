"""Soft time and memory caps for long computations."""

from __future__ import annotations

import resource
import time
from dataclasses import dataclass, field


class BudgetExceeded(RuntimeError):
    """A time or memory cap was hit."""


def peak_rss_gb() -> float:
    # ru_maxrss is in kilobytes on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024**2


@dataclass
class Budget:
    """Caps checked between expensive steps. None means unlimited."""

    seconds: float | None = None
    mem_gb: float | None = None
    _t0: float = field(default_factory=time.perf_counter)

    def check(self, where: str = "") -> None:
        if self.seconds is not None and time.perf_counter() - self._t0 > self.seconds:
            raise BudgetExceeded(f"time budget of {self.seconds}s exceeded {where}".strip())
        if self.mem_gb is not None and peak_rss_gb() > self.mem_gb:
            raise BudgetExceeded(f"memory budget of {self.mem_gb} GB exceeded {where}".strip())
