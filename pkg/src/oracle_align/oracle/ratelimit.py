"""Thread-safe token bucket shared by every worker talking to one endpoint."""

from __future__ import annotations

import threading
import time


class TokenBucket:
    """Requests-per-minute limiter.

    The bucket holds up to ``capacity`` tokens (default: one minute's worth) and
    refills continuously at ``rpm / 60`` tokens per second. ``acquire`` reserves a
    token under the lock and sleeps outside it, so waiting workers are served in
    arrival order without holding the lock.
    """

    def __init__(self, rpm: int, capacity: float | None = None, clock=time.monotonic, sleep=time.sleep):
        if rpm < 1:
            raise ValueError("rpm must be >= 1")
        self.rate = rpm / 60.0
        self.capacity = float(capacity if capacity is not None else rpm)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._blocked_until = 0.0
        self._lock = threading.Lock()
        self.granted = 0

    def acquire(self) -> float:
        """Take one token, blocking as needed. Returns the time spent waiting."""
        with self._lock:
            now = self._clock()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
            self._last = now
            self._tokens -= 1.0
            wait = max(0.0, -self._tokens / self.rate, self._blocked_until - now)
            self.granted += 1
        if wait > 0:
            self._sleep(wait)
        return wait

    def penalize(self, seconds: float):
        """Hold every caller back for ``seconds`` (server-side 429)."""
        with self._lock:
            now = self._clock()
            self._blocked_until = max(self._blocked_until, now + max(0.0, seconds))
            self._tokens = min(self._tokens, 0.0)
