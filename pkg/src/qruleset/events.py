"""Timestamp-ordered event queue; FIFO among equal timestamps."""

from __future__ import annotations

import heapq
import itertools
from typing import Any, Callable


class EventQueue:
    def __init__(self, now: float = 0.0):
        self.now = now
        self._heap: list = []
        self._seq = itertools.count()
        self.dispatched = 0

    def schedule(self, at: float, handler: Callable[..., Any], *args: Any) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        heapq.heappush(self._heap, (at, next(self._seq), handler, args))

    def after(self, delay: float, handler: Callable[..., Any], *args: Any) -> None:
        self.schedule(self.now + delay, handler, *args)

    def __len__(self) -> int:
        return len(self._heap)

    def peek_time(self) -> float:
        return self._heap[0][0]

    def step(self) -> bool:
        if not self._heap:
            return False
        at, _, handler, args = heapq.heappop(self._heap)
        self.now = at
        self.dispatched += 1
        handler(*args)
        return True

    def run(self, until: float = float("inf"), on_event: Callable[[], None] | None = None,
            stop: Callable[[], bool] | None = None) -> None:
        while self._heap and self._heap[0][0] <= until:
            self.step()
            if on_event is not None:
                on_event()
            if stop is not None and stop():
                return
