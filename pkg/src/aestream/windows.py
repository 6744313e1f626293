"""Bounded FIFO windows used for training and drift bookkeeping."""

from __future__ import annotations

from collections import deque
from typing import Any, Iterator

import numpy as np


class SlidingWindow:
    """FIFO buffer of fixed capacity that counts appends since the last mark.

    The append counter drives the "p% of the window replaced" training
    trigger: ``replaced_fraction`` is ``appends since mark / capacity`` and
    may exceed 1.
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._items: deque[Any] = deque(maxlen=self.capacity)
        self.appended_since_mark = 0

    def append(self, item: Any) -> None:
        self._items.append(item)
        self.appended_since_mark += 1

    def is_full(self) -> bool:
        return len(self._items) == self.capacity

    def replaced_fraction(self) -> float:
        return self.appended_since_mark / self.capacity

    def mark_reset(self) -> None:
        self.appended_since_mark = 0

    def clear(self) -> None:
        self._items.clear()
        self.appended_since_mark = 0

    def items(self) -> list[Any]:
        return list(self._items)

    def as_array(self) -> np.ndarray:
        return np.asarray(self._items, dtype=np.float64)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Any]:
        return iter(self._items)

    def __repr__(self) -> str:
        return f"SlidingWindow(capacity={self.capacity}, len={len(self)})"
