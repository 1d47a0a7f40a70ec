"""Event scheduler and structured event log."""

from __future__ import annotations

import heapq
import itertools
import json
from pathlib import Path
from typing import Any, Callable, Union

# Within one millisecond, control-plane events run before the data-plane tick.
CONTROL, DATA = 0, 1


class Scheduler:
    """Min-heap keyed on (time, priority, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list = []
        self._seq = itertools.count()
        self.now = 0

    def at(self, time: int, fn: Callable, *args: Any, priority: int = CONTROL) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule in the past ({time} < {self.now})")
        heapq.heappush(self._heap, (time, priority, next(self._seq), fn, args))

    def run(self, until: int) -> None:
        """Process every event with time < ``until``."""
        heap = self._heap
        while heap and heap[0][0] < until:
            time, _, _, fn, args = heapq.heappop(heap)
            self.now = time
            fn(*args)
        self.now = max(self.now, until)

    def __len__(self) -> int:
        return len(self._heap)


class EventLog:
    """One JSON object per line, keys sorted, so equal runs give equal bytes."""

    def __init__(self) -> None:
        self.records: list[str] = []

    def add(self, t: int, node: str, action: str, **fields: Any) -> None:
        rec = {"t": t, "node": node, "action": action, **fields}
        self.records.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))

    def text(self) -> str:
        return "".join(r + "\n" for r in self.records)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.text())

    def parsed(self) -> list[dict]:
        return [json.loads(r) for r in self.records]

    def __len__(self) -> int:
        return len(self.records)
