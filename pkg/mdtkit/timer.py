"""Timer used to report how long the solvers and the compositing take."""

import logging
import statistics
import threading
import time
from collections import defaultdict, deque
from contextlib import ContextDecorator
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, ClassVar, Deque, Dict, List

_MAX_SAMPLES = 10_000


class TimerStats:
    """Durations (in seconds) recorded by every named timer.

    Only the last 10,000 samples of each timer are kept.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._timings: Dict[str, Deque[float]] = defaultdict(
            partial(deque, maxlen=_MAX_SAMPLES)
        )

    def add(self, name: str, seconds: float) -> None:
        with self._lock:
            self._timings[name].append(seconds)

    def clear(self) -> None:
        with self._lock:
            self._timings.clear()

    def names(self) -> List[str]:
        with self._lock:
            return sorted(self._timings)

    def stats(self, name: str) -> Dict[str, float]:
        """Summary of one timer: count, total, mean, median, min and max."""
        with self._lock:
            if name not in self._timings:
                raise KeyError(name)
            values = list(self._timings[name])
        return {
            "count": len(values),
            "sum_total": sum(values),
            "mean": statistics.mean(values),
            "median": statistics.median(values),
            "min": min(values),
            "max": max(values),
        }

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({ {name: self.stats(name) for name in self.names()} })"


@dataclass
class Timer(ContextDecorator):
    """Time a block of code, as a context manager or as a decorator.

    ```
    with Timer(name="solve"):
        ...

    @Timer(name="karcher_mean", log_fn=_LOGGER.debug)
    def karcher_mean(...):
        ...
    ```

    Every measurement is logged through `log_fn` and recorded in the global `Timer.stats`.
    Timers are re-entrant and thread safe: each thread keeps its own stack of start times.
    """

    stats: ClassVar[TimerStats] = TimerStats()

    name: str = "default"
    text: str = "Timer '{name}' finished. Elapsed time: {seconds:0.3f} seconds."
    log_fn: Callable[[str], None] = logging.getLogger(__name__).info
    _local: threading.local = field(
        default_factory=threading.local, init=False, repr=False
    )

    def _starts(self) -> List[float]:
        if not hasattr(self._local, "starts"):
            self._local.starts = []
        starts: List[float] = self._local.starts
        return starts

    def start(self) -> None:
        self._starts().append(time.perf_counter())

    def stop(self) -> float:
        """Stop the most recently started measurement and return the elapsed seconds."""
        starts = self._starts()
        if not starts:
            raise ValueError(f"Timer '{self.name}' is not running. Use .start() first")
        elapsed = time.perf_counter() - starts.pop()
        self.log_fn(self.text.format(name=self.name, seconds=elapsed))
        Timer.stats.add(self.name, elapsed)
        return elapsed

    def __enter__(self) -> "Timer":
        self.start()
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()
