"""Span collection and trace emission.

A span's position in the tree is its slash-separated ``path``; the parent
is the path minus its last segment. Emission sorts spans by path so two
runs over the same inputs produce the same record sequence regardless of
thread scheduling (wall-clock fields still differ).
"""

from __future__ import annotations

import json
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

from .errors import StoreIo


@dataclass(frozen=True)
class TraceEvent:
    span_name: str
    path: str
    start: float
    duration: float
    attributes: dict

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("span duration must be nonnegative")


class Tracer:
    """Thread-safe span collector."""

    def __init__(self):
        self._events: list[TraceEvent] = []
        self._lock = threading.Lock()

    def record(self, span_name: str, path: str, start: float, duration: float,
               attributes: dict | None = None) -> None:
        event = TraceEvent(span_name, path, start, duration, dict(attributes or {}))
        with self._lock:
            self._events.append(event)

    def events(self) -> list[TraceEvent]:
        with self._lock:
            return sorted(self._events, key=lambda e: (e.path, e.span_name))


@dataclass
class TraceContext:
    """A tracer plus the path and attributes inherited by child spans."""

    tracer: Tracer
    path: str = "run"
    attrs: dict = field(default_factory=dict)

    def child(self, segment: str, **attrs) -> "TraceContext":
        merged = {**self.attrs, **attrs}
        return replace(self, path=f"{self.path}/{segment}", attrs=merged)

    @contextmanager
    def span(self, name: str, **attrs):
        start = time.time()
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.tracer.record(name, f"{self.path}/{name}", start,
                               time.perf_counter() - t0, {**self.attrs, **attrs})

    def record(self, name: str, start: float, duration: float, **attrs) -> None:
        self.tracer.record(name, f"{self.path}/{name}", start, duration,
                           {**self.attrs, **attrs})


def emit_traces(events: list[TraceEvent], path) -> None:
    """Write newline-delimited span records (one JSON object per span)."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for e in sorted(events, key=lambda ev: (ev.path, ev.span_name)):
                fh.write(json.dumps({
                    "span": e.span_name,
                    "path": e.path,
                    "start": e.start,
                    "duration": e.duration,
                    "attributes": dict(sorted(e.attributes.items())),
                }, sort_keys=False) + "\n")
    except OSError as exc:
        raise StoreIo(f"cannot write trace file {path}: {exc}") from exc
