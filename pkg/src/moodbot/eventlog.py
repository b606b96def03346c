"""Durable append-only event log with deterministic replay.

Records are single-line JSON objects {user_id, at, kind, payload} in
append order. Reports over a log snapshot are pure functions of its
contents, so re-reading and re-deriving always reproduces identical
bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .sensing import format_utc, parse_utc
from .study import StudyEvent


class EventLogError(ValueError):
    """Malformed event log line."""


def event_to_line(event: StudyEvent) -> str:
    record = {
        "user_id": event.user_id,
        "at": format_utc(event.at),
        "kind": event.kind,
        "payload": event.payload,
    }
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def event_from_record(record: dict) -> StudyEvent:
    try:
        return StudyEvent(
            user_id=str(record["user_id"]),
            at=parse_utc(record["at"]),
            kind=str(record["kind"]),
            payload=record.get("payload", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise EventLogError(f"malformed event record: {exc}") from exc


def parse_events(lines: Iterable[str], source: str = "<log>") -> Iterator[StudyEvent]:
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield event_from_record(json.loads(line))
        except (json.JSONDecodeError, EventLogError) as exc:
            raise EventLogError(f"{source}:{lineno}: {exc}") from exc


def load_events(path) -> list[StudyEvent]:
    with open(path, encoding="utf-8") as fh:
        return list(parse_events(fh, source=str(path)))


class EventLog:
    """In-memory event sequence, optionally mirrored to a JSONL file."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.events: list[StudyEvent] = []
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                self.events = load_events(self.path)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, event: StudyEvent) -> StudyEvent:
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(event_to_line(event) + "\n")
            self._fh.flush()
        return event

    def snapshot(self) -> tuple[StudyEvent, ...]:
        return tuple(self.events)

    def for_user(self, user_id: str) -> list[StudyEvent]:
        return [e for e in self.events if e.user_id == user_id]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __len__(self) -> int:
        return len(self.events)
