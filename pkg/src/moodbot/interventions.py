"""Quadrant-tagged micro-intervention catalog and the selection policy.

The catalog ships as line-delimited JSON so validation errors can name
the offending line. Every quadrant must have exactly 16 eligible
activities; selection draws uniformly from the quadrant pool minus the
user's recently delivered items, falling back to the full pool rather
than dead-ending.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from .circumplex import Quadrant

CATEGORIES = ("positive_psychology", "cognitive_behavioral", "meta_cognitive", "somatic")
REQUIRED_PER_QUADRANT = 16
HISTORY_WINDOW = 8


class CatalogError(ValueError):
    """Catalog file violates the schema or the per-quadrant count."""


class SelectionError(ValueError):
    """No eligible intervention for the requested quadrant."""


@dataclass(frozen=True)
class Intervention:
    id: str
    text: str
    category: str
    quadrants: frozenset[Quadrant]
    url: str | None = None


@dataclass
class Catalog:
    interventions: list[Intervention]
    index: dict[Quadrant, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {q: [] for q in Quadrant}
            for iv in self.interventions:
                for q in Quadrant:
                    if q in iv.quadrants:
                        self.index[q].append(iv.id)
        self._by_id = {iv.id: iv for iv in self.interventions}

    def get(self, intervention_id: str) -> Intervention:
        return self._by_id[intervention_id]

    def eligible(self, quadrant: Quadrant) -> list[str]:
        return self.index[quadrant]


def _parse_entry(record: dict, lineno: int, source: str) -> Intervention:
    def fail(msg: str):
        raise CatalogError(f"{source}:{lineno}: {msg}")

    for key in ("id", "text", "category", "quadrants"):
        if key not in record:
            fail(f"missing field {key!r}")
    if not isinstance(record["text"], str) or not record["text"].strip():
        fail("text must be a non-empty string")
    if record["category"] not in CATEGORIES:
        fail(f"category {record['category']!r} not one of {CATEGORIES}")
    quadrants = record["quadrants"]
    if not isinstance(quadrants, list) or not quadrants:
        fail("quadrants must be a non-empty list")
    try:
        qset = frozenset(Quadrant(q) for q in quadrants)
    except ValueError:
        fail(f"unknown quadrant in {quadrants!r}")
    url = record.get("url")
    if url is not None and not isinstance(url, str):
        fail("url must be a string when present")
    return Intervention(
        id=str(record["id"]),
        text=record["text"],
        category=record["category"],
        quadrants=qset,
        url=url,
    )


def parse_catalog(lines: Sequence[str], source: str = "<catalog>") -> Catalog:
    entries: list[Intervention] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"{source}:{lineno}: invalid JSON: {exc}")
        entry = _parse_entry(record, lineno, source)
        if entry.id in seen:
            raise CatalogError(f"{source}:{lineno}: duplicate id {entry.id!r}")
        seen.add(entry.id)
        entries.append(entry)
    catalog = Catalog(entries)
    for q in Quadrant:
        count = len(catalog.eligible(q))
        if count != REQUIRED_PER_QUADRANT:
            raise CatalogError(
                f"{source}: quadrant {q.value} has {count} eligible interventions, "
                f"expected exactly {REQUIRED_PER_QUADRANT}"
            )
    return catalog


def load_catalog(path=None) -> Catalog:
    """Load and validate a catalog file; default is the shipped catalog."""
    if path is None:
        text = resources.files("moodbot.data").joinpath("catalog.jsonl").read_text("utf-8")
        return parse_catalog(text.splitlines(), source="builtin catalog")
    with open(path, encoding="utf-8") as fh:
        return parse_catalog(fh.read().splitlines(), source=str(path))


def select(
    catalog: Catalog,
    quadrant: Quadrant,
    history: Sequence[str],
    rng: random.Random,
    history_window: int = HISTORY_WINDOW,
) -> Intervention:
    """Uniform draw over the quadrant pool minus recently delivered ids.

    `history` is ordered oldest to newest; only the trailing
    `history_window` entries are excluded. An exclusion that empties the
    pool falls back to the full quadrant pool.
    """
    pool = catalog.eligible(quadrant)
    if not pool:
        raise SelectionError(f"no interventions for quadrant {quadrant.value}")
    recent = set(history[-history_window:]) if history_window > 0 else set()
    filtered = [iv for iv in pool if iv not in recent]
    if not filtered:
        filtered = list(pool)
    return catalog.get(filtered[rng.randrange(len(filtered))])


@dataclass(frozen=True)
class GateDecision:
    deliver: bool
    reason: str  # "ok" | "good_mood" | "opted_out"


def policy_gate(
    quadrant: Quadrant, *, suppress_positive_high: bool, opted_out: bool
) -> GateDecision:
    """Decide whether to deliver an intervention for the current mood.

    Opt-out always wins; the positive-high-energy quadrant is skipped
    when the do-not-interrupt-a-good-mood policy is enabled.
    """
    if opted_out:
        return GateDecision(deliver=False, reason="opted_out")
    if suppress_positive_high and quadrant is Quadrant.TR:
        return GateDecision(deliver=False, reason="good_mood")
    return GateDecision(deliver=True, reason="ok")
