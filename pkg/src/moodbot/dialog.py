"""Template-based message rendering in two tones.

The emotional tone carries affect words and named emoji tokens like
``:rain_cloud:``; the neutral tone is validated at load time to contain
neither. Rendering picks uniformly among the templates matching
(quadrant, slot, tone) and avoids repeating the previous template for
the same user and slot whenever an alternative exists.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from typing import Sequence

from .circumplex import Quadrant

SLOTS = ("acknowledgment", "intervention_intro", "followup", "sampling_prompt")
TONES = ("emotional", "neutral")

EMOJI_TOKEN = re.compile(r":([a-z0-9_]+):")
WORD = re.compile(r"[a-z']+")

# Small lexicon of affect words that must never appear in neutral texts.
BLOCKED_AFFECT_WORDS = frozenset(
    {
        "glum",
        "gloomy",
        "sad",
        "happy",
        "joy",
        "joyful",
        "cheer",
        "cheerful",
        "excited",
        "thrilled",
        "brighten",
        "wonderful",
        "amazing",
        "awesome",
        "fantastic",
        "love",
        "lovely",
        "delight",
        "delightful",
        "yay",
        "hooray",
        "stressed",
        "worried",
        "heavy",
        "mellow",
        "glowing",
    }
)

MIN_VARIANTS = 3  # anti-habituation floor per (slot, tone) and per quadrant intro


class TemplateError(ValueError):
    """Template file violates the schema, tone rules, or coverage floor."""


class RenderError(ValueError):
    """No template matches the requested (quadrant, slot, tone)."""


@dataclass(frozen=True)
class PhraseTemplate:
    id: str
    slot: str
    tone: str
    text: str
    quadrant: Quadrant | None = None  # None matches any quadrant

    @property
    def emoji_tokens(self) -> tuple[str, ...]:
        return tuple(EMOJI_TOKEN.findall(self.text))


@dataclass(frozen=True)
class Message:
    user_id: str
    at: datetime
    text: str
    tone: str
    slot: str
    template_id: str
    intervention_id: str | None = None


class TemplateSet:
    def __init__(self, templates: Sequence[PhraseTemplate]):
        self.templates = list(templates)

    def matching(self, quadrant: Quadrant, slot: str, tone: str) -> list[PhraseTemplate]:
        return [
            t
            for t in self.templates
            if t.slot == slot and t.tone == tone and (t.quadrant is None or t.quadrant is quadrant)
        ]


def _parse_template(record: dict, lineno: int, source: str) -> PhraseTemplate:
    def fail(msg: str):
        raise TemplateError(f"{source}:{lineno}: {msg}")

    for key in ("id", "slot", "tone", "text"):
        if key not in record:
            fail(f"missing field {key!r}")
    if record["slot"] not in SLOTS:
        fail(f"slot {record['slot']!r} not one of {SLOTS}")
    if record["tone"] not in TONES:
        fail(f"tone {record['tone']!r} not one of {TONES}")
    text = record["text"]
    if not isinstance(text, str) or not text.strip():
        fail("text must be a non-empty string")
    quadrant = record.get("quadrant")
    if quadrant is not None:
        try:
            quadrant = Quadrant(quadrant)
        except ValueError:
            fail(f"unknown quadrant {record['quadrant']!r}")
    if record["tone"] == "neutral":
        if EMOJI_TOKEN.search(text):
            fail("neutral template contains an emoji token")
        blocked = sorted(set(WORD.findall(text.lower())) & BLOCKED_AFFECT_WORDS)
        if blocked:
            fail(f"neutral template contains affect words: {blocked}")
    return PhraseTemplate(
        id=str(record["id"]),
        slot=record["slot"],
        tone=record["tone"],
        text=text,
        quadrant=quadrant,
    )


def parse_templates(lines: Sequence[str], source: str = "<templates>") -> TemplateSet:
    templates: list[PhraseTemplate] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TemplateError(f"{source}:{lineno}: invalid JSON: {exc}")
        t = _parse_template(record, lineno, source)
        if t.id in seen:
            raise TemplateError(f"{source}:{lineno}: duplicate id {t.id!r}")
        seen.add(t.id)
        templates.append(t)
    ts = TemplateSet(templates)
    for slot in SLOTS:
        for tone in TONES:
            count = sum(1 for t in templates if t.slot == slot and t.tone == tone)
            if count < MIN_VARIANTS:
                raise TemplateError(
                    f"{source}: need at least {MIN_VARIANTS} templates for "
                    f"slot={slot!r} tone={tone!r}, found {count}"
                )
    for q in Quadrant:
        count = len(ts.matching(q, "intervention_intro", "emotional"))
        if count < MIN_VARIANTS:
            raise TemplateError(
                f"{source}: quadrant {q.value} has only {count} emotional "
                f"intervention_intro templates, need {MIN_VARIANTS}"
            )
    return ts


def load_templates(path=None) -> TemplateSet:
    """Load and validate a template file; default is the shipped set."""
    if path is None:
        text = resources.files("moodbot.data").joinpath("templates.jsonl").read_text("utf-8")
        return parse_templates(text.splitlines(), source="builtin templates")
    with open(path, encoding="utf-8") as fh:
        return parse_templates(fh.read().splitlines(), source=str(path))


def render(
    templates: TemplateSet,
    quadrant: Quadrant,
    slot: str,
    tone: str,
    rng: random.Random,
    user_id: str,
    at: datetime,
    intervention=None,
    last_template_id: str | None = None,
) -> Message:
    """Render one message; never repeats `last_template_id` when it can."""
    candidates = templates.matching(quadrant, slot, tone)
    if not candidates:
        raise RenderError(f"no template for quadrant={quadrant.value} slot={slot} tone={tone}")
    if last_template_id is not None and len(candidates) >= 2:
        candidates = [t for t in candidates if t.id != last_template_id] or candidates
    chosen = candidates[rng.randrange(len(candidates))]
    text = chosen.text
    if "{intervention}" in text:
        text = text.replace("{intervention}", intervention.text if intervention else "")
    return Message(
        user_id=user_id,
        at=at,
        text=text,
        tone=tone,
        slot=slot,
        template_id=chosen.id,
        intervention_id=getattr(intervention, "id", None),
    )
