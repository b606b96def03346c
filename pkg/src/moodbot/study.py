"""Two-phase study protocol: prompt scheduling, mood sourcing, and the
engagement / likability analytics computed from the event log.

During calibration the user's own grid reports drive the interaction;
after the switch to the deployed phase the model predictions do, while
reports continue to be logged as ground truth only. The event log is
the single source of truth for every metric here.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from typing import Iterable, Sequence

from . import stats
from .circumplex import as_utc

CONDITIONS = ("emma", "control")
PHASES = ("calibration", "deployed")

EVENT_KINDS = (
    "prompt_sent",
    "selfreport",
    "mood_predicted",
    "intervention_sent",
    "intervention_response",
    "optout",
    "optin",
    "suppressed",
    "survey",
)

RESPONSE_MATCH_WINDOW = timedelta(hours=24)


class ConfigError(ValueError):
    """Study configuration cannot produce a valid schedule."""


class MoodSourceError(ValueError):
    """The active phase is missing its mood input (report or model)."""


@dataclass(frozen=True)
class StudyConfig:
    condition: str = "control"
    phase: str = "calibration"
    prompts_per_day: int = 5
    waking_start: time = time(9, 0)
    waking_end: time = time(21, 0)
    min_gap_minutes: int = 90
    suppress_positive_high: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ConfigError(f"condition must be one of {CONDITIONS}")
        if self.phase not in PHASES:
            raise ConfigError(f"phase must be one of {PHASES}")
        if self.prompts_per_day < 1:
            raise ConfigError("prompts_per_day must be positive")
        if self.window_minutes <= 0:
            raise ConfigError("waking window must be a positive span within one day")
        if self.prompts_per_day * self.min_gap_minutes > self.window_minutes:
            raise ConfigError(
                f"{self.prompts_per_day} prompts with {self.min_gap_minutes}-minute "
                f"gaps do not fit a {self.window_minutes}-minute waking window"
            )

    @property
    def window_minutes(self) -> int:
        start = self.waking_start.hour * 60 + self.waking_start.minute
        end = self.waking_end.hour * 60 + self.waking_end.minute
        return end - start


@dataclass(frozen=True)
class StudyEvent:
    user_id: str
    at: datetime
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "at", as_utc(self.at))


def schedule_prompts(day: date, config: StudyConfig, user_id: str) -> list[datetime]:
    """Seeded daily prompt times: inside the waking window, pairwise gaps
    of at least `min_gap_minutes`, deterministic per (seed, user, date)."""
    k = config.prompts_per_day
    gap = config.min_gap_minutes
    span = config.window_minutes - (k - 1) * gap
    if span < 0:
        raise ConfigError("waking window too small for the prompt schedule")
    rng = random.Random(f"{config.seed}:{user_id}:{day.isoformat()}")
    offsets = sorted(rng.uniform(0.0, span) for _ in range(k))
    window_start = datetime.combine(day, config.waking_start, tzinfo=timezone.utc)
    return [
        window_start + timedelta(minutes=offsets[i] + i * gap, seconds=0)
        for i in range(k)
    ]


def mood_source(
    config: StudyConfig,
    selfreport: tuple[float, float] | None,
    model,
    features,
    user_id: str | None = None,
) -> tuple[float, float, str]:
    """Resolve the (v, a) driving the interaction for the current phase.

    Calibration requires a self-report; the deployed phase requires a
    fitted model plus current-hour features, and self-reports are never
    consulted there.
    """
    if config.phase == "calibration":
        if selfreport is None:
            raise MoodSourceError("calibration phase needs a self-report")
        return selfreport[0], selfreport[1], "selfreport"
    if model is None:
        raise MoodSourceError("deployed phase needs a fitted model")
    if features is None:
        raise MoodSourceError("deployed phase needs current-hour features")
    import numpy as np

    x = np.asarray(features, dtype=float).reshape(1, -1)
    v, a = model.predict_mood(x, [user_id])
    return float(min(1.0, max(0.0, v[0]))), float(min(1.0, max(0.0, a[0]))), "model"


def _sorted_events(events: Iterable[StudyEvent]) -> list[StudyEvent]:
    return sorted(events, key=lambda e: (e.at, e.kind))


def match_responses(
    events: Iterable[StudyEvent], user_id: str
) -> list[tuple[StudyEvent, StudyEvent]]:
    """Pair each intervention response with the most recent unanswered
    intervention within 24 h; unmatched responses are dropped."""
    pairs: list[tuple[StudyEvent, StudyEvent]] = []
    open_prompts: list[StudyEvent] = []
    for e in _sorted_events(events):
        if e.user_id != user_id:
            continue
        if e.kind == "intervention_sent":
            open_prompts.append(e)
        elif e.kind == "intervention_response":
            while open_prompts and e.at - open_prompts[-1].at > RESPONSE_MATCH_WINDOW:
                open_prompts.pop()
            if open_prompts:
                pairs.append((open_prompts.pop(), e))
    return pairs


def response_latency(events: Iterable[StudyEvent], user_id: str) -> list[float]:
    """Minutes from each intervention to its matched response."""
    return [
        (resp.at - sent.at).total_seconds() / 60.0
        for sent, resp in match_responses(events, user_id)
    ]


def response_frequency(events: Iterable[StudyEvent], user_id: str, weeks: float) -> float:
    """Responses to interventions per week."""
    if weeks <= 0:
        raise ValueError("weeks must be positive")
    count = sum(
        1 for e in events if e.user_id == user_id and e.kind == "intervention_response"
    )
    return count / weeks


def _mean_se(values: Sequence[float]) -> tuple[float | None, float | None]:
    n = len(values)
    if n == 0:
        return None, None
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    return mean, sd / math.sqrt(n)


@dataclass
class GroupStats:
    n: int
    latency_mean: float | None
    latency_se: float | None
    frequency_mean: float | None
    frequency_se: float | None


@dataclass
class EngagementReport:
    groups: dict[str, GroupStats]
    latency_test: tuple[float, int, float] | None  # (t, df, p)
    frequency_test: tuple[float, int, float] | None
    insufficient: list[str]

    def to_dict(self) -> dict:
        def test_dict(t):
            return None if t is None else {"t": t[0], "df": t[1], "p": t[2]}

        return {
            "groups": {
                name: {
                    "n": g.n,
                    "latency_mean": g.latency_mean,
                    "latency_se": g.latency_se,
                    "frequency_mean": g.frequency_mean,
                    "frequency_se": g.frequency_se,
                }
                for name, g in sorted(self.groups.items())
            },
            "latency_test": test_dict(self.latency_test),
            "frequency_test": test_dict(self.frequency_test),
            "insufficient": self.insufficient,
        }


def engagement_report(
    events: Sequence[StudyEvent], groups: dict[str, Sequence[str]], weeks: float
) -> EngagementReport:
    """Per-group engagement (mean latency / weekly response frequency with
    standard errors) plus pooled t-tests between the first two groups."""
    if len(groups) != 2:
        raise ValueError("engagement report compares exactly two groups")
    per_group_latency: dict[str, list[float]] = {}
    per_group_frequency: dict[str, list[float]] = {}
    out_groups: dict[str, GroupStats] = {}
    for name, users in groups.items():
        latencies = []
        frequencies = []
        for u in users:
            lat = response_latency(events, u)
            if lat:
                latencies.append(sum(lat) / len(lat))
            frequencies.append(response_frequency(events, u, weeks))
        per_group_latency[name] = latencies
        per_group_frequency[name] = frequencies
        lm, lse = _mean_se(latencies)
        fm, fse = _mean_se(frequencies)
        out_groups[name] = GroupStats(
            n=len(users),
            latency_mean=lm,
            latency_se=lse,
            frequency_mean=fm,
            frequency_se=fse,
        )

    insufficient = []
    name_a, name_b = list(groups)
    tests = {}
    for metric, data in (
        ("latency", per_group_latency),
        ("frequency", per_group_frequency),
    ):
        a, b = data[name_a], data[name_b]
        if len(a) < 2 or len(b) < 2:
            tests[metric] = None
            insufficient.append(metric)
            continue
        try:
            tests[metric] = stats.independent_t(a, b)
        except stats.UndefinedStatisticError:
            tests[metric] = None
            insufficient.append(f"{metric}: zero variance")
    return EngagementReport(
        groups=out_groups,
        latency_test=tests["latency"],
        frequency_test=tests["frequency"],
        insufficient=insufficient,
    )


@dataclass
class LikabilityReport:
    tost: stats.TostResult | None
    n_pairs: int
    excluded: list[str]

    def to_dict(self) -> dict:
        t = self.tost
        return {
            "tost": None
            if t is None
            else {
                "t_lower": t.t_lower,
                "t_upper": t.t_upper,
                "p_lower": t.p_lower,
                "p_upper": t.p_upper,
                "df": t.df,
                "equivalent": t.equivalent,
                "degenerate": t.degenerate,
            },
            "n_pairs": self.n_pairs,
            "excluded": self.excluded,
        }


def likability_equivalence(
    week1: dict[str, Sequence[float]],
    week2: dict[str, Sequence[float]],
    delta: float = 0.5,
    alpha: float = 0.05,
) -> LikabilityReport:
    """Paired TOST on per-subject mean Likert scores across the two weeks.

    Subjects missing either week are excluded pairwise and reported.
    """
    users = sorted(set(week1) | set(week2))
    excluded = [u for u in users if u not in week1 or u not in week2]
    paired = [u for u in users if u in week1 and u in week2]
    before = [sum(week1[u]) / len(week1[u]) for u in paired]
    after = [sum(week2[u]) / len(week2[u]) for u in paired]
    if len(paired) < 3:
        return LikabilityReport(tost=None, n_pairs=len(paired), excluded=excluded)
    tost = stats.paired_tost(before, after, delta, delta, alpha)
    return LikabilityReport(tost=tost, n_pairs=len(paired), excluded=excluded)


@dataclass
class PhaseAuditReport:
    checked: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_mood_sources(events: Iterable[StudyEvent]) -> PhaseAuditReport:
    """Verify no self-report drove behavior in the deployed phase.

    Every intervention decision logs its phase and mood source; in the
    deployed phase the source must be the model, in calibration the
    user's report.
    """
    checked = 0
    violations = []
    for e in _sorted_events(events):
        if e.kind not in ("intervention_sent", "suppressed"):
            continue
        phase = e.payload.get("phase")
        source = e.payload.get("source")
        checked += 1
        if phase == "deployed" and source != "model":
            violations.append(
                f"{e.user_id}@{e.at.isoformat()}: deployed-phase {e.kind} driven by {source!r}"
            )
        elif phase == "calibration" and source != "selfreport":
            violations.append(
                f"{e.user_id}@{e.at.isoformat()}: calibration {e.kind} driven by {source!r}"
            )
    return PhaseAuditReport(checked=checked, violations=violations)
