"""Synthetic cohort generator and end-to-end pipeline driver.

Users commute between seeded home/work locations; their hourly mood is
their personal baseline plus context effects (home / work / in transit),
a weekly rhythm, and Gaussian noise. Self-reports sample that truth with
reporting noise. Because the signal is planted, the pipeline's ordering
(personalized beats the most-frequent baseline, which a zero-signal
cohort must NOT beat) is verifiable without human data.

`run_pipeline` replays the whole study through the real service core:
calibration week, model training, deployed week, engagement responses,
and the week-end surveys, producing a genuine event log for analytics.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

from . import sensing, service, study
from .circumplex import EmotionSample
from .learning import GridConfig, dataset_from_rows, train_families
from .learning.model_io import ModelArtifact, save_model
from .learning.pipeline import TrainOutcome
from .sensing import FeatureSpec, LocationPing, UserProfile, format_utc
from .service import MoodService, ServiceConfig
from .study import StudyConfig


class GenerationError(ValueError):
    """Cohort request the generator cannot satisfy."""


@dataclass(frozen=True)
class SimulatorConfig:
    lat_range: tuple[float, float] = (47.50, 47.70)
    lon_range: tuple[float, float] = (-122.42, -122.24)
    work: tuple[float, float] = (47.620, -122.330)
    min_home_work_m: float = 1000.0

    commute_speed_kmh: float = 25.0
    dwell_ping_minutes: float = 10.0
    gps_noise_m: float = 12.0

    baseline_range: tuple[float, float] = (0.25, 0.75)
    noise_sd: float = 0.05
    report_noise_sd: float = 0.05
    rhythm_amplitude: float = 0.04
    zero_signal: bool = False

    respond_prob: dict = field(
        default_factory=lambda: {"emma": 0.80, "control": 0.77}
    )
    respond_prob_sd: float = 0.08
    latency_mean_minutes: float = 4.0
    latency_gap_minutes: float = 0.5  # extra mean latency for the control group
    latency_user_sd: float = 1.5
    likability_delta: float = 0.1
    survey_noise_sd: float = 0.3
    start_date: date = date(2024, 3, 4)  # a Monday


CONTEXTS = ("at_home", "at_work", "in_transit")


@dataclass(frozen=True)
class SyntheticUser:
    user_id: str
    condition: str
    home: tuple[float, float]
    work: tuple[float, float]
    v_b: float
    a_b: float
    sensitivity: dict  # context -> (dv, da)
    noise_sd: float
    profile: UserProfile
    respond_prob: float
    latency_mean: float


@dataclass
class DayTrace:
    day: date
    pings: list[LocationPing]
    truth: dict[int, tuple[float, float]]  # hour -> (v, a)
    context: dict[int, str]


def _deg_noise(rng: np.random.Generator, meters: float) -> tuple[float, float]:
    scale = meters / 111_320.0
    return rng.normal(0.0, scale), rng.normal(0.0, scale)


def gen_cohort(n: int = 39, seed: int = 7, config: SimulatorConfig = SimulatorConfig()) -> list[SyntheticUser]:
    """Seeded users around the city box; even indices are control, odd
    are emma, giving the floor(n/2) emma / ceil(n/2) control split."""
    if n < 2:
        raise GenerationError(f"cohort needs at least 2 users, got {n}")
    rng = np.random.default_rng([seed, 1])
    width = len(str(n))
    users = []
    for i in range(n):
        while True:
            home = (
                float(rng.uniform(*config.lat_range)),
                float(rng.uniform(*config.lon_range)),
            )
            if sensing.haversine(home, config.work) >= config.min_home_work_m:
                break
        if config.zero_signal:
            v_b = a_b = 0.5
            sensitivity = {c: (0.0, 0.0) for c in CONTEXTS}
        else:
            v_b = float(rng.uniform(*config.baseline_range))
            a_b = float(rng.uniform(*config.baseline_range))
            sensitivity = {
                "at_home": (0.0, 0.0),
                "at_work": (
                    float(rng.uniform(-0.20, 0.08)),
                    float(rng.uniform(0.05, 0.22)),
                ),
                "in_transit": (
                    float(rng.uniform(-0.12, 0.02)),
                    float(rng.uniform(-0.02, 0.12)),
                ),
            }
        gender = "F" if rng.random() < 0.18 else "M"
        profile = UserProfile(
            user_id=f"u{str(i + 1).zfill(width)}",
            gender=gender,
            big_five=tuple(float(x) for x in rng.uniform(1.5, 4.8, size=5)),
            panas=tuple(float(x) for x in rng.uniform(1.5, 4.5, size=2)),
            dass=(
                float(rng.uniform(0.0, 4.0)),
                float(rng.uniform(0.0, 3.0)),
                float(rng.uniform(0.0, 6.5)),
            ),
        )
        condition = "control" if i % 2 == 0 else "emma"
        prob = float(
            np.clip(
                rng.normal(config.respond_prob[condition], config.respond_prob_sd),
                0.5,
                0.95,
            )
        )
        latency = float(
            max(
                1.0,
                rng.normal(
                    config.latency_mean_minutes
                    + (config.latency_gap_minutes if condition == "control" else 0.0),
                    config.latency_user_sd,
                ),
            )
        )
        users.append(
            SyntheticUser(
                user_id=profile.user_id,
                condition=condition,
                home=home,
                work=config.work,
                v_b=v_b,
                a_b=a_b,
                sensitivity=sensitivity,
                noise_sd=config.noise_sd,
                profile=profile,
                respond_prob=prob,
                latency_mean=latency,
            )
        )
    return users


def _utc(day: date, minutes: float) -> datetime:
    return datetime.combine(day, time(0, 0), tzinfo=timezone.utc) + timedelta(minutes=minutes)


def gen_day(
    user: SyntheticUser, day: date, rng: np.random.Generator, config: SimulatorConfig = SimulatorConfig()
) -> DayTrace:
    """One day of pings and hourly mood truth for one user.

    Weekdays commute home -> work -> home; transit pings arrive once a
    minute, dwell pings sparsely. Weekend days stay home with a short
    outing. Hourly truth follows the planted mood model.
    """
    weekday = day.weekday() < 5
    dist_m = sensing.haversine(user.home, user.work)
    transit_min = max(8.0, dist_m / 1000.0 / config.commute_speed_kmh * 60.0)

    # Timed segments: (start_minute, end_minute, from, to, context)
    segments = []
    if weekday:
        leave_home = 8 * 60 + 30 + float(rng.uniform(-25, 25))
        arrive_work = leave_home + transit_min
        leave_work = 17 * 60 + 30 + float(rng.uniform(-40, 20))
        arrive_home = leave_work + transit_min
        segments = [
            (0.0, leave_home, user.home, user.home, "at_home"),
            (leave_home, arrive_work, user.home, user.work, "in_transit"),
            (arrive_work, leave_work, user.work, user.work, "at_work"),
            (leave_work, arrive_home, user.work, user.home, "in_transit"),
            (arrive_home, 24 * 60.0, user.home, user.home, "at_home"),
        ]
    else:
        out_start = 14 * 60 + float(rng.uniform(-60, 60))
        outing = (
            user.home[0] + float(rng.uniform(-0.008, 0.008)),
            user.home[1] + float(rng.uniform(-0.008, 0.008)),
        )
        walk = 20.0
        segments = [
            (0.0, out_start, user.home, user.home, "at_home"),
            (out_start, out_start + walk, user.home, outing, "in_transit"),
            (out_start + walk, out_start + walk + 45, outing, outing, "at_home"),
            (out_start + walk + 45, out_start + 2 * walk + 45, outing, user.home, "in_transit"),
            (out_start + 2 * walk + 45, 24 * 60.0, user.home, user.home, "at_home"),
        ]

    def position(minute: float) -> tuple[float, float, str]:
        for start, end, a, b, ctx in segments:
            if start <= minute < end:
                if ctx == "in_transit" and end > start:
                    f = (minute - start) / (end - start)
                    return (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), ctx)
                return (a[0], a[1], ctx)
        last = segments[-1]
        return (last[3][0], last[3][1], last[4])

    pings: list[LocationPing] = []
    minute = 0.0
    while minute < 24 * 60:
        lat, lon, ctx = position(minute)
        if ctx == "in_transit":
            step = 1.0
            noise = config.gps_noise_m
        else:
            step = config.dwell_ping_minutes + float(rng.uniform(-2.0, 2.0))
            noise = config.gps_noise_m / 2.0
        dlat, dlon = _deg_noise(rng, noise)
        pings.append(
            LocationPing(
                user_id=user.user_id,
                at=_utc(day, minute),
                lat=lat + dlat,
                lon=lon + dlon,
            )
        )
        minute += step

    truth: dict[int, tuple[float, float]] = {}
    context: dict[int, str] = {}
    dow = day.weekday()
    if config.zero_signal:
        rhythm_v = rhythm_a = 0.0
    else:
        rhythm_v = config.rhythm_amplitude * math.sin(2 * math.pi * dow / 7.0)
        rhythm_a = config.rhythm_amplitude * math.cos(2 * math.pi * dow / 7.0)
    for hour in range(24):
        _, _, ctx = position(hour * 60 + 30.0)
        dv, da = user.sensitivity[ctx]
        v = user.v_b + dv + rhythm_v + float(rng.normal(0.0, user.noise_sd))
        a = user.a_b + da + rhythm_a + float(rng.normal(0.0, user.noise_sd))
        truth[hour] = (float(np.clip(v, 0.0, 1.0)), float(np.clip(a, 0.0, 1.0)))
        context[hour] = ctx
    return DayTrace(day=day, pings=pings, truth=truth, context=context)


@dataclass
class PipelineBundle:
    """Everything a verification run produces."""

    users: list[SyntheticUser]
    outcome: TrainOutcome
    artifact: ModelArtifact
    deploy_report: dict
    metrics: dict
    n_labeled: int
    dropped_reports: int
    events: tuple
    paths: dict


def run_pipeline(
    n: int = 39,
    days: int = 14,
    seed: int = 7,
    config: SimulatorConfig = SimulatorConfig(),
    grid: GridConfig = GridConfig(),
    workdir: str | Path | None = None,
    k_folds: int = 10,
) -> PipelineBundle:
    """Drive the full two-phase study on a synthetic cohort.

    Days 1..days/2 run in calibration; the model trains on that half
    (internal 75/25 hold-out + CV) and the remaining days run deployed.
    Returns the train comparison, deployment accuracy against withheld
    truth, and the metrics computed from the genuine event log.
    """
    users = gen_cohort(n, seed, config)
    by_id = {u.user_id: u for u in users}
    calibration_days = days // 2

    workdir = Path(workdir) if workdir is not None else None
    data_dir = str(workdir / "service") if workdir else None
    svc_config = ServiceConfig(
        data_dir=data_dir,
        study=StudyConfig(phase="calibration", seed=seed),
    )
    clock = _FakeClock(datetime.combine(config.start_date, time(0, 0), tzinfo=timezone.utc))
    svc = MoodService(svc_config, clock=clock.now)
    for u in users:
        record = sensing.profile_to_record(u.profile)
        svc.register_user(record, condition=u.condition)

    traces: dict[str, list[DayTrace]] = {u.user_id: [] for u in users}
    artifact: ModelArtifact | None = None
    outcome: TrainOutcome | None = None
    n_labeled = 0
    dropped = 0

    for day_index in range(days):
        day = config.start_date + timedelta(days=day_index)
        if day_index == calibration_days:
            outcome, artifact, n_labeled, dropped = _train_from_service(
                svc, users, seed, grid, k_folds, config
            )
            if workdir:
                save_model(workdir / "model.json", artifact)
            svc.artifact = artifact
            svc.study_config = replace(svc.study_config, phase="deployed")
        for ui, u in enumerate(users):
            rng = np.random.default_rng([seed, 2, ui, day_index])
            trace = gen_day(u, day, rng, config)
            traces[u.user_id].append(trace)
            _drive_user_day(svc, u, trace, rng, clock, config)
        if day_index == calibration_days - 1 or day_index == days - 1:
            week = 1 if day_index == calibration_days - 1 else 2
            for ui, u in enumerate(users):
                rng = np.random.default_rng([seed, 3, ui, week])
                _submit_survey(svc, u, week, rng, clock, config, day)

    if outcome is None or artifact is None:
        raise GenerationError("pipeline needs at least 2 days to include a phase switch")

    deploy_report = _deployment_report(svc, traces, outcome)
    metrics = svc.metrics()
    paths = {}
    if workdir:
        paths = {
            "model": str(workdir / "model.json"),
            "events": str(Path(data_dir) / "events.jsonl"),
            "pings": str(Path(data_dir) / "pings.jsonl"),
            "profiles": str(Path(data_dir) / "profiles.jsonl"),
        }
    bundle = PipelineBundle(
        users=users,
        outcome=outcome,
        artifact=artifact,
        deploy_report=deploy_report,
        metrics=metrics,
        n_labeled=n_labeled,
        dropped_reports=dropped,
        events=svc.log.snapshot(),
        paths=paths,
    )
    svc.log.close()
    return bundle


class _FakeClock:
    def __init__(self, start: datetime):
        self._now = start

    def now(self) -> datetime:
        return self._now

    def set(self, at: datetime) -> None:
        self._now = at


def _drive_user_day(
    svc: MoodService,
    user: SyntheticUser,
    trace: DayTrace,
    rng: np.random.Generator,
    clock: _FakeClock,
    config: SimulatorConfig,
) -> None:
    """Replay one user-day against the service in event-time order."""
    actions: list[tuple[datetime, int, str, object]] = []
    counter = 0

    def push(at: datetime, kind: str, payload: object = None):
        nonlocal counter
        heapq.heappush(actions, (at, counter, kind, payload))
        counter += 1

    batch: list[dict] = []
    batch_start: datetime | None = None
    for p in trace.pings:
        if batch_start is None:
            batch_start = p.at
        batch.append(sensing.ping_to_record(p))
        if (p.at - batch_start) >= timedelta(minutes=10):
            push(p.at, "pings", batch)
            batch = []
            batch_start = None
    if batch:
        push(trace.pings[-1].at, "pings", batch)

    slots = study.schedule_prompts(trace.day, svc.study_config, user.user_id)
    for slot_at in slots:
        push(slot_at + timedelta(seconds=int(rng.integers(5, 30))), "poll", None)
        report_at = slot_at + timedelta(minutes=float(rng.uniform(1.0, 4.0)))
        push(report_at, "report", None)

    while actions:
        at, _, kind, payload = heapq.heappop(actions)
        clock.set(at)
        if kind == "pings":
            svc.ingest_pings(user.user_id, payload)
        elif kind == "poll":
            result = svc.get_prompt(user.user_id)
            pending = result.get("pending")
            if pending and pending.get("kind") == "intervention":
                _maybe_respond(push, at, pending["ref"], user, rng, config)
        elif kind == "report":
            hour = at.hour
            v_true, a_true = trace.truth[hour]
            v = float(np.clip(v_true + rng.normal(0.0, config.report_noise_sd), 0.0, 1.0))
            a = float(np.clip(a_true + rng.normal(0.0, config.report_noise_sd), 0.0, 1.0))
            result = svc.submit_selfreport(user.user_id, v, a)
            interaction = result.get("interaction")
            if interaction and interaction.get("kind") == "intervention":
                _maybe_respond(push, at, interaction["ref"], user, rng, config)
        elif kind == "respond":
            ref, action = payload
            try:
                svc.respond(user.user_id, ref, action)
            except service.ServiceError:
                pass  # stale ref after an opt-out or restart: ignore


def _maybe_respond(push, at: datetime, ref: str, user: SyntheticUser, rng, config) -> None:
    if rng.random() >= user.respond_prob:
        return
    latency_min = 0.5 + float(rng.exponential(max(0.1, user.latency_mean - 0.5)))
    action = "done" if rng.random() < 0.9 else "skip"
    push(at + timedelta(minutes=latency_min), "respond", (ref, action))


def _submit_survey(svc, user, week, rng, clock, config, day) -> None:
    clock.set(datetime.combine(day, time(21, 30), tzinfo=timezone.utc))
    base = np.clip(rng.normal(5.3, 0.6, size=6), 1.0, 7.0)
    if week == 2:
        base = np.clip(
            base + config.likability_delta + rng.normal(0.0, config.survey_noise_sd, size=6),
            1.0,
            7.0,
        )
    svc.submit_survey(user.user_id, week, [float(x) for x in base])


def _train_from_service(svc, users, seed, grid, k_folds, config):
    """Build the labeled dataset from stored pings + logged reports and
    run the family comparison."""
    profiles = {u.user_id: u.profile for u in users}
    spec = FeatureSpec.from_profiles(profiles.values())
    all_rows = []
    homes = {}
    for u in users:
        rows, home, _ = sensing.extract_user_rows(
            svc.pings.get(u.user_id, []), config.work
        )
        homes[u.user_id] = home
        all_rows.extend(rows)
    samples = [
        EmotionSample(
            user_id=e.user_id, at=e.at, valence=e.payload["v"], arousal=e.payload["a"]
        )
        for e in svc.log.events
        if e.kind == "selfreport"
    ]
    labeled, join = sensing.build_dataset(all_rows, samples)
    ds = dataset_from_rows(labeled, profiles, spec)
    outcome = train_families(ds, seed=seed, k=k_folds, grid=grid)
    artifact = ModelArtifact(
        model=outcome.selected.model,
        feature_spec=spec,
        work=config.work,
        homes=homes,
        meta={
            "selected_family": outcome.selected.family,
            "n_train": outcome.n_train,
            "n_test": outcome.n_test,
        },
    )
    return outcome, artifact, len(labeled), join.dropped


def _deployment_report(svc, traces, outcome) -> dict:
    """Deployed-phase accuracy of logged predictions against withheld
    truth, next to the most-frequent baseline fit at training time."""
    day_index = {}
    for user_id, user_traces in traces.items():
        for t in user_traces:
            day_index[(user_id, t.day)] = t

    base = outcome.family("baseline").model
    base_v = base.valence.predict(np.zeros((1, 1)))[0]
    base_a = base.arousal.predict(np.zeros((1, 1)))[0]

    rows = []
    for e in svc.log.events:
        if e.kind != "mood_predicted":
            continue
        trace = day_index.get((e.user_id, e.at.date()))
        if trace is None:
            continue
        tv, ta = trace.truth[e.at.hour]
        rows.append((e.payload["v"], e.payload["a"], tv, ta))
    if not rows:
        return {"n": 0}

    def accs(pred_pairs):
        v_ok = [(pv >= 0.5) == (tv >= 0.5) for pv, _, tv, _ in pred_pairs]
        a_ok = [(pa >= 0.5) == (ta >= 0.5) for _, pa, _, ta in pred_pairs]
        q_ok = [v and a for v, a in zip(v_ok, a_ok)]
        n = len(pred_pairs)
        return {
            "valence_accuracy": sum(v_ok) / n,
            "arousal_accuracy": sum(a_ok) / n,
            "quadrant_accuracy": sum(q_ok) / n,
            "n": n,
        }

    baseline_rows = [(base_v, base_a, tv, ta) for _, _, tv, ta in rows]
    return {
        "n": len(rows),
        "personalized": accs(rows),
        "baseline": accs(baseline_rows),
    }
