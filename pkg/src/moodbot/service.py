"""Networked service core: ingestion, prompting, mood inference,
intervention delivery, dialog, and metrics over the event log.

Every state change is an appended StudyEvent, so the service is a pure
function of (config, log, clock, seed): rebuilding from the same log
yields the same sessions, and GET /metrics over an unchanged log yields
byte-identical reports. The HTTP layer is a thin JSON adapter over
`MoodService`; training never happens in-process — a model artifact is
loaded at startup or on demand.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable
from urllib.parse import parse_qs, urlparse

from . import dialog, interventions, sensing, stats, study
from .circumplex import EmotionSample, Quadrant, discretize, quadrant_of
from .eventlog import EventLog
from .learning.model_io import ModelArtifact, load_model
from .sensing import format_utc
from .study import StudyConfig, StudyEvent


class ServiceError(Exception):
    def __init__(self, code: str, message: str, status: int = 400, field_path: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status
        self.field_path = field_path

    def body(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.field_path:
            out["field_path"] = self.field_path
        return out


@dataclass
class ServiceConfig:
    data_dir: str | None = None
    catalog_path: str | None = None
    template_path: str | None = None
    model_path: str | None = None
    study: StudyConfig = field(default_factory=StudyConfig)
    host: str = "127.0.0.1"
    port: int = 8787
    static_dir: str | None = None

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        study_doc = doc.get("study", {})
        waking = study_doc.get("waking_window", ["09:00", "21:00"])
        cfg = StudyConfig(
            condition=study_doc.get("condition", "control"),
            phase=study_doc.get("phase", "calibration"),
            prompts_per_day=study_doc.get("prompts_per_day", 5),
            waking_start=_parse_hhmm(waking[0]),
            waking_end=_parse_hhmm(waking[1]),
            min_gap_minutes=study_doc.get("min_gap_minutes", 90),
            suppress_positive_high=study_doc.get("suppress_positive_high", False),
            seed=study_doc.get("seed", 0),
        )
        return cls(
            data_dir=doc.get("data_dir"),
            catalog_path=doc.get("catalog_path"),
            template_path=doc.get("template_path"),
            model_path=doc.get("model_path"),
            study=cfg,
            host=doc.get("host", "127.0.0.1"),
            port=doc.get("port", 8787),
            static_dir=doc.get("static_dir"),
        )


def _parse_hhmm(text: str):
    from datetime import time

    h, m = text.split(":")
    return time(int(h), int(m))


@dataclass
class Session:
    user_id: str
    condition: str
    opted_out: bool = False
    recent_interventions: list[str] = field(default_factory=list)
    last_template: dict[str, str] = field(default_factory=dict)
    consumed_slots: set[str] = field(default_factory=set)
    pending: dict[str, dict] = field(default_factory=dict)  # ref -> context

    @property
    def tone(self) -> str:
        return "emotional" if self.condition == "emma" else "neutral"


def _message_dict(m: dialog.Message) -> dict:
    return {
        "text": m.text,
        "tone": m.tone,
        "slot": m.slot,
        "template_id": m.template_id,
        "intervention_id": m.intervention_id,
    }


class MoodService:
    """The application core behind the HTTP endpoints."""

    def __init__(self, config: ServiceConfig, clock: Callable[[], datetime] | None = None):
        self.config = config
        self.study_config = config.study
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.catalog = interventions.load_catalog(config.catalog_path)
        self.templates = dialog.load_templates(config.template_path)
        self.artifact: ModelArtifact | None = None
        if config.model_path and Path(config.model_path).exists():
            self.artifact = load_model(config.model_path)

        data_dir = Path(config.data_dir) if config.data_dir else None
        if data_dir:
            data_dir.mkdir(parents=True, exist_ok=True)
        self.log = EventLog(data_dir / "events.jsonl" if data_dir else None)
        self._profiles_path = data_dir / "profiles.jsonl" if data_dir else None
        self._pings_path = data_dir / "pings.jsonl" if data_dir else None

        self.profiles: dict[str, sensing.UserProfile] = {}
        self.sessions: dict[str, Session] = {}
        self.pings: dict[str, list[sensing.LocationPing]] = {}
        self._ping_keys: set[tuple] = set()
        self._conditions: dict[str, str] = {}
        self._intervention_count = 0
        self._global_lock = threading.Lock()
        self._user_locks: dict[str, threading.Lock] = {}

        if self._profiles_path and self._profiles_path.exists():
            for record in _read_jsonl(self._profiles_path):
                profile = sensing.profile_from_record(record)
                self.profiles[profile.user_id] = profile
                self._conditions[profile.user_id] = record.get("condition", "control")
        if self._pings_path and self._pings_path.exists():
            for p in sensing.load_pings(self._pings_path):
                self._remember_ping(p)
        self._replay()

    # -- state reconstruction ------------------------------------------------

    def _replay(self) -> None:
        for user_id, condition in self._conditions.items():
            self.sessions[user_id] = Session(user_id=user_id, condition=condition)
        for e in self.log.events:
            s = self.sessions.get(e.user_id)
            if s is None:
                continue
            if e.kind == "optout":
                s.opted_out = True
            elif e.kind == "optin":
                s.opted_out = False
            elif e.kind == "prompt_sent":
                s.consumed_slots.add(e.payload.get("slot_at", ""))
                tid = e.payload.get("message", {}).get("template_id")
                if tid:
                    s.last_template["sampling_prompt"] = tid
            elif e.kind == "intervention_sent":
                self._intervention_count += 1
                ref = e.payload["ref"]
                s.recent_interventions.append(e.payload["intervention_id"])
                slot_at = e.payload.get("slot_at")
                if slot_at:
                    s.consumed_slots.add(slot_at)
                tid = e.payload.get("message", {}).get("template_id")
                if tid:
                    s.last_template["intervention_intro"] = tid
                s.pending[ref] = {
                    "quadrant": e.payload.get("quadrant"),
                    "sent_at": e.at,
                }
            elif e.kind == "suppressed":
                slot_at = e.payload.get("slot_at")
                if slot_at:
                    s.consumed_slots.add(slot_at)
            elif e.kind == "intervention_response":
                s.pending.pop(e.payload.get("ref"), None)

    def _lock_for(self, user_id: str) -> threading.Lock:
        with self._global_lock:
            if user_id not in self._user_locks:
                self._user_locks[user_id] = threading.Lock()
            return self._user_locks[user_id]

    def _session(self, user_id: str) -> Session:
        s = self.sessions.get(user_id)
        if s is None:
            raise ServiceError("not_found", f"unknown user {user_id!r}", status=404)
        return s

    def _append(self, user_id: str, kind: str, payload: dict, at: datetime | None = None) -> StudyEvent:
        return self.log.append(
            StudyEvent(user_id=user_id, at=at or self.clock(), kind=kind, payload=payload)
        )

    def _remember_ping(self, p: sensing.LocationPing) -> bool:
        key = (p.user_id, p.at, p.lat, p.lon)
        if key in self._ping_keys:
            return False
        self._ping_keys.add(key)
        self.pings.setdefault(p.user_id, []).append(p)
        return True

    def _rng(self, *scope) -> random.Random:
        tag = ":".join(str(s) for s in scope)
        return random.Random(f"{self.study_config.seed}:{tag}")

    # -- endpoints -----------------------------------------------------------

    def register_user(self, record: dict, condition: str | None = None) -> dict:
        with self._global_lock:
            try:
                profile = sensing.profile_from_record(record)
            except sensing.ProfileError as exc:
                field_path = _missing_profile_field(record)
                raise ServiceError("invalid_profile", str(exc), 400, field_path)
            if profile.user_id in self.profiles:
                raise ServiceError(
                    "conflict", f"user {profile.user_id!r} already exists", status=409
                )
            if condition is None:
                condition = record.get("condition")
            if condition is None:
                # Round-robin assignment: first registration gets control.
                n = len(self.profiles)
                condition = "control" if n % 2 == 0 else "emma"
            if condition not in study.CONDITIONS:
                raise ServiceError("invalid_condition", f"unknown condition {condition!r}")
            self.profiles[profile.user_id] = profile
            self._conditions[profile.user_id] = condition
            self.sessions[profile.user_id] = Session(user_id=profile.user_id, condition=condition)
            if self._profiles_path:
                with open(self._profiles_path, "a", encoding="utf-8") as fh:
                    rec = sensing.profile_to_record(profile)
                    rec["condition"] = condition
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
            return {"user_id": profile.user_id, "condition": condition}

    def ingest_pings(self, user_id: str, records: list) -> dict:
        self._session(user_id)
        with self._lock_for(user_id):
            accepted = 0
            duplicates = 0
            rejected = []
            new_lines = []
            for i, record in enumerate(records):
                try:
                    if isinstance(record, dict) and "user_id" not in record:
                        record = {**record, "user_id": user_id}
                    ping = sensing.ping_from_record(record)
                except sensing.PingError as exc:
                    rejected.append({"index": i, "reason": str(exc)})
                    continue
                if ping.user_id != user_id:
                    rejected.append({"index": i, "reason": "user_id mismatch"})
                    continue
                if self._remember_ping(ping):
                    accepted += 1
                    new_lines.append(json.dumps(sensing.ping_to_record(ping), sort_keys=True))
                else:
                    duplicates += 1
            if self._pings_path and new_lines:
                with open(self._pings_path, "a", encoding="utf-8") as fh:
                    fh.write("\n".join(new_lines) + "\n")
            return {"accepted": accepted, "duplicates": duplicates, "rejected": rejected}

    def submit_selfreport(self, user_id: str, v: float, a: float) -> dict:
        s = self._session(user_id)
        with self._lock_for(user_id):
            now = self.clock()
            try:
                sample = EmotionSample(user_id=user_id, at=now, valence=float(v), arousal=float(a))
            except (TypeError, ValueError) as exc:
                raise ServiceError("invalid_report", str(exc), 400, "selfreport")
            quadrant = sample.quadrant
            phase = self.study_config.phase
            self._append(
                user_id,
                "selfreport",
                {"v": sample.valence, "a": sample.arousal, "quadrant": quadrant.value, "phase": phase},
                at=now,
            )
            if phase != "calibration":
                # Deployed: stored as ground truth only; a generic receipt
                # that never depends on the reported mood.
                ack = self._render(s, quadrant, "acknowledgment", now, tone="neutral")
                return {"ack": _message_dict(ack), "interaction": None}
            ack = self._render(s, quadrant, "acknowledgment", now)
            interaction = self._maybe_intervene(s, quadrant, "selfreport", now, slot_at=None)
            return {"ack": _message_dict(ack), "interaction": interaction}

    def get_prompt(self, user_id: str) -> dict:
        s = self._session(user_id)
        with self._lock_for(user_id):
            now = self.clock()
            if s.opted_out:
                return {"pending": None}
            slots = study.schedule_prompts(now.date(), self.study_config, user_id)
            due = [
                t for t in slots if t <= now and format_utc(t) not in s.consumed_slots
            ]
            if not due:
                return {"pending": None}
            slot_at = format_utc(due[0])
            phase = self.study_config.phase
            if phase == "calibration":
                quadrant = Quadrant.BL  # sampling prompts are quadrant-agnostic
                message = self._render(s, quadrant, "sampling_prompt", now)
                s.consumed_slots.add(slot_at)
                self._append(
                    user_id,
                    "prompt_sent",
                    {"slot_at": slot_at, "phase": phase, "message": _message_dict(message)},
                    at=now,
                )
                return {"pending": {"kind": "sampling_prompt", "message": _message_dict(message)}}
            if self.artifact is None:
                raise ServiceError(
                    "no_model", "deployed phase requires a model artifact", status=503
                )
            try:
                v, a, source = study.mood_source(
                    self.study_config,
                    None,
                    self.artifact.model,
                    self._current_features(user_id, now),
                    user_id=user_id,
                )
            except study.MoodSourceError:
                return {"pending": None}  # rescheduled: slot stays unconsumed
            quadrant = quadrant_of(*discretize(v, a))
            self._append(
                user_id,
                "mood_predicted",
                {"v": v, "a": a, "quadrant": quadrant.value, "phase": phase, "source": source},
                at=now,
            )
            interaction = self._maybe_intervene(s, quadrant, source, now, slot_at=slot_at)
            s.consumed_slots.add(slot_at)
            return {"pending": interaction}

    def respond(self, user_id: str, ref: str, action: str) -> dict:
        s = self._session(user_id)
        with self._lock_for(user_id):
            now = self.clock()
            if action == "optout":
                s.opted_out = True
                self._append(user_id, "optout", {"ref": ref}, at=now)
                return {"opted_out": True}
            if action not in ("done", "skip"):
                raise ServiceError("invalid_action", f"unknown action {action!r}")
            ctx = s.pending.get(ref)
            if ctx is None:
                raise ServiceError("not_found", f"unknown prompt ref {ref!r}", status=404)
            del s.pending[ref]
            self._append(user_id, "intervention_response", {"ref": ref, "action": action}, at=now)
            quadrant = Quadrant(ctx["quadrant"]) if ctx.get("quadrant") else Quadrant.BL
            followup = self._render(s, quadrant, "followup", now)
            return {"followup": _message_dict(followup)}

    def optin(self, user_id: str) -> dict:
        s = self._session(user_id)
        with self._lock_for(user_id):
            s.opted_out = False
            self._append(user_id, "optin", {})
            return {"opted_out": False}

    def submit_survey(self, user_id: str, week: int, items: list) -> dict:
        self._session(user_id)
        with self._lock_for(user_id):
            if week not in (1, 2):
                raise ServiceError("invalid_survey", "week must be 1 or 2", 400, "survey.week")
            values = [float(x) for x in items]
            if not values or any(not 1.0 <= x <= 7.0 for x in values):
                raise ServiceError(
                    "invalid_survey", "items must be 1..7 Likert scores", 400, "survey.items"
                )
            self._append(user_id, "survey", {"week": week, "items": values})
            return {"recorded": len(values)}

    def session_info(self, user_id: str) -> dict:
        s = self._session(user_id)
        return {
            "user_id": s.user_id,
            "condition": s.condition,
            "phase": self.study_config.phase,
            "opted_out": s.opted_out,
        }

    def metrics(self) -> dict:
        with self._global_lock:
            events = list(self.log.snapshot())
        return compute_metrics(events, self._conditions)

    # -- internals -----------------------------------------------------------

    def _render(
        self,
        s: Session,
        quadrant: Quadrant,
        slot: str,
        now: datetime,
        intervention=None,
        tone: str | None = None,
    ) -> dialog.Message:
        rng = self._rng("render", s.user_id, slot, len(self.log))
        message = dialog.render(
            self.templates,
            quadrant,
            slot,
            tone or s.tone,
            rng,
            user_id=s.user_id,
            at=now,
            intervention=intervention,
            last_template_id=s.last_template.get(slot),
        )
        s.last_template[slot] = message.template_id
        return message

    def _maybe_intervene(
        self, s: Session, quadrant: Quadrant, source: str, now: datetime, slot_at: str | None
    ) -> dict:
        phase = self.study_config.phase
        gate = interventions.policy_gate(
            quadrant,
            suppress_positive_high=self.study_config.suppress_positive_high,
            opted_out=s.opted_out,
        )
        if not gate.deliver:
            payload = {
                "reason": gate.reason,
                "quadrant": quadrant.value,
                "phase": phase,
                "source": source,
            }
            if slot_at:
                payload["slot_at"] = slot_at
            self._append(s.user_id, "suppressed", payload, at=now)
            return {"kind": "suppressed", "reason": gate.reason}
        ref = f"iv-{self._intervention_count + 1}"
        rng = self._rng("select", s.user_id, ref)
        chosen = interventions.select(self.catalog, quadrant, s.recent_interventions, rng)
        message = self._render(s, quadrant, "intervention_intro", now, intervention=chosen)
        self._intervention_count += 1
        s.recent_interventions.append(chosen.id)
        s.pending[ref] = {"quadrant": quadrant.value, "sent_at": now}
        payload = {
            "ref": ref,
            "intervention_id": chosen.id,
            "quadrant": quadrant.value,
            "source": source,
            "phase": phase,
            "message": _message_dict(message),
        }
        if slot_at:
            payload["slot_at"] = slot_at
        self._append(s.user_id, "intervention_sent", payload, at=now)
        return {
            "kind": "intervention",
            "ref": ref,
            "message": _message_dict(message),
            "intervention": {
                "id": chosen.id,
                "text": chosen.text,
                "url": chosen.url,
                "category": chosen.category,
            },
        }

    def _current_features(self, user_id: str, now: datetime):
        if self.artifact is None:
            return None
        user_pings = self.pings.get(user_id, [])
        hour_start = sensing.hour_floor(now)
        work = self.artifact.work
        home = self.artifact.homes.get(user_id, work)
        row = sensing.hourly_features(user_pings, work, home, hour_start)
        if row is None:
            return None
        profile = self.profiles.get(user_id)
        if profile is None:
            return None
        try:
            return self.artifact.feature_spec.vector(row, profile)
        except sensing.EncodingError:
            return None


def _missing_profile_field(record: dict) -> str | None:
    for key in ("user_id", "gender", "big_five", "panas", "dass"):
        if key not in record:
            return f"profile.{key}"
    return None


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


# -- log-derived metrics -----------------------------------------------------


def _pair_predictions(events: list[StudyEvent]) -> tuple[list[float], list[float], list[float], list[float]]:
    """Match each prediction with the user's nearest self-report in the
    same clock hour; returns (pred_v, actual_v, pred_a, actual_a)."""
    reports: dict[tuple[str, datetime], list[StudyEvent]] = {}
    for e in events:
        if e.kind == "selfreport":
            reports.setdefault((e.user_id, sensing.hour_floor(e.at)), []).append(e)
    pv, av, pa, aa = [], [], [], []
    for e in events:
        if e.kind != "mood_predicted":
            continue
        bucket = reports.get((e.user_id, sensing.hour_floor(e.at)))
        if not bucket:
            continue
        nearest = min(bucket, key=lambda r: (abs((r.at - e.at).total_seconds()), r.at))
        pv.append(e.payload["v"])
        av.append(nearest.payload["v"])
        pa.append(e.payload["a"])
        aa.append(nearest.payload["a"])
    return pv, av, pa, aa


def compute_metrics(events: list[StudyEvent], conditions: dict[str, str]) -> dict:
    """Engagement, likability TOST, prediction correlations, and the
    phase audit — a pure, deterministic function of the log snapshot."""
    groups: dict[str, list[str]] = {"emma": [], "control": []}
    for user_id, condition in sorted(conditions.items()):
        groups.setdefault(condition, []).append(user_id)

    if events:
        span = max(e.at for e in events) - min(e.at for e in events)
        weeks = max(1.0, span.total_seconds() / (7 * 86400.0))
    else:
        weeks = 1.0

    insufficient = []
    if all(len(u) >= 2 for u in groups.values()) and events:
        engagement = study.engagement_report(events, groups, weeks).to_dict()
    else:
        engagement = None
        insufficient.append("engagement")

    week1: dict[str, list[float]] = {}
    week2: dict[str, list[float]] = {}
    for e in events:
        if e.kind == "survey":
            target = week1 if e.payload.get("week") == 1 else week2
            target[e.user_id] = list(e.payload.get("items", []))
    likability = study.likability_equivalence(week1, week2).to_dict()
    if likability["tost"] is None:
        insufficient.append("likability")

    pv, av, pa, aa = _pair_predictions(events)
    correlations = {"n": len(pv), "pearson_v": None, "pearson_a": None}
    if len(pv) >= 2:
        try:
            correlations["pearson_v"] = stats.pearson(pv, av)
        except stats.UndefinedStatisticError:
            pass
        try:
            correlations["pearson_a"] = stats.pearson(pa, aa)
        except stats.UndefinedStatisticError:
            pass
    else:
        insufficient.append("correlations")

    audit = study.audit_mood_sources(events)
    return {
        "n_events": len(events),
        "weeks": weeks,
        "engagement": engagement,
        "likability": likability,
        "correlations": correlations,
        "phase_audit": {"checked": audit.checked, "ok": audit.ok, "violations": audit.violations},
        "insufficient": insufficient,
    }


def metrics_to_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, separators=(",", ":"))


# -- HTTP adapter --------------------------------------------------------------


def _make_handler(service: MoodService, static_dir: str | None):
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            if length == 0:
                return {}
            try:
                return json.loads(self.rfile.read(length).decode("utf-8"))
            except json.JSONDecodeError as exc:
                raise ServiceError("invalid_json", f"request body is not JSON: {exc}")

        def _serve_static(self, path: str) -> None:
            if static_root is None:
                self._send_json(404, {"code": "not_found", "message": "no static content"})
                return
            rel = path.lstrip("/") or "index.html"
            target = (static_root / rel).resolve()
            if not str(target).startswith(str(static_root)) or not target.is_file():
                self._send_json(404, {"code": "not_found", "message": path})
                return
            content = target.read_bytes()
            ctype = {
                ".html": "text/html; charset=utf-8",
                ".js": "text/javascript; charset=utf-8",
                ".css": "text/css; charset=utf-8",
                ".json": "application/json",
            }.get(target.suffix, "application/octet-stream")
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(content)))
            self.end_headers()
            self.wfile.write(content)

        def _dispatch(self, method: str) -> None:
            parsed = urlparse(self.path)
            route = (method, parsed.path)
            try:
                if route == ("GET", "/health"):
                    self._send_json(200, {"ok": True})
                elif route == ("POST", "/users"):
                    body = self._read_json()
                    self._send_json(201, service.register_user(body))
                elif route == ("POST", "/location"):
                    body = self._read_json()
                    user_id = body.get("user_id", "")
                    pings = body.get("pings", body if isinstance(body, list) else [])
                    self._send_json(200, service.ingest_pings(user_id, pings))
                elif route == ("POST", "/selfreport"):
                    body = self._read_json()
                    self._send_json(
                        200,
                        service.submit_selfreport(
                            body.get("user_id", ""), body.get("v"), body.get("a")
                        ),
                    )
                elif route == ("GET", "/prompt"):
                    qs = parse_qs(parsed.query)
                    user_id = (qs.get("user_id") or [""])[0]
                    self._send_json(200, service.get_prompt(user_id))
                elif route == ("POST", "/respond"):
                    body = self._read_json()
                    self._send_json(
                        200,
                        service.respond(
                            body.get("user_id", ""), body.get("ref", ""), body.get("action", "")
                        ),
                    )
                elif route == ("POST", "/optin"):
                    body = self._read_json()
                    self._send_json(200, service.optin(body.get("user_id", "")))
                elif route == ("POST", "/survey"):
                    body = self._read_json()
                    self._send_json(
                        200,
                        service.submit_survey(
                            body.get("user_id", ""), body.get("week"), body.get("items", [])
                        ),
                    )
                elif route == ("GET", "/metrics"):
                    body = metrics_to_json(service.metrics()).encode("utf-8")
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json; charset=utf-8")
                    self.send_header("Content-Length", str(len(body)))
                    self.send_header("Access-Control-Allow-Origin", "*")
                    self.end_headers()
                    self.wfile.write(body)
                elif route == ("GET", "/session"):
                    qs = parse_qs(parsed.query)
                    user_id = (qs.get("user_id") or [""])[0]
                    self._send_json(200, service.session_info(user_id))
                elif method == "GET":
                    self._serve_static(parsed.path)
                else:
                    self._send_json(404, {"code": "not_found", "message": parsed.path})
            except ServiceError as exc:
                self._send_json(exc.status, exc.body())
            except (TypeError, ValueError) as exc:
                self._send_json(400, {"code": "bad_request", "message": str(exc)})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


def make_server(service: MoodService) -> ThreadingHTTPServer:
    handler = _make_handler(service, service.config.static_dir)
    return ThreadingHTTPServer((service.config.host, service.config.port), handler)


def serve_forever(config: ServiceConfig) -> None:
    service = MoodService(config)
    server = make_server(service)
    host, port = server.server_address[:2]
    print(f"moodbot service listening on http://{host}:{port}")
    try:
        server.serve_forever()
    finally:
        service.log.close()
