"""Location ingestion and hourly mobility feature extraction.

Raw per-minute location pings are aggregated into one feature row per
(user, hour): mean/std of latitude and longitude, mean distance from
the work location, distance of the hourly mean position from home, and
hour-of-day / day-of-week context. Rows are joined with self-report
labels by hour containment to form the training dataset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

from .circumplex import EmotionSample, as_utc

EARTH_RADIUS_M = 6_371_008.8

MOBILITY_FEATURES = (
    "avg_lat",
    "avg_lon",
    "std_lat",
    "std_lon",
    "avg_dist_work",
    "dist_home",
    "hour_of_day",
    "day_of_week",
)

TRAIT_FEATURES = (
    "big5_openness",
    "big5_conscientiousness",
    "big5_extraversion",
    "big5_agreeableness",
    "big5_neuroticism",
    "panas_positive",
    "panas_negative",
    "dass_depression",
    "dass_anxiety",
    "dass_stress",
)


class PingError(ValueError):
    """Malformed or out-of-range location record."""


class ProfileError(ValueError):
    """Malformed or incomplete user profile."""


class EncodingError(ValueError):
    """Value not present in a one-hot vocabulary."""


class HomeEstimationError(ValueError):
    """No pings outside the work radius to estimate a home location."""


@dataclass(frozen=True)
class LocationPing:
    user_id: str
    at: datetime
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise PingError(f"lat out of range: {self.lat!r}")
        if not -180.0 <= self.lon <= 180.0:
            raise PingError(f"lon out of range: {self.lon!r}")
        object.__setattr__(self, "at", as_utc(self.at))


@dataclass(frozen=True)
class UserProfile:
    """Static pre-study measures: gender, Big Five, PANAS, DASS."""

    user_id: str
    gender: str
    big_five: tuple[float, float, float, float, float]
    panas: tuple[float, float]
    dass: tuple[float, float, float]

    def __post_init__(self) -> None:
        for name, values, want in (
            ("big_five", self.big_five, 5),
            ("panas", self.panas, 2),
            ("dass", self.dass, 3),
        ):
            if len(values) != want:
                raise ProfileError(f"{name} needs {want} values, got {len(values)}")
            if any(v is None or not math.isfinite(v) for v in values):
                raise ProfileError(f"{name} contains a missing value")

    @property
    def traits(self) -> tuple[float, ...]:
        return tuple(self.big_five) + tuple(self.panas) + tuple(self.dass)


@dataclass(frozen=True)
class FeatureRow:
    """Hourly mobility/context features for one user, optionally labeled."""

    user_id: str
    hour_start: datetime
    avg_lat: float
    avg_lon: float
    std_lat: float
    std_lon: float
    avg_dist_work: float
    dist_home: float
    hour_of_day: int
    day_of_week: int
    label_v: float | None = None
    label_a: float | None = None

    @property
    def mobility(self) -> tuple[float, ...]:
        return (
            self.avg_lat,
            self.avg_lon,
            self.std_lat,
            self.std_lon,
            self.avg_dist_work,
            self.dist_home,
            float(self.hour_of_day),
            float(self.day_of_week),
        )


def haversine(p: tuple[float, float], q: tuple[float, float]) -> float:
    """Great-circle distance in meters between (lat, lon) points."""
    lat1, lon1 = math.radians(p[0]), math.radians(p[1])
    lat2, lon2 = math.radians(q[0]), math.radians(q[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _lower_median(values: Sequence[float]) -> float:
    # Lower-middle order statistic: never averages two coordinates.
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def estimate_home(
    pings: Sequence[LocationPing],
    work: tuple[float, float],
    work_radius: float = 500.0,
) -> tuple[float, float]:
    """Component-wise median of pings farther than `work_radius` from work."""
    away = [p for p in pings if haversine((p.lat, p.lon), work) > work_radius]
    if not away:
        raise HomeEstimationError(
            f"no pings beyond {work_radius} m from work; cannot estimate home"
        )
    return _lower_median([p.lat for p in away]), _lower_median([p.lon for p in away])


def hour_floor(at: datetime) -> datetime:
    return as_utc(at).replace(minute=0, second=0, microsecond=0)


def hourly_features(
    pings: Sequence[LocationPing],
    work: tuple[float, float],
    home: tuple[float, float],
    hour_start: datetime,
    min_pings: int = 1,
) -> FeatureRow | None:
    """Aggregate one hour of pings into a FeatureRow; None when too sparse."""
    hour_start = hour_floor(hour_start)
    hour_end = hour_start + timedelta(hours=1)
    in_hour = [p for p in pings if hour_start <= p.at < hour_end]
    n = len(in_hour)
    if n < min_pings:
        return None
    lats = [p.lat for p in in_hour]
    lons = [p.lon for p in in_hour]
    avg_lat = sum(lats) / n
    avg_lon = sum(lons) / n
    # Population standard deviation: a single ping gives 0, not undefined.
    std_lat = math.sqrt(sum((v - avg_lat) ** 2 for v in lats) / n)
    std_lon = math.sqrt(sum((v - avg_lon) ** 2 for v in lons) / n)
    avg_dist_work = sum(haversine((p.lat, p.lon), work) for p in in_hour) / n
    dist_home = haversine((avg_lat, avg_lon), home)
    return FeatureRow(
        user_id=in_hour[0].user_id,
        hour_start=hour_start,
        avg_lat=avg_lat,
        avg_lon=avg_lon,
        std_lat=std_lat,
        std_lon=std_lon,
        avg_dist_work=avg_dist_work,
        dist_home=dist_home,
        hour_of_day=hour_start.hour,
        day_of_week=hour_start.weekday(),
    )


def one_hot(value: str, vocabulary: Sequence[str]) -> list[int]:
    """Binary indicator vector of `value` against an ordered vocabulary."""
    try:
        index = list(vocabulary).index(value)
    except ValueError:
        raise EncodingError(f"value {value!r} not in vocabulary {list(vocabulary)!r}")
    return [1 if i == index else 0 for i in range(len(vocabulary))]


def extract_user_rows(
    pings: Sequence[LocationPing],
    work: tuple[float, float],
    work_radius: float = 500.0,
    min_pings: int = 1,
) -> tuple[list[FeatureRow], tuple[float, float], bool]:
    """All hourly rows for one user's pings.

    Returns (rows, home, home_fell_back). When home cannot be estimated
    the work location is used and flagged.
    """
    if not pings:
        return [], work, True
    ordered = sorted(pings, key=lambda p: p.at)
    try:
        home = estimate_home(ordered, work, work_radius)
        fell_back = False
    except HomeEstimationError:
        home = work
        fell_back = True
    rows = []
    by_hour: dict[datetime, list[LocationPing]] = {}
    for p in ordered:
        by_hour.setdefault(hour_floor(p.at), []).append(p)
    for hour_start in sorted(by_hour):
        row = hourly_features(by_hour[hour_start], work, home, hour_start, min_pings)
        if row is not None:
            rows.append(row)
    return rows, home, fell_back


@dataclass
class JoinReport:
    joined: int = 0
    dropped: int = 0
    dropped_samples: list[EmotionSample] = field(default_factory=list)


def build_dataset(
    rows: Sequence[FeatureRow], samples: Sequence[EmotionSample]
) -> tuple[list[FeatureRow], JoinReport]:
    """Join self-reports to the feature row of their containing hour.

    Reports in hours without a feature row are dropped (counted); a row
    with several reports yields one labeled copy per report.
    """
    by_key = {(r.user_id, r.hour_start): r for r in rows}
    report = JoinReport()
    labeled: list[FeatureRow] = []
    for s in samples:
        row = by_key.get((s.user_id, hour_floor(s.at)))
        if row is None:
            report.dropped += 1
            report.dropped_samples.append(s)
            continue
        labeled.append(replace(row, label_v=s.valence, label_a=s.arousal))
        report.joined += 1
    return labeled, report


# --- vectorization ------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSpec:
    """Fixed vocabulary and column order for a dataset's feature vectors."""

    users: tuple[str, ...]
    genders: tuple[str, ...]

    @classmethod
    def from_profiles(cls, profiles: Iterable[UserProfile]) -> "FeatureSpec":
        ps = sorted(profiles, key=lambda p: p.user_id)
        genders = tuple(sorted({p.gender for p in ps}))
        return cls(users=tuple(p.user_id for p in ps), genders=genders)

    @property
    def feature_names(self) -> list[str]:
        names = list(MOBILITY_FEATURES)
        names += [f"user={u}" for u in self.users]
        names += [f"gender={g}" for g in self.genders]
        names += list(TRAIT_FEATURES)
        return names

    @property
    def width(self) -> int:
        return len(MOBILITY_FEATURES) + len(self.users) + len(self.genders) + len(TRAIT_FEATURES)

    def vector(self, row: FeatureRow, profile: UserProfile) -> list[float]:
        values = list(row.mobility)
        values += [float(v) for v in one_hot(row.user_id, self.users)]
        values += [float(v) for v in one_hot(profile.gender, self.genders)]
        values += list(profile.traits)
        return values


# --- record file formats -------------------------------------------------------


def format_utc(at: datetime) -> str:
    return as_utc(at).isoformat().replace("+00:00", "Z")


def parse_utc(text: str) -> datetime:
    return as_utc(datetime.fromisoformat(text.replace("Z", "+00:00")))


def ping_from_record(record: dict) -> LocationPing:
    try:
        return LocationPing(
            user_id=str(record["user_id"]),
            at=parse_utc(record["at"]),
            lat=float(record["lat"]),
            lon=float(record["lon"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PingError):
            raise
        raise PingError(f"malformed ping record: {exc}") from exc


def ping_to_record(p: LocationPing) -> dict:
    return {"user_id": p.user_id, "at": format_utc(p.at), "lat": p.lat, "lon": p.lon}


def load_pings(path) -> list[LocationPing]:
    pings = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pings.append(ping_from_record(json.loads(line)))
            except (json.JSONDecodeError, PingError) as exc:
                raise PingError(f"{path}:{lineno}: {exc}") from exc
    return pings


def profile_from_record(record: dict) -> UserProfile:
    try:
        return UserProfile(
            user_id=str(record["user_id"]),
            gender=str(record["gender"]),
            big_five=tuple(float(v) for v in record["big_five"]),
            panas=tuple(float(v) for v in record["panas"]),
            dass=tuple(float(v) for v in record["dass"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ProfileError):
            raise
        raise ProfileError(f"malformed profile record: {exc}") from exc


def profile_to_record(p: UserProfile) -> dict:
    return {
        "user_id": p.user_id,
        "gender": p.gender,
        "big_five": list(p.big_five),
        "panas": list(p.panas),
        "dass": list(p.dass),
    }


def load_profiles(path) -> list[UserProfile]:
    profiles = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                profiles.append(profile_from_record(json.loads(line)))
            except (json.JSONDecodeError, ProfileError) as exc:
                raise ProfileError(f"{path}:{lineno}: {exc}") from exc
    return profiles


def write_dataset_csv(path, rows: Sequence[FeatureRow], profiles: dict[str, UserProfile], spec: FeatureSpec) -> None:
    """Columnar text dump: documented header, one labeled row per line."""
    header = ["user_id", "hour_start"] + spec.feature_names + ["label_v", "label_a"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            vec = spec.vector(row, profiles[row.user_id])
            cells = [row.user_id, format_utc(row.hour_start)]
            cells += [repr(v) for v in vec]
            cells += [
                "" if row.label_v is None else repr(row.label_v),
                "" if row.label_a is None else repr(row.label_a),
            ]
            fh.write(",".join(cells) + "\n")
