"""Fused, activity-annotated per-patient heart-rate series.

Timestamps are integer minutes since the Unix epoch, interpreted in the
proleptic Gregorian calendar, UTC. A series may contain gaps; gaps split
it into independent contiguous 1-minute runs (no imputation).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class IntensityCategory(IntEnum):
    """Per-minute activity intensity bands reported by the tracker."""

    SEDENTARY = 0
    LIGHTLY_ACTIVE = 1
    FAIRLY_ACTIVE = 2
    VERY_ACTIVE = 3


N_INTENSITY = len(IntensityCategory)


class ActivityLabel(IntEnum):
    """Exercise-session labels; NONE marks unlabeled minutes.

    NONE is never routed to a specialized encoder.
    """

    NONE = 0
    RUNNING = 1
    WALKING = 2
    SWIMMING = 3
    AEROBIC_WORKOUT = 4
    OUTDOOR_BIKING = 5
    SPORT = 6
    TREADMILL = 7

    @property
    def csv_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_csv_name(cls, name: str) -> "ActivityLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown activity label {name!r}") from None


ACTIVITIES: tuple[ActivityLabel, ...] = tuple(
    a for a in ActivityLabel if a is not ActivityLabel.NONE
)
N_ACTIVITIES = len(ACTIVITIES)


@dataclass(frozen=True)
class HrSample:
    """One heart-rate observation: minute timestamp, BPM > 0."""

    timestamp: int
    hr: float


@dataclass(frozen=True)
class ActivitySegment:
    """Labeled exercise interval: starts at `start`, lasts `duration` minutes."""

    label: ActivityLabel
    start: int
    duration: int


@dataclass(frozen=True)
class AnnotatedSample:
    """Synchronized observation: HR, 4-vector intensity, activity label."""

    timestamp: int
    hr: float
    intensity: tuple[float, float, float, float]
    activity: ActivityLabel


@dataclass(frozen=True)
class TemporalFeatures:
    """Calendar features of a minute timestamp (proleptic Gregorian, UTC)."""

    month: int        # 1..12
    day_of_month: int  # 1..31
    day_of_week: int   # 0..6, Monday = 0
    hour: int          # 0..23
    minute: int        # 0..59


@dataclass(frozen=True)
class SegmentViolation:
    """First pair of overlapping segments, indices into the original sequence."""

    first: int
    second: int

    def __str__(self) -> str:
        return f"segments {self.first} and {self.second} overlap"


class AnnotatedSeries:
    """Columnar fused series; indexing yields AnnotatedSample rows."""

    def __init__(
        self,
        timestamps: np.ndarray,
        hr: np.ndarray,
        intensity: np.ndarray,
        activity: np.ndarray | None = None,
    ) -> None:
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.hr = np.asarray(hr, dtype=np.float64)
        self.intensity = np.asarray(intensity, dtype=np.float64)
        n = len(self.timestamps)
        if activity is None:
            activity = np.zeros(n, dtype=np.int64)
        self.activity = np.asarray(activity, dtype=np.int64)
        if not (len(self.hr) == n and len(self.intensity) == n == len(self.activity)):
            raise ValueError("column lengths disagree")
        if self.intensity.shape != (n, N_INTENSITY):
            raise ValueError(
                f"intensity must be (n, {N_INTENSITY}), got {self.intensity.shape}"
            )

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> AnnotatedSample:
        return AnnotatedSample(
            timestamp=int(self.timestamps[i]),
            hr=float(self.hr[i]),
            intensity=tuple(self.intensity[i]),
            activity=ActivityLabel(int(self.activity[i])),
        )

    def __iter__(self) -> Iterator[AnnotatedSample]:
        return (self[i] for i in range(len(self)))

    def runs(self) -> list["AnnotatedSeries"]:
        """Split at cadence gaps into contiguous 1-minute runs."""
        if len(self) == 0:
            return []
        breaks = np.nonzero(np.diff(self.timestamps) != 1)[0] + 1
        pieces = []
        for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, len(self)]):
            pieces.append(
                AnnotatedSeries(
                    self.timestamps[lo:hi],
                    self.hr[lo:hi],
                    self.intensity[lo:hi],
                    self.activity[lo:hi],
                )
            )
        return pieces


def _check_sorted_unique(timestamps: np.ndarray, what: str) -> None:
    d = np.diff(timestamps)
    if np.any(d == 0):
        t = int(timestamps[int(np.nonzero(d == 0)[0][0])])
        raise ValueError(f"duplicate timestamp {t} in {what}")
    if np.any(d < 0):
        t = int(timestamps[int(np.nonzero(d < 0)[0][0]) + 1])
        raise ValueError(f"non-monotone timestamp {t} in {what}")


def fuse_series(
    hr: Sequence[HrSample],
    intensity: Sequence[tuple[int, Sequence[float]]],
) -> AnnotatedSeries:
    """Join HR and intensity on shared timestamps; all labels start as NONE.

    Both inputs must be sorted with unique timestamps. The output holds
    exactly the timestamps present in both.
    """
    hr_t = np.array([s.timestamp for s in hr], dtype=np.int64)
    in_t = np.array([t for t, _ in intensity], dtype=np.int64)
    _check_sorted_unique(hr_t, "hr input")
    _check_sorted_unique(in_t, "intensity input")

    common, hr_idx, in_idx = np.intersect1d(hr_t, in_t, return_indices=True)
    hr_vals = np.array([s.hr for s in hr], dtype=np.float64)[hr_idx]
    in_vals = np.array([list(v) for _, v in intensity], dtype=np.float64)
    in_vals = in_vals[in_idx] if len(in_vals) else np.zeros((0, N_INTENSITY))
    return AnnotatedSeries(common, hr_vals, in_vals.reshape(len(common), N_INTENSITY))


def validate_segments(
    segments: Sequence[ActivitySegment],
) -> SegmentViolation | None:
    """Check the no-overlap constraint; None means ok.

    Touching boundaries (next start == previous start + duration) are allowed.
    Non-positive durations are rejected outright.
    """
    for i, seg in enumerate(segments):
        if seg.duration <= 0:
            raise ValueError(f"segment {i} has non-positive duration {seg.duration}")
    order = sorted(range(len(segments)), key=lambda i: segments[i].start)
    for a, b in zip(order, order[1:]):
        if segments[b].start < segments[a].start + segments[a].duration:
            return SegmentViolation(first=a, second=b)
    return None


def label_series(
    fused: AnnotatedSeries, segments: Sequence[ActivitySegment]
) -> AnnotatedSeries:
    """Assign activity labels over closed intervals [start, start + duration].

    When a boundary minute belongs to two touching segments, the later
    segment's label wins (activity onset dominates). Total: every sample
    carries exactly one label, NONE outside all segments.
    """
    violation = validate_segments(segments)
    if violation is not None:
        raise ValueError(str(violation))
    labels = np.zeros(len(fused), dtype=np.int64)
    ts = fused.timestamps
    for seg in sorted(segments, key=lambda s: s.start):
        lo = np.searchsorted(ts, seg.start, side="left")
        hi = np.searchsorted(ts, seg.start + seg.duration, side="right")
        labels[lo:hi] = int(seg.label)
    return AnnotatedSeries(ts, fused.hr, fused.intensity, labels)


def temporal_features(timestamp: int) -> TemporalFeatures:
    """Calendar decomposition of a minute timestamp."""
    dt = _EPOCH + timedelta(minutes=int(timestamp))
    return TemporalFeatures(
        month=dt.month,
        day_of_month=dt.day,
        day_of_week=dt.weekday(),
        hour=dt.hour,
        minute=dt.minute,
    )


def timestamp_from_parts(year: int, month: int, day: int, hour: int, minute: int) -> int:
    """Inverse of temporal_features given the year."""
    dt = datetime(year, month, day, hour, minute, tzinfo=timezone.utc)
    return int((dt - _EPOCH) // timedelta(minutes=1))


def timestamp_to_iso(timestamp: int) -> str:
    dt = _EPOCH + timedelta(minutes=int(timestamp))
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def timestamp_from_iso(text: str) -> int:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - _EPOCH
    minutes = delta // timedelta(minutes=1)
    if delta != timedelta(minutes=minutes):
        raise ValueError(f"timestamp {text!r} is not minute-aligned")
    return int(minutes)


# CSV schemas. Minute file: one row per minute, columns
#   timestamp_iso8601, hr_bpm, sedentary, lightly_active, fairly_active, very_active
# Segment file: label, start_iso8601, duration_min. Header row mandatory, UTF-8.

MINUTE_CSV_HEADER = [
    "timestamp_iso8601",
    "hr_bpm",
    "sedentary",
    "lightly_active",
    "fairly_active",
    "very_active",
]
SEGMENT_CSV_HEADER = ["label", "start_iso8601", "duration_min"]


def _read_rows(path: Path, expected_header: list[str]) -> Iterator[tuple[int, list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: missing header row") from None
        if [h.strip() for h in header] != expected_header:
            raise ValueError(
                f"{path}: header {header!r} does not match expected {expected_header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ValueError(f"{path}: row {lineno} has {len(row)} fields")
            yield lineno, row


def read_minutes_csv(path: str | Path) -> AnnotatedSeries:
    """Load the combined minute schema into an unlabeled series."""
    path = Path(path)
    ts, hr, intensity = [], [], []
    for lineno, row in _read_rows(path, MINUTE_CSV_HEADER):
        try:
            ts.append(timestamp_from_iso(row[0]))
            hr.append(float(row[1]))
            intensity.append([float(v) for v in row[2:6]])
        except ValueError as exc:
            raise ValueError(f"{path}: row {lineno}: {exc}") from None
    arr_ts = np.array(ts, dtype=np.int64)
    if len(arr_ts):
        _check_sorted_unique(arr_ts, str(path))
    return AnnotatedSeries(
        arr_ts,
        np.array(hr, dtype=np.float64),
        np.array(intensity, dtype=np.float64).reshape(len(ts), N_INTENSITY),
    )


def write_minutes_csv(path: str | Path, series: AnnotatedSeries) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MINUTE_CSV_HEADER)
        for i in range(len(series)):
            writer.writerow(
                [timestamp_to_iso(int(series.timestamps[i])), repr(float(series.hr[i]))]
                + [repr(float(v)) for v in series.intensity[i]]
            )


def read_segments_csv(path: str | Path) -> list[ActivitySegment]:
    path = Path(path)
    segments = []
    for lineno, row in _read_rows(path, SEGMENT_CSV_HEADER):
        try:
            segments.append(
                ActivitySegment(
                    label=ActivityLabel.from_csv_name(row[0]),
                    start=timestamp_from_iso(row[1]),
                    duration=int(row[2]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}: row {lineno}: {exc}") from None
    return segments


def write_segments_csv(path: str | Path, segments: Iterable[ActivitySegment]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SEGMENT_CSV_HEADER)
        for seg in segments:
            writer.writerow(
                [seg.label.csv_name, timestamp_to_iso(seg.start), str(seg.duration)]
            )
