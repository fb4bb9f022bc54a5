"""Derived HR-dynamics features and anchored sliding-window construction.

All derived features use trailing history only; rows without full warm-up
(gradient needs 1 step, rolling std 4, trend N+M-1 = 19) are dropped, not
padded. Windows are anchored at activity-segment starts and advance in
non-overlapping strides of L, each new source reusing the previous target
span.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .series import (
    ActivityLabel,
    ActivitySegment,
    AnnotatedSeries,
    N_INTENSITY,
    TemporalFeatures,
    temporal_features,
)

DEFAULT_EMA_ALPHA = 2.0 / (5 + 1)  # standard smoothing factor for a window of 5
TREND_N = 5
TREND_M = 15
WARMUP = TREND_N + TREND_M  # 20: first index with every feature defined is 19

FEATURE_CSV_HEADER = [
    "hr", "sed", "light", "fair", "very", "activity",
    "month", "dom", "dow", "hour", "minute",
    "grad", "rstd5", "ema5", "trend5_15",
]

# Order of numeric source channels, also the token-segment order in the model.
NUMERIC_CHANNELS = ("hr", "grad", "rstd5", "ema5", "trend5_15")


def gradient(hr: np.ndarray, t: int) -> float:
    """Per-minute rate of change h(t) - h(t-1)."""
    if t < 1:
        raise ValueError("gradient undefined at the first sample of a run")
    return float(hr[t] - hr[t - 1])


def rolling_std_5(hr: np.ndarray, t: int) -> float:
    """Population std over the trailing 5 values (divide by 5)."""
    if t < 4:
        raise ValueError("rolling std needs 5 trailing values")
    w = hr[t - 4 : t + 1]
    return float(np.sqrt(np.mean((w - w.mean()) ** 2)))


def ema_5(hr: np.ndarray, t: int, alpha: float = DEFAULT_EMA_ALPHA) -> float:
    """Recursive EMA seeded with the first observation of the run."""
    e = float(hr[0])
    for v in hr[1 : t + 1]:
        e = alpha * float(v) + (1.0 - alpha) * e
    return e


def trend_smoothed(hr: np.ndarray, t: int, n: int = TREND_N, m: int = TREND_M) -> float:
    """Rolling mean over the last m values of p(t) = h(t) - h(t-n)."""
    if t < n + m - 1:
        raise ValueError("trend needs n + m - 1 trailing values")
    p = hr[t - m + 1 : t + 1] - hr[t - m + 1 - n : t + 1 - n]
    return float(np.mean(p))


def _ema_full(hr: np.ndarray, alpha: float) -> np.ndarray:
    out = np.empty_like(hr)
    if len(hr) == 0:
        return out
    e = hr[0]
    out[0] = e
    for i in range(1, len(hr)):
        e = alpha * hr[i] + (1.0 - alpha) * e
        out[i] = e
    return out


@dataclass(frozen=True)
class FeatureVector:
    """One timestamp's full feature row (15 numeric payload slots)."""

    timestamp: int
    hr: float
    intensity: tuple[float, float, float, float]
    activity: ActivityLabel
    temporal: TemporalFeatures
    grad: float
    rstd5: float
    ema5: float
    trend: float


class FeatureFrame:
    """Columnar feature rows for one contiguous run (post warm-up)."""

    def __init__(
        self,
        timestamps: np.ndarray,
        numeric: np.ndarray,
        intensity: np.ndarray,
        activity: np.ndarray,
        temporal: np.ndarray,
    ) -> None:
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.numeric = np.asarray(numeric, dtype=np.float64)  # (5, n) channel-major
        self.intensity = np.asarray(intensity, dtype=np.float64)  # (n, 4)
        self.activity = np.asarray(activity, dtype=np.int64)  # (n,)
        self.temporal = np.asarray(temporal, dtype=np.int64)  # (n, 5)
        n = len(self.timestamps)
        if self.numeric.shape != (len(NUMERIC_CHANNELS), n):
            raise ValueError(f"numeric must be (5, {n}), got {self.numeric.shape}")

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> FeatureVector:
        m, d, w, o, n = (int(v) for v in self.temporal[i])
        return FeatureVector(
            timestamp=int(self.timestamps[i]),
            hr=float(self.numeric[0, i]),
            intensity=tuple(self.intensity[i]),
            activity=ActivityLabel(int(self.activity[i])),
            temporal=TemporalFeatures(m, d, w, o, n),
            grad=float(self.numeric[1, i]),
            rstd5=float(self.numeric[2, i]),
            ema5=float(self.numeric[3, i]),
            trend=float(self.numeric[4, i]),
        )


def build_feature_frame(
    run: AnnotatedSeries, ema_alpha: float = DEFAULT_EMA_ALPHA
) -> FeatureFrame:
    """Compute all derived features for one contiguous run.

    Rows before the 20-sample warm-up are dropped; a run shorter than the
    warm-up yields an empty frame.
    """
    n = len(run)
    hr = run.hr
    if n < WARMUP:
        empty = np.zeros(0, dtype=np.int64)
        return FeatureFrame(
            empty,
            np.zeros((len(NUMERIC_CHANNELS), 0)),
            np.zeros((0, N_INTENSITY)),
            empty,
            np.zeros((0, 5), dtype=np.int64),
        )

    grad = np.empty(n)
    grad[0] = np.nan
    grad[1:] = np.diff(hr)

    rstd = np.full(n, np.nan)
    if n >= 5:
        windows = np.lib.stride_tricks.sliding_window_view(hr, 5)
        rstd[4:] = windows.std(axis=1)  # population std: ddof = 0

    ema = _ema_full(hr, ema_alpha)

    trend = np.full(n, np.nan)
    p = np.full(n, np.nan)
    p[TREND_N:] = hr[TREND_N:] - hr[:-TREND_N]
    first = TREND_N + TREND_M - 1
    if n > first:
        pw = np.lib.stride_tricks.sliding_window_view(p[TREND_N:], TREND_M)
        trend[first:] = pw.mean(axis=1)
    elif n == WARMUP:
        trend[first] = np.mean(p[TREND_N:])

    keep = slice(WARMUP - 1, None)
    temporal = np.array(
        [
            (tf.month, tf.day_of_month, tf.day_of_week, tf.hour, tf.minute)
            for tf in (temporal_features(int(t)) for t in run.timestamps[keep])
        ],
        dtype=np.int64,
    ).reshape(n - WARMUP + 1, 5)
    numeric = np.stack([hr[keep], grad[keep], rstd[keep], ema[keep], trend[keep]])
    return FeatureFrame(
        run.timestamps[keep], numeric, run.intensity[keep], run.activity[keep], temporal
    )


@dataclass
class FeatureReport:
    """Bookkeeping for feature/window construction."""

    short_runs: int = 0
    segments_total: int = 0
    segments_skipped: int = 0
    windows: int = 0


def featurize_series(
    series: AnnotatedSeries, ema_alpha: float = DEFAULT_EMA_ALPHA
) -> tuple[list[FeatureFrame], FeatureReport]:
    """Feature frames for every contiguous run, counting too-short runs."""
    report = FeatureReport()
    frames = []
    for run in series.runs():
        frame = build_feature_frame(run, ema_alpha)
        if len(frame) == 0:
            report.short_runs += 1
        else:
            frames.append(frame)
    return frames, report


@dataclass(frozen=True)
class FeatureWindow:
    """Source/target training pair anchored at an activity-segment start.

    source_numeric is channel-major (5, L) in NUMERIC_CHANNELS order;
    target starts exactly where the source ends (2L consecutive minutes).
    """

    anchor_activity: ActivityLabel
    segment_key: tuple[str, int]
    start_timestamp: int  # first target minute
    source_numeric: np.ndarray  # (5, L)
    source_intensity: np.ndarray  # (L, 4)
    source_activity: np.ndarray  # (L,)
    source_temporal: np.ndarray  # (L, 5)
    target_hr: np.ndarray  # (L,)
    target_activity: np.ndarray  # (L,)

    @property
    def window_size(self) -> int:
        return len(self.target_hr)


def _slice_window(
    frame: FeatureFrame,
    seg: ActivitySegment,
    patient: str,
    seg_index: int,
    pos: int,
    L: int,
) -> FeatureWindow:
    src = slice(pos - L, pos)
    tgt = slice(pos, pos + L)
    return FeatureWindow(
        anchor_activity=seg.label,
        segment_key=(patient, seg_index),
        start_timestamp=int(frame.timestamps[pos]),
        source_numeric=frame.numeric[:, src].copy(),
        source_intensity=frame.intensity[src].copy(),
        source_activity=frame.activity[src].copy(),
        source_temporal=frame.temporal[src].copy(),
        target_hr=frame.numeric[0, tgt].copy(),
        target_activity=frame.activity[tgt].copy(),
    )


def make_windows(
    frames: Sequence[FeatureFrame],
    segments: Sequence[ActivitySegment],
    L: int,
    patient: str = "p0",
    max_windows: int | None = None,
    report: FeatureReport | None = None,
) -> list[FeatureWindow]:
    """Build anchored windows for each activity segment.

    The first window pairs the L steps before the segment start with the L
    steps from the start on. Subsequent windows advance by L (new source =
    previous target span) while at least 2L elements remain to the run end.
    Segments whose start lacks L history in the feature timeline are
    skipped and counted. `max_windows` caps the chain per segment.
    """
    if L < 1:
        raise ValueError("window size L must be >= 1")
    if report is None:
        report = FeatureReport()
    windows: list[FeatureWindow] = []
    for seg_index, seg in enumerate(segments):
        report.segments_total += 1
        placed = False
        for frame in frames:
            n = len(frame)
            if n == 0:
                continue
            lo, hi = int(frame.timestamps[0]), int(frame.timestamps[-1])
            if not (lo <= seg.start <= hi):
                continue
            pos = seg.start - lo  # contiguous run: index == minute offset
            if pos < L or pos + L > n:
                break  # anchor found, but history/future is insufficient
            windows.append(_slice_window(frame, seg, patient, seg_index, pos, L))
            placed = True
            count = 1
            pos += L
            while n - pos >= 2 * L and (max_windows is None or count < max_windows):
                windows.append(_slice_window(frame, seg, patient, seg_index, pos, L))
                count += 1
                pos += L
            break
        if not placed:
            report.segments_skipped += 1
    report.windows += len(windows)
    return windows


def write_features_csv(path, frame: FeatureFrame) -> None:
    """Debug dump: one row per timestamp with all 15 payload columns."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_CSV_HEADER)
        for i in range(len(frame)):
            row = (
                [repr(float(frame.numeric[0, i]))]
                + [repr(float(v)) for v in frame.intensity[i]]
                + [ActivityLabel(int(frame.activity[i])).csv_name]
                + [str(int(v)) for v in frame.temporal[i]]
                + [repr(float(frame.numeric[c, i])) for c in range(1, 5)]
            )
            writer.writerow(row)
