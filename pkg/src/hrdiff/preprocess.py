"""Data-quality pipeline: smoothing, isolation-forest outliers, sudden-change stats.

Pipeline order is smooth -> detect -> interpolate. Outlier detection runs on
(hr, intensity one-hot) points so intensity context informs outlierness;
flagged points are replaced by linear interpolation between the nearest
unflagged neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .series import ActivityLabel, AnnotatedSeries, N_INTENSITY

DEFAULT_CONTAMINATION = 0.05
DEFAULT_TREES = 100
DEFAULT_SUBSAMPLE = 256
SUDDEN_CHANGE_THRESHOLD = 10.0
SUDDEN_CHANGE_HORIZONS = (1, 2, 3)


def moving_average_smooth(series: np.ndarray, window: int = 5) -> np.ndarray:
    """Centered moving average; edges use the truncated available window."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n == 0:
        return x.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


# --- classic isolation forest -------------------------------------------------

def _avg_path_length(m: int | np.ndarray) -> np.ndarray:
    """c(m): expected unsuccessful-search path length in a BST of m points."""
    m = np.asarray(m, dtype=np.float64)
    out = np.zeros_like(m)
    big = m > 2
    out[big] = 2.0 * (np.log(m[big] - 1.0) + np.euler_gamma) - 2.0 * (m[big] - 1.0) / m[big]
    out[m == 2] = 1.0
    return out


class _Node:
    __slots__ = ("feature", "split", "left", "right", "size")

    def __init__(self, feature=-1, split=0.0, left=None, right=None, size=0):
        self.feature = feature
        self.split = split
        self.left = left
        self.right = right
        self.size = size


def _grow(points: np.ndarray, depth: int, limit: int, rng: np.random.Generator) -> _Node:
    n = len(points)
    if depth >= limit or n <= 1:
        return _Node(size=n)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    usable = np.nonzero(hi > lo)[0]
    if len(usable) == 0:  # all duplicates
        return _Node(size=n)
    feature = int(usable[rng.integers(len(usable))])
    split = rng.uniform(lo[feature], hi[feature])
    mask = points[:, feature] < split
    return _Node(
        feature=feature,
        split=split,
        left=_grow(points[mask], depth + 1, limit, rng),
        right=_grow(points[~mask], depth + 1, limit, rng),
        size=n,
    )


def _fill_path_lengths(
    node: _Node, points: np.ndarray, idx: np.ndarray, depth: float, out: np.ndarray
) -> None:
    if node.feature < 0:
        out[idx] = depth + float(_avg_path_length(np.array([node.size]))[0])
        return
    mask = points[idx, node.feature] < node.split
    left = idx[mask]
    right = idx[~mask]
    if len(left):
        _fill_path_lengths(node.left, points, left, depth + 1.0, out)
    if len(right):
        _fill_path_lengths(node.right, points, right, depth + 1.0, out)


@dataclass
class IsolationForest:
    """Classic iForest: random axis-parallel splits on subsamples."""

    trees: list
    subsample: int

    def score(self, points: np.ndarray) -> np.ndarray:
        """Anomaly score s(x) = 2^(-E[pathlen] / c(psi)), in (0, 1)."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError(f"expected 2-d points, got shape {points.shape}")
        norm = max(float(_avg_path_length(np.array([self.subsample]))[0]), 1e-12)
        total = np.zeros(len(points))
        lengths = np.empty(len(points))
        all_idx = np.arange(len(points))
        for tree in self.trees:
            _fill_path_lengths(tree, points, all_idx, 0.0, lengths)
            total += lengths
        return 2.0 ** (-(total / len(self.trees)) / norm)


def isolation_forest_fit(
    points: np.ndarray,
    trees: int = DEFAULT_TREES,
    subsample: int = DEFAULT_SUBSAMPLE,
    seed: int = 0,
) -> IsolationForest:
    """Fit an isolation forest; deterministic given (seed, trees, subsample)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    psi = min(subsample, n)
    limit = int(math.ceil(math.log2(max(psi, 2))))
    rng = np.random.default_rng(seed)
    grown = []
    for _ in range(trees):
        idx = rng.choice(n, size=psi, replace=False)
        grown.append(_grow(points[idx], 0, limit, rng))
    return IsolationForest(trees=grown, subsample=psi)


def isolation_forest_score(model: IsolationForest, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    return model.score(points)


@dataclass
class OutlierReport:
    flagged: np.ndarray  # indices, ascending
    scores: np.ndarray  # per-point anomaly score in (0, 1)
    threshold: float


def flag(scores: np.ndarray, contamination: float = DEFAULT_CONTAMINATION) -> OutlierReport:
    """Mark the top ceil(contamination * n) scores; ties break by lower index."""
    if not (0.0 < contamination < 1.0):
        raise ValueError(f"contamination must be in (0, 1), got {contamination}")
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    k = int(math.ceil(contamination * n))
    order = np.argsort(-scores, kind="stable")
    chosen = np.sort(order[:k])
    threshold = float(scores[order[k - 1]]) if k > 0 else float("inf")
    return OutlierReport(flagged=chosen, scores=scores, threshold=threshold)


def outlier_points(series: AnnotatedSeries) -> np.ndarray:
    """Feature matrix for outlier detection: (hr, dominant-intensity one-hot)."""
    n = len(series)
    dominant = np.argmax(series.intensity, axis=1) if n else np.zeros(0, dtype=int)
    onehot = np.zeros((n, N_INTENSITY))
    if n:
        onehot[np.arange(n), dominant] = 1.0
    return np.column_stack([series.hr, onehot])


def interpolate_flagged(hr: np.ndarray, flagged: np.ndarray) -> np.ndarray:
    """Replace flagged values by linear interpolation over unflagged neighbors."""
    hr = np.asarray(hr, dtype=np.float64).copy()
    if len(flagged) == 0:
        return hr
    mask = np.zeros(len(hr), dtype=bool)
    mask[flagged] = True
    if mask.all():
        return hr  # nothing to anchor on; leave untouched
    idx = np.arange(len(hr))
    hr[mask] = np.interp(idx[mask], idx[~mask], hr[~mask])
    return hr


# --- sudden HR changes --------------------------------------------------------

@dataclass
class SuddenChangeStats:
    """Summary of >threshold jumps within the next 1-3 minutes."""

    n_points: int
    n_events: int
    fraction: float
    mean_magnitude: float
    rise_fraction: float
    drop_fraction: float
    histogram_edges: list
    histogram_counts: list
    per_activity_rates: dict

    def to_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "n_events": self.n_events,
            "fraction": self.fraction,
            "mean_magnitude": self.mean_magnitude,
            "rise_fraction": self.rise_fraction,
            "drop_fraction": self.drop_fraction,
            "histogram_edges": self.histogram_edges,
            "histogram_counts": self.histogram_counts,
            "per_activity_rates": self.per_activity_rates,
        }


def sudden_change_stats(
    series: AnnotatedSeries,
    threshold: float = SUDDEN_CHANGE_THRESHOLD,
    horizons: tuple[int, ...] = SUDDEN_CHANGE_HORIZONS,
) -> SuddenChangeStats:
    """Events are points whose HR differs by more than `threshold` (strict)
    from any of the next `horizons` points; magnitude and direction come
    from the largest such difference.
    """
    hr = series.hr
    n = len(hr)
    magnitudes = np.zeros(n)
    signed = np.zeros(n)
    for k in horizons:
        if k <= 0:
            raise ValueError("horizons must be positive")
        if n > k:
            diff = hr[k:] - hr[:-k]
            better = np.abs(diff) > magnitudes[: n - k]
            magnitudes[: n - k] = np.where(better, np.abs(diff), magnitudes[: n - k])
            signed[: n - k] = np.where(better, diff, signed[: n - k])
    events = magnitudes > threshold
    n_events = int(events.sum())
    mags = magnitudes[events]
    rises = int((signed[events] > 0).sum())

    edges = list(np.arange(threshold, threshold + 22, 2.0)) + [float("inf")]
    counts, _ = np.histogram(mags, bins=edges)

    per_activity = {}
    for label in ActivityLabel:
        sel = series.activity == int(label)
        total = int(sel.sum())
        if total:
            per_activity[label.csv_name] = float(events[sel].sum() / total)
    return SuddenChangeStats(
        n_points=n,
        n_events=n_events,
        fraction=float(n_events / n) if n else 0.0,
        mean_magnitude=float(mags.mean()) if n_events else 0.0,
        rise_fraction=float(rises / n_events) if n_events else 0.0,
        drop_fraction=float((n_events - rises) / n_events) if n_events else 0.0,
        histogram_edges=[float(e) for e in edges[:-1]] + ["inf"],
        histogram_counts=[int(c) for c in counts],
        per_activity_rates=per_activity,
    )


@dataclass
class PreprocessResult:
    cleaned: AnnotatedSeries
    rmse_raw_vs_smoothed: float
    n_outliers: int
    sudden_changes: SuddenChangeStats


def preprocess_series(
    series: AnnotatedSeries,
    smooth_window: int = 5,
    contamination: float = DEFAULT_CONTAMINATION,
    trees: int = DEFAULT_TREES,
    subsample: int = DEFAULT_SUBSAMPLE,
    seed: int = 0,
) -> PreprocessResult:
    """Full cleaning pass: smooth, flag outliers, interpolate them."""
    smoothed = moving_average_smooth(series.hr, smooth_window)
    err = rmse(series.hr, smoothed) if len(series) else 0.0
    smoothed_series = AnnotatedSeries(
        series.timestamps, smoothed, series.intensity, series.activity
    )
    if len(series) >= 2:
        points = outlier_points(smoothed_series)
        model = isolation_forest_fit(points, trees=trees, subsample=subsample, seed=seed)
        report = flag(model.score(points), contamination)
        cleaned_hr = interpolate_flagged(smoothed, report.flagged)
        n_outliers = len(report.flagged)
    else:
        cleaned_hr = smoothed
        n_outliers = 0
    cleaned = AnnotatedSeries(
        series.timestamps, cleaned_hr, series.intensity, series.activity
    )
    return PreprocessResult(
        cleaned=cleaned,
        rmse_raw_vs_smoothed=err,
        n_outliers=n_outliers,
        sudden_changes=sudden_change_stats(cleaned),
    )
