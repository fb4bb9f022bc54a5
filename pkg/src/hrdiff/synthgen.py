"""Synthetic wearable dataset: HR, intensity, and activity segments.

Stands in for the private patient dataset. Per patient, HR follows a
circadian resting baseline; during an activity segment it relaxes toward
the activity's set-point with first-order dynamics plus heavy-tailed
(Laplace) shocks, then recovers back to baseline. Occasional jump events
are injected so the sudden-change statistics land near their real-data
targets (roughly 14% of points, mean magnitude about 13 BPM). Intensity
categories come from per-patient HR quantile bands. Everything is
deterministic under the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .series import (
    ACTIVITIES,
    ActivityLabel,
    ActivitySegment,
    AnnotatedSeries,
    N_INTENSITY,
    write_segments_csv,
)

HR_MIN, HR_MAX = 30.0, 220.0


@dataclass(frozen=True)
class ActivityProfile:
    proportion: float
    mean_duration: int  # minutes
    median_hr: float  # BPM set-point
    volatility: float  # BPM scale of within-segment shocks


def _default_profiles() -> dict[ActivityLabel, ActivityProfile]:
    # Session mix, durations and HR set-points follow the tracked-activity
    # metadata; proportions renormalized to sum to 1 (raw shares total 0.975).
    raw = {
        ActivityLabel.WALKING: ActivityProfile(0.595, 89, 99.0, 3.5),
        ActivityLabel.RUNNING: ActivityProfile(0.122, 70, 128.0, 6.3),
        ActivityLabel.AEROBIC_WORKOUT: ActivityProfile(0.100, 86, 112.0, 5.2),
        ActivityLabel.OUTDOOR_BIKING: ActivityProfile(0.064, 33, 90.0, 4.0),
        ActivityLabel.SPORT: ActivityProfile(0.047, 39, 105.0, 4.5),
        ActivityLabel.SWIMMING: ActivityProfile(0.037, 43, 110.0, 4.0),
        ActivityLabel.TREADMILL: ActivityProfile(0.010, 130, 75.0, 3.0),
    }
    total = sum(p.proportion for p in raw.values())
    return {a: replace(p, proportion=p.proportion / total) for a, p in raw.items()}


@dataclass
class GeneratorConfig:
    n_patients: int = 4
    days: int = 7
    seed: int = 0
    profiles: dict = field(default_factory=_default_profiles)
    resting_hr_range: tuple[float, float] = (62.0, 74.0)
    circadian_amplitude: float = 4.0
    sessions_per_day: float = 2.5  # Poisson mean
    rest_volatility: float = 1.1  # BPM, Laplace scale of resting noise
    relax_rate: float = 0.18  # fraction of the gap closed per minute, in-activity
    recovery_rate: float = 0.08  # same, post-activity
    jump_rate_rest: float = 0.004  # per-minute probability of an injected jump
    jump_rate_active: float = 0.035
    jump_magnitude_base: float = 10.5  # jumps are base + Exponential(spread)
    jump_magnitude_spread: float = 3.0
    rise_bias: float = 0.548  # share of jumps that go up
    start_timestamp: int = 27_000_000  # 2021-04-27T12:00Z, minute-aligned

    def validate(self) -> None:
        total = sum(p.proportion for p in self.profiles.values())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"activity proportions must sum to 1, got {total}")
        for a, p in self.profiles.items():
            if p.mean_duration <= 0:
                raise ValueError(f"{a.csv_name}: non-positive mean duration")

    def with_uniform_proportions(self) -> "GeneratorConfig":
        """Equal session mix; useful when every activity needs coverage."""
        share = 1.0 / len(self.profiles)
        profiles = {a: replace(p, proportion=share) for a, p in self.profiles.items()}
        return replace(self, profiles=profiles)


@dataclass
class PatientData:
    patient_id: str
    series: AnnotatedSeries  # fused + labeled
    segments: list


def _draw_segments(cfg: GeneratorConfig, rng: np.random.Generator, n_minutes: int) -> list:
    labels = list(cfg.profiles)
    probs = np.array([cfg.profiles[a].proportion for a in labels])
    segments: list[ActivitySegment] = []
    for day in range(cfg.days):
        day_start = day * 1440
        n_sessions = int(rng.poisson(cfg.sessions_per_day))
        for _ in range(n_sessions):
            label = labels[int(rng.choice(len(labels), p=probs))]
            prof = cfg.profiles[label]
            duration = max(8, int(round(rng.normal(prof.mean_duration, prof.mean_duration / 4))))
            duration = min(duration, 360)
            # keep sessions inside the day, with morning margin for warm-up
            latest = 1440 - duration - 10
            if latest <= 60:
                continue
            start = day_start + int(rng.integers(60, latest))
            candidate = ActivitySegment(label, cfg.start_timestamp + start, duration)
            clash = any(
                not (candidate.start + candidate.duration <= s.start
                     or s.start + s.duration <= candidate.start)
                for s in segments
            )
            if not clash and candidate.start + duration < cfg.start_timestamp + n_minutes:
                segments.append(candidate)
    segments.sort(key=lambda s: s.start)
    return segments


def _synthesize_hr(
    cfg: GeneratorConfig,
    rng: np.random.Generator,
    segments: Sequence[ActivitySegment],
    n_minutes: int,
    resting: float,
) -> np.ndarray:
    target = np.full(n_minutes, np.nan)
    active = np.zeros(n_minutes, dtype=bool)
    vol = np.full(n_minutes, cfg.rest_volatility)
    for seg in segments:
        lo = seg.start - cfg.start_timestamp
        hi = min(lo + seg.duration + 1, n_minutes)
        prof = cfg.profiles[seg.label]
        target[lo:hi] = prof.median_hr
        active[lo:hi] = True
        vol[lo:hi] = prof.volatility

    minutes_of_day = (np.arange(n_minutes) + cfg.start_timestamp) % 1440
    baseline = resting + cfg.circadian_amplitude * np.sin(
        2.0 * np.pi * (minutes_of_day - 360.0) / 1440.0
    )

    # Laplace shocks via inverse CDF; one uniform per minute keeps the
    # stream reproducible regardless of numpy's distribution internals.
    u = rng.random(n_minutes) - 0.5
    shocks = -np.sign(u) * np.log(np.maximum(1.0 - 2.0 * np.abs(u), 1e-300))
    jump_u = rng.random(n_minutes)
    jump_mag = cfg.jump_magnitude_base + rng.exponential(
        cfg.jump_magnitude_spread, n_minutes
    )
    jump_sign = np.where(rng.random(n_minutes) < cfg.rise_bias, 1.0, -1.0)

    hr = np.empty(n_minutes)
    hr[0] = baseline[0]
    for t in range(1, n_minutes):
        if active[t]:
            setpoint, rate = target[t], cfg.relax_rate
        else:
            setpoint, rate = baseline[t], cfg.recovery_rate
        level = hr[t - 1] + rate * (setpoint - hr[t - 1])
        scale = vol[t] / math.sqrt(2.0)  # Laplace scale for the given BPM std
        level += scale * shocks[t]
        jump_rate = cfg.jump_rate_active if active[t] else cfg.jump_rate_rest
        if jump_u[t] < jump_rate:
            level += jump_sign[t] * jump_mag[t]
        hr[t] = min(max(level, HR_MIN), HR_MAX)
    return hr


def _intensity_from_quantiles(hr: np.ndarray) -> np.ndarray:
    """One-hot intensity from per-patient HR quantile bands."""
    q = np.quantile(hr, [0.55, 0.80, 0.92])
    cat = np.digitize(hr, q)  # 0..3
    onehot = np.zeros((len(hr), N_INTENSITY))
    onehot[np.arange(len(hr)), cat] = 1.0
    return onehot


def generate_patient(cfg: GeneratorConfig, patient_index: int) -> PatientData:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, patient_index]))
    n_minutes = cfg.days * 1440
    resting = float(rng.uniform(*cfg.resting_hr_range))
    segments = _draw_segments(cfg, rng, n_minutes)
    hr = _synthesize_hr(cfg, rng, segments, n_minutes, resting)
    intensity = _intensity_from_quantiles(hr)
    timestamps = cfg.start_timestamp + np.arange(n_minutes, dtype=np.int64)
    labels = np.zeros(n_minutes, dtype=np.int64)
    for seg in segments:
        lo = seg.start - cfg.start_timestamp
        hi = min(lo + seg.duration + 1, n_minutes)
        labels[lo:hi] = int(seg.label)
    series = AnnotatedSeries(timestamps, hr, intensity, labels)
    return PatientData(
        patient_id=f"patient_{patient_index:03d}", series=series, segments=segments
    )


def generate(cfg: GeneratorConfig) -> list:
    """All patients for the configured dataset."""
    cfg.validate()
    return [generate_patient(cfg, i) for i in range(cfg.n_patients)]


def write_patient_csvs(out_dir: str | Path, patient: PatientData) -> list:
    """Emit hr.csv, intensity.csv, segments.csv for one patient."""
    import csv

    from .series import timestamp_to_iso

    out = Path(out_dir) / patient.patient_id
    out.mkdir(parents=True, exist_ok=True)
    s = patient.series
    with open(out / "hr.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_iso8601", "hr_bpm"])
        for i in range(len(s)):
            writer.writerow([timestamp_to_iso(int(s.timestamps[i])), repr(float(s.hr[i]))])
    with open(out / "intensity.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["timestamp_iso8601", "sedentary", "lightly_active", "fairly_active", "very_active"]
        )
        for i in range(len(s)):
            writer.writerow(
                [timestamp_to_iso(int(s.timestamps[i]))]
                + [repr(float(v)) for v in s.intensity[i]]
            )
    write_segments_csv(out / "segments.csv", patient.segments)
    return [out / "hr.csv", out / "intensity.csv", out / "segments.csv"]


def split_windows(
    windows: Sequence,
    ratios: tuple[float, float, float] = (0.65, 0.15, 0.20),
    seed: int = 0,
) -> tuple[list, list, list]:
    """Partition windows by whole activity segment (no segment leakage).

    Segment counts per split follow largest-remainder rounding of the
    ratios, so each is within one segment of the exact share.
    """
    if not math.isclose(sum(ratios), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    keys = sorted({w.segment_key for w in windows})
    n_parts = sum(1 for r in ratios if r > 0)
    if len(keys) < n_parts:
        raise ValueError(f"{len(keys)} segments cannot fill {n_parts} non-empty splits")
    rng = np.random.default_rng(seed)
    order = [keys[i] for i in rng.permutation(len(keys))]

    quotas = [r * len(keys) for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i)
    )
    for i in remainders[: len(keys) - sum(counts)]:
        counts[i] += 1

    assignment: dict = {}
    pos = 0
    for part, c in enumerate(counts):
        for key in order[pos : pos + c]:
            assignment[key] = part
        pos += c
    parts: tuple[list, list, list] = ([], [], [])
    for w in windows:
        parts[assignment[w.segment_key]].append(w)
    return parts
