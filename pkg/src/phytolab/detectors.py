"""Detector bank: per-cycle feature extraction over the retention tiers.

Each detector reads a window of one channel from one tier and contributes a
single float to the output vector.  Boolean detectors emit 1.0 (condition
holds), -1.0 (condition checked and absent) or 0.0 (not enough data yet);
numeric detectors emit their measurement, with 0.0 doubling as the
insufficient-data marker.  All threshold comparisons are strict, so a value
exactly at a threshold does not fire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .pipes import MIDDLE, SHORT, TieredPipes

# Unbiased sigma estimate from the median absolute deviation for a normal
# population: sigma ~= 1.4826 * MAD.
MAD_SIGMA = 1.4826

NO_DATA = 0.0
FIRED = 1.0
QUIET = -1.0

MS_PER_HOUR = 3_600_000.0


@runtime_checkable
class Detector(Protocol):
    id: str

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float: ...


def _window(tiers: TieredPipes, tier: str, channel: str, n: int) -> np.ndarray:
    return tiers.tier(tier).values(channel, n)


def _check_common(det_id: str, window: int, min_samples: int) -> None:
    if not det_id:
        raise ValueError("detector id must be non-empty")
    if min_samples < 2:
        raise ValueError(f"{det_id}: min_samples must be >= 2, got {min_samples}")
    if window < min_samples:
        raise ValueError(
            f"{det_id}: window {window} smaller than min_samples {min_samples}"
        )


@dataclass(frozen=True)
class PeakDetector:
    """Robust outlier flag: newest |x - median| beyond sigma * noise scale.

    Each sample is judged once, on arrival, so a spike already inside the
    window cannot retrigger.  The noise scale is the larger of two robust
    estimates, the spread MAD and the first-difference MAD over sqrt(2);
    taking the max keeps a fluke-low spread in one view from faking a peak.
    A constant window (zero scale) fires on any deviation at all, since the
    noise estimate claims a perfectly quiet channel.
    """

    id: str
    channel: str
    tier: str = SHORT
    window: int = 60
    sigma: float = 5.0
    min_samples: int = 12

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)
        if self.sigma <= 0:
            raise ValueError(f"{self.id}: sigma must be positive")

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        dev = np.abs(x - np.median(x))
        peak = float(dev[-1])
        diff_mad = float(np.median(np.abs(np.diff(x)))) / math.sqrt(2.0)
        scale = MAD_SIGMA * max(float(np.median(dev)), diff_mad)
        if scale == 0.0:
            return FIRED if peak > 0.0 else QUIET
        return FIRED if peak > self.sigma * scale else QUIET


@dataclass(frozen=True)
class GradientDetector:
    """Least-squares drift of a window, thresholded in units per hour."""

    id: str
    channel: str
    per_hour: float
    tier: str = MIDDLE
    window: int = 60
    direction: str = "either"  # rising | falling | either
    min_samples: int = 6

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)
        if self.per_hour <= 0:
            raise ValueError(f"{self.id}: per_hour threshold must be positive")
        if self.direction not in ("rising", "falling", "either"):
            raise ValueError(f"{self.id}: bad direction {self.direction!r}")

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        pipe = tiers.tier(self.tier)
        x = pipe.values(self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        t = pipe.timestamps_ms(self.window).astype(np.float64) / MS_PER_HOUR
        t -= t.mean()
        denom = float(np.dot(t, t))
        if denom == 0.0:
            return NO_DATA
        slope = float(np.dot(t, x - x.mean())) / denom
        if self.direction == "rising":
            return FIRED if slope > self.per_hour else QUIET
        if self.direction == "falling":
            return FIRED if slope < -self.per_hour else QUIET
        return FIRED if abs(slope) > self.per_hour else QUIET


@dataclass(frozen=True)
class NoiseLevelDetector:
    """Numeric: high-frequency noise RMS, from first differences over sqrt(2).

    Differencing cancels slow structure; for white noise of sigma the
    expectation is sigma itself, for a constant or slow ramp nearly zero.
    """

    id: str
    channel: str
    tier: str = SHORT
    window: int = 60
    min_samples: int = 8

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        d = np.diff(x)
        return float(np.sqrt(np.mean(d * d) / 2.0))


@dataclass(frozen=True)
class CyclicalDetector:
    """Fires when the lag autocorrelation of the window exceeds a threshold."""

    id: str
    channel: str
    lag: int
    tier: str = MIDDLE
    window: int = 60
    threshold: float = 0.5
    min_samples: int = 2

    def __post_init__(self) -> None:
        if self.lag < 1:
            raise ValueError(f"{self.id}: lag must be >= 1")
        needed = max(self.min_samples, self.lag + 2)
        _check_common(self.id, self.window, needed)
        if not (-1.0 < self.threshold < 1.0):
            raise ValueError(f"{self.id}: threshold must be inside (-1, 1)")

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < max(self.min_samples, self.lag + 2):
            return NO_DATA
        y = x - x.mean()
        denom = float(np.dot(y, y))
        if denom == 0.0:
            return QUIET  # constant series carries no cycle
        r = float(np.dot(y[self.lag:], y[: -self.lag])) / denom
        return FIRED if r > self.threshold else QUIET


@dataclass(frozen=True)
class TimeIntervalGate:
    """Fires inside [start_ms, end_ms): closed at the start, open at the end."""

    id: str
    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("detector id must be non-empty")
        if self.end_ms <= self.start_ms:
            raise ValueError(f"{self.id}: empty interval")

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        return FIRED if self.start_ms <= now_ms < self.end_ms else QUIET


@dataclass(frozen=True)
class TimeOfDayGate:
    """Fires inside the daily window [start_hour, end_hour).

    start_hour > end_hour spans midnight, e.g. 22 to 6.
    """

    id: str
    start_hour: float
    end_hour: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("detector id must be non-empty")
        for h in (self.start_hour, self.end_hour):
            if not (0.0 <= h < 24.0):
                raise ValueError(f"{self.id}: hour {h} outside [0, 24)")
        if self.start_hour == self.end_hour:
            raise ValueError(f"{self.id}: empty daily window")

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        hour = (now_ms / MS_PER_HOUR) % 24.0
        if self.start_hour < self.end_hour:
            inside = self.start_hour <= hour < self.end_hour
        else:
            inside = hour >= self.start_hour or hour < self.end_hour
        return FIRED if inside else QUIET


@dataclass(frozen=True)
class MeanDetector:
    """Numeric: arithmetic mean of the window."""

    id: str
    channel: str
    tier: str = SHORT
    window: int = 60
    min_samples: int = 4

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        return float(x.mean())


@dataclass(frozen=True)
class StdDevDetector:
    """Numeric: population standard deviation of the window."""

    id: str
    channel: str
    tier: str = SHORT
    window: int = 60
    min_samples: int = 4

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        return float(x.std())


def _latest_zscore(x: np.ndarray) -> float:
    """z of the newest sample against the rest of the window (excluded)."""
    rest = x[:-1]
    sigma = float(rest.std())
    if sigma == 0.0:
        return 0.0
    return (float(x[-1]) - float(rest.mean())) / sigma


@dataclass(frozen=True)
class ZScoreDetector:
    """Numeric: z of the latest sample against the preceding window.

    The latest sample is excluded from the reference statistics so a real
    excursion cannot mask itself; a flat reference (zero sigma) yields 0.
    """

    id: str
    channel: str
    tier: str = SHORT
    window: int = 60
    min_samples: int = 5

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        return _latest_zscore(x)


@dataclass(frozen=True)
class PathogenicityDetector:
    """Numeric traffic light from the latest-sample z: 0 green, 1 yellow, 2 red.

    |z| below z_yellow is green, between z_yellow and z_red yellow, at or
    beyond z_red red.
    """

    id: str
    channel: str
    tier: str = MIDDLE
    window: int = 60
    z_yellow: float = 2.0
    z_red: float = 4.0
    min_samples: int = 5

    def __post_init__(self) -> None:
        _check_common(self.id, self.window, self.min_samples)
        if not (0.0 < self.z_yellow < self.z_red):
            raise ValueError(
                f"{self.id}: need 0 < z_yellow < z_red, got "
                f"{self.z_yellow}, {self.z_red}"
            )

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> float:
        x = _window(tiers, self.tier, self.channel, self.window)
        if x.shape[0] < self.min_samples:
            return NO_DATA
        z = abs(_latest_zscore(x))
        if z < self.z_yellow:
            return 0.0
        if z < self.z_red:
            return 1.0
        return 2.0


DETECTOR_KINDS: dict[str, type] = {
    "peak": PeakDetector,
    "gradient": GradientDetector,
    "noise_level": NoiseLevelDetector,
    "cyclical": CyclicalDetector,
    "time_interval": TimeIntervalGate,
    "time_of_day": TimeOfDayGate,
    "mean": MeanDetector,
    "stddev": StdDevDetector,
    "zscore": ZScoreDetector,
    "pathogenicity_status": PathogenicityDetector,
}


def build_detector(kind: str, **params) -> Detector:
    """Instantiate a detector by kind name; unknown kinds and params raise."""
    try:
        cls = DETECTOR_KINDS[kind]
    except KeyError:
        raise ValueError(
            f"unknown detector kind {kind!r}, expected one of {sorted(DETECTOR_KINDS)}"
        )
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind!r}: {exc}") from None


class DetectorBank:
    """Ordered detector collection producing the per-cycle output vector."""

    def __init__(self, detectors: Sequence[Detector]) -> None:
        ids = [d.id for d in detectors]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValueError(f"duplicate detector ids: {sorted(dupes)}")
        self.detectors = tuple(detectors)

    def __len__(self) -> int:
        return len(self.detectors)

    def evaluate(self, tiers: TieredPipes, now_ms: int) -> dict[str, float]:
        """Output vector keyed by detector id, in configuration order."""
        out: dict[str, float] = {}
        for det in self.detectors:
            value = det.evaluate(tiers, now_ms)
            if not math.isfinite(value):
                raise ValueError(f"detector {det.id!r} produced non-finite {value}")
            out[det.id] = value
        return out
