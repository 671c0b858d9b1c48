"""Multi-rate record buffering: short, middle and long retention tiers.

Every acquisition cycle pushes one record into the short tier.  Each time a
tier completes a full span of pushes it hands the span's last record to the
tier above, so the middle tier sees one record per minute of base pushes and
the long tier one per hour, without any averaging or resampling.  Detectors
read fixed-length windows out of whichever tier matches their time scale.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .channels import Record

SHORT, MIDDLE, LONG = "short", "middle", "long"


class Pipe:
    """Fixed-capacity ring of records at a single cadence.

    Push order must have strictly increasing timestamps; once capacity is
    reached the oldest record is evicted.  total_pushed counts every record
    ever pushed, not just the retained ones.
    """

    def __init__(self, name: str, capacity: int, period_s: float) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if period_s <= 0:
            raise ValueError(f"period must be positive, got {period_s}")
        self.name = name
        self.capacity = capacity
        self.period_s = period_s
        self._ring: deque[Record] = deque(maxlen=capacity)
        self.total_pushed = 0

    def push(self, record: Record) -> None:
        if self._ring and record.timestamp_ms <= self._ring[-1].timestamp_ms:
            raise ValueError(
                f"pipe {self.name!r}: timestamp {record.timestamp_ms} not after "
                f"{self._ring[-1].timestamp_ms}"
            )
        self._ring.append(record)
        self.total_pushed += 1

    def __len__(self) -> int:
        return len(self._ring)

    @property
    def latest(self) -> Record | None:
        return self._ring[-1] if self._ring else None

    def records(self) -> tuple[Record, ...]:
        """Retained records, oldest first."""
        return tuple(self._ring)

    def values(self, channel: str, n: int | None = None) -> np.ndarray:
        """Last n readings of one channel, oldest first (all retained if n is None)."""
        if n is None or n >= len(self._ring):
            picked = self._ring
        else:
            picked = [self._ring[i] for i in range(len(self._ring) - n, len(self._ring))]
        return np.array([r.values[channel] for r in picked], dtype=np.float64)

    def timestamps_ms(self, n: int | None = None) -> np.ndarray:
        if n is None or n >= len(self._ring):
            picked = self._ring
        else:
            picked = [self._ring[i] for i in range(len(self._ring) - n, len(self._ring))]
        return np.array([r.timestamp_ms for r in picked], dtype=np.int64)


@dataclass(frozen=True)
class TierLayout:
    """Capacities and hand-off spans of the three tiers.

    middle_stride counts base pushes per middle record, long_stride base
    pushes per long record; long_stride must be a multiple of middle_stride
    so hand-offs cascade cleanly.
    """

    short_capacity: int = 60
    middle_capacity: int = 60
    long_capacity: int = 24
    middle_stride: int = 60
    long_stride: int = 3600

    def __post_init__(self) -> None:
        if min(self.short_capacity, self.middle_capacity, self.long_capacity) < 1:
            raise ValueError("tier capacities must be >= 1")
        if self.middle_stride < 2 or self.long_stride <= self.middle_stride:
            raise ValueError(
                f"strides must grow: 1 < {self.middle_stride} < {self.long_stride}"
            )
        if self.long_stride % self.middle_stride != 0:
            raise ValueError(
                f"long stride {self.long_stride} not a multiple of "
                f"middle stride {self.middle_stride}"
            )


class TieredPipes:
    """The three retention tiers fed from one push stream.

    With the default layout and a one-second base period the short tier holds
    the last minute at full rate, the middle tier the last hour at one record
    per minute, and the long tier the last day at one record per hour.
    """

    def __init__(self, base_period_s: float = 1.0, layout: TierLayout | None = None):
        layout = layout if layout is not None else TierLayout()
        self.layout = layout
        self.short = Pipe(SHORT, layout.short_capacity, base_period_s)
        self.middle = Pipe(
            MIDDLE, layout.middle_capacity, base_period_s * layout.middle_stride
        )
        self.long = Pipe(LONG, layout.long_capacity, base_period_s * layout.long_stride)
        self._tiers = {SHORT: self.short, MIDDLE: self.middle, LONG: self.long}

    def tier(self, name: str) -> Pipe:
        try:
            return self._tiers[name]
        except KeyError:
            raise KeyError(f"unknown tier {name!r}, expected one of {list(self._tiers)}")

    def push(self, record: Record) -> tuple[str, ...]:
        """Feed one base-rate record; returns the tiers that accepted it.

        The record closing a middle-stride span is handed to the middle tier,
        and the one closing a long-stride span also to the long tier, so the
        slower tiers always carry real samples, not aggregates.
        """
        self.short.push(record)
        touched = [SHORT]
        if self.short.total_pushed % self.layout.middle_stride == 0:
            self.middle.push(record)
            touched.append(MIDDLE)
        if self.short.total_pushed % self.layout.long_stride == 0:
            self.long.push(record)
            touched.append(LONG)
        return tuple(touched)
