"""Impedance estimators over period-stable sample buffers.

All estimators work on buffers holding an exact integer number of excitation
cycles, which removes spectral leakage and makes the single-bin projection an
exact amplitude/phase detector for harmonic signals.  The module provides:

* single-bin discrete Fourier projection (re/im, magnitude, phase),
* RMS estimators and the excitation/response RMS ratio,
* lock-in correlation and the correlation-derived phase,
* a combined per-frequency analysis bundling all of the above,
* frequency sweeps with period-stable planning and CSV export,
* scope-mode harmonic decomposition for distortion analysis.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, IO, Iterable, Sequence

import numpy as np

MIN_FREQUENCY_HZ = 8.0
MAX_FREQUENCY_HZ = 6.5e5
MIN_AMPLITUDE_V = 0.01
MAX_AMPLITUDE_V = 1.0

# Tolerance for "f * N / rate is an integer" under float arithmetic.
_CYCLE_TOL = 1e-9
# gamma*C may exceed 1 by float rounding; beyond this we warn before clamping.
_CLAMP_WARN_EXCESS = 1e-9


class PeriodStabilityError(ValueError):
    """Buffer parameters do not hold an integer number of cycles."""


class OpenCircuitError(ValueError):
    """Response carries no signal: division by a zero response estimate."""


def exact_cycles(frequency: float, n_samples: int, sample_rate: float) -> int:
    """Integer cycles per buffer, or raise if the triple is not period-stable."""
    if n_samples < 2:
        raise PeriodStabilityError(f"buffer too short: N={n_samples}")
    if sample_rate <= 0:
        raise PeriodStabilityError(f"sample rate must be positive, got {sample_rate}")
    cycles = frequency * n_samples / sample_rate
    rounded = round(cycles)
    if rounded < 1 or abs(cycles - rounded) > _CYCLE_TOL * max(1.0, abs(cycles)):
        raise PeriodStabilityError(
            f"not period-stable: f={frequency} Hz, N={n_samples}, "
            f"rate={sample_rate} Hz gives {cycles} cycles per buffer"
        )
    if rounded >= n_samples / 2:
        raise PeriodStabilityError(
            f"frequency {frequency} Hz at or beyond Nyquist for rate {sample_rate} Hz"
        )
    return int(rounded)


def _bin_phases(n_samples: int, cycles: int) -> np.ndarray:
    # reduce c*k modulo N in exact integer arithmetic before taking 2*pi*m/N;
    # keeps trig arguments small and the projection accurate to ~1 ulp
    m = (cycles * np.arange(n_samples, dtype=np.int64)) % n_samples
    return (2.0 * np.pi / n_samples) * m


@dataclass(frozen=True, eq=False)
class ExcitationWaveform:
    """One buffer of the synthesized AC excitation at a single frequency."""

    frequency: float
    amplitude: float
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float64)
        )
        self.samples.setflags(write=False)
        self.cycles  # validates period stability

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def cycles(self) -> int:
        return exact_cycles(self.frequency, self.n_samples, self.sample_rate)


@dataclass(frozen=True, eq=False)
class ResponseBuffer:
    """Digitized current-proportional response paired with an excitation."""

    frequency: float
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float64)
        )
        self.samples.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def cycles(self) -> int:
        return exact_cycles(self.frequency, self.n_samples, self.sample_rate)


@dataclass(frozen=True)
class ComplexResponse:
    """In-phase and quadrature components of a single-bin projection."""

    re: float
    im: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError(f"non-finite components ({self.re}, {self.im})")

    @property
    def as_complex(self) -> complex:
        return complex(self.re, self.im)


def synthesize_excitation(
    frequency: float,
    amplitude: float,
    n_samples: int,
    sample_rate: float,
) -> ExcitationWaveform:
    """Build one period-stable sine buffer: amplitude * sin(2*pi*f*k/rate).

    The (frequency, n_samples, sample_rate) triple must give an integer
    number of cycles; otherwise the caller has to adjust the frequency first
    (see plan_sweep).  Frequency and amplitude must lie within the device
    envelope.
    """
    if not (MIN_FREQUENCY_HZ <= frequency <= MAX_FREQUENCY_HZ):
        raise ValueError(
            f"frequency {frequency} Hz outside "
            f"[{MIN_FREQUENCY_HZ}, {MAX_FREQUENCY_HZ}] Hz"
        )
    if not (MIN_AMPLITUDE_V <= amplitude <= MAX_AMPLITUDE_V):
        raise ValueError(
            f"amplitude {amplitude} V outside [{MIN_AMPLITUDE_V}, {MAX_AMPLITUDE_V}] V"
        )
    cycles = exact_cycles(frequency, n_samples, sample_rate)
    samples = amplitude * np.sin(_bin_phases(n_samples, cycles))
    return ExcitationWaveform(
        frequency=frequency,
        amplitude=amplitude,
        sample_rate=sample_rate,
        samples=samples,
    )


def fra_single_point(
    buffer: ResponseBuffer | np.ndarray | Sequence[float],
    cycles_per_buffer: int | None = None,
) -> ComplexResponse:
    """Single-bin discrete Fourier projection of one buffer.

    re = (1/N) sum x[k] cos(2*pi*c*k/N), im = -(1/N) sum x[k] sin(2*pi*c*k/N),
    with c the integer number of cycles per buffer.  Identical to bin c of the
    full DFT divided by N.
    """
    if isinstance(buffer, ResponseBuffer):
        x = buffer.samples
        if cycles_per_buffer is None:
            cycles_per_buffer = buffer.cycles
    else:
        x = np.asarray(buffer, dtype=np.float64)
        if cycles_per_buffer is None:
            raise ValueError("cycles_per_buffer required for a raw sample buffer")
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty buffer")
    if n < 2:
        raise ValueError(f"buffer too short for projection: N={n}")
    c = int(cycles_per_buffer)
    if not (1 <= c < n / 2):
        raise ValueError(f"cycles_per_buffer must satisfy 1 <= c < N/2, got {c}")
    theta = _bin_phases(n, c)
    re = float(np.dot(x, np.cos(theta))) / n
    im = -float(np.dot(x, np.sin(theta))) / n
    return ComplexResponse(re=re, im=im)


def _normalize_degrees(p: float) -> float:
    # map into (-180, 180]
    p = math.remainder(p, 360.0)
    if p <= -180.0:
        p += 360.0
    return p


def magnitude_phase(c: ComplexResponse) -> tuple[float, float]:
    """Magnitude and full-quadrant phase (degrees) of a projection.

    Phase lies in (-180, 180].  For the zero projection the magnitude is 0 and
    the phase is undefined, flagged as NaN.
    """
    magnitude = math.hypot(c.re, c.im)
    if c.re == 0.0 and c.im == 0.0:
        return 0.0, math.nan
    phase = _normalize_degrees(math.degrees(math.atan2(c.im, c.re)))
    return magnitude, phase


def rms(samples: np.ndarray | Sequence[float]) -> float:
    """Root mean square of a sample buffer."""
    x = np.asarray(samples, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("rms of an empty buffer")
    return float(np.sqrt(np.mean(np.square(x))))


def rms_resistivity(vv_rms: float, vi_rms: float) -> float:
    """Excitation/response RMS ratio, the magnitude-style impedance estimate."""
    if vi_rms == 0.0:
        raise OpenCircuitError("zero response RMS: open circuit")
    if vi_rms < 0.0 or vv_rms < 0.0:
        raise ValueError("RMS values must be non-negative")
    return vv_rms / vi_rms


def lockin_correlation(
    vi: ResponseBuffer | np.ndarray | Sequence[float],
    vv: ExcitationWaveform | np.ndarray | Sequence[float],
) -> float:
    """Mean sample-wise product of response and excitation buffers."""
    xi = vi.samples if isinstance(vi, ResponseBuffer) else np.asarray(vi, float)
    xv = vv.samples if isinstance(vv, ExcitationWaveform) else np.asarray(vv, float)
    if xi.shape[0] != xv.shape[0]:
        raise ValueError(f"length mismatch: {xi.shape[0]} vs {xv.shape[0]}")
    if xi.shape[0] == 0:
        raise ValueError("empty buffers")
    return float(np.dot(xi, xv)) / xi.shape[0]


def lockin_phase(
    correlation: float, vi_rms: float, vv_rms: float
) -> tuple[float, float]:
    """Phase offset (degrees, unsigned) recovered from the correlation.

    Returns (phase_deg, norm).  norm = 1/(vi_rms*vv_rms) scales the
    correlation into [-1, 1] for pure sinusoids, so acos gives the absolute
    phase offset in [0, 180] degrees.  Sign information is not recoverable
    here; take it from the projection phase when needed.
    """
    if vi_rms <= 0.0 or vv_rms <= 0.0:
        raise ValueError("RMS values must be positive for phase recovery")
    norm = 1.0 / (vi_rms * vv_rms)
    arg = norm * correlation
    if abs(arg) > 1.0 + _CLAMP_WARN_EXCESS:
        warnings.warn(
            f"normalized correlation {arg} exceeds unit circle by more than "
            f"{_CLAMP_WARN_EXCESS}; clamping",
            RuntimeWarning,
            stacklevel=2,
        )
    arg = min(1.0, max(-1.0, arg))
    return math.degrees(math.acos(arg)), norm


@dataclass(frozen=True)
class ImpedanceAnalysis:
    """Per-frequency result bundle from one excitation/response pair.

    re/im are the in-phase and quadrature components of the excitation to
    response transfer ratio scaled by the transimpedance gain, so
    magnitude = sqrt(re^2 + im^2) is the impedance magnitude estimate and
    phase_deg its full-quadrant phase.  rms_magnitude is the RMS-ratio
    estimate of the same quantity; correlation_phase_deg the lock-in phase,
    unsigned in [0, 180].
    """

    frequency_hz: float
    re: float
    im: float
    magnitude: float
    phase_deg: float
    vi_rms: float
    vv_rms: float
    rms_magnitude: float
    correlation: float
    correlation_phase_deg: float
    amplitude_norm: float


def analyze_pair(
    vv: ExcitationWaveform,
    vi: ResponseBuffer,
    gain: float = 1.0,
) -> ImpedanceAnalysis:
    """Run every estimator over one excitation/response pair.

    `gain` is the transimpedance conversion in ohms (response volts per
    ampere); magnitudes are reported as ratio * gain.  The default gain of 1
    reports the dimensionless voltage ratio.
    """
    if vi.n_samples != vv.n_samples:
        raise ValueError(
            f"buffer length mismatch: {vi.n_samples} vs {vv.n_samples}"
        )
    if vi.sample_rate != vv.sample_rate or vi.frequency != vv.frequency:
        raise ValueError("response buffer is not paired with this excitation")
    cycles = vv.cycles

    vi_rms = rms(vi.samples)
    vv_rms = rms(vv.samples)
    if vi_rms == 0.0:
        raise OpenCircuitError("zero response buffer: open circuit")

    x_v = fra_single_point(vv.samples, cycles).as_complex
    x_i = fra_single_point(vi.samples, cycles).as_complex
    if x_i == 0:
        raise OpenCircuitError("response has no component at the excitation frequency")
    ratio = x_v / x_i * gain

    magnitude = abs(ratio)
    phase = _normalize_degrees(math.degrees(math.atan2(ratio.imag, ratio.real)))
    m_rms = rms_resistivity(vv_rms, vi_rms) * gain
    corr = lockin_correlation(vi.samples, vv.samples)
    p_c, norm = lockin_phase(corr, vi_rms, vv_rms)
    return ImpedanceAnalysis(
        frequency_hz=vv.frequency,
        re=ratio.real,
        im=ratio.imag,
        magnitude=magnitude,
        phase_deg=phase,
        vi_rms=vi_rms,
        vv_rms=vv_rms,
        rms_magnitude=m_rms,
        correlation=corr,
        correlation_phase_deg=p_c,
        amplitude_norm=norm,
    )


@dataclass(frozen=True)
class SweepPoint:
    """One planned sweep point: a period-stable (f, N, rate, c) quadruple.

    requested_hz is the frequency asked for; frequency_hz the period-stable
    frequency actually synthesized (equal to the request in adaptive mode, the
    nearest bin in fixed-rate mode).
    """

    requested_hz: float
    frequency_hz: float
    n_samples: int
    sample_rate: float
    cycles: int

    @property
    def snap_error_hz(self) -> float:
        return self.frequency_hz - self.requested_hz


@dataclass(frozen=True)
class SweepSpec:
    """Frequency sweep plan: log-spaced points across [start_hz, stop_hz].

    mode 'adaptive' keeps each requested frequency exactly and picks a sample
    rate of frequency * n_samples / cycles per point, capped by max_rate.
    mode 'fixed' keeps one sample rate and snaps each frequency to the nearest
    non-empty DFT bin, so requested and delivered frequencies can differ.
    """

    start_hz: float = MIN_FREQUENCY_HZ
    stop_hz: float = 3.0e5
    points: int = 25
    amplitude: float = 0.1
    n_samples: int = 1024
    mode: str = "adaptive"
    cycles: int = 16
    max_rate: float = 1.0e8
    fixed_rate: float = 1.0e6

    def __post_init__(self) -> None:
        if not (MIN_FREQUENCY_HZ <= self.start_hz <= self.stop_hz <= MAX_FREQUENCY_HZ):
            raise ValueError(
                f"sweep range [{self.start_hz}, {self.stop_hz}] Hz outside "
                f"[{MIN_FREQUENCY_HZ}, {MAX_FREQUENCY_HZ}] Hz or inverted"
            )
        if self.points < 1:
            raise ValueError(f"need at least one sweep point, got {self.points}")
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if self.mode == "adaptive" and not (1 <= self.cycles < self.n_samples / 2):
            raise ValueError(f"cycles must satisfy 1 <= c < N/2, got {self.cycles}")


def plan_sweep(spec: SweepSpec) -> list[SweepPoint]:
    """Expand a sweep spec into period-stable per-point plans."""
    if spec.points == 1:
        requested = [spec.start_hz]
    else:
        requested = list(
            np.geomspace(spec.start_hz, spec.stop_hz, spec.points, dtype=np.float64)
        )
    planned: list[SweepPoint] = []
    for f_req in requested:
        f_req = float(f_req)
        if spec.mode == "adaptive":
            c = spec.cycles
            rate = f_req * spec.n_samples / c
            while rate > spec.max_rate and c < spec.n_samples / 2 - 1:
                # more cycles per buffer lowers the required rate
                c *= 2
                rate = f_req * spec.n_samples / c
            planned.append(
                SweepPoint(
                    requested_hz=f_req,
                    frequency_hz=f_req,
                    n_samples=spec.n_samples,
                    sample_rate=rate,
                    cycles=exact_cycles(f_req, spec.n_samples, rate),
                )
            )
        else:
            bin_hz = spec.fixed_rate / spec.n_samples
            c = max(1, round(f_req / bin_hz))
            if c >= spec.n_samples / 2:
                raise PeriodStabilityError(
                    f"{f_req} Hz beyond Nyquist at fixed rate {spec.fixed_rate} Hz"
                )
            f_snap = c * bin_hz
            planned.append(
                SweepPoint(
                    requested_hz=f_req,
                    frequency_hz=f_snap,
                    n_samples=spec.n_samples,
                    sample_rate=spec.fixed_rate,
                    cycles=c,
                )
            )
    return planned


def run_sweep(
    spec: SweepSpec,
    respond: Callable[[ExcitationWaveform], ResponseBuffer],
    gain: float = 1.0,
) -> list[ImpedanceAnalysis]:
    """Drive a response callback across the sweep and analyze every point.

    `respond` models the device under test: it receives each synthesized
    excitation and returns the digitized response buffer for it.
    """
    results: list[ImpedanceAnalysis] = []
    for point in plan_sweep(spec):
        vv = synthesize_excitation(
            point.frequency_hz, spec.amplitude, point.n_samples, point.sample_rate
        )
        results.append(analyze_pair(vv, respond(vv), gain=gain))
    return results


SWEEP_CSV_FIELDS = (
    "frequency_hz",
    "re",
    "im",
    "magnitude",
    "phase_deg",
    "vi_rms",
    "vv_rms",
    "m_rms",
    "c",
    "p_c",
)


def write_sweep_csv(out: IO[str], results: Iterable[ImpedanceAnalysis]) -> None:
    """Write sweep results as CSV with repr-exact (shortest round-trip) floats."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_CSV_FIELDS)
    for r in results:
        writer.writerow(
            repr(v)
            for v in (
                r.frequency_hz,
                r.re,
                r.im,
                r.magnitude,
                r.phase_deg,
                r.vi_rms,
                r.vv_rms,
                r.rms_magnitude,
                r.correlation,
                r.correlation_phase_deg,
            )
        )


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Scope-mode decomposition of a buffer at a fundamental and its harmonics."""

    fundamental_hz: float
    harmonics: tuple[ComplexResponse, ...]  # index 0 is the fundamental

    def amplitude(self, order: int) -> float:
        """Peak amplitude of harmonic `order` (1 = fundamental)."""
        c = self.harmonics[order - 1]
        return 2.0 * math.hypot(c.re, c.im)

    @property
    def thd(self) -> float:
        """Total harmonic distortion: sqrt(sum A_k^2, k>=2) / A_1."""
        a1 = self.amplitude(1)
        if a1 == 0.0:
            raise ValueError("zero fundamental: distortion undefined")
        rest = math.fsum(
            self.amplitude(k) ** 2 for k in range(2, len(self.harmonics) + 1)
        )
        return math.sqrt(rest) / a1


def scope_spectrum(
    buffer: ResponseBuffer | np.ndarray | Sequence[float],
    fundamental_cycles: int,
    n_harmonics: int = 5,
    fundamental_hz: float = 0.0,
) -> HarmonicSpectrum:
    """Project a buffer onto a fundamental bin and its first harmonics.

    Harmonic orders whose bin would reach Nyquist are cut off; at least the
    fundamental must fit.
    """
    if isinstance(buffer, ResponseBuffer):
        x = buffer.samples
        fundamental_hz = buffer.frequency
    else:
        x = np.asarray(buffer, dtype=np.float64)
    n = x.shape[0]
    if n_harmonics < 1:
        raise ValueError("need at least the fundamental")
    harmonics = []
    for k in range(1, n_harmonics + 1):
        c = fundamental_cycles * k
        if c >= n / 2:
            break
        harmonics.append(fra_single_point(x, c))
    if not harmonics:
        raise ValueError(
            f"fundamental bin {fundamental_cycles} does not fit in N={n}"
        )
    return HarmonicSpectrum(
        fundamental_hz=fundamental_hz, harmonics=tuple(harmonics)
    )
