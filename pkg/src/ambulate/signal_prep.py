"""Deterministic preprocessing of raw 3-axis accelerometer traces into 4-channel epochs.

Pipeline order is fixed: resample to 50 Hz -> 17 Hz low-pass -> axis alignment ->
magnitude channel -> per-trace detrend/normalize -> sliding-window split.
The magnitude is computed on the physical-scale (aligned, filtered) signal before
normalization; normalization statistics are per trace, not per epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import irfft, rfft, rfftfreq
from scipy.interpolate import PchipInterpolator

from .errors import (
    DegenerateChannel,
    DegenerateOrientation,
    InvalidSample,
    SpecError,
    TraceTooShort,
)

TARGET_RATE_HZ = 50.0
LOWPASS_CUTOFF_HZ = 17.0
LOWPASS_ORDER = 4
WINDOW = 128
HOP = 64

# reflect padding used by the zero-phase filter, per side
_FILTER_PAD = 3 * LOWPASS_ORDER


@dataclass(frozen=True)
class SensorTrace:
    """One recording session: (3 or 4) x T acceleration samples at a known rate.

    Channel order is (a_x, a_y, a_z) for raw traces and (a_x, a_y, a_z, |a|)
    once the magnitude channel has been appended. Units are irrelevant after
    normalization.
    """

    subject_id: str
    test_id: str
    label: str
    sample_rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[0] not in (3, 4):
            raise SpecError(f"samples must be (3|4, T), got {samples.shape}")
        if samples.shape[1] < 2:
            raise TraceTooShort(f"trace needs T >= 2 samples, got {samples.shape[1]}")
        if not np.isfinite(samples).all():
            raise InvalidSample("trace contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise SpecError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Epoch:
    """A fixed 4 x 128 window with provenance; the network input unit."""

    data: np.ndarray
    subject_id: str
    test_id: str
    epoch_index: int
    label: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.shape != (4, WINDOW):
            raise SpecError(f"epoch data must be (4, {WINDOW}), got {data.shape}")
        if not np.isfinite(data).all():
            raise InvalidSample("epoch contains non-finite samples")


def resample_to_50hz(trace: SensorTrace) -> SensorTrace:
    """Resample every channel to 50 Hz with shape-preserving piecewise cubics.

    The output grid is t_k = k/50 for k = 0..round(T*50/rate)-1, covering the
    same time span as the input. An input already at 50 Hz is returned as-is.
    """
    if trace.n_samples < 4:
        raise TraceTooShort("resampling needs at least 4 samples")
    if trace.sample_rate_hz == TARGET_RATE_HZ:
        return trace
    t_in = np.arange(trace.n_samples) / trace.sample_rate_hz
    n_out = int(round(trace.n_samples * TARGET_RATE_HZ / trace.sample_rate_hz))
    t_out = np.arange(n_out) / TARGET_RATE_HZ
    out = np.empty((trace.n_channels, n_out))
    for c in range(trace.n_channels):
        out[c] = PchipInterpolator(t_in, trace.samples[c], extrapolate=True)(t_out)
    return replace(trace, sample_rate_hz=TARGET_RATE_HZ, samples=out)


def _zero_phase(x: np.ndarray) -> np.ndarray:
    # mirror-reflect padding, then one spectral multiply by the squared
    # Butterworth magnitude (equivalent to a forward plus a reverse pass)
    pad = _FILTER_PAD
    xp = np.concatenate([x[pad:0:-1], x, x[-2 : -pad - 2 : -1]])
    freqs = rfftfreq(xp.size, d=1.0 / TARGET_RATE_HZ)
    gain = 1.0 / (1.0 + (freqs / LOWPASS_CUTOFF_HZ) ** (2 * LOWPASS_ORDER))
    y = irfft(rfft(xp) * gain, n=xp.size)
    return y[pad:-pad]


def lowpass_filter(trace: SensorTrace) -> SensorTrace:
    """Zero-phase 4th-order Butterworth low-pass at 17 Hz, per channel.

    The forward-plus-reverse application squares the magnitude response, so
    the amplitude gain at frequency f is exactly (1 + (f/17)^8)^-1 with no
    phase shift. Realized as a single spectral multiply on the mirror-padded
    signal, which keeps the gain curve exact across the whole band (a bilinear
    IIR realization would warp the response near the Nyquist frequency).
    """
    if trace.sample_rate_hz != TARGET_RATE_HZ:
        raise SpecError("lowpass_filter expects a 50 Hz trace")
    if trace.n_samples < 2 * _FILTER_PAD:
        raise TraceTooShort(
            f"filtering needs T >= {2 * _FILTER_PAD} samples, got {trace.n_samples}"
        )
    out = np.empty_like(trace.samples)
    for c in range(trace.n_channels):
        out[c] = _zero_phase(trace.samples[c])
    return replace(trace, samples=out)


def _rotation_onto_y(u: np.ndarray) -> np.ndarray:
    """Minimal-angle rotation matrix taking unit vector u onto (0, 1, 0)."""
    v = np.array([0.0, 1.0, 0.0])
    c = float(u @ v)
    axis = np.cross(u, v)
    s = float(np.linalg.norm(axis))
    if s < 1e-12:
        if c > 0.0:
            return np.eye(3)
        # antipodal: any half-turn about an axis perpendicular to u works
        w = np.cross(u, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(w) < 1e-9:
            w = np.cross(u, np.array([0.0, 0.0, 1.0]))
        w = w / np.linalg.norm(w)
        return 2.0 * np.outer(w, w) - np.eye(3)
    k = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + k + (k @ k) / (1.0 + c)


def align_axes(trace: SensorTrace) -> SensorTrace:
    """Rotate all samples so the trace-mean acceleration points along +y.

    The mean direction is a gravity proxy; a single rotation is applied to the
    whole trace, so per-sample norms are preserved.
    """
    if trace.n_channels != 3:
        raise SpecError("align_axes expects a 3-channel trace")
    mean = trace.samples.mean(axis=1)
    norm = float(np.linalg.norm(mean))
    if norm <= 1e-6:
        raise DegenerateOrientation("mean acceleration too small to define a reference")
    rot = _rotation_onto_y(mean / norm)
    return replace(trace, samples=rot @ trace.samples)


def append_magnitude(trace: SensorTrace) -> SensorTrace:
    """Append the orientation-invariant magnitude sqrt(ax^2+ay^2+az^2) as channel 4."""
    if trace.n_channels != 3:
        raise SpecError("append_magnitude expects a 3-channel trace")
    mag = np.sqrt((trace.samples**2).sum(axis=0))
    return replace(trace, samples=np.vstack([trace.samples, mag]))


def detrend_normalize(trace: SensorTrace) -> SensorTrace:
    """Remove each channel's least-squares line, then scale to zero mean and unit variance.

    Statistics are taken over the whole trace (population variance). A channel
    whose residual is (near-)zero raises DegenerateChannel.
    """
    t = np.arange(trace.n_samples, dtype=np.float64)
    t_c = t - t.mean()
    denom = float(t_c @ t_c)
    out = np.empty_like(trace.samples)
    for c in range(trace.n_channels):
        x = trace.samples[c]
        slope = float(t_c @ (x - x.mean())) / denom
        resid = x - (x.mean() + slope * t_c)
        resid -= resid.mean()
        sd = float(np.sqrt((resid**2).mean()))
        if sd <= 1e-9:
            raise DegenerateChannel(f"channel {c} has no variance after detrending")
        out[c] = resid / sd
    return replace(trace, samples=out)


def epoch_split(trace: SensorTrace, window: int = WINDOW, hop: int = HOP) -> list[Epoch]:
    """Split a 4-channel trace into 50%-overlapping fixed windows.

    Windows start at 0, hop, 2*hop, ...; trailing samples that do not fill a
    window are dropped.
    """
    if trace.n_channels != 4:
        raise SpecError("epoch_split expects a 4-channel trace")
    if trace.n_samples < window:
        raise TraceTooShort(
            f"epoch_split needs T >= {window} samples, got {trace.n_samples}"
        )
    epochs = []
    for i, start in enumerate(range(0, trace.n_samples - window + 1, hop)):
        epochs.append(
            Epoch(
                data=trace.samples[:, start : start + window].copy(),
                subject_id=trace.subject_id,
                test_id=trace.test_id,
                epoch_index=i,
                label=trace.label,
            )
        )
    return epochs


def preprocess_pipeline(raw: SensorTrace) -> list[Epoch]:
    """Full deterministic pipeline from a raw 3-axis trace to normalized epochs."""
    trace = resample_to_50hz(raw)
    trace = lowpass_filter(trace)
    trace = align_axes(trace)
    trace = append_magnitude(trace)
    trace = detrend_normalize(trace)
    return epoch_split(trace)
