"""Deterministic 1-D ECG preprocessing.

Bandpass filtering, downsampling, SNR-calibrated Gaussian noise injection
and z-score normalization. All operations are pure: they return new records
and never mutate their inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .errors import DomainError, UnsupportedOperationError

STAGES = ("raw", "filtered", "resampled", "noised", "normalized")

NO_NOISE = math.inf  # sentinel SNR meaning "inject nothing"


@dataclass(frozen=True)
class EcgRecord:
    """One subject's single-lead signal at a known sampling rate.

    `stage` tracks progress through the preprocessing chain; operations
    only ever move it forward (skips allowed, reversals rejected).
    """
    samples: np.ndarray
    fs: float
    subject_id: str
    lead: str = "I"
    stage: str = "raw"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise DomainError("EcgRecord: samples must be a nonempty 1-d sequence")
        if not self.fs > 0:
            raise DomainError(f"EcgRecord: fs must be positive, got {self.fs}")
        if self.stage not in STAGES:
            raise DomainError(f"EcgRecord: unknown stage {self.stage!r}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs

    def advanced(self, samples: np.ndarray, new_stage: str, fs: float | None = None) -> "EcgRecord":
        """Copy with new samples and a stage strictly later in the chain."""
        if STAGES.index(new_stage) <= STAGES.index(self.stage):
            raise DomainError(
                f"stage transition {self.stage!r} -> {new_stage!r} reverses the pipeline")
        return replace(self, samples=np.asarray(samples, dtype=np.float64),
                       stage=new_stage, fs=self.fs if fs is None else fs)


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth bandpass realized as cascaded biquads.

    Each section is {b0, b1, b2, a1, a2} with a0 normalized to 1.
    """
    biquad_sections: tuple[dict[str, float], ...]
    low_hz: float
    high_hz: float
    order: int
    design_fs: float

    def sos(self) -> np.ndarray:
        """Second-order sections matrix for scipy (rows [b0 b1 b2 1 a1 a2])."""
        rows = [[s["b0"], s["b1"], s["b2"], 1.0, s["a1"], s["a2"]]
                for s in self.biquad_sections]
        return np.asarray(rows, dtype=np.float64)

    def frequency_response(self, freqs_hz: np.ndarray) -> np.ndarray:
        """|H(e^jw)| evaluated directly from the stored coefficients."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.design_fs
        z1 = np.exp(-1j * w)
        z2 = z1 * z1
        h = np.ones_like(z1)
        for s in self.biquad_sections:
            h = h * (s["b0"] + s["b1"] * z1 + s["b2"] * z2) / (1.0 + s["a1"] * z1 + s["a2"] * z2)
        return np.abs(h)


def design_bandpass(low_hz: float, high_hz: float, order: int, fs: float) -> FilterSpec:
    """Design a Butterworth bandpass of the given total order.

    Args:
        low_hz, high_hz: passband edges in Hz, 0 < low < high < fs/2.
        order: total filter order; must be one of 2, 4, 6, 8.
        fs: design sampling rate in Hz.

    Returns:
        FilterSpec with one biquad per pole pair, all sections stable.
    """
    if order not in (2, 4, 6, 8):
        raise DomainError(f"design_bandpass: order must be in {{2,4,6,8}}, got {order}")
    if not (0 < low_hz < high_hz < fs / 2):
        raise DomainError(
            f"design_bandpass: need 0 < low ({low_hz}) < high ({high_hz}) < fs/2 ({fs / 2})")
    sos = sps.butter(order // 2, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos")
    sections = []
    for row in sos:
        b0, b1, b2, a0, a1, a2 = row
        sections.append({"b0": b0 / a0, "b1": b1 / a0, "b2": b2 / a0,
                         "a1": a1 / a0, "a2": a2 / a0})
        poles = np.roots([1.0, a1 / a0, a2 / a0])
        if np.any(np.abs(poles) >= 1.0):
            raise DomainError("design_bandpass: produced an unstable biquad section")
    return FilterSpec(tuple(sections), low_hz, high_hz, order, fs)


def apply_filter(record: EcgRecord, spec: FilterSpec) -> EcgRecord:
    """Zero-phase (forward-backward) application of a designed bandpass.

    Output length equals input length and R-peak positions are not shifted.
    """
    if record.stage != "raw":
        raise DomainError(f"apply_filter: record stage must be 'raw', got {record.stage!r}")
    if record.fs != spec.design_fs:
        raise DomainError(
            f"apply_filter: record fs {record.fs} does not match design fs {spec.design_fs}")
    filtered = sps.sosfiltfilt(spec.sos(), record.samples)
    return record.advanced(filtered, "filtered")


def resample(record: EcgRecord, target_fs: float) -> EcgRecord:
    """Downsample with a windowed-sinc anti-aliasing lowpass.

    Upsampling is not supported; equal rates return the record unchanged
    apart from the stage tag.
    """
    if not target_fs > 0:
        raise DomainError(f"resample: target_fs must be positive, got {target_fs}")
    if target_fs > record.fs:
        raise UnsupportedOperationError(
            f"resample: upsampling {record.fs} Hz -> {target_fs} Hz is not supported")
    if target_fs == record.fs:
        return record.advanced(record.samples.copy(), "resampled")
    frac = Fraction(target_fs / record.fs).limit_denominator(10000)
    out = sps.resample_poly(record.samples, frac.numerator, frac.denominator)
    return record.advanced(out, "resampled", fs=target_fs)


def inject_noise(record: EcgRecord, snr_db: float, seed: int) -> EcgRecord:
    """Add zero-mean Gaussian noise calibrated to the requested SNR.

    Noise variance is signal_power / 10^(snr_db / 10) where signal power is
    the mean square of the samples. `snr_db = NO_NOISE` (infinity) passes the
    samples through untouched. Deterministic for a fixed seed.
    """
    if snr_db == NO_NOISE:
        return record.advanced(record.samples.copy(), "noised")
    power = float(np.mean(np.square(record.samples)))
    if power == 0.0:
        raise DomainError("inject_noise: zero-power signal, SNR undefined")
    sigma = math.sqrt(power / (10.0 ** (snr_db / 10.0)))
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=record.samples.shape)
    return record.advanced(record.samples + noise, "noised")


def zscore(record: EcgRecord) -> EcgRecord:
    """Normalize to zero mean, unit population standard deviation."""
    x = record.samples
    if x.size < 2:
        raise DomainError("zscore: need at least 2 samples")
    std = float(np.std(x))
    if std == 0.0:
        raise DomainError("zscore: constant signal has zero variance")
    return record.advanced((x - np.mean(x)) / std, "normalized")


@dataclass(frozen=True)
class PreprocessConfig:
    """End-to-end preprocessing settings for one dataset profile."""
    low_hz: float = 0.5
    high_hz: float = 40.0
    order: int = 4
    target_fs: float | None = None   # None keeps the native rate
    snr_db: float = 20.0             # NO_NOISE disables injection


def preprocess(record: EcgRecord, config: PreprocessConfig, seed: int) -> EcgRecord:
    """Full deterministic chain: filter -> resample -> noise -> z-score."""
    spec = design_bandpass(config.low_hz, config.high_hz, config.order, record.fs)
    out = apply_filter(record, spec)
    target = config.target_fs if config.target_fs is not None else record.fs
    out = resample(out, target)
    out = inject_noise(out, config.snr_db, seed)
    return zscore(out)
