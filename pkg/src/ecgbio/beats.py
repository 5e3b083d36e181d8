"""R-peak detection and fixed-length beat segmentation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .signal_pipeline import EcgRecord, design_bandpass

_REFRACTORY_S = 0.2  # physiological lower bound between QRS complexes


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PeakList:
    """Sorted R-peak sample indices for one record."""
    indices: np.ndarray
    fs: float
    detector: str  # "local_maxima" or "pan_tompkins"

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise DomainError("PeakList: indices must be 1-d")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise DomainError("PeakList: indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class BeatSegment:
    """Fixed-length window centered on one R-peak."""
    samples: np.ndarray
    r_index: int
    subject_id: str
    window_ms: float  # half-window in milliseconds
    fs: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        expected = 2 * _round_half_up(self.window_ms * self.fs / 1000.0) + 1
        if len(samples) != expected:
            raise DomainError(
                f"BeatSegment: length {len(samples)} != 2*round(window_ms*fs/1000)+1 = {expected}")
        if self.r_index != (len(samples) - 1) // 2:
            raise DomainError("BeatSegment: R must sit at the window center")
        object.__setattr__(self, "samples", samples)


def segment_length(window_ms: float, fs: float) -> int:
    """2 * round(window_ms * fs / 1000) + 1 with round-half-up."""
    return 2 * _round_half_up(window_ms * fs / 1000.0) + 1


def detect_r_peaks(record: EcgRecord, min_height: float = 0.5,
                   min_distance_s: float = 0.6) -> PeakList:
    """Local-maxima R-peak detector.

    Works on a min-max rescaled copy of the signal so `min_height` is a
    fraction of the full amplitude range. Candidates are strict local maxima
    at or above the threshold; when two candidates are closer than
    `min_distance_s` the taller one wins, ties going to the lower index.
    """
    if record.stage != "normalized":
        raise DomainError(
            f"detect_r_peaks: record must be normalized, got stage {record.stage!r}")
    if not min_distance_s > 0:
        raise DomainError(f"detect_r_peaks: min_distance_s must be > 0, got {min_distance_s}")
    if not 0.0 <= min_height <= 1.0:
        raise DomainError(f"detect_r_peaks: min_height must be in [0,1], got {min_height}")
    x = record.samples
    if x.size < 3:
        raise DomainError("detect_r_peaks: record too short")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return PeakList(np.empty(0, dtype=np.int64), record.fs, "local_maxima")
    r = (x - lo) / (hi - lo)
    interior = np.arange(1, len(r) - 1)
    is_max = (r[interior] > r[interior - 1]) & (r[interior] > r[interior + 1])
    cand = interior[is_max & (r[interior] >= min_height)]
    min_dist = int(math.ceil(min_distance_s * record.fs))
    kept = _prune_by_distance(cand, r[cand], min_dist)
    return PeakList(np.sort(kept), record.fs, "local_maxima")


def _prune_by_distance(candidates: np.ndarray, heights: np.ndarray, min_dist: int) -> np.ndarray:
    """Greedy selection: tallest first, ties to the lower index."""
    if candidates.size == 0:
        return candidates
    order = sorted(range(len(candidates)), key=lambda i: (-heights[i], candidates[i]))
    kept: list[int] = []
    for i in order:
        pos = candidates[i]
        if all(abs(pos - k) >= min_dist for k in kept):
            kept.append(pos)
    return np.asarray(kept, dtype=np.int64)


def pan_tompkins_peaks(record: EcgRecord) -> PeakList:
    """Classic Pan-Tompkins QRS detector, kept as an independent test oracle.

    Bandpass 5-15 Hz, five-point derivative, squaring, moving-window
    integration and an adaptive signal/noise threshold; detected peaks are
    refined to the local extremum of the bandpassed signal.
    """
    fs = record.fs
    if fs < 100:
        raise DomainError(f"pan_tompkins_peaks: fs must be >= 100 Hz, got {fs}")
    if record.duration_s < 2.0:
        raise DomainError("pan_tompkins_peaks: record shorter than 2 s, cannot warm up")
    x = record.samples
    if np.all(x == x[0]):
        return PeakList(np.empty(0, dtype=np.int64), fs, "pan_tompkins")

    from scipy.signal import sosfiltfilt

    spec = design_bandpass(5.0, 15.0, 4, fs)
    bp = sosfiltfilt(spec.sos(), x)
    # five-point derivative per the original recipe
    deriv = np.convolve(bp, np.array([2, 1, 0, -1, -2]) * (fs / 8.0), mode="same")
    squared = deriv * deriv
    win = max(1, int(round(0.150 * fs)))
    mwi = np.convolve(squared, np.ones(win) / win, mode="same")

    refractory = int(round(_REFRACTORY_S * fs))
    interior = np.arange(1, len(mwi) - 1)
    cand = interior[(mwi[interior] >= mwi[interior - 1]) & (mwi[interior] > mwi[interior + 1])]

    # adaptive thresholding over integration-wave peaks
    warm = mwi[: int(2 * fs)]
    spki = float(np.max(warm)) * 0.5 if warm.size else 0.0
    npki = float(np.mean(warm)) * 0.5 if warm.size else 0.0
    peaks: list[int] = []
    for idx in cand:
        level = float(mwi[idx])
        threshold = npki + 0.25 * (spki - npki)
        if level >= threshold and (not peaks or idx - peaks[-1] >= refractory):
            peaks.append(int(idx))
            spki = 0.125 * level + 0.875 * spki
        else:
            npki = 0.125 * level + 0.875 * npki

    # refine each detection to the nearest bandpass extremum (R apex)
    half = int(round(0.10 * fs))
    refined: list[int] = []
    for p in peaks:
        lo = max(0, p - half)
        hi = min(len(bp), p + half + 1)
        r = lo + int(np.argmax(np.abs(bp[lo:hi])))
        if not refined or r - refined[-1] >= refractory:
            refined.append(r)
    return PeakList(np.asarray(sorted(set(refined)), dtype=np.int64), fs, "pan_tompkins")


def segment_beats(record: EcgRecord, peaks: PeakList,
                  window_ms: float) -> tuple[list[BeatSegment], int]:
    """Cut an R-centered window of +-window_ms around every peak.

    Peaks whose window would cross a record boundary are dropped, not padded.

    Returns:
        (segments, n_skipped)
    """
    if not window_ms > 0:
        raise DomainError(f"segment_beats: window_ms must be > 0, got {window_ms}")
    if peaks.fs != record.fs:
        raise DomainError(
            f"segment_beats: peak fs {peaks.fs} does not match record fs {record.fs}")
    half = _round_half_up(window_ms * record.fs / 1000.0)
    segments: list[BeatSegment] = []
    skipped = 0
    n = len(record.samples)
    for r in peaks.indices:
        if r - half < 0 or r + half >= n:
            skipped += 1
            continue
        window = record.samples[r - half: r + half + 1].copy()
        segments.append(BeatSegment(window, half, record.subject_id, window_ms, record.fs))
    return segments, skipped
