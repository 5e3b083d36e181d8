"""On-disk formats and synthetic multi-subject ECG generation.

Formats (all little-endian, all versioned):
  - RecordFile:  magic 'ECGR', version u16, header, float32 payload
  - Manifest:    line-oriented text `path<TAB>subject<TAB>split`
  - Checkpoint:  magic 'ECGB', version u16, config fingerprint, tensor records
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .signal_pipeline import EcgRecord

RECORD_MAGIC = b"ECGR"
RECORD_VERSION = 1
CHECKPOINT_MAGIC = b"ECGB"
CHECKPOINT_VERSION = 1
MANIFEST_HEADER = "ecgbio-manifest v1"
SPLITS = ("train", "val", "test")


# ---------------------------------------------------------------------------
# RecordFile


def write_record(path, record: EcgRecord) -> None:
    """Serialize one record; payload is float32 little-endian."""
    payload = np.asarray(record.samples, dtype="<f4")
    sid = record.subject_id.encode("utf-8")
    lead = record.lead.encode("utf-8")
    with open(path, "wb") as f:
        f.write(RECORD_MAGIC)
        f.write(struct.pack("<H", RECORD_VERSION))
        f.write(struct.pack("<d", record.fs))
        f.write(struct.pack("<H", len(sid)))
        f.write(sid)
        f.write(struct.pack("<H", len(lead)))
        f.write(lead)
        f.write(struct.pack("<Q", payload.size))
        f.write(payload.tobytes())


def read_record(path) -> EcgRecord:
    """Read a RecordFile; errors name the byte offset of the problem."""
    with open(path, "rb") as f:
        data = f.read()
    buf = io.BytesIO(data)

    def take(n: int, what: str) -> bytes:
        chunk = buf.read(n)
        if len(chunk) != n:
            raise FormatError(f"{path}: truncated {what} at byte offset {buf.tell() - len(chunk)}")
        return chunk

    if take(4, "magic") != RECORD_MAGIC:
        raise FormatError(f"{path}: bad magic at byte offset 0")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != RECORD_VERSION:
        raise FormatError(f"{path}: unsupported record version {version}")
    (fs,) = struct.unpack("<d", take(8, "sampling rate"))
    (sid_len,) = struct.unpack("<H", take(2, "subject id length"))
    sid = take(sid_len, "subject id").decode("utf-8")
    (lead_len,) = struct.unpack("<H", take(2, "lead length"))
    lead = take(lead_len, "lead").decode("utf-8")
    (n_samples,) = struct.unpack("<Q", take(8, "sample count"))
    offset = buf.tell()
    raw = buf.read()
    if len(raw) != 4 * n_samples:
        raise FormatError(f"{path}: payload has {len(raw)} bytes at offset {offset}, "
                          f"expected {4 * n_samples}")
    samples = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return EcgRecord(samples, fs, sid, lead, stage="raw")


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class Manifest:
    """Record paths with subject labels and optional split tags."""
    entries: list[tuple[str, str, str]]  # (path, subject_id, split or "-")
    profile: str = "synthetic"

    @property
    def subjects(self) -> list[str]:
        return sorted({subject for _, subject, _ in self.entries})


def write_manifest(path, manifest: Manifest) -> None:
    lines = [f"{MANIFEST_HEADER}\tprofile={manifest.profile}"]
    for rec_path, subject, split in manifest.entries:
        lines.append(f"{rec_path}\t{subject}\t{split}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path, check_paths: bool = True) -> Manifest:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(MANIFEST_HEADER):
        raise FormatError(f"{path}: missing manifest header line")
    profile = "synthetic"
    for part in lines[0].split("\t")[1:]:
        if part.startswith("profile="):
            profile = part.split("=", 1)[1]
    base = Path(path).parent
    entries = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{i}: expected 3 tab-separated fields, got {len(parts)}")
        rec_path, subject, split = parts
        if split not in SPLITS and split != "-":
            raise FormatError(f"{path}:{i}: unknown split tag {split!r}")
        if check_paths and not (base / rec_path).exists():
            raise FormatError(f"{path}:{i}: record file {rec_path!r} does not exist")
        entries.append((rec_path, subject, split))
    return Manifest(entries, profile)


# ---------------------------------------------------------------------------
# Checkpoints (generic named-tensor container; the model layer adds meaning)


def save_tensors(path, fingerprint: str, arrays: dict[str, np.ndarray]) -> None:
    """Write named float32 tensors with a config fingerprint guard."""
    fp = fingerprint.encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<H", CHECKPOINT_VERSION))
        f.write(struct.pack("<H", len(fp)))
        f.write(fp)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.tobytes())


def load_tensors(path, expected_fingerprint: str | None = None) -> tuple[str, dict[str, np.ndarray]]:
    """Read a checkpoint; validates magic, version and fingerprint before payload."""
    with open(path, "rb") as f:
        data = f.read()
    buf = io.BytesIO(data)

    def take(n: int, what: str) -> bytes:
        chunk = buf.read(n)
        if len(chunk) != n:
            raise FormatError(f"{path}: truncated {what} at byte offset {buf.tell() - len(chunk)}")
        return chunk

    if take(4, "magic") != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic at byte offset 0")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (fp_len,) = struct.unpack("<H", take(2, "fingerprint length"))
    fingerprint = take(fp_len, "fingerprint").decode("utf-8")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise FormatError(f"{path}: fingerprint {fingerprint} does not match "
                          f"expected {expected_fingerprint}; refusing partial load")
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "tensor name length"))
        name = take(name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "tensor rank"))
        shape = tuple(struct.unpack("<I", take(4, "tensor dim"))[0] for _ in range(rank))
        n_bytes = 4 * int(np.prod(shape)) if shape else 4
        raw = take(n_bytes, f"tensor {name!r} payload")
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return fingerprint, arrays


# ---------------------------------------------------------------------------
# Synthetic multi-subject ECG


@dataclass
class SynthResult:
    """Generated records plus exact ground-truth R-peak indices."""
    records: list[EcgRecord]
    true_peaks: dict[str, np.ndarray] = field(default_factory=dict)


def _gaussian_bump(t: np.ndarray, center: float, width: float, amp: float) -> np.ndarray:
    return amp * np.exp(-0.5 * ((t - center) / width) ** 2)


def synth_ecg(n_subjects: int, beats_per_subject: int, fs: float, seed: int) -> SynthResult:
    """Generate one clean raw record per synthetic subject.

    Each subject gets a distinct P-QRS-T morphology (Gaussian bumps with
    subject-specific widths, amplitudes and intervals) and a subject-specific
    heart rate jittered beat to beat by +-5%. R bumps are centered exactly on
    integer sample indices, which are returned as ground truth.
    """
    if n_subjects < 2:
        raise DomainError(f"synth_ecg: need at least 2 subjects, got {n_subjects}")
    if fs < 100:
        raise DomainError(f"synth_ecg: fs must be >= 100 Hz, got {fs}")
    if beats_per_subject < 1:
        raise DomainError("synth_ecg: beats_per_subject must be >= 1")
    result = SynthResult(records=[])
    for s in range(n_subjects):
        rng = np.random.default_rng(np.random.SeedSequence((seed, s)))
        subject_id = f"S{s:03d}"
        # morphology parameters, deliberately spread so templates decorrelate
        qrs_w = rng.uniform(0.008, 0.022)          # R bump sigma, seconds
        q_amp = -rng.uniform(0.05, 0.30)
        s_amp = -rng.uniform(0.10, 0.45)
        p_amp = rng.uniform(0.05, 0.30)
        t_amp = rng.uniform(0.15, 0.70)
        p_off = -rng.uniform(0.14, 0.22)
        q_off = -rng.uniform(0.025, 0.045)
        s_off = rng.uniform(0.025, 0.050)
        t_off = rng.uniform(0.18, 0.32)
        p_w = rng.uniform(0.02, 0.05)
        q_w = rng.uniform(0.008, 0.016)
        s_w = rng.uniform(0.010, 0.022)
        t_w = rng.uniform(0.04, 0.10)
        rr_base = 60.0 / rng.uniform(55.0, 95.0)   # seconds per beat
        margin = 1.0                                # keep first/last beat clear
        rr = rr_base * (1.0 + rng.uniform(-0.05, 0.05, size=beats_per_subject))
        r_times = margin + np.concatenate(([0.0], np.cumsum(rr[:-1])))
        r_idx = np.round(r_times * fs).astype(np.int64)
        n = int(r_idx[-1] + margin * fs)
        t = np.arange(n) / fs
        x = np.zeros(n)
        for r in r_idx:
            rc = r / fs  # exact integer-sample center
            x += _gaussian_bump(t, rc, qrs_w, 1.0)
            x += _gaussian_bump(t, rc + q_off, q_w, q_amp)
            x += _gaussian_bump(t, rc + s_off, s_w, s_amp)
            x += _gaussian_bump(t, rc + p_off, p_w, p_amp)
            x += _gaussian_bump(t, rc + t_off, t_w, t_amp)
        result.records.append(EcgRecord(x, fs, subject_id, lead="I", stage="raw"))
        result.true_peaks[subject_id] = r_idx
    return result
