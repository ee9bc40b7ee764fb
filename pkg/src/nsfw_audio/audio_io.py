"""WAV loading, resampling, and dataset manifest handling.

The pipeline's canonical signal format is mono float64 in [-1, 1] at 16 kHz.
Only RIFF/WAVE files with PCM-16 or IEEE float-32 payloads are decoded; the
parser is deliberately hand-rolled so malformed headers and unsupported
codecs raise distinct errors.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from ._util import atomic_write_bytes
from .errors import (
    FormatError,
    InsufficientDataError,
    InvalidInputError,
    UnsupportedCodecError,
)

PIPELINE_RATE = 16000

SPLITS = ("train", "valid", "test")
UNASSIGNED = "unassigned"
DEFAULT_RATIOS = (0.6, 0.2, 0.2)

_FMT_PCM = 0x0001
_FMT_IEEE_FLOAT = 0x0003


@dataclass
class AudioClip:
    id: str
    samples: np.ndarray  # mono float64 in [-1, 1]
    sample_rate: int
    label: int | None = None

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path, clip_id: str | None = None, label: int | None = None) -> AudioClip:
    """Decode a PCM-16 or float-32 WAV into a mono clip.

    Stereo is downmixed by channel average; 16-bit samples are scaled by
    1/32768. Empty files are rejected rather than returned as zero-length
    clips.
    """
    path = Path(path)
    raw = path.read_bytes()
    fmt, data = _parse_riff(raw, path)
    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt

    if audio_format == _FMT_PCM and bits == 16:
        width = 2
        decode = lambda b: np.frombuffer(b, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        width = 4
        decode = lambda b: np.frombuffer(b, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"{path}: format code {audio_format} at {bits} bits is not supported "
            "(PCM-16 or IEEE float-32 only)"
        )
    if channels not in (1, 2):
        raise UnsupportedCodecError(f"{path}: {channels} channels not supported")
    if len(data) % (width * channels) != 0:
        raise FormatError(f"{path}: data chunk is not a whole number of frames")

    x = decode(data)
    if channels == 2:
        x = x.reshape(-1, 2).mean(axis=1)
    if x.size == 0:
        raise InvalidInputError(f"{path}: file contains no audio samples")
    np.clip(x, -1.0, 1.0, out=x)  # float WAVs may exceed full scale
    return AudioClip(id=clip_id or path.stem, samples=x, sample_rate=int(sample_rate), label=label)


def _parse_riff(raw: bytes, path) -> tuple[tuple, bytes]:
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if size < 16 or len(body) < 16:
                raise FormatError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < size:
                raise FormatError(f"{path}: data chunk truncated")
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise FormatError(f"{path}: missing data chunk")
    return fmt, data


def save_wav(path, samples, sample_rate: int, fmt: str = "pcm16") -> None:
    """Write a mono WAV (PCM-16 by default, or IEEE float-32). Atomic."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("save_wav expects a 1-D mono sample vector")
    if sample_rate <= 0:
        raise InvalidInputError("sample_rate must be positive")
    if fmt == "pcm16":
        # Scale by 32768 so a decode (which divides by 32768) lands within
        # 1/32768 of the original sample.
        q = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
        payload = q.tobytes()
        audio_format, bits = _FMT_PCM, 16
    elif fmt == "float32":
        payload = x.astype("<f4").tobytes()
        audio_format, bits = _FMT_IEEE_FLOAT, 32
    else:
        raise InvalidInputError(f"unknown WAV sample format {fmt!r}")

    block_align = bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, audio_format, 1, sample_rate, sample_rate * block_align, block_align, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    atomic_write_bytes(path, header + payload)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited polyphase resampling (Kaiser-windowed sinc, beta=8.6).

    The anti-alias low-pass sits at 0.9x the narrower Nyquist frequency;
    output length is round(n * target/source). Equal rates are a no-op.
    """
    if target_rate <= 0:
        raise InvalidInputError("target_rate must be positive")
    if clip.sample_rate == target_rate:
        return clip
    g = math.gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    # Cutoff in units of the upsampled signal's Nyquist frequency.
    cutoff = 0.9 * min(clip.sample_rate, target_rate) / (clip.sample_rate * up)
    half_len = 10 * max(up, down)
    taps = firwin(2 * half_len + 1, cutoff, window=("kaiser", 8.6))
    y = resample_poly(clip.samples, up, down, window=taps)
    n_out = int(round(len(clip.samples) * target_rate / clip.sample_rate))
    y = y[:n_out]  # resample_poly rounds the length up
    return AudioClip(id=clip.id, samples=y, sample_rate=target_rate, label=clip.label)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    split: str = UNASSIGNED


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise InvalidInputError(f"duplicate clip path in manifest: {e.path}")
            seen.add(e.path)
            if e.label not in (0, 1):
                raise InvalidInputError(f"{e.path}: label must be 0 or 1, got {e.label!r}")
            if e.split not in SPLITS and e.split != UNASSIGNED:
                raise InvalidInputError(f"{e.path}: unknown split {e.split!r}")

    def by_label(self, label: int) -> list[ManifestEntry]:
        return [e for e in self.entries if e.label == label]

    def by_split(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty manifest") from None
        if header != ["path", "label", "split"]:
            raise FormatError(f"{path}: expected header path,label,split, got {header}")
        entries = []
        for row in reader:
            if len(row) != 3:
                raise FormatError(f"{path}: malformed row {row}")
            p, label, split = row
            if label not in ("0", "1"):
                raise FormatError(f"{path}: bad label {label!r} for {p}")
            entries.append(ManifestEntry(path=p, label=int(label), split=split))
    return DatasetManifest(entries)


def write_manifest(manifest: DatasetManifest, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "label", "split"])
    for e in manifest.entries:
        writer.writerow([e.path, e.label, e.split])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def split_dataset(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> DatasetManifest:
    """Assign train/valid/test per clip, class-balanced.

    Within each class the clips are shuffled by a seeded RNG and partitioned
    with largest-remainder rounding, so per-class counts stay within one clip
    of the exact ratio targets. Whole clips move together, which keeps
    overlapping segments of one recording inside a single split.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidInputError(f"ratios must be three positive values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for label in (0, 1):
        group = manifest.by_label(label)
        if len(group) < 5:
            raise InsufficientDataError(
                f"need at least 5 clips of class {label}, got {len(group)}"
            )
        order = rng.permutation(len(group))
        counts = _largest_remainder(len(group), ratios)
        bounds = np.cumsum(counts)
        for rank, idx in enumerate(order):
            split = SPLITS[int(np.searchsorted(bounds, rank, side="right"))]
            assignment[group[idx].path] = split
    return DatasetManifest(
        [replace(e, split=assignment[e.path]) for e in manifest.entries]
    )


def _largest_remainder(n: int, ratios) -> list[int]:
    quotas = [n * r for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    short = n - sum(counts)
    # Ties go to the earlier split (train, then valid, then test).
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts
