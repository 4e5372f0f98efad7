"""Audio ingestion and log-mel spectrogram features.

Raw audio comes from plain RIFF/WAVE files (PCM 16-bit or IEEE float 32)
or from a seeded synthetic tone generator; either way it ends up as a
fixed-size log-mel feature vector. At the clip lengths used here an FFT
is exact, so nothing fancy is needed for precision.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabeledDataset, one_hot
from .rng import Rng

POWER_FLOOR = 1e-6  # added inside log() so silence maps to log(1e-6) exactly

DEFAULT_SAMPLE_RATE = 8000
DEFAULT_N_FFT = 256
DEFAULT_HOP = 128
DEFAULT_N_MELS = 32
DEFAULT_N_FRAMES = 32


class WavParseError(ValueError):
    """Base class for WAV parsing failures."""


class NotWavError(WavParseError):
    pass


class UnsupportedCodecError(WavParseError):
    pass


class MissingChunkError(WavParseError):
    pass


class TruncatedWavError(WavParseError):
    pass


@dataclass
class WavClip:
    sample_rate: int
    samples: np.ndarray  # mono float64 in [-1, 1]

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("need at least one mono sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class SpectrogramFeature:
    n_mels: int
    n_frames: int
    values: np.ndarray  # (n_mels, n_frames) log-mel power

    @property
    def flattened_dim(self) -> int:
        return self.n_mels * self.n_frames

    def flatten(self) -> np.ndarray:
        return self.values.reshape(-1)


def read_wav(path: str | Path) -> WavClip:
    """Parse a RIFF/WAVE file (PCM16 or float32; stereo averaged to mono)."""
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise TruncatedWavError("file too short for a RIFF header")
    if blob[:4] == b"RIFX":
        raise NotWavError("big-endian RIFX files are not supported")
    if blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise NotWavError("not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        size = struct.unpack("<I", blob[pos + 4:pos + 8])[0]
        body_start = pos + 8
        if body_start + size > len(blob):
            raise TruncatedWavError(f"chunk {cid!r} extends past end of file")
        body = blob[body_start:body_start + size]
        if cid == b"fmt ":
            if size < 16:
                raise TruncatedWavError("fmt chunk too small")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            data = body
        pos = body_start + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise MissingChunkError("missing fmt chunk")
    if data is None:
        raise MissingChunkError("missing data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if channels < 1:
        raise WavParseError("channel count must be >= 1")
    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(data[:len(data) - len(data) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(data[:len(data) - len(data) % 4], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"unsupported codec: format tag {audio_format}, {bits}-bit")

    if samples.size < channels or samples.size == 0:
        raise TruncatedWavError("data chunk holds no complete frame")
    frames = samples.size // channels
    samples = samples[:frames * channels].reshape(frames, channels).mean(axis=1)
    return WavClip(sample_rate=sample_rate, samples=samples)


def write_wav(clip: WavClip, path: str | Path) -> None:
    """Write mono 16-bit PCM."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16,
        b"data", len(data))
    Path(path).write_bytes(header + data)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    """Triangular filters, (n_mels, n_fft//2 + 1), equally spaced in mel."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    filt = np.zeros((n_mels, bin_freqs.size))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        filt[m] = np.maximum(0.0, np.minimum(rising, falling))
    return filt


def hann_window(n: int) -> np.ndarray:
    # periodic form, the standard choice for short-time analysis
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def power_spectrogram(clip: WavClip, n_fft: int, hop: int) -> np.ndarray:
    """Hann-windowed |rfft|^2 per frame, shape (n_fft//2 + 1, frames).

    Clips shorter than one frame are zero-padded, never rejected.
    """
    if n_fft < 2 or (n_fft & (n_fft - 1)) != 0:
        raise ValueError("n_fft must be a power of two")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    x = clip.samples
    if x.size < n_fft:
        x = np.concatenate([x, np.zeros(n_fft - x.size)])
    n_frames = 1 + (x.size - n_fft) // hop
    window = hann_window(n_fft)
    frames = np.stack([x[t * hop:t * hop + n_fft] for t in range(n_frames)])
    spec = np.fft.rfft(frames * window, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def log_mel_spectrogram(clip: WavClip, n_fft: int = DEFAULT_N_FFT,
                        hop: int = DEFAULT_HOP, n_mels: int = DEFAULT_N_MELS,
                        target_frames: int = DEFAULT_N_FRAMES) -> SpectrogramFeature:
    """Log mel-band power, center-cropped / zero-padded to target_frames."""
    if n_mels > n_fft // 2:
        raise ValueError("n_mels must be <= n_fft / 2")
    if target_frames < 1:
        raise ValueError("target_frames must be >= 1")

    x = clip.samples
    needed = n_fft + (target_frames - 1) * hop
    if x.size < needed:
        x = np.concatenate([x, np.zeros(needed - x.size)])
        clip = WavClip(clip.sample_rate, x)
    power = power_spectrogram(clip, n_fft, hop)
    mel_power = mel_filterbank(clip.sample_rate, n_fft, n_mels) @ power
    values = np.log(POWER_FLOOR + mel_power)

    n_frames = values.shape[1]
    start = (n_frames - target_frames) // 2
    values = values[:, start:start + target_frames]
    return SpectrogramFeature(n_mels=n_mels, n_frames=target_frames, values=values)


@dataclass
class SynthProfile:
    """Harmonic-tone generator settings; one tone family per class."""

    base_freq: float = 300.0
    class_spacing: float = 120.0
    freq_jitter: float = 0.03          # relative, uniform in +/- this
    noise_sigma: float = 0.02
    duration_s: float = 0.8
    sample_rate: int = DEFAULT_SAMPLE_RATE
    harmonic_amps: tuple[float, ...] = (0.5, 0.25, 0.125)

    def class_freq(self, class_id: int) -> float:
        return self.base_freq + self.class_spacing * class_id


# narrower spacing and stronger jitter -> neighbouring classes overlap,
# the hard regime for erasing one class without hurting its neighbours
OVERLAP_PROFILE = SynthProfile(class_spacing=50.0, freq_jitter=0.05)

PROFILES = {"default": SynthProfile(), "overlap": OVERLAP_PROFILE}


def synth_clip(class_id: int, rng: Rng, profile: SynthProfile | None = None) -> WavClip:
    """One seeded harmonic tone for the class, with jitter and noise."""
    p = profile or SynthProfile()
    f0 = p.class_freq(class_id) * (1.0 + rng.uniform(low=-p.freq_jitter, high=p.freq_jitter))
    n = int(round(p.duration_s * p.sample_rate))
    t = np.arange(n) / p.sample_rate
    x = np.zeros(n)
    for k, amp in enumerate(p.harmonic_amps, start=1):
        f = k * f0
        if f < 0.45 * p.sample_rate:  # keep harmonics clear of Nyquist
            x += amp * np.sin(2.0 * np.pi * f * t)
    if p.noise_sigma > 0.0:
        x += rng.normal(n, sigma=p.noise_sigma)
    return WavClip(p.sample_rate, np.clip(x, -1.0, 1.0))


def synth_dataset(num_classes: int, per_class: int, seed: int,
                  n_mels: int = DEFAULT_N_MELS, n_frames: int = DEFAULT_N_FRAMES,
                  n_fft: int = DEFAULT_N_FFT, hop: int = DEFAULT_HOP,
                  profile: SynthProfile | None = None) -> LabeledDataset:
    """Deterministic synthetic dataset: per_class tones for each class."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("need at least 1 sample per class")
    rng = Rng(seed)
    feats = []
    classes = []
    for c in range(num_classes):
        for _ in range(per_class):
            clip = synth_clip(c, rng, profile)
            feat = log_mel_spectrogram(clip, n_fft=n_fft, hop=hop,
                                       n_mels=n_mels, target_frames=n_frames)
            feats.append(feat.flatten())
            classes.append(c)
    labels = np.stack([one_hot(c, num_classes) for c in classes])
    return LabeledDataset(np.stack(feats), labels,
                          np.array(classes, dtype=np.int64), num_classes)


class ManifestError(ValueError):
    pass


def write_manifest(dataset_dir: str | Path, clips: list[tuple[WavClip, int]]) -> None:
    """Write clips as wav files plus a labels.csv manifest."""
    root = Path(dataset_dir)
    (root / "wavs").mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (clip, class_id) in enumerate(clips):
        rel = f"wavs/clip_{i:05d}.wav"
        write_wav(clip, root / rel)
        rows.append((rel, class_id))
    with open(root / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "class_id"])
        writer.writerows(rows)


def load_manifest(dataset_dir: str | Path, num_classes: int | None = None,
                  n_mels: int = DEFAULT_N_MELS, n_frames: int = DEFAULT_N_FRAMES,
                  n_fft: int = DEFAULT_N_FFT, hop: int = DEFAULT_HOP) -> LabeledDataset:
    """Load a labels.csv manifest directory into a feature dataset."""
    root = Path(dataset_dir)
    manifest = root / "labels.csv"
    if not manifest.exists():
        raise ManifestError(f"no labels.csv in {root}")
    entries: list[tuple[str, int]] = []
    with open(manifest, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "class_id"]:
            raise ManifestError("manifest header must be exactly 'path,class_id'")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ManifestError(f"line {line_no}: expected 2 columns")
            try:
                class_id = int(row[1])
            except ValueError as exc:
                raise ManifestError(f"line {line_no}: bad class_id {row[1]!r}") from exc
            if class_id < 0:
                raise ManifestError(f"line {line_no}: negative class_id")
            entries.append((row[0], class_id))
    if not entries:
        raise ManifestError("manifest lists no samples")

    k = num_classes if num_classes is not None else max(c for _, c in entries) + 1
    feats = []
    classes = []
    for rel, class_id in entries:
        if class_id >= k:
            raise ManifestError(f"class_id {class_id} out of range [0, {k})")
        clip = read_wav(root / rel)
        feat = log_mel_spectrogram(clip, n_fft=n_fft, hop=hop,
                                   n_mels=n_mels, target_frames=n_frames)
        feats.append(feat.flatten())
        classes.append(class_id)
    labels = np.stack([one_hot(c, k) for c in classes])
    return LabeledDataset(np.stack(feats), labels,
                          np.array(classes, dtype=np.int64), k)
