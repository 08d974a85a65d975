"""WAV loading, linear resampling, and time slicing.

Clips are immutable in spirit: every operation returns a new AudioClip and
never mutates sample buffers in place.  Only RIFF/WAVE containers with PCM
16-bit or IEEE-float 32-bit data are accepted; anything else raises with the
offending format field named.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

# All ingest resamples to this rate, so one 20 ms frame is exactly 320 samples.
CANONICAL_RATE = 16000


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate_hz: int
    origin_s: float = 0.0  # absolute time of sample 0 in the source recording

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz

    def slice(self, t0, t1):
        return slice_clip(self, t0, t1)


def _parse_fmt(chunk):
    if len(chunk) < 16:
        raise AudioError(f"fmt chunk too short ({len(chunk)} bytes)")
    audio_format, channels, rate, _, _, bits = struct.unpack("<HHIIHH", chunk[:16])
    if audio_format == 0xFFFE and len(chunk) >= 26:
        # WAVE_FORMAT_EXTENSIBLE: the real code is the SubFormat GUID's head.
        audio_format = struct.unpack("<H", chunk[24:26])[0]
    return audio_format, channels, rate, bits


def load_wav(path):
    """Read a RIFF/WAVE file into a mono clip at its native rate.

    PCM 16-bit samples are scaled by 1/32768; IEEE-float 32-bit is taken as
    is.  Stereo (or more channels) is averaged.  Output is clamped to
    [-1, 1] and NaNs are replaced by 0.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise AudioError(f"{path}: missing fmt chunk")
    if payload is None:
        raise AudioError(f"{path}: missing data chunk")
    audio_format, channels, rate, bits = fmt
    if channels < 1:
        raise AudioError(f"{path}: bad channel count {channels}")

    if audio_format == 1:  # PCM
        if bits != 16:
            raise AudioError(
                f"{path}: unsupported bits_per_sample {bits} for PCM (want 16)")
        raw = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 3:  # IEEE float
        if bits != 32:
            raise AudioError(
                f"{path}: unsupported bits_per_sample {bits} for float (want 32)")
        raw = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise AudioError(f"{path}: unsupported audio_format {audio_format} "
                         "(want 1 = PCM or 3 = IEEE float)")

    if channels > 1:
        raw = raw[: len(raw) - len(raw) % channels]
        raw = raw.reshape(-1, channels).mean(axis=1)
    raw = np.clip(np.nan_to_num(raw, nan=0.0), -1.0, 1.0)
    return AudioClip(samples=raw, sample_rate_hz=int(rate))


def write_wav(path, samples, sample_rate_hz):
    """Write mono float samples in [-1, 1] as PCM 16-bit."""
    x = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate_hz,
                                       sample_rate_hz * 2, 2, 16))
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload)


def resample_linear(clip, target_hz):
    """Linear-interpolation resample; exact when target equals the source."""
    if target_hz <= 0:
        raise AudioError(f"target rate must be positive, got {target_hz}")
    if len(clip.samples) == 0:
        raise AudioError("cannot resample an empty clip")
    if target_hz == clip.sample_rate_hz:
        return AudioClip(clip.samples.copy(), clip.sample_rate_hz, clip.origin_s)
    n_out = max(1, round(len(clip.samples) * target_hz / clip.sample_rate_hz))
    src_idx = np.arange(n_out) * (clip.sample_rate_hz / target_hz)
    out = np.interp(src_idx, np.arange(len(clip.samples)), clip.samples)
    return AudioClip(out, int(target_hz), clip.origin_s)


def slice_clip(clip, t0, t1):
    """Samples for [t0, t1] relative to the clip; origin shifts by t0."""
    eps = 1e-9
    if t0 < -eps or t1 < t0 - eps or t1 > clip.duration_s + eps:
        raise AudioError(
            f"slice [{t0}, {t1}] outside clip of {clip.duration_s:.6f} s")
    rate = clip.sample_rate_hz
    start = round(max(t0, 0.0) * rate)
    count = round(max(t1 - t0, 0.0) * rate)
    stop = min(start + count, len(clip.samples))
    return AudioClip(clip.samples[start:stop].copy(), rate,
                     clip.origin_s + t0)
