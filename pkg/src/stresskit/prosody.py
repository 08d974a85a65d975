"""Pitch, intensity, and sonority contours, reduced to nucleus features.

All three contours share one frame grid: centers at start_s + i*hop with a
10 ms hop, windows zero-padded at the clip edges.  A clip shorter than a
contour's window yields an empty track for that contour.

The ten features per syllable nucleus are the AUC, mean, and peak of each
contour inside the nucleus, each divided by the word-level mean of the same
contour, plus the nucleus duration.  AUC is additionally divided by nucleus
duration so a constant contour scores exactly 1.0 on all nine ratios.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

HOP_S = 0.010
INTENSITY_WINDOW_S = 0.030
PITCH_WINDOW_S = 0.040
SONORITY_WINDOW_S = 0.030

DB_REFERENCE = 2e-5  # full scale 1.0 ~ 94 dB; floor at 0 dB
PITCH_FLOOR_HZ = 75.0
PITCH_CEIL_HZ = 500.0
VOICING_THRESHOLD = 0.45
SONORITY_BAND_HZ = (300.0, 2300.0)
_SONORITY_NFFT = 512


@dataclass
class Track:
    hop_s: float
    start_s: float
    values: np.ndarray  # per-frame value
    voiced: np.ndarray  # per-frame flag; always True except for pitch

    def __len__(self):
        return len(self.values)

    def times(self):
        return self.start_s + self.hop_s * np.arange(len(self.values))


@dataclass
class ProsodyTracks:
    pitch: Track
    intensity: Track
    sonority: Track


@dataclass
class NucleusFeatures:
    pitch_auc_prom: float
    pitch_mean_prom: float
    pitch_peak_prom: float
    int_auc_prom: float
    int_mean_prom: float
    int_peak_prom: float
    son_auc_prom: float
    son_mean_prom: float
    son_peak_prom: float
    duration_s: float

    FIELDS = ("pitch_auc_prom", "pitch_mean_prom", "pitch_peak_prom",
              "int_auc_prom", "int_mean_prom", "int_peak_prom",
              "son_auc_prom", "son_mean_prom", "son_peak_prom", "duration_s")

    def as_vector(self):
        return np.array([getattr(self, f) for f in self.FIELDS], dtype=np.float64)


def _frames(clip, window_s):
    """(frame matrix, start_s) on the shared center grid; None when too short.

    Frame i is centered on sample i*hop; windows reaching past the clip are
    zero-padded so every contour keeps the same start and count.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    rate = clip.sample_rate_hz
    win = int(round(window_s * rate))
    hop = int(round(HOP_S * rate))
    if len(x) < win:
        return None, clip.origin_s
    n_frames = 1 + (len(x) - 1) // hop
    half = win // 2
    padded = np.concatenate([np.zeros(half), x, np.zeros(win - half)])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(win)[None, :]
    return padded[idx], clip.origin_s


def _empty_track(clip):
    return Track(HOP_S, clip.origin_s, np.zeros(0), np.zeros(0, dtype=bool))


def intensity_contour(clip):
    """Hann-weighted RMS in dB re 2e-5, floored at 0 dB, 30 ms / 10 ms."""
    frames, start = _frames(clip, INTENSITY_WINDOW_S)
    if frames is None:
        return _empty_track(clip)
    w = np.hanning(frames.shape[1])
    rms = np.sqrt((frames ** 2 * w).sum(axis=1) / w.sum())
    db = 20.0 * np.log10(np.maximum(rms, 1e-6) / DB_REFERENCE)
    db = np.maximum(db, 0.0)
    return Track(HOP_S, start, db, np.ones(len(db), dtype=bool))


def sonority_contour(clip):
    """Frame RMS scaled by the 300-2300 Hz share of the spectrum's energy."""
    frames, start = _frames(clip, SONORITY_WINDOW_S)
    if frames is None:
        return _empty_track(clip)
    w = np.hanning(frames.shape[1])
    rms = np.sqrt((frames ** 2 * w).sum(axis=1) / w.sum())
    spec = np.abs(np.fft.rfft(frames * w, n=_SONORITY_NFFT, axis=1)) ** 2
    freqs = np.fft.rfftfreq(_SONORITY_NFFT, d=1.0 / clip.sample_rate_hz)
    band = (freqs >= SONORITY_BAND_HZ[0]) & (freqs <= SONORITY_BAND_HZ[1])
    total = spec.sum(axis=1)
    fraction = np.divide(spec[:, band].sum(axis=1), total,
                         out=np.zeros_like(total), where=total > 0)
    son = rms * fraction
    return Track(HOP_S, start, son, np.ones(len(son), dtype=bool))


def pitch_contour(clip):
    """Normalized-autocorrelation pitch, 40 ms / 10 ms, 75-500 Hz.

    A frame is voiced when its best normalized autocorrelation over the
    candidate lag range reaches 0.45.  Among near-best peaks (>= 0.9 of the
    maximum) the shortest lag wins, which suppresses octave-down errors;
    parabolic interpolation then refines the winning lag.
    """
    frames, start = _frames(clip, PITCH_WINDOW_S)
    if frames is None:
        return _empty_track(clip)
    rate = clip.sample_rate_hz
    n = frames.shape[1]
    lag_min = int(np.ceil(rate / PITCH_CEIL_HZ))
    lag_max = int(np.floor(rate / PITCH_FLOOR_HZ))

    frames = frames - frames.mean(axis=1, keepdims=True)
    nfft = 1
    while nfft < n + lag_max + 1:
        nfft *= 2
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    raw = np.fft.irfft(np.abs(spec) ** 2, n=nfft, axis=1)[:, :lag_max + 1]

    sq = np.concatenate([np.zeros((len(frames), 1)),
                         np.cumsum(frames ** 2, axis=1)], axis=1)
    total = sq[:, -1]
    lags = np.arange(lag_max + 1)
    head = sq[:, n - lags.clip(max=n)]          # energy of x[0 : n-L]
    tail = total[:, None] - sq[:, lags]         # energy of x[L : n]
    denom = np.sqrt(head * tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        nccf = np.where(denom > 0, raw / denom, 0.0)
    nccf = nccf[:, lag_min:lag_max + 1]

    values = np.zeros(len(frames))
    voiced = np.zeros(len(frames), dtype=bool)
    for i, row in enumerate(nccf):
        best = row.max(initial=0.0)
        if best < VOICING_THRESHOLD:
            continue
        is_peak = np.ones(len(row), dtype=bool)
        is_peak[1:] &= row[1:] >= row[:-1]
        is_peak[:-1] &= row[:-1] >= row[1:]
        candidates = np.flatnonzero(is_peak & (row >= 0.9 * best))
        k = int(candidates[0]) if len(candidates) else int(np.argmax(row))
        lag = float(lag_min + k)
        if 0 < k < len(row) - 1:
            r0, r1, r2 = row[k - 1], row[k], row[k + 1]
            curve = r0 - 2 * r1 + r2
            if curve < 0:
                lag += float(np.clip(0.5 * (r0 - r2) / curve, -0.5, 0.5))
        values[i] = float(np.clip(rate / lag, PITCH_FLOOR_HZ, PITCH_CEIL_HZ))
        voiced[i] = True
    return Track(HOP_S, start, values, voiced)


def compute_tracks(clip):
    return ProsodyTracks(
        pitch=pitch_contour(clip),
        intensity=intensity_contour(clip),
        sonority=sonority_contour(clip),
    )


def _select(track, t0, t1, voiced_only):
    """Frame (times, values) whose center falls in [t0, t1)."""
    times = track.times()
    mask = (times >= t0 - 1e-9) & (times < t1 - 1e-9)
    if voiced_only:
        mask &= track.voiced
    return times[mask], track.values[mask]


def _auc(times, values, t0, t1):
    """Trapezoid over the frame samples, extended flat to the span edges."""
    if len(times) == 0:
        return 0.0
    total = values[0] * (times[0] - t0) + values[-1] * (t1 - times[-1])
    if len(times) > 1:
        total += float(np.trapezoid(values, times))
    return float(total)


def _signal_features(track, word_t0, word_t1, nucleus, voiced_only, name, flags):
    w_times, w_values = _select(track, word_t0, word_t1, voiced_only)
    n_times, n_values = _select(track, nucleus.t0, nucleus.t1, voiced_only)
    duration = nucleus.t1 - nucleus.t0
    word_mean = float(w_values.mean()) if len(w_values) else 0.0
    if word_mean <= 0.0 or len(n_values) == 0:
        reason = ("no voiced frames" if voiced_only and word_mean <= 0.0
                  else "zero word mean" if word_mean <= 0.0
                  else "no frames in nucleus")
        flags.append(f"{name}: {reason}, ratios set to 1.0")
        return 1.0, 1.0, 1.0
    auc = _auc(n_times, n_values, nucleus.t0, nucleus.t1) / duration / word_mean
    mean = float(n_values.mean()) / word_mean
    peak = float(n_values.max()) / word_mean
    return auc, mean, peak


def nucleus_features(tracks, word, nucleus):
    """Ten features for one nucleus; returns (features, quality_flags).

    `word` is the (t0, t1) span of the whole word.  Pitch statistics use
    voiced frames only.  When a word-level mean is zero (or a selection is
    empty) the affected ratios fall back to the neutral value 1.0 and the
    fallback is recorded in the flags.
    """
    word_t0, word_t1 = word
    flags = []
    p = _signal_features(tracks.pitch, word_t0, word_t1, nucleus, True, "pitch", flags)
    i = _signal_features(tracks.intensity, word_t0, word_t1, nucleus, False,
                         "intensity", flags)
    s = _signal_features(tracks.sonority, word_t0, word_t1, nucleus, False,
                         "sonority", flags)
    feats = NucleusFeatures(
        pitch_auc_prom=p[0], pitch_mean_prom=p[1], pitch_peak_prom=p[2],
        int_auc_prom=i[0], int_mean_prom=i[1], int_peak_prom=i[2],
        son_auc_prom=s[0], son_mean_prom=s[1], son_peak_prom=s[2],
        duration_s=nucleus.t1 - nucleus.t0,
    )
    return feats, flags


def write_contours(tracks, path):
    """Dump per-frame contour values as JSON Lines for plotting/debugging."""
    n = max(len(tracks.pitch), len(tracks.intensity), len(tracks.sonority))
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            row = {"t": round(tracks.intensity.start_s + i * HOP_S, 6)}
            if i < len(tracks.pitch):
                row["pitch_hz"] = float(tracks.pitch.values[i])
                row["voiced"] = bool(tracks.pitch.voiced[i])
            if i < len(tracks.intensity):
                row["intensity_db"] = float(tracks.intensity.values[i])
            if i < len(tracks.sonority):
                row["sonority"] = float(tracks.sonority.values[i])
            fh.write(json.dumps(row) + "\n")
