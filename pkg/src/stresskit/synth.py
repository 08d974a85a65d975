"""Synthetic speech-like corpus generation for tests and demos.

Words are sequences of 2-4 consonant+vowel syllables.  Vowels are harmonic
tones with a band emphasis around 300-2300 Hz so they read as "sonorous" to
the contour code; consonants are short low-level noise bursts.  Exactly one
syllable per word is stressed: its vowel gets +6 dB RMS, 1.5x the duration,
and a 30% higher fundamental.  Every boundary lands on a sample, so grid
times written next to the audio survive text round-trips exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import write_wav
from .textgrid import INTERVAL_TIER, POINT_TIER, Interval, Point, TextGridDoc, Tier, write_textgrid

SAMPLE_RATE = 16000

STRESS_GAIN_DB = 6.0
STRESS_DURATION_SCALE = 1.5
STRESS_F0_SCALE = 1.3

F_F0_RANGE = (180.0, 230.0)
M_F0_RANGE = (95.0, 130.0)

# single-letter onsets only: keeps pseudo-word text free of digraphs
_CONSONANTS = "bdgklmnprstvz"
_VOWELS = "aeiou"

_BASE_RMS = 0.06
_CONSONANT_RMS_SCALE = 0.25
_RAMP_S = 0.010
_SONOROUS_BAND_HZ = (300.0, 2300.0)


@dataclass
class SyllableLayout:
    text: str
    onset_t0: float  # consonant start, relative to word start
    nucleus_t0: float
    nucleus_t1: float
    f0_hz: float
    rms: float
    stressed: bool


@dataclass
class WordLayout:
    text: str
    duration_s: float
    syllables: list[SyllableLayout]
    stress_index: int


@dataclass
class SpeakerFiles:
    stem: str
    speaker_id: str
    gender: str
    base_f0_hz: float
    wav_path: str
    grid_path: str
    words: list[tuple[float, WordLayout]] = field(default_factory=list)  # (word t0 in file, layout)


def _ramp(x, rate):
    n = min(int(round(_RAMP_S * rate)), len(x) // 2)
    if n > 0:
        edge = np.hanning(2 * n)
        x[:n] *= edge[:n]
        x[-n:] *= edge[n:]
    return x


def _normalize_rms(x, rms):
    cur = float(np.sqrt(np.mean(x * x)))
    return x * (rms / cur) if cur > 0 else x


def vowel_tone(f0_hz, n_samples, rms, rate, rng):
    """Harmonic tone with emphasis in the sonorous band, exact RMS."""
    t = np.arange(n_samples) / rate
    lo, hi = _SONOROUS_BAND_HZ
    x = np.zeros(n_samples)
    k = 1
    while k * f0_hz < 0.45 * rate and k <= 24:
        freq = k * f0_hz
        weight = (1.0 / k) * (2.0 if lo <= freq <= hi else 0.5)
        x += weight * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        k += 1
    return _normalize_rms(_ramp(x, rate), rms)


def consonant_noise(n_samples, rms, rate, rng):
    """Short broadband burst standing in for an obstruent onset."""
    x = rng.standard_normal(n_samples)
    return _normalize_rms(_ramp(x, rate), rms)


def synth_word(rng, base_f0_hz, rate=SAMPLE_RATE):
    """One pseudo-word; returns (samples, WordLayout with times from 0)."""
    n_syll = int(rng.integers(2, 5))
    stress = int(rng.integers(0, n_syll))
    word_rms = _BASE_RMS * rng.uniform(0.85, 1.15)
    stress_gain = 10.0 ** (STRESS_GAIN_DB / 20.0)

    pieces = []
    syllables = []
    text = []
    cursor = 0
    for k in range(n_syll):
        stressed = k == stress
        cons = _CONSONANTS[int(rng.integers(len(_CONSONANTS)))]
        vow = _VOWELS[int(rng.integers(len(_VOWELS)))]
        text.append(cons + vow)

        cons_n = int(round(rng.uniform(0.030, 0.050) * rate))
        vow_s = rng.uniform(0.080, 0.125) * (STRESS_DURATION_SCALE if stressed else 1.0)
        vow_n = int(round(vow_s * rate))
        f0 = base_f0_hz * rng.uniform(0.94, 1.06) * (STRESS_F0_SCALE if stressed else 1.0)
        rms = word_rms * rng.uniform(0.92, 1.08) * (stress_gain if stressed else 1.0)

        onset_t0 = cursor / rate
        pieces.append(consonant_noise(cons_n, word_rms * _CONSONANT_RMS_SCALE, rate, rng))
        cursor += cons_n
        nucleus_t0 = cursor / rate
        pieces.append(vowel_tone(f0, vow_n, rms, rate, rng))
        cursor += vow_n
        syllables.append(SyllableLayout(cons + vow, onset_t0, nucleus_t0,
                                        cursor / rate, f0, rms, stressed))

    layout = WordLayout("".join(text), cursor / rate, syllables, stress)
    return np.concatenate(pieces), layout


def _gap(t0, t1):
    return Interval(t0, t1, "")


def _speaker_doc(duration_s, words):
    """TextGrid with word/nucleus interval tiers and a stress point tier."""
    word_ivs = []
    nuc_ivs = []
    marks = []
    cursor = 0.0
    for t0, layout in words:
        if t0 > cursor:
            word_ivs.append(_gap(cursor, t0))
        word_ivs.append(Interval(t0, t0 + layout.duration_s, layout.text))
        nuc_cursor = cursor
        for syl in layout.syllables:
            a, b = t0 + syl.nucleus_t0, t0 + syl.nucleus_t1
            if a > nuc_cursor:
                nuc_ivs.append(_gap(nuc_cursor, a))
            nuc_ivs.append(Interval(a, b, syl.text[-1]))
            nuc_cursor = b
        cursor = t0 + layout.duration_s
        if nuc_cursor < cursor:
            nuc_ivs.append(_gap(nuc_cursor, cursor))
        s = layout.syllables[layout.stress_index]
        marks.append(Point(t0 + (s.nucleus_t0 + s.nucleus_t1) / 2, "*"))
    if cursor < duration_s:
        word_ivs.append(_gap(cursor, duration_s))
        nuc_ivs.append(_gap(cursor, duration_s))
    return TextGridDoc(0.0, duration_s, [
        Tier("words", INTERVAL_TIER, 0.0, duration_s, intervals=word_ivs),
        Tier("nuclei", INTERVAL_TIER, 0.0, duration_s, intervals=nuc_ivs),
        Tier("stress", POINT_TIER, 0.0, duration_s, points=marks),
    ])


def synthesize_corpus(out_dir, n_words=500, n_speakers=12, seed=0, *,
                      rate=SAMPLE_RATE, gap_s=0.15, lead_s=0.10):
    """Write one wav + TextGrid per speaker plus a speakers.json sidecar.

    Words are spread as evenly as possible over speakers; genders alternate
    F/M and the per-speaker base pitch is drawn from the gender's range.
    Returns the list of SpeakerFiles in speaker order.
    """
    if n_words < n_speakers:
        raise ValueError(f"need at least one word per speaker: "
                         f"{n_words} words, {n_speakers} speakers")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    gap_n = int(round(gap_s * rate))
    lead_n = int(round(lead_s * rate))

    base = n_words // n_speakers
    extra = n_words % n_speakers
    result = []
    meta = {}
    for si in range(n_speakers):
        stem = f"spk{si:02d}"
        gender = "F" if si % 2 == 0 else "M"
        lo, hi = F_F0_RANGE if gender == "F" else M_F0_RANGE
        base_f0 = float(rng.uniform(lo, hi))
        count = base + (1 if si < extra else 0)

        pieces = [np.zeros(lead_n)]
        words = []
        cursor = lead_n
        for _ in range(count):
            samples, layout = synth_word(rng, base_f0, rate)
            words.append((cursor / rate, layout))
            pieces.append(samples)
            cursor += len(samples)
            pieces.append(np.zeros(gap_n))
            cursor += gap_n
        track = np.concatenate(pieces)

        wav_path = out_dir / f"{stem}.wav"
        grid_path = out_dir / f"{stem}.TextGrid"
        write_wav(wav_path, track, rate)
        write_textgrid(_speaker_doc(len(track) / rate, words), grid_path)
        meta[stem] = {"speaker_id": stem, "gender": gender, "dataset": "synth"}
        result.append(SpeakerFiles(stem, stem, gender, base_f0,
                                   str(wav_path), str(grid_path), words))

    with open(out_dir / "speakers.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
