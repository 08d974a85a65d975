"""Contour extraction and nucleus feature reduction."""

import json

import numpy as np
import pytest

from stresskit.audio import AudioClip
from stresskit.corpus import NucleusSpan
from stresskit.prosody import (
    HOP_S,
    NucleusFeatures,
    ProsodyTracks,
    Track,
    compute_tracks,
    intensity_contour,
    nucleus_features,
    pitch_contour,
    sonority_contour,
    write_contours,
)

RATE = 16000


def _clip(x, origin=0.0):
    return AudioClip(np.asarray(x, dtype=np.float64), RATE, origin)


def _sine(freq, amp, dur_s):
    t = np.arange(int(dur_s * RATE)) / RATE
    return amp * np.sin(2 * np.pi * freq * t)


class TestIntensity:
    def test_silence_at_floor(self):
        track = intensity_contour(_clip(np.zeros(8000)))
        assert len(track) == 50
        assert np.all(track.values == 0.0)
        assert np.all(track.voiced)

    def test_doubling_amplitude_adds_6db(self):
        a = intensity_contour(_clip(_sine(1000, 0.2, 0.5)))
        b = intensity_contour(_clip(_sine(1000, 0.4, 0.5)))
        diff = b.values - a.values
        assert np.all(np.abs(diff - 20 * np.log10(2)) < 0.05)

    def test_sine_plateau_level(self):
        # RMS of a 0.2 sine is 0.2/sqrt(2); 20*log10(rms/2e-5) = 76.99 dB.
        track = intensity_contour(_clip(_sine(1000, 0.2, 0.5)))
        mid = track.values[5:-5]
        assert np.all(np.abs(mid - 76.99) < 0.1)

    def test_short_clip_empty(self):
        assert len(intensity_contour(_clip(np.zeros(400)))) == 0
        assert len(intensity_contour(_clip(np.zeros(480)))) == 3


class TestSonority:
    def test_silence_zero(self):
        track = sonority_contour(_clip(np.zeros(8000)))
        assert np.all(track.values == 0.0)

    def test_in_band_tone_close_to_rms(self):
        clip = _clip(_sine(500, 0.3, 0.5))
        son = sonority_contour(clip)
        w = np.hanning(480)
        # Hann-weighted RMS on a mid-signal frame, computed directly.
        seg = clip.samples[10 * 160 - 240:10 * 160 + 240]
        rms = np.sqrt((seg ** 2 * w).sum() / w.sum())
        assert son.values[10] >= 0.9 * rms
        assert son.values[10] <= rms * 1.001

    def test_out_of_band_tone_suppressed(self):
        clip = _clip(_sine(5000, 0.3, 0.5))
        son = sonority_contour(clip)
        w = np.hanning(480)
        seg = clip.samples[10 * 160 - 240:10 * 160 + 240]
        rms = np.sqrt((seg ** 2 * w).sum() / w.sum())
        assert son.values[10] <= 0.1 * rms

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        son = sonority_contour(_clip(rng.uniform(-1, 1, 8000)))
        assert np.all(son.values >= 0.0)


class TestPitch:
    def test_silence_unvoiced(self):
        track = pitch_contour(_clip(np.zeros(8000)))
        assert len(track) == 50
        assert not track.voiced.any()
        assert np.all(track.values == 0.0)

    def test_sawtooth_200hz(self):
        t = np.arange(8000) / RATE
        saw = 0.5 * (2 * ((200 * t) % 1.0) - 1)
        track = pitch_contour(_clip(saw))
        voiced = track.values[track.voiced]
        assert len(voiced) >= 0.9 * len(track)
        assert np.all(np.abs(voiced - 200) <= 4)

    def test_chirp_nondecreasing(self):
        t = np.arange(RATE) / RATE
        x = 0.4 * np.sin(2 * np.pi * (120 * t + 80 * t ** 2))
        track = pitch_contour(_clip(x))
        voiced = track.values[track.voiced]
        assert len(voiced) > 50
        assert np.all(np.diff(voiced) >= -5)

    def test_voiced_values_in_range(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(-0.5, 0.5, 16000) + _sine(130, 0.4, 1.0)
        track = pitch_contour(_clip(x))
        v = track.values[track.voiced]
        assert np.all((v >= 75) & (v <= 500))

    def test_short_clip_empty(self):
        assert len(pitch_contour(_clip(np.zeros(600)))) == 0


class TestSharedGrid:
    def test_tracks_agree_on_hop_and_start(self):
        clip = _clip(_sine(150, 0.3, 0.4), origin=2.25)
        tracks = compute_tracks(clip)
        assert tracks.pitch.hop_s == tracks.intensity.hop_s == tracks.sonority.hop_s
        assert tracks.pitch.start_s == tracks.intensity.start_s == tracks.sonority.start_s
        assert tracks.pitch.start_s == 2.25
        assert len(tracks.pitch) == len(tracks.intensity) == len(tracks.sonority)

    def test_frame_times(self):
        clip = _clip(np.zeros(8000), origin=1.0)
        track = intensity_contour(clip)
        times = track.times()
        assert times[0] == 1.0
        assert times[1] == pytest.approx(1.01)


def _const_tracks(pitch=150.0, intensity=70.0, sonority=0.05, n=20, start=0.0):
    mk = lambda v: Track(HOP_S, start, np.full(n, float(v)), np.ones(n, dtype=bool))
    return ProsodyTracks(pitch=mk(pitch), intensity=mk(intensity), sonority=mk(sonority))


class TestNucleusFeatures:
    def test_constant_contours_give_unit_prominence(self):
        tracks = _const_tracks()
        feats, flags = nucleus_features(tracks, (0.0, 0.195), NucleusSpan(0.035, 0.115, 0))
        assert flags == []
        vec = feats.as_vector()
        assert np.allclose(vec[:9], 1.0, atol=1e-12)

    def test_duration_field(self):
        tracks = _const_tracks(n=80)
        feats, _ = nucleus_features(tracks, (0.0, 0.795), NucleusSpan(0.5, 0.7, 0))
        assert feats.duration_s == pytest.approx(0.2)

    def test_hand_contour_oracle(self):
        # Ten frames at 0.00..0.09; word [0, 0.095]; nucleus [0.025, 0.068]
        # selects frame centers 0.03, 0.04, 0.05, 0.06.
        inten = [60.0, 62.0, 65.0, 70.0, 72.0, 71.0, 66.0, 63.0, 61.0, 60.0]
        son = [0.0, 0.01, 0.05, 0.09, 0.10, 0.08, 0.04, 0.02, 0.01, 0.0]
        pit = [0.0, 110.0, 115.0, 120.0, 125.0, 122.0, 118.0, 0.0, 0.0, 0.0]
        voi = [False, True, True, True, True, True, True, False, False, False]
        tracks = ProsodyTracks(
            pitch=Track(HOP_S, 0.0, np.array(pit), np.array(voi)),
            intensity=Track(HOP_S, 0.0, np.array(inten), np.ones(10, bool)),
            sonority=Track(HOP_S, 0.0, np.array(son), np.ones(10, bool)),
        )
        feats, flags = nucleus_features(tracks, (0.0, 0.095),
                                        NucleusSpan(0.025, 0.068, 0))
        assert flags == []
        dur = 0.068 - 0.025

        # Intensity, written out by hand.
        w_mean = sum(inten) / 10
        n_vals = [70.0, 72.0, 71.0, 66.0]
        auc = (70.0 * (0.03 - 0.025)
               + (70 + 72) / 2 * 0.01 + (72 + 71) / 2 * 0.01 + (71 + 66) / 2 * 0.01
               + 66.0 * (0.068 - 0.06))
        assert feats.int_auc_prom == pytest.approx(auc / dur / w_mean, rel=1e-9)
        assert feats.int_mean_prom == pytest.approx(sum(n_vals) / 4 / w_mean, rel=1e-9)
        assert feats.int_peak_prom == pytest.approx(72.0 / w_mean, rel=1e-9)

        # Pitch over voiced frames only.
        pw_mean = (110 + 115 + 120 + 125 + 122 + 118) / 6
        p_auc = (120.0 * (0.03 - 0.025)
                 + (120 + 125) / 2 * 0.01 + (125 + 122) / 2 * 0.01
                 + (122 + 118) / 2 * 0.01
                 + 118.0 * (0.068 - 0.06))
        assert feats.pitch_auc_prom == pytest.approx(p_auc / dur / pw_mean, rel=1e-9)
        assert feats.pitch_mean_prom == pytest.approx(
            (120 + 125 + 122 + 118) / 4 / pw_mean, rel=1e-9)
        assert feats.pitch_peak_prom == pytest.approx(125.0 / pw_mean, rel=1e-9)

        # Sonority.
        s_mean = sum(son) / 10
        s_auc = (0.09 * (0.03 - 0.025)
                 + (0.09 + 0.10) / 2 * 0.01 + (0.10 + 0.08) / 2 * 0.01
                 + (0.08 + 0.04) / 2 * 0.01
                 + 0.04 * (0.068 - 0.06))
        assert feats.son_auc_prom == pytest.approx(s_auc / dur / s_mean, rel=1e-9)
        assert feats.son_mean_prom == pytest.approx(0.31 / 4 / s_mean, rel=1e-9)
        assert feats.son_peak_prom == pytest.approx(0.10 / s_mean, rel=1e-9)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = 30
            voiced = rng.random(n) > 0.3
            base = ProsodyTracks(
                pitch=Track(HOP_S, 0.0, rng.uniform(80, 300, n) * voiced, voiced),
                intensity=Track(HOP_S, 0.0, rng.uniform(40, 80, n), np.ones(n, bool)),
                sonority=Track(HOP_S, 0.0, rng.uniform(0, 0.2, n), np.ones(n, bool)),
            )
            c = float(rng.uniform(0.1, 9.0))
            scaled = ProsodyTracks(
                pitch=Track(HOP_S, 0.0, base.pitch.values * c, voiced),
                intensity=Track(HOP_S, 0.0, base.intensity.values * c, np.ones(n, bool)),
                sonority=Track(HOP_S, 0.0, base.sonority.values * c, np.ones(n, bool)),
            )
            word = (0.0, n * HOP_S - 0.005)
            nuc = NucleusSpan(0.05, 0.13, 0)
            a, _ = nucleus_features(base, word, nuc)
            b, _ = nucleus_features(scaled, word, nuc)
            assert np.allclose(a.as_vector(), b.as_vector(), rtol=1e-12)

    def test_peak_at_least_mean(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            n = 25
            tracks = ProsodyTracks(
                pitch=Track(HOP_S, 0.0, rng.uniform(80, 300, n), np.ones(n, bool)),
                intensity=Track(HOP_S, 0.0, rng.uniform(1, 80, n), np.ones(n, bool)),
                sonority=Track(HOP_S, 0.0, rng.uniform(0.01, 0.2, n), np.ones(n, bool)),
            )
            feats, _ = nucleus_features(tracks, (0.0, 0.245), NucleusSpan(0.06, 0.15, 0))
            assert feats.pitch_peak_prom >= feats.pitch_mean_prom
            assert feats.int_peak_prom >= feats.int_mean_prom
            assert feats.son_peak_prom >= feats.son_mean_prom

    def test_unvoiced_word_falls_back_to_neutral(self):
        n = 20
        tracks = ProsodyTracks(
            pitch=Track(HOP_S, 0.0, np.zeros(n), np.zeros(n, bool)),
            intensity=Track(HOP_S, 0.0, np.full(n, 70.0), np.ones(n, bool)),
            sonority=Track(HOP_S, 0.0, np.full(n, 0.05), np.ones(n, bool)),
        )
        feats, flags = nucleus_features(tracks, (0.0, 0.195), NucleusSpan(0.05, 0.12, 0))
        assert (feats.pitch_auc_prom, feats.pitch_mean_prom, feats.pitch_peak_prom) \
            == (1.0, 1.0, 1.0)
        assert any("pitch" in f for f in flags)

    def test_feature_vector_layout(self):
        feats = NucleusFeatures(*range(1, 11))
        assert list(feats.as_vector()) == list(range(1, 11))
        assert len(NucleusFeatures.FIELDS) == 10


class TestContourDump:
    def test_jsonl_lines(self, tmp_path):
        clip = _clip(_sine(150, 0.3, 0.3))
        tracks = compute_tracks(clip)
        path = tmp_path / "contours.jsonl"
        write_contours(tracks, path)
        rows = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(rows) == len(tracks.intensity)
        assert {"t", "pitch_hz", "voiced", "intensity_db", "sonority"} <= rows[5].keys()
