"""
What the classifier actually sees
=================================

Synthesizes a single pseudo-word, computes its three prosodic contours
(intensity, pitch, sonority), renders them as text sparklines, and prints
the ten features each nucleus gets.  The stressed syllable should stand
out in every row: louder, higher, longer.

    python demos/contour_walkthrough.py [seed]
"""

import sys

import numpy as np

from stresskit import audio, prosody, synth
from stresskit.corpus import NucleusSpan

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 4

# ---------------------------------------------------------------------
# One word, three to four syllables, one of them stressed.
rng = np.random.default_rng(seed)
samples, lay = synth.synth_word(rng, base_f0_hz=160.0)
stressed = lay.syllables[lay.stress_index]
print(f"word {lay.text!r}: {len(lay.syllables)} syllables, "
      f"stress on #{lay.stress_index + 1} ({stressed.text!r})")

clip = audio.AudioClip(samples, synth.SAMPLE_RATE, 0.0)
tracks = prosody.compute_tracks(clip)

# ---------------------------------------------------------------------
# Text sparklines: one character per 10 ms frame, eight levels.
BARS = " .:-=+*#"

def spark(values, lo=None, hi=None):
    lo = min(values) if lo is None else lo
    hi = max(values) if hi is None else hi
    span = (hi - lo) or 1.0
    return "".join(BARS[int(7 * (v - lo) / span)] for v in values)

def nucleus_ruler(track):
    marks = []
    for t in track.times():
        inside = any(s.nucleus_t0 - 1e-9 <= t < s.nucleus_t1 - 1e-9
                     for s in lay.syllables)
        stress = (stressed.nucleus_t0 - 1e-9 <= t < stressed.nucleus_t1 - 1e-9)
        marks.append("S" if stress else "n" if inside else " ")
    return "".join(marks)

print("\n          " + nucleus_ruler(tracks.intensity) + "   (n=nucleus, S=stressed)")
print("intensity " + spark(tracks.intensity.values))
pitch_vals = np.where(tracks.pitch.voiced, tracks.pitch.values, np.nan)
print("pitch     " + spark(np.nan_to_num(pitch_vals, nan=np.nanmin(pitch_vals))))
print("sonority  " + spark(tracks.sonority.values))

# ---------------------------------------------------------------------
# The per-nucleus feature vectors.  Each prominence value is the nucleus
# statistic divided by the word-level mean of the same contour, so 1.0
# means "average for this word".
print(f"\n{'':>4} {'pitch':>21} {'intensity':>21} {'sonority':>21} {'dur':>6}")
print(f"{'':>4} " + "{:>7}{:>7}{:>7}".format("auc", "mean", "peak") * 3 + f" {'s':>6}")
for k, syl in enumerate(lay.syllables):
    feats, _ = prosody.nucleus_features(
        tracks, (0.0, lay.duration_s), NucleusSpan(syl.nucleus_t0, syl.nucleus_t1, k))
    v = feats.as_vector()
    tag = "*" if k == lay.stress_index else " "
    print(f"  {tag}{k + 1} " + "".join(f"{x:7.3f}" for x in v[:9]) + f" {v[9]:6.3f}")

print("\nthe starred row should dominate each column; that margin is what")
print("the SVM learns to rank")
