"""Stress position <-> 20 ms frame labels.

Encoding marks a frame 1 exactly when its midpoint falls inside the
stressed nucleus.  Decoding picks the longest run of positive frames
(earliest on ties), then the nucleus with the largest temporal overlap
with that run; with zero overlap everywhere the nearest midpoint wins,
and with no positive frame at all the single max-margin frame stands in
for the run.  Every tie-break is fixed so decoding is deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

FRAME_S = 0.020
HOP_MS = 20


@dataclass
class FrameLabelSeq:
    word_id: str
    hop_ms: int
    labels: list[int]


@dataclass
class FrameLogitSeq:
    word_id: str
    hop_ms: int
    logits: np.ndarray  # (n_frames, 2): [:, 0] = neg, [:, 1] = pos


@dataclass
class PredictionRecord:
    word_id: str
    predicted_index: int
    gold_index: int | None
    n_nuclei: int
    score: float


def frame_count(duration_s):
    # The small guard keeps exact multiples of 20 ms (whose float quotient
    # can land just above an integer) from gaining a phantom frame.
    return max(1, math.ceil(duration_s / FRAME_S - 1e-9))


def _midpoints(n_frames):
    return (np.arange(n_frames) + 0.5) * FRAME_S


def encode_labels(word):
    """Binary frame labels for a word; returns (seq, warnings).

    Frame i covers [i*20 ms, (i+1)*20 ms) relative to the word start; its
    label is 1 iff the frame midpoint lies inside the stressed nucleus.
    """
    if word.stress_index is None:
        raise ValueError(f"{word.word_id}: no stress index to encode")
    duration = word.t1 - word.t0
    if duration <= 0:
        raise ValueError(f"{word.word_id}: non-positive duration")
    n = frame_count(duration)
    nucleus = word.nuclei[word.stress_index]
    lo = nucleus.t0 - word.t0
    hi = nucleus.t1 - word.t0
    mids = _midpoints(n)
    labels = ((mids >= lo - 1e-9) & (mids < hi - 1e-9)).astype(int).tolist()
    warnings = []
    if not any(labels):
        warnings.append(f"{word.word_id}: stressed nucleus [{nucleus.t0:.3f}, "
                        f"{nucleus.t1:.3f}] contains no frame midpoint")
    return FrameLabelSeq(word.word_id, HOP_MS, labels), warnings


def _positive_spans(labels):
    """Maximal runs of 1s as (start, stop) frame index pairs."""
    spans = []
    start = None
    for i, lab in enumerate(labels):
        if lab and start is None:
            start = i
        elif not lab and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(labels)))
    return spans


def _nucleus_for_span(word, span_t0, span_t1):
    """Overlap-first, midpoint-distance-second nucleus choice."""
    overlaps = [max(0.0, min(span_t1, n.t1) - max(span_t0, n.t0))
                for n in word.nuclei]
    if max(overlaps) > 0:
        return int(np.argmax(overlaps))
    span_mid = (span_t0 + span_t1) / 2
    dists = [abs(span_mid - (n.t0 + n.t1) / 2) for n in word.nuclei]
    return int(np.argmin(dists))


def decode_logits(logit_seq, word):
    """Word-level stress prediction from per-frame logits."""
    if len(word.nuclei) < 2:
        raise ValueError(f"{word.word_id}: needs >= 2 nuclei")
    logits = np.asarray(logit_seq.logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] != 2 or len(logits) == 0:
        raise ValueError(f"{word.word_id}: malformed logits of shape {logits.shape}")
    expected = frame_count(word.t1 - word.t0)
    if abs(len(logits) - expected) > 1:
        raise ValueError(
            f"{word.word_id}: {len(logits)} frames vs {expected} expected "
            f"for a {word.t1 - word.t0:.3f} s word")

    margin = logits[:, 1] - logits[:, 0]
    labels = (margin > 0).astype(int)  # tie -> 0
    spans = _positive_spans(labels)
    if spans:
        start, stop = max(spans, key=lambda s: (s[1] - s[0], -s[0]))
        score = float(margin[start:stop].mean())
    else:
        k = int(np.argmax(margin))
        start, stop = k, k + 1
        score = float(margin[k])
    span_t0 = word.t0 + start * FRAME_S
    span_t1 = word.t0 + stop * FRAME_S
    index = _nucleus_for_span(word, span_t0, span_t1)
    return PredictionRecord(
        word_id=word.word_id,
        predicted_index=index,
        gold_index=word.stress_index,
        n_nuclei=len(word.nuclei),
        score=score,
    )


def roundtrip_check(word):
    """True when decode(one-hot(encode(word))) recovers the gold index."""
    seq, _ = encode_labels(word)
    onehot = np.array([[1.0 - l, float(l)] for l in seq.labels])
    pred = decode_logits(FrameLogitSeq(word.word_id, HOP_MS, onehot), word)
    return pred.predicted_index == word.stress_index


def write_labels(seqs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            row = {"word_id": seq.word_id, "hop_ms": seq.hop_ms,
                   "labels": [int(v) for v in seq.labels]}
            fh.write(json.dumps(row) + "\n")


def read_labels(path):
    seqs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            seqs.append(FrameLabelSeq(row["word_id"], int(row["hop_ms"]),
                                      [int(v) for v in row["labels"]]))
    return seqs


def write_logits(seqs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            row = {"word_id": seq.word_id, "hop_ms": seq.hop_ms,
                   "logits": np.asarray(seq.logits, dtype=np.float64).tolist()}
            fh.write(json.dumps(row) + "\n")


def read_logits(path):
    seqs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            seqs.append(FrameLogitSeq(row["word_id"], int(row["hop_ms"]),
                                      np.array(row["logits"], dtype=np.float64)))
    return seqs


def write_predictions(preds, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(json.dumps({
                "word_id": p.word_id, "predicted_index": p.predicted_index,
                "gold_index": p.gold_index, "n_nuclei": p.n_nuclei,
                "score": p.score,
            }) + "\n")


def read_predictions(path):
    preds = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            preds.append(PredictionRecord(
                row["word_id"], int(row["predicted_index"]),
                row.get("gold_index"), int(row["n_nuclei"]),
                float(row["score"])))
    return preds
