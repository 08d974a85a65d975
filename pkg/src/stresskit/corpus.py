"""Word/nucleus manifests from annotated TextGrids, and speaker splits.

A manifest row is one multi-syllabic word: its audio reference, word
interval, ordered syllable-nucleus intervals, the gold stress index when a
stress tier is available, and speaker metadata.  Manifests persist as JSON
Lines so they stream and diff cleanly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .textgrid import (  # noqa: F401  (re-exported: manifests are built from these)
    INTERVAL_TIER,
    POINT_TIER,
    TextGridDoc,
    TextGridParseError,
    Tier,
    parse_textgrid,
    read_textgrid,
    serialize_textgrid,
    write_textgrid,
)

# Croatian/Serbian Latin digraphs, each mapped to one code point so that one
# symbol = one phoneme when counting syllable positions and comparing forms.
DIGRAPHS = (("lj", "ʎ"), ("nj", "ɲ"), ("dž", "ǆ"))

# Nucleus or word labels containing any of these mark annotator-rejected
# words.  The symbols are configurable because source conventions vary.
ERROR_SYMBOLS = "?!"


def normalize_digraphs(text):
    """Replace lj, nj, dž by single placeholder symbols (ʎ, ɲ, ǆ).

    Expects lower-cased input; never lengthens the string; idempotent.
    """
    for two, one in DIGRAPHS:
        text = text.replace(two, one)
    return text


@dataclass
class NucleusSpan:
    t0: float
    t1: float
    syllable_index: int


@dataclass
class WordRecord:
    word_id: str
    text: str
    audio_path: str
    t0: float
    t1: float
    nuclei: list[NucleusSpan] = field(default_factory=list)
    stress_index: int | None = None
    speaker_id: str = ""
    gender: str = "unknown"  # F, M, or unknown
    dataset: str = ""

    def check(self):
        if len(self.nuclei) < 2:
            raise ValueError(f"{self.word_id}: needs >= 2 nuclei, has {len(self.nuclei)}")
        prev = None
        for k, n in enumerate(self.nuclei):
            if not (n.t0 < n.t1):
                raise ValueError(f"{self.word_id}: nucleus {k} has t0 >= t1")
            if n.t0 < self.t0 - 1e-9 or n.t1 > self.t1 + 1e-9:
                raise ValueError(f"{self.word_id}: nucleus {k} outside word span")
            if prev is not None and n.t0 < prev:
                raise ValueError(f"{self.word_id}: nuclei not sorted by t0")
            if n.syllable_index != k:
                raise ValueError(f"{self.word_id}: nucleus {k} has syllable_index "
                                 f"{n.syllable_index}")
            prev = n.t0
        if self.stress_index is not None and not (0 <= self.stress_index < len(self.nuclei)):
            raise ValueError(f"{self.word_id}: stress_index {self.stress_index} out of range")
        if self.gender not in ("F", "M", "unknown"):
            raise ValueError(f"{self.word_id}: bad gender {self.gender!r}")
        return self


def _contains_error_symbol(label, symbols):
    return any(s in label for s in symbols)


def _stress_marks(tier):
    """Times of non-empty stress marks; interval marks use their midpoint."""
    if tier.kind == POINT_TIER:
        return [(p.time, p.text) for p in tier.points if p.text.strip()]
    return [((iv.xmin + iv.xmax) / 2.0, iv.text) for iv in tier.intervals
            if iv.text.strip()]


def _nucleus_for_time(nuclei, time):
    """Index of the nucleus containing `time`, or None.

    Half-open spans [t0, t1) so a mark on a shared boundary matches the later
    nucleus exactly once; the last span is closed at t1.
    """
    for k, n in enumerate(nuclei):
        last = k == len(nuclei) - 1
        if n.t0 <= time < n.t1 or (last and time == n.t1):
            return k
    return None


def build_manifest(doc, audio_path, word_tier, nucleus_tier, stress_tier=None, *,
                   error_symbols=ERROR_SYMBOLS, speaker_id="", gender="unknown",
                   dataset="", rejects=None):
    """One WordRecord per word interval with >= 2 nuclei nested inside it.

    Words whose word or nucleus labels carry an error symbol are dropped.
    When a stress tier is given, each word must receive exactly one stress
    mark (matched to a nucleus by time containment); words with zero or
    several marks are excluded and described in `rejects` when provided.
    """
    words = doc.tier(word_tier)
    nuclei_t = doc.tier(nucleus_tier)
    if words is None or nuclei_t is None:
        missing = word_tier if words is None else nucleus_tier
        raise ValueError(f"tier {missing!r} not found; have {doc.tier_names()}")
    stress_t = None
    if stress_tier is not None:
        stress_t = doc.tier(stress_tier)
        if stress_t is None:
            raise ValueError(f"tier {stress_tier!r} not found; have {doc.tier_names()}")
        marks = _stress_marks(stress_t)

    def reject(index, word, reason):
        if rejects is not None:
            rejects.append({
                "word_index": index, "text": word.text,
                "t0": word.xmin, "t1": word.xmax, "reason": reason,
            })

    stem = Path(audio_path).stem
    records = []
    for wi, word in enumerate(words.intervals):
        if not word.text.strip():
            continue
        spans = [iv for iv in nuclei_t.intervals
                 if iv.text.strip() and iv.xmin >= word.xmin - 1e-9
                 and iv.xmax <= word.xmax + 1e-9]
        if len(spans) < 2:
            continue  # monosyllabic or unannotated: not an error, just skipped
        if _contains_error_symbol(word.text, error_symbols) or any(
                _contains_error_symbol(iv.text, error_symbols) for iv in spans):
            reject(wi, word, "error symbol in annotation")
            continue
        nuclei = [NucleusSpan(iv.xmin, iv.xmax, k) for k, iv in enumerate(spans)]

        stress_index = None
        if stress_t is not None:
            hits = []
            for time, _text in marks:
                if word.xmin - 1e-9 <= time <= word.xmax + 1e-9:
                    k = _nucleus_for_time(nuclei, time)
                    if k is not None:
                        hits.append(k)
            if len(hits) != 1:
                reject(wi, word, f"{len(hits)} stress marks on nuclei, expected 1")
                continue
            stress_index = hits[0]

        rec = WordRecord(
            word_id=f"{stem}_w{wi:04d}",
            text=word.text,
            audio_path=str(audio_path),
            t0=word.xmin,
            t1=word.xmax,
            nuclei=nuclei,
            stress_index=stress_index,
            speaker_id=speaker_id,
            gender=gender,
            dataset=dataset,
        )
        records.append(rec.check())
    return records


def record_to_dict(rec):
    d = {
        "word_id": rec.word_id,
        "text": rec.text,
        "audio_path": rec.audio_path,
        "t0": rec.t0,
        "t1": rec.t1,
        "nuclei": [{"t0": n.t0, "t1": n.t1, "syllable_index": n.syllable_index}
                   for n in rec.nuclei],
        "speaker_id": rec.speaker_id,
        "gender": rec.gender,
        "dataset": rec.dataset,
    }
    if rec.stress_index is not None:
        d["stress_index"] = rec.stress_index
    return d


def record_from_dict(d):
    rec = WordRecord(
        word_id=d["word_id"],
        text=d["text"],
        audio_path=d["audio_path"],
        t0=float(d["t0"]),
        t1=float(d["t1"]),
        nuclei=[NucleusSpan(float(n["t0"]), float(n["t1"]), int(n["syllable_index"]))
                for n in d["nuclei"]],
        stress_index=d.get("stress_index"),
        speaker_id=d.get("speaker_id", ""),
        gender=d.get("gender", "unknown"),
        dataset=d.get("dataset", ""),
    )
    return rec.check()


def write_manifest(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), ensure_ascii=False) + "\n")


def read_manifest(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records


def write_rejects(rejects, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rejects:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def split_speakers(records, test_fraction, seed):
    """Speaker-disjoint train/test split, sized and gender-balanced by words.

    Draws 1000 seeded random speaker assignments (shuffle speakers, fill the
    test side until it reaches `test_fraction` of words).  Among candidates
    whose test share lies within +-5 points of the target, picks the one
    whose test gender ratio is closest to 50/50; if none hit the window, the
    closest-sized candidate wins.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction {test_fraction} not in (0, 1)")
    speakers = sorted({r.speaker_id for r in records})
    if len(speakers) < 2:
        raise ValueError(f"need >= 2 speakers to split, have {len(speakers)}")
    by_speaker = {s: [r for r in records if r.speaker_id == s] for s in speakers}
    total = len(records)

    rng = random.Random(seed)
    best = None
    for _ in range(1000):
        order = speakers[:]
        rng.shuffle(order)
        test_set = []
        count = 0
        for s in order:
            if count >= test_fraction * total or len(test_set) == len(speakers) - 1:
                break  # always leave at least one speaker for train
            test_set.append(s)
            count += len(by_speaker[s])
        share = count / total
        test_words = [r for s in test_set for r in by_speaker[s]]
        n_f = sum(1 for r in test_words if r.gender == "F")
        gender_dev = abs(n_f / count - 0.5) if count else 1.0
        size_ok = abs(share - test_fraction) <= 0.05
        # Rank: size window first, then gender balance, then size error.
        key = (not size_ok, gender_dev, abs(share - test_fraction))
        if best is None or key < best[0]:
            best = (key, frozenset(test_set))

    chosen = best[1]
    train = [r for r in records if r.speaker_id not in chosen]
    test = [r for r in records if r.speaker_id in chosen]
    return train, test
