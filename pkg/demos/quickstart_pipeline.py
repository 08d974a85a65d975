"""
End-to-end quickstart on a synthesized corpus
=============================================

Builds a small corpus of pseudo-words (audio + TextGrid annotations),
then drives the whole command-line pipeline: ingest the annotations into
a word manifest, extract per-nucleus prominence features, train the SVM,
predict the stressed syllable of held-out words, and score the result.

Run from the repository root:

    python demos/quickstart_pipeline.py [workdir]

Everything lands in `workdir` (default: ./quickstart_run) so you can poke
at the intermediate files afterwards.
"""

import json
import sys
from glob import glob
from pathlib import Path

from stresskit import corpus, synth
from stresskit.cli import main

work = Path(sys.argv[1] if len(sys.argv) > 1 else "quickstart_run")

# ---------------------------------------------------------------------
# 1. Synthesize 200 words over 8 speakers.  Each word has 2-4 vowel-like
#    syllables; the stressed one is louder (+6 dB), longer (x1.5), and
#    higher (+30% F0).  One wav + one TextGrid per speaker.
data = work / "corpus"
synth.synthesize_corpus(data, n_words=200, n_speakers=8, seed=42)
grids = sorted(glob(str(data / "*.TextGrid")))
print(f"synthesized {len(grids)} speaker files under {data}")

# ---------------------------------------------------------------------
# 2. Ingest the TextGrids: word / nucleus / stress tiers become one
#    manifest line per multi-syllabic word.
assert main(["ingest", *grids, "--speakers", str(data / "speakers.json"),
             "--out", str(work / "ingest")]) == 0

# ---------------------------------------------------------------------
# 3. Hold out speakers, not words: the classifier must not see the test
#    voices.  A word-count-balanced speaker split does that.
records = corpus.read_manifest(work / "ingest/manifest.jsonl")
train, test = corpus.split_speakers(records, test_fraction=0.2, seed=0)
corpus.write_manifest(train, work / "train.jsonl")
corpus.write_manifest(test, work / "test.jsonl")
print(f"{len(train)} train words / {len(test)} test words "
      f"({len({r.speaker_id for r in test})} held-out speakers)")

# ---------------------------------------------------------------------
# 4. Features, model, predictions, evaluation.  Every command writes a
#    run directory with a config snapshot and a log.
assert main(["features", "--manifest", str(work / "train.jsonl"),
             "--out", str(work / "feat_train")]) == 0
assert main(["features", "--manifest", str(work / "test.jsonl"),
             "--out", str(work / "feat_test")]) == 0
assert main(["train", "--features", str(work / "feat_train/features.jsonl"),
             "--out", str(work / "model")]) == 0
assert main(["predict", "--features", str(work / "feat_test/features.jsonl"),
             "--model", str(work / "model/model.json"),
             "--out", str(work / "pred")]) == 0
assert main(["eval", "--predictions", str(work / "pred/predictions.jsonl"),
             "--out", str(work / "eval")]) == 0

report = json.loads((work / "eval/eval.json").read_text())[0]
print(f"\nword accuracy {report['accuracy']:.3f} "
      f"(95% CI [{report['ci_low']:.3f}, {report['ci_high']:.3f}]) "
      f"on {report['n_words']} held-out words")
print(f"artifacts under {work}/")
