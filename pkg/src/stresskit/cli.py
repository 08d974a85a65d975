"""Command line wiring corpus ingestion, features, models, and reports.

Every subcommand writes into a run directory: a ``config.json`` snapshot of
the resolved options, a ``run.log``, and the command's artifacts under fixed
names.  Options can also come from a ``key = value`` config file; explicit
flags win over file values.  All randomness is seeded (``--seed``, default
0), so reruns with the same inputs produce byte-identical artifacts; the
timestamp line in ``run.log`` is dropped under ``--deterministic``.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, audio, corpus, framecodec, metrics, prosody, svm, textgrid

TOOL = f"stresskit {__version__}"

CURVE_NOTE = ("constant-1200-step control applies to the external "
              "transformer baseline, not to the SVM trained here")


# ---------------------------------------------------------------- run dirs

class RunDir:
    """Output directory of one invocation: config snapshot, log, artifacts."""

    def __init__(self, path, command, options, deterministic):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.lines = [f"# {TOOL} {command}"]
        if not deterministic:
            self.lines.append(f"# started {time.strftime('%Y-%m-%dT%H:%M:%S')}")
        snapshot = {k: v for k, v in options.items() if k != "func"}
        with open(self.path / "config.json", "w", encoding="utf-8") as fh:
            json.dump(snapshot, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")

    def file(self, name):
        return self.path / name

    def log(self, message):
        self.lines.append(message)

    def close(self):
        with open(self.path / "run.log", "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.lines) + "\n")


def parse_config_text(text, source="<config>"):
    """key = value lines with # comments; values typed as bool/int/float/str."""
    values = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{ln}: expected key = value, got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key, val = key.strip().replace("-", "_"), val.strip()
        if not key:
            raise ValueError(f"{source}:{ln}: empty key")
        if len(val) >= 2 and val[0] == '"' and val[-1] == '"':
            values[key] = val[1:-1]
        elif val.lower() in ("true", "false"):
            values[key] = val.lower() == "true"
        else:
            try:
                values[key] = int(val)
            except ValueError:
                try:
                    values[key] = float(val)
                except ValueError:
                    values[key] = val
    return values


def _apply_config(args, argv):
    """Fill options from the config file unless the flag was given."""
    if not getattr(args, "config", None):
        return
    values = parse_config_text(Path(args.config).read_text(encoding="utf-8"),
                               source=args.config)
    for key, val in values.items():
        if not hasattr(args, key):
            raise ValueError(f"{args.config}: unknown option {key!r}")
        flag = "--" + key.replace("_", "-")
        if any(a == flag or a.startswith(flag + "=") for a in argv):
            continue  # explicit flag wins
        setattr(args, key, val)


# ---------------------------------------------------------------- features

@dataclass
class FeatureRow:
    word_id: str
    nucleus_index: int
    label: int | None  # 1 = stressed, 0 = not, None = unlabeled
    features: prosody.NucleusFeatures
    flags: list[str]


def extract_features(records, log=lambda msg: None):
    """FeatureRows for every nucleus, sorted by (word_id, nucleus_index).

    Words whose audio cannot be read or sliced are skipped and logged.
    """
    by_path = {}
    for rec in records:
        by_path.setdefault(rec.audio_path, []).append(rec)
    rows = []
    for path in sorted(by_path):
        try:
            clip = audio.load_wav(path)
        except (OSError, audio.AudioError) as exc:
            log(f"skipped {len(by_path[path])} words: {path}: {exc}")
            continue
        for rec in by_path[path]:
            try:
                tracks = prosody.compute_tracks(audio.slice_clip(clip, rec.t0, rec.t1))
            except audio.AudioError as exc:
                log(f"skipped {rec.word_id}: {exc}")
                continue
            for nuc in rec.nuclei:
                feats, flags = prosody.nucleus_features(tracks, (rec.t0, rec.t1), nuc)
                label = (None if rec.stress_index is None
                         else int(nuc.syllable_index == rec.stress_index))
                rows.append(FeatureRow(rec.word_id, nuc.syllable_index, label,
                                       feats, flags))
    rows.sort(key=lambda r: (r.word_id, r.nucleus_index))
    return rows


def write_features(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({
                "word_id": r.word_id,
                "nucleus_index": r.nucleus_index,
                "label": r.label,
                "features": {f: getattr(r.features, f)
                             for f in prosody.NucleusFeatures.FIELDS},
                "flags": r.flags,
            }) + "\n")


def read_features(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            label = d.get("label")
            rows.append(FeatureRow(
                d["word_id"], int(d["nucleus_index"]),
                None if label is None else int(label),
                prosody.NucleusFeatures(**d["features"]),
                list(d.get("flags", ()))))
    return rows


def _instances(rows, require_labels):
    missing = sorted({r.word_id for r in rows if r.label is None})
    if require_labels and missing:
        raise ValueError(f"feature rows without labels: {missing[:3]}")
    return [svm.TrainInstance(r.features, r.label if r.label is not None else 0,
                              r.word_id, r.nucleus_index) for r in rows]


def _row_groups(rows):
    groups = {}
    for r in rows:
        groups.setdefault(r.word_id, []).append(r)
    return {w: sorted(g, key=lambda r: r.nucleus_index) for w, g in groups.items()}


# ----------------------------------------------------------- learning curve

@dataclass
class LearningCurvePoint:
    train_size: int
    repeat: int
    seed: int
    accuracy: float


def curve_subsets(word_ids, sizes, repeats, seed):
    """(size, repeat) -> sorted word-id subsample; deterministic in seed.

    Sizes larger than the corpus yield no entry (callers warn and skip).
    """
    wids = sorted(word_ids)
    out = {}
    for size in sizes:
        if size > len(wids):
            continue
        for rep in range(repeats):
            rng = np.random.default_rng((seed, size, rep))
            idx = rng.choice(len(wids), size=size, replace=False)
            out[(size, rep)] = [wids[i] for i in sorted(idx.tolist())]
    return out


def learning_curve(train_rows, test_rows, sizes, repeats, seed, *,
                   C=svm.DEFAULT_C, gamma="scale", kernel="rbf", tol=1e-3,
                   log=lambda msg: None):
    """Accuracy-vs-training-size experiment on extracted features.

    For every size, `repeats` word subsamples are drawn (seeded), one SVM is
    trained per subsample, and each is scored on the full test set.  Returns
    (points, summaries) where summaries carry (size, mean, sd) per size.
    """
    groups = _row_groups(train_rows)
    test_instances = _instances(test_rows, require_labels=True)
    subsets = curve_subsets(groups.keys(), sizes, repeats, seed)
    points = []
    summaries = []
    for size in sizes:
        if (size, 0) not in subsets:
            log(f"size {size} exceeds the {len(groups)}-word corpus, skipped")
            continue
        accs = []
        for rep in range(repeats):
            insts = [svm.TrainInstance(r.features, r.label, r.word_id, r.nucleus_index)
                     for w in subsets[(size, rep)] for r in groups[w]]
            model = svm.train_svm(insts, C=C, gamma=gamma, kernel=kernel,
                                  seed=seed, tol=tol)
            acc = svm.word_accuracy_on_instances(model, test_instances)
            points.append(LearningCurvePoint(size, rep, seed, acc))
            accs.append(acc)
        sd = statistics.stdev(accs) if len(accs) > 1 else 0.0
        summaries.append((size, statistics.mean(accs), sd))
    return points, summaries


# ---------------------------------------------------------------- commands

def _gamma(value):
    return value if value == "scale" else float(value)


def _sizes(text):
    sizes = [int(s) for s in text.split(",") if s.strip()]
    if not sizes or any(s <= 0 for s in sizes):
        raise ValueError(f"sizes must be positive integers, got {text!r}")
    return sizes


def cmd_ingest(args, run):
    speakers = {}
    if args.speakers:
        speakers = json.loads(Path(args.speakers).read_text(encoding="utf-8"))
    records = []
    rejects = []
    for grid_path in args.grids:
        grid_path = Path(grid_path)
        wav_path = grid_path.with_suffix(args.audio_ext)
        if not wav_path.exists():
            raise FileNotFoundError(f"no audio next to {grid_path}: {wav_path}")
        doc = textgrid.read_textgrid(grid_path)
        meta = speakers.get(grid_path.stem, {})
        file_rejects = []
        recs = corpus.build_manifest(
            doc, str(wav_path), args.word_tier, args.nucleus_tier,
            args.stress_tier or None, error_symbols=args.error_symbols,
            speaker_id=meta.get("speaker_id", grid_path.stem),
            gender=meta.get("gender", "unknown"),
            dataset=meta.get("dataset", ""),
            rejects=file_rejects)
        for rej in file_rejects:
            rej["file"] = grid_path.name
        records.extend(recs)
        rejects.extend(file_rejects)
        run.log(f"{grid_path.name}: {len(recs)} words, {len(file_rejects)} rejected")
    corpus.write_manifest(records, run.file("manifest.jsonl"))
    corpus.write_rejects(rejects, run.file("rejects.jsonl"))
    run.log(f"total {len(records)} words, {len(rejects)} rejected")
    print(f"{len(records)} words -> {run.file('manifest.jsonl')}")


def cmd_features(args, run):
    records = corpus.read_manifest(args.manifest)
    rows = extract_features(records, log=run.log)
    write_features(rows, run.file("features.jsonl"))
    flagged = sum(1 for r in rows if r.flags)
    run.log(f"{len(rows)} nuclei from {len({r.word_id for r in rows})} words, "
            f"{flagged} with quality flags")
    print(f"{len(rows)} feature rows -> {run.file('features.jsonl')}")


def cmd_train(args, run):
    rows = read_features(args.features)
    instances = _instances(rows, require_labels=True)
    if args.grid:
        wids = sorted({r.word_id for r in rows})
        rng = np.random.default_rng(args.seed)
        rng.shuffle(wids)
        n_val = max(1, round(len(wids) * args.val_fraction))
        if n_val >= len(wids):
            raise ValueError(f"validation split takes all {len(wids)} words")
        val_ids = set(wids[:n_val])
        train = [i for i in instances if i.word_id not in val_ids]
        val = [i for i in instances if i.word_id in val_ids]
        model, report = svm.grid_search(train, val, seed=args.seed)
        with open(run.file("grid_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        run.log(f"grid search over {len(report)} combos, "
                f"picked kernel={model.kernel} C={model.C}")
        fit_instances = train
    else:
        model = svm.train_svm(instances, C=args.C, gamma=_gamma(args.gamma),
                              kernel=args.kernel, seed=args.seed)
        fit_instances = instances
    decisions = svm.decision_values(model, [i.features for i in fit_instances])
    labels = [i.label for i in fit_instances]
    model.platt = svm.platt_fit(decisions, labels)
    svm.save_model(model, run.file("model.json"))
    acc = svm.word_accuracy_on_instances(model, instances)
    run.log(f"trained on {len(fit_instances)} nuclei, "
            f"word accuracy on the full feature set {acc:.4f}")
    print(f"model -> {run.file('model.json')}")


def cmd_predict(args, run):
    rows = read_features(args.features)
    model = svm.load_model(args.model)
    preds = []
    for wid, group in sorted(_row_groups(rows).items()):
        pred, scores = svm.predict_word(model, [r.features for r in group])
        gold = next((r.nucleus_index for r in group if r.label == 1), None)
        score = (svm.platt_probability(model, float(scores[pred]))
                 if model.platt is not None else float(scores[pred]))
        preds.append(framecodec.PredictionRecord(
            word_id=wid, predicted_index=group[pred].nucleus_index,
            gold_index=gold, n_nuclei=len(group), score=score))
    framecodec.write_predictions(preds, run.file("predictions.jsonl"))
    run.log(f"{len(preds)} words predicted")
    print(f"{len(preds)} predictions -> {run.file('predictions.jsonl')}")


def cmd_encode(args, run):
    records = corpus.read_manifest(args.manifest)
    seqs = []
    for rec in sorted(records, key=lambda r: r.word_id):
        if rec.stress_index is None:
            run.log(f"skipped {rec.word_id}: no stress annotation")
            continue
        seq, warnings = framecodec.encode_labels(rec)
        for w in warnings:
            run.log(w)
        seqs.append(seq)
    framecodec.write_labels(seqs, run.file("labels.jsonl"))
    run.log(f"{len(seqs)} words encoded")
    print(f"{len(seqs)} label sequences -> {run.file('labels.jsonl')}")


def cmd_decode(args, run):
    records = {r.word_id: r for r in corpus.read_manifest(args.manifest)}
    preds = []
    for seq in framecodec.read_logits(args.logits):
        if seq.word_id not in records:
            raise ValueError(f"logits for unknown word {seq.word_id!r}")
        preds.append(framecodec.decode_logits(seq, records[seq.word_id]))
    preds.sort(key=lambda p: p.word_id)
    framecodec.write_predictions(preds, run.file("predictions.jsonl"))
    run.log(f"{len(preds)} words decoded")
    print(f"{len(preds)} predictions -> {run.file('predictions.jsonl')}")


def cmd_eval(args, run):
    preds = framecodec.read_predictions(args.predictions)
    report = metrics.evaluate_predictions(preds, level=args.level,
                                          resamples=args.resamples,
                                          seed=args.seed, tag=args.tag)
    cm = metrics.confusion_matrix(preds)
    metrics.write_eval_json([report], run.file("eval.json"))
    metrics.write_eval_text([report], run.file("eval.txt"))
    metrics.write_confusion_csv(cm, run.file("confusion.csv"))
    run.log(f"accuracy {report.accuracy:.4f} "
            f"ci [{report.ci_low:.4f}, {report.ci_high:.4f}] n={report.n_words}")
    print(f"accuracy {report.accuracy:.4f} "
          f"[{report.ci_low:.4f}, {report.ci_high:.4f}] on {report.n_words} words")


def _read_annotations(path):
    """word_id -> index map from a predictions or manifest .jsonl."""
    with open(path, encoding="utf-8") as fh:
        first = next((line for line in fh if line.strip()), None)
    if first is None:
        raise ValueError(f"{path}: empty annotation file")
    if "predicted_index" in json.loads(first):
        return {p.word_id: p.predicted_index
                for p in framecodec.read_predictions(path)}
    return {r.word_id: r.stress_index for r in corpus.read_manifest(path)
            if r.stress_index is not None}


def cmd_agree(args, run):
    a = _read_annotations(args.a)
    b = _read_annotations(args.b)
    rep = metrics.agreement_report(a, b)
    doc = {"tool": TOOL, "n_items": rep.n_items,
           "observed_agreement": rep.observed_agreement, "alpha": rep.alpha}
    with open(run.file("agreement.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    run.log(f"{rep.n_items} shared items, observed {rep.observed_agreement:.4f}, "
            f"alpha {'-' if rep.alpha is None else f'{rep.alpha:.4f}'}")
    print(f"agreement -> {run.file('agreement.json')}")


def cmd_analyze(args, run):
    records = corpus.read_manifest(args.manifest)
    eligible, fraction, varying = metrics.stress_variation(records,
                                                           min_count=args.min_count)
    doc = {"tool": TOOL,
           "stress_variation": {"eligible_forms": eligible,
                                "varying_fraction": fraction,
                                "varying_forms": varying}}
    if args.test_manifest:
        test = corpus.read_manifest(args.test_manifest)
        n_overlap, overlap_pct, n_unseen, unseen_pct = \
            metrics.crosslingual_overlap(records, test)
        doc["overlap"] = {"overlap_forms": n_overlap, "overlap_pct": overlap_pct,
                          "unseen_stress_forms": n_unseen,
                          "unseen_stress_pct": unseen_pct}
    with open(run.file("analysis.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    run.log(f"{eligible} eligible forms, {len(varying)} varying")
    print(f"analysis -> {run.file('analysis.json')}")


def _write_csv(path, command, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {TOOL} {command}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_curve(args, run):
    sizes = _sizes(args.sizes) if isinstance(args.sizes, str) else args.sizes
    train_recs = corpus.read_manifest(args.manifest)
    test_recs = corpus.read_manifest(args.test_manifest)
    train_rows = extract_features(train_recs, log=run.log)
    test_rows = extract_features(test_recs, log=run.log)
    points, summaries = learning_curve(
        train_rows, test_rows, sizes, args.repeats, args.seed,
        C=args.C, gamma=_gamma(args.gamma), kernel=args.kernel, log=run.log)

    _write_csv(run.file("curve.csv"), "curve",
               ["train_size", "repeat", "seed", "accuracy", "note"],
               [[p.train_size, p.repeat, p.seed, p.accuracy, CURVE_NOTE]
                for p in points])
    _write_csv(run.file("curve_summary.csv"), "curve",
               ["train_size", "mean_accuracy", "sd", "note"],
               [[size, mean, sd, CURVE_NOTE] for size, mean, sd in summaries])

    # the transformer leg of the experiment consumes these subsets; this
    # harness never launches external training
    subset_dir = run.file("subsets")
    subset_dir.mkdir(exist_ok=True)
    by_id = {r.word_id: r for r in train_recs}
    for (size, rep), wids in sorted(curve_subsets({r.word_id for r in train_recs},
                                                  sizes, args.repeats,
                                                  args.seed).items()):
        corpus.write_manifest([by_id[w] for w in wids],
                              subset_dir / f"size{size:04d}_rep{rep}.jsonl")
    run.log(f"{len(points)} curve points over {len(summaries)} sizes")
    print(f"curve -> {run.file('curve_summary.csv')}")


# ------------------------------------------------------------------ parser

def _common(sub):
    sub.add_argument("--out", required=True, help="run directory for outputs")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--config", default=None,
                     help="key = value file; explicit flags override it")
    sub.add_argument("--deterministic", action="store_true",
                     help="omit the timestamp line from run.log")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stresskit",
        description="Primary-stress detection pipeline over annotated speech.")
    parser.add_argument("--version", action="version", version=TOOL)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="TextGrids + audio -> word manifest")
    p.add_argument("grids", nargs="+", help="TextGrid files (audio by stem)")
    p.add_argument("--audio-ext", default=".wav")
    p.add_argument("--word-tier", default="words")
    p.add_argument("--nucleus-tier", default="nuclei")
    p.add_argument("--stress-tier", default="stress",
                   help="empty string ingests without stress annotation")
    p.add_argument("--error-symbols", default=corpus.ERROR_SYMBOLS)
    p.add_argument("--speakers", default=None,
                   help="json of stem -> speaker_id/gender/dataset")
    p.set_defaults(func=cmd_ingest)
    _common(p)

    p = subs.add_parser("features", help="manifest -> per-nucleus features")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_features)
    _common(p)

    p = subs.add_parser("train", help="features -> SVM model")
    p.add_argument("--features", required=True)
    p.add_argument("--C", type=float, default=svm.DEFAULT_C)
    p.add_argument("--gamma", default="scale")
    p.add_argument("--kernel", choices=svm.GRID_KERNELS, default="rbf")
    p.add_argument("--grid", action="store_true",
                   help="search kernel x C on a word-level validation split")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_train)
    _common(p)

    p = subs.add_parser("predict", help="features + model -> word predictions")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_predict)
    _common(p)

    p = subs.add_parser("encode", help="manifest -> 20 ms frame labels")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_encode)
    _common(p)

    p = subs.add_parser("decode", help="frame logits + manifest -> predictions")
    p.add_argument("--logits", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_decode)
    _common(p)

    p = subs.add_parser("eval", help="predictions -> accuracy, CI, confusion")
    p.add_argument("--predictions", required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--tag", default="")
    p.set_defaults(func=cmd_eval)
    _common(p)

    p = subs.add_parser("agree", help="two annotation files -> agreement report")
    p.add_argument("--a", required=True, help="predictions or manifest .jsonl")
    p.add_argument("--b", required=True, help="predictions or manifest .jsonl")
    p.set_defaults(func=cmd_agree)
    _common(p)

    p = subs.add_parser("analyze", help="manifest -> stress variation / overlap")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-manifest", default=None,
                   help="second manifest for lexical-overlap analysis")
    p.add_argument("--min-count", type=int, default=5)
    p.set_defaults(func=cmd_analyze)
    _common(p)

    p = subs.add_parser("curve", help="accuracy vs training-set size")
    p.add_argument("--manifest", required=True, help="training manifest")
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--sizes", type=_sizes,
                   default=list(range(100, 1001, 100)),
                   help="comma-separated word counts")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--C", type=float, default=svm.DEFAULT_C)
    p.add_argument("--gamma", default="scale")
    p.add_argument("--kernel", choices=svm.GRID_KERNELS, default="rbf")
    p.set_defaults(func=cmd_curve)
    _common(p)

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, argv)
        run = RunDir(args.out, args.command, vars(args), args.deterministic)
        try:
            args.func(args, run)
        finally:
            run.close()
    except Exception as exc:  # noqa: BLE001 - single CLI error funnel
        json.dump({"error": str(exc), "type": type(exc).__name__},
                  sys.stderr, default=str)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
