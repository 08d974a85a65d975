"""Accuracy, confidence intervals, agreement, and corpus analyses.

Word accuracy is the share of words whose predicted stress index matches
gold.  Confidence intervals come from a seeded percentile bootstrap over
words.  Inter-annotator agreement uses raw observed agreement plus
nominal-metric Krippendorff alpha from the coincidence matrix.  The two
corpus analyses (stress variation, cross-corpus overlap) key words by their
case-folded, digraph-normalized orthographic form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import normalize_digraphs


@dataclass
class EvalReport:
    n_words: int
    accuracy: float
    ci_low: float | None = None
    ci_high: float | None = None
    tag: str = ""


@dataclass
class ConfusionMatrix:
    max_position: int
    counts: np.ndarray  # [true position - 1][predicted position - 1]


@dataclass
class AgreementReport:
    n_items: int
    observed_agreement: float
    alpha: float | None  # None when chance disagreement is zero


def word_accuracy(preds, tag=""):
    """Accuracy over prediction records; every record needs a gold index."""
    if not preds:
        raise ValueError("no predictions to score")
    missing = [p.word_id for p in preds if p.gold_index is None]
    if missing:
        raise ValueError(f"predictions without gold index: {missing[:3]}")
    correct = sum(1 for p in preds if p.predicted_index == p.gold_index)
    return EvalReport(n_words=len(preds), accuracy=correct / len(preds), tag=tag)


def bootstrap_ci(correct, level=0.95, resamples=10_000, seed=0):
    """Percentile bootstrap interval for the mean of a 0/1 vector."""
    x = np.asarray(correct, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty sample")
    if not (0.0 < level < 1.0):
        raise ValueError(f"level {level} not in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(x)
    means = np.empty(resamples)
    chunk = max(1, min(resamples, 4_000_000 // max(n, 1)))
    done = 0
    while done < resamples:
        take = min(chunk, resamples - done)
        idx = rng.integers(0, n, size=(take, n))
        means[done:done + take] = x[idx].mean(axis=1)
        done += take
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(means, lo)), float(np.quantile(means, 1.0 - lo)))


def evaluate_predictions(preds, level=0.95, resamples=10_000, seed=0, tag=""):
    """word_accuracy plus a bootstrap CI in one report."""
    report = word_accuracy(preds, tag=tag)
    correct = [1 if p.predicted_index == p.gold_index else 0 for p in preds]
    report.ci_low, report.ci_high = bootstrap_ci(correct, level=level,
                                                 resamples=resamples, seed=seed)
    return report


def confusion_matrix(preds):
    """Counts over 1-based stress positions, rows = gold, cols = predicted."""
    if not preds:
        raise ValueError("no predictions")
    max_pos = 0
    for p in preds:
        if p.gold_index is None:
            raise ValueError(f"{p.word_id}: no gold index")
        max_pos = max(max_pos, p.gold_index + 1, p.predicted_index + 1)
    counts = np.zeros((max_pos, max_pos), dtype=int)
    for p in preds:
        counts[p.gold_index, p.predicted_index] += 1
    return ConfusionMatrix(max_position=max_pos, counts=counts)


def observed_agreement(a, b):
    """Share of word_ids common to both maps that received the same index."""
    common = set(a) & set(b)
    if not common:
        raise ValueError("annotators share no items")
    same = sum(1 for w in common if a[w] == b[w])
    return same / len(common)


def krippendorff_alpha(annotations):
    """Nominal-metric Krippendorff alpha over possibly-sparse annotations.

    `annotations` maps each item to the sequence of values observed for it;
    items with fewer than two values contribute nothing to the coincidence
    matrix.  Returns None when chance disagreement is zero (all values
    identical), where alpha is undefined.
    """
    values = sorted({v for vs in annotations.values() for v in vs})
    if len(values) < 2:
        return None  # a single observed value leaves no chance disagreement
    index = {v: i for i, v in enumerate(values)}
    k = len(values)
    coincidence = np.zeros((k, k))
    for vs in annotations.values():
        m = len(vs)
        if m < 2:
            continue
        for i in range(m):
            for j in range(m):
                if i != j:
                    coincidence[index[vs[i]], index[vs[j]]] += 1.0 / (m - 1)
    n_c = coincidence.sum(axis=1)
    n = n_c.sum()
    if n < 2:
        raise ValueError("need at least one item with two annotations")
    observed = np.trace(coincidence) / n
    expected = float((n_c * (n_c - 1)).sum()) / (n * (n - 1))
    if expected >= 1.0:  # every annotation carries the same value
        return None
    return float((observed - expected) / (1.0 - expected))


def agreement_report(a, b):
    """Observed agreement and alpha for two annotators' index maps."""
    common = sorted(set(a) & set(b))
    if not common:
        raise ValueError("annotators share no items")
    alpha = krippendorff_alpha({w: [a[w], b[w]] for w in common})
    return AgreementReport(
        n_items=len(common),
        observed_agreement=observed_agreement(a, b),
        alpha=alpha,
    )


def form_key(text):
    """Word identity used by the corpus analyses."""
    return normalize_digraphs(text.casefold())


def stress_variation(records, min_count=5):
    """(eligible_forms, varying_fraction, varying_forms).

    A form is eligible when it occurs at least `min_count` times; it varies
    when more than one distinct stress position is observed for it.
    """
    positions = {}
    for rec in records:
        if rec.stress_index is None:
            continue
        positions.setdefault(form_key(rec.text), []).append(rec.stress_index)
    eligible = {w: ps for w, ps in positions.items() if len(ps) >= min_count}
    varying = sorted(w for w, ps in eligible.items() if len(set(ps)) > 1)
    fraction = len(varying) / len(eligible) if eligible else 0.0
    return len(eligible), fraction, varying


def crosslingual_overlap(train, test):
    """Lexical overlap between corpora and stress disagreement inside it.

    Returns (overlap_forms, overlap_pct, unseen_stress_forms, unseen_pct):
    distinct test forms seen in train; of those, forms where some test
    stress position never occurs for the same form in train.  Percentages
    are relative to distinct test forms and to the overlap respectively.
    """
    if not train or not test:
        raise ValueError("both record sets must be nonempty")
    train_pos = {}
    for rec in train:
        if rec.stress_index is not None:
            train_pos.setdefault(form_key(rec.text), set()).add(rec.stress_index)
    test_pos = {}
    for rec in test:
        if rec.stress_index is not None:
            test_pos.setdefault(form_key(rec.text), set()).add(rec.stress_index)

    overlap = sorted(set(test_pos) & set(train_pos))
    unseen = [w for w in overlap if test_pos[w] - train_pos[w]]
    overlap_pct = len(overlap) / len(test_pos) if test_pos else 0.0
    unseen_pct = len(unseen) / len(overlap) if overlap else 0.0
    return len(overlap), overlap_pct, len(unseen), unseen_pct


def eval_report_dict(report):
    return {
        "tag": report.tag,
        "n_words": report.n_words,
        "accuracy": report.accuracy,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
    }


def write_eval_json(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([eval_report_dict(r) for r in reports], fh, indent=2)
        fh.write("\n")


def write_eval_text(reports, path):
    """Aligned-column table, accuracies as percentages."""
    rows = [("dataset", "n", "accuracy", "ci95")]
    for r in reports:
        ci = (f"[{100 * r.ci_low:.1f}, {100 * r.ci_high:.1f}]"
              if r.ci_low is not None else "-")
        rows.append((r.tag or "-", str(r.n_words), f"{100 * r.accuracy:.1f}", ci))
    widths = [max(len(row[c]) for row in rows) for c in range(4)]
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     + "\n")


def write_confusion_csv(cm, path):
    with open(path, "w", encoding="utf-8") as fh:
        header = ["gold\\pred"] + [str(i + 1) for i in range(cm.max_position)]
        fh.write(",".join(header) + "\n")
        for i in range(cm.max_position):
            fh.write(",".join([str(i + 1)] + [str(int(c)) for c in cm.counts[i]])
                     + "\n")


def confusion_text(cm):
    """Counts with row-normalized percentages, aligned for reading."""
    lines = []
    head = ["gold\\pred"] + [f"{i + 1}" for i in range(cm.max_position)]
    rows = [head]
    for i in range(cm.max_position):
        total = cm.counts[i].sum()
        cells = [f"{int(c)} ({100 * c / total:.0f}%)" if total else f"{int(c)}"
                 for c in cm.counts[i]]
        rows.append([str(i + 1)] + cells)
    widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
    for r in rows:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    return "\n".join(lines) + "\n"
