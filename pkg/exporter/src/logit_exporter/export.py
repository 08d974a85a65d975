"""Run a fine-tuned audio-frame-classification checkpoint over manifest words.

Reads a word manifest .jsonl, slices each word out of its wav file, runs
the checkpoint's frame head over the audio in batches, and writes one
logit line per word at a 20 ms hop, in manifest order:

    {"word_id": ..., "hop_ms": 20, "logits": [[neg, pos], ...]}

Logits are the raw head outputs.  No softmax, no argmax, no smoothing;
everything that interprets frames lives downstream of this file format.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

HOP_S = 0.020
HOP_MS = 20


class ExportError(Exception):
    pass


@dataclass
class ExportJob:
    checkpoint: str  # local directory or hub id
    manifest_path: str
    output_path: str
    device_hint: str = "cpu"


def read_manifest(path):
    """Word rows from a manifest .jsonl.

    Only word_id, audio_path, and the word span are needed here; other
    manifest fields pass through untouched.  Relative audio paths that do
    not resolve from the working directory are taken relative to the
    manifest's own directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    words = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                word_id = row["word_id"]
                audio = row["audio_path"]
                t0, t1 = float(row["t0"]), float(row["t1"])
            except KeyError as exc:
                raise ExportError(f"{path}:{k}: manifest row missing {exc}") from None
            if not t1 > t0:
                raise ExportError(f"{path}:{k}: word {word_id!r} has t1 <= t0")
            if not os.path.isabs(audio) and not os.path.exists(audio):
                audio = os.path.join(base, audio)
            words.append({"word_id": word_id, "audio_path": audio, "t0": t0, "t1": t1})
    if not words:
        raise ExportError(f"{path}: no words in manifest")
    return words


def load_wav(path):
    """(sample_rate, float32 samples in [-1, 1]); channels averaged."""
    from scipy.io import wavfile

    rate, data = wavfile.read(path)
    if data.ndim > 1:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 128.0
    else:
        samples = data.astype(np.float32)
    return int(rate), samples


def word_samples(cache, rec, target_rate):
    """One word's waveform at the extractor's rate; files load once."""
    path = rec["audio_path"]
    if path not in cache:
        try:
            cache[path] = load_wav(path)
        except (OSError, ValueError) as exc:
            raise ExportError(
                f"word {rec['word_id']!r}: cannot read {path}: {exc}") from None
    rate, samples = cache[path]
    i0 = int(round(rec["t0"] * rate))
    i1 = int(round(rec["t1"] * rate))
    if i0 < 0 or i1 > len(samples) or i1 <= i0:
        raise ExportError(
            f"word {rec['word_id']!r}: span [{rec['t0']:.3f}, {rec['t1']:.3f}] "
            f"outside {path} ({len(samples) / rate:.3f} s)")
    piece = samples[i0:i1]
    if rate != target_rate:
        n_out = max(1, int(round(len(piece) * target_rate / rate)))
        t_in = np.arange(len(piece)) / rate
        t_out = np.arange(n_out) / target_rate
        piece = np.interp(t_out, t_in, piece).astype(np.float32)
    # Pad with trailing zeros to the sample count at which a 20 ms-hop
    # extractor emits exactly ceil(duration / 20 ms) frames (mel windowing
    # and conv stacks both eat the tail otherwise, sometimes two frames
    # deep).  Costs 5-25 ms of appended silence; keeps frame k meaning
    # [20k, 20k+20) ms from word start, which downstream decoding assumes.
    frames = max(1, math.ceil((rec["t1"] - rec["t0"]) / HOP_S - 1e-9))
    pad_to = int(round((frames * HOP_S + 0.005) * target_rate))
    if len(piece) < pad_to:
        piece = np.pad(piece, (0, pad_to - len(piece)))
    return piece


def load_checkpoint(checkpoint):
    """Model and feature extractor, with the 2-class frame head verified."""
    # torch/transformers import here so manifest and audio problems surface
    # without paying the framework start-up cost first
    from transformers import AutoFeatureExtractor, AutoModelForAudioFrameClassification

    model = AutoModelForAudioFrameClassification.from_pretrained(checkpoint)
    extractor = AutoFeatureExtractor.from_pretrained(checkpoint)
    head = getattr(model, "classifier", None)
    if head is not None and hasattr(head, "weight"):
        shape = tuple(head.weight.shape)
    else:
        shape = (model.config.num_labels,)
    if model.config.num_labels != 2:
        raise ExportError(
            f"checkpoint {checkpoint!r}: frame head reports shape {shape} "
            f"({model.config.num_labels} classes); need exactly 2")
    model.eval()
    return model, extractor


def pick_device(hint):
    """A usable torch device; the hint is best-effort, cpu the fallback."""
    import torch

    try:
        device = torch.device(hint or "cpu")
        if device.type == "cuda" and not torch.cuda.is_available():
            return torch.device("cpu")
        if device.type == "mps" and not torch.backends.mps.is_available():
            return torch.device("cpu")
        return device
    except (RuntimeError, AttributeError):
        return torch.device("cpu")


def _batch_logits(model, extractor, waves, device):
    """Raw per-word logits for one batch of waveforms.

    Features are extracted per word before padding, so every word's valid
    frames match an unbatched run exactly; padded frames are masked out
    and each row is trimmed back to its true length afterwards.
    """
    import torch

    name = extractor.model_input_names[0]
    rate = extractor.sampling_rate
    per = [extractor([w], sampling_rate=rate, return_tensors="np")[name][0]
           for w in waves]
    lengths = [p.shape[0] for p in per]
    width = max(lengths)
    pad = getattr(extractor, "padding_value", 0.0)
    if per[0].ndim == 2:
        # mel-feature models: one feature row per output frame already
        feats = np.full((len(per), width, per[0].shape[1]), pad, dtype=np.float32)
        out_lengths = lengths
    else:
        # raw-waveform models: the conv stack downsamples, ask the model how far
        feats = np.full((len(per), width), pad, dtype=np.float32)
        if hasattr(model, "_get_feat_extract_output_lengths"):
            out_lengths = model._get_feat_extract_output_lengths(
                torch.tensor(lengths)).tolist()
        else:
            out_lengths = None  # resolved against the output shape below
    mask = np.zeros((len(per), width), dtype=np.int64)
    for i, p in enumerate(per):
        feats[i, : p.shape[0]] = p
        mask[i, : p.shape[0]] = 1
    inputs = {name: torch.from_numpy(feats).to(device),
              "attention_mask": torch.from_numpy(mask).to(device)}
    with torch.no_grad():
        logits = model(**inputs).logits.to("cpu").numpy()
    if out_lengths is None:
        out_lengths = [int(round(n / width * logits.shape[1])) for n in lengths]
    return [logits[i, :n] for i, n in enumerate(out_lengths)]


def export_logits(job, batch_size=8):
    """Run the checkpoint over every manifest word; returns the row count.

    Output has one line per word, in manifest order, at a 20 ms hop.  A
    word whose frame count strays more than one frame from
    ceil(duration / 20 ms) aborts the export: that means the checkpoint's
    hop is not 20 ms, and its output would be misaligned downstream.
    Nothing is written unless every word succeeds.
    """
    if batch_size < 1:
        raise ExportError(f"batch_size must be >= 1, got {batch_size}")
    words = read_manifest(job.manifest_path)
    model, extractor = load_checkpoint(job.checkpoint)
    device = pick_device(job.device_hint)
    model.to(device)
    cache = {}
    rows = []
    for start in range(0, len(words), batch_size):
        batch = words[start:start + batch_size]
        waves = [word_samples(cache, rec, extractor.sampling_rate) for rec in batch]
        for rec, logits in zip(batch, _batch_logits(model, extractor, waves, device)):
            duration = rec["t1"] - rec["t0"]
            want = max(1, math.ceil(duration / HOP_S - 1e-9))
            if abs(len(logits) - want) > 1:
                raise ExportError(
                    f"word {rec['word_id']!r}: {len(logits)} frames for a "
                    f"{duration:.3f} s word (expected {want} +- 1); checkpoint "
                    f"hop is not 20 ms")
            rows.append({"word_id": rec["word_id"], "hop_ms": HOP_MS,
                         "logits": [[float(a), float(b)] for a, b in logits]})
    with open(job.output_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return len(rows)
