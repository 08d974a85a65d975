"""Tiny random-weight checkpoints for offline tests and smoke runs."""

from __future__ import annotations


def save_tiny_checkpoint(path, num_labels=2, seed=0):
    """Write a small conformer frame-classification checkpoint to `path`.

    Random weights: useful for exercising the export pipeline offline,
    useless for actual stress detection.
    """
    import torch
    from transformers import (SeamlessM4TFeatureExtractor, Wav2Vec2BertConfig,
                              Wav2Vec2BertForAudioFrameClassification)
    from transformers.utils import logging as hf_logging

    hf_logging.disable_progress_bar()
    config = Wav2Vec2BertConfig(hidden_size=32, num_hidden_layers=2,
                                num_attention_heads=2, intermediate_size=64,
                                num_labels=num_labels)
    torch.manual_seed(seed)
    model = Wav2Vec2BertForAudioFrameClassification(config)
    model.save_pretrained(path)
    SeamlessM4TFeatureExtractor().save_pretrained(path)
    return path
