"""Prosody-based primary stress detection for multi-syllabic words.

Submodules:

- textgrid: Praat TextGrid parsing and writing
- audio: WAV reading/writing, resampling, slicing
- corpus: manifest construction, digraph normalization, speaker splits
- prosody: intensity / pitch / sonority contours and nucleus features
- svm: from-scratch SVM (SMO) with RBF kernel and Platt scaling
- framecodec: word-level stress positions <-> 20 ms frame labels
- metrics: accuracy, bootstrap CIs, agreement, variation analyses
- synth: synthetic corpus generation for end-to-end runs
- cli: command-line entry point
"""

__version__ = "0.1.0"
