import os

# Offline by default: every fixture checkpoint is built locally.  The
# released-checkpoint test opts back in by setting STRESS_EXPORTER_CHECKPOINT.
if not os.environ.get("STRESS_EXPORTER_CHECKPOINT"):
    os.environ.setdefault("HF_HUB_OFFLINE", "1")
    os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
