"""Frame-logit export from fine-tuned audio-frame-classification checkpoints."""

from .export import ExportError, ExportJob, export_logits

__version__ = "0.1.0"

__all__ = ["ExportError", "ExportJob", "export_logits"]
