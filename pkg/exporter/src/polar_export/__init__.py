"""Checkpoint-to-model_dir exporter for the scoring engine."""

__version__ = "0.1.0"

from .exporter import ExportError, ExportManifest, export, verify, verify_problems
