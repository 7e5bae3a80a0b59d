"""Teacher embedding exporter.

Runs frozen teacher encoders over captions and images and writes their
embeddings in the training engine's binary embedding format.
"""

from .errors import DecodeError, ExportError, ModelLoadError, UsageError
from .export import ExportManifest, export_teachers

__all__ = ["DecodeError", "ExportError", "ExportManifest", "ModelLoadError",
           "UsageError", "export_teachers"]
