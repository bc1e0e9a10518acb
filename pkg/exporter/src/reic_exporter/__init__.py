"""Pair-encoded sentence-embedding exporter.

Reads a corpus JSON that carries raw sentence text, encodes every
[target sentence, sentence] pair with a frozen encoder, and writes the
engine's binary embedding-store format (magic REICEMB1).
"""

from .export import DataError, ExportJob, export
from .encoders import EncoderUnavailableError, get_encoder

__version__ = "0.1.0"
