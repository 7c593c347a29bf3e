"""Two-stage duration-penalised DP word segmentation with lexicon learning."""

__version__ = "0.1.0"
