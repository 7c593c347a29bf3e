"""Audio-to-FTRS feature extraction with a pretrained speech transformer."""

__version__ = "0.1.0"
