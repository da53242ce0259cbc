"""Build TTS-ready corpora from broadcast recordings and score synthesized speech."""

__version__ = "0.1.0"
