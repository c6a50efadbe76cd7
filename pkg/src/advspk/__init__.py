"""Self-supervised speaker embeddings with augmentation-adversarial training."""

__version__ = "0.1.0"
