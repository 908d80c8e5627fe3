"""fermix: harmonize facial-emotion datasets, balance them, train CNNs, report results."""

__version__ = "0.1.0"

from fermix.labels import EmotionLabel

__all__ = ["EmotionLabel", "__version__"]
