"""evoroc: SGD-trained small CNN + AUC-fitness genetic fine-tuning of its FC head."""

from .backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
