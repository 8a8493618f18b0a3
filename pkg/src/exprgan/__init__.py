"""Speech-preserving emotion translation of facial expression parameter sequences."""

from .inference import Manipulator, extract_style, geometric_median, translate_track
from .networks import EMOTIONS

__all__ = ["EMOTIONS", "Manipulator", "extract_style", "geometric_median", "translate_track"]
__version__ = "0.1.0"
