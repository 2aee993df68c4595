"""Binary and multi-valued validated agreement."""

from .mvba import FinMvba
from .raba import Raba

__all__ = ["FinMvba", "Raba"]
