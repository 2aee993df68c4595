"""Provable dispersal, reconstruction and dispersal-based agreement."""

from .dispersal import BOTTOM, Lock, Store, assemble_lock, disperse, lock_threshold, recover, validate_lock
from .dmvba import DispersalMvba

__all__ = [
    "BOTTOM",
    "DispersalMvba",
    "Lock",
    "Store",
    "assemble_lock",
    "disperse",
    "lock_threshold",
    "recover",
    "validate_lock",
]
