"""Reliable broadcast, QC-chained slots and batch retrieval."""

from .chain import ChainReceiver, ChainSender, vote_message
from .pull import PullService
from .rbc import ACCEPT, PENDING, REJECT, WeakRBC, value_digest

__all__ = [
    "ACCEPT",
    "PENDING",
    "REJECT",
    "ChainReceiver",
    "ChainSender",
    "PullService",
    "WeakRBC",
    "value_digest",
    "vote_message",
]
