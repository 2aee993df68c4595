"""The two atomic broadcast nodes."""

from .base import NodeOptions, PrefixChecker, SafetyViolation
from .finng import FinNgNode, finng_predicate
from .jumbo import JumboNode, jumbo_predicate

__all__ = [
    "FinNgNode",
    "JumboNode",
    "NodeOptions",
    "PrefixChecker",
    "SafetyViolation",
    "finng_predicate",
    "jumbo_predicate",
]
