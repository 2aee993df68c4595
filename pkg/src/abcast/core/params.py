from __future__ import annotations

from dataclasses import dataclass


def derive_fault_bound(n: int) -> int:
    """Largest f with n >= 3f + 1."""
    if n < 4:
        raise ValueError(f"need at least 4 nodes for a Byzantine quorum, got n={n}")
    return (n - 1) // 3


def quorum_size(n: int) -> int:
    return n - derive_fault_bound(n)


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    kappa: int = 2
    beta: float = 0.5
    batch_limit: int = 16
    tx_size: int = 250

    def __post_init__(self):
        derive_fault_bound(self.n)
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie strictly between 0 and 1")
        if self.kappa < 1:
            raise ValueError("kappa must be at least 1")
        if self.batch_limit < 1:
            raise ValueError("batch_limit must be at least 1")
        if self.tx_size < 1:
            raise ValueError("tx_size must be positive")

    @property
    def f(self) -> int:
        return (self.n - 1) // 3

    @property
    def quorum(self) -> int:
        return self.n - self.f

    @property
    def small_quorum(self) -> int:
        """f + 1: enough to include at least one honest node."""
        return self.f + 1
