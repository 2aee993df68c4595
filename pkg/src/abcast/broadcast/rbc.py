"""Weak Byzantine reliable broadcast with an optional validity predicate and
an abandon switch.

An instance does no I/O itself. The owner supplies a ``host`` with three
methods: ``rbc_send(inst, kind, digest)`` to multicast ECHO or READY,
``rbc_wr_deliver(inst, digest)`` and ``rbc_r_deliver(inst, value)``.
"""

from __future__ import annotations

from ..core.encoding import encode
from ..core.hashing import hash_bytes

ACCEPT = "accept"
PENDING = "pending"
REJECT = "reject"


def value_digest(value) -> bytes:
    d = getattr(value, "digest", None)
    if isinstance(d, bytes):
        return d
    return hash_bytes(encode(value), "value")


def always_accept(value) -> str:
    return ACCEPT


class WeakRBC:
    __slots__ = (
        "host", "sender", "key", "quorum", "small", "predicate",
        "val", "val_digest", "got_val", "pending", "echoed", "readied",
        "wr_digest", "r_delivered", "ban", "echo_from", "echo_count",
        "ready_from", "ready_count",
    )

    def __init__(self, host, sender: int, key, quorum: int, f: int, predicate=None):
        self.host = host
        self.sender = sender
        self.key = key
        self.quorum = quorum
        self.small = f + 1
        self.predicate = predicate or always_accept
        self.val = None
        self.val_digest = None
        self.got_val = False
        self.pending = None  # (value, digest) awaiting the predicate
        self.echoed = False
        self.readied = False
        self.wr_digest = None
        self.r_delivered = False
        self.ban = False
        self.echo_from: set = set()
        self.echo_count: dict = {}
        self.ready_from: set = set()
        self.ready_count: dict = {}

    def on_val(self, src: int, value, digest: bytes | None = None) -> None:
        if src != self.sender or self.got_val:
            return
        self.got_val = True
        if digest is None:
            digest = value_digest(value)
        self._consider(value, digest)

    def _consider(self, value, digest) -> None:
        if self.ban:
            self.pending = None
            return
        verdict = self.predicate(value)
        if verdict == ACCEPT:
            self.pending = None
            self.val = value
            self.val_digest = digest
            if not self.echoed:
                self.echoed = True
                self.host.rbc_send(self, "ECHO", digest)
            self._maybe_r_deliver()
        elif verdict == PENDING:
            self.pending = (value, digest)
        else:
            self.pending = None

    def reevaluate(self) -> None:
        """Call after any local state change the predicate depends on."""
        if self.pending is not None:
            value, digest = self.pending
            self._consider(value, digest)

    def abandon(self) -> None:
        self.ban = True
        self.pending = None

    def on_echo(self, src: int, digest: bytes) -> None:
        if src in self.echo_from:
            return
        self.echo_from.add(src)
        c = self.echo_count.get(digest, 0) + 1
        self.echo_count[digest] = c
        if c >= self.quorum and not self.readied:
            self.readied = True
            self.host.rbc_send(self, "READY", digest)

    def on_ready(self, src: int, digest: bytes) -> None:
        if src in self.ready_from:
            return
        self.ready_from.add(src)
        c = self.ready_count.get(digest, 0) + 1
        self.ready_count[digest] = c
        if c >= self.small and not self.readied:
            self.readied = True
            self.host.rbc_send(self, "READY", digest)
        if c >= self.quorum and self.wr_digest is None:
            self.wr_digest = digest
            self.host.rbc_wr_deliver(self, digest)
            self._maybe_r_deliver()

    def _maybe_r_deliver(self) -> None:
        if not self.r_delivered and self.wr_digest is not None and self.val_digest == self.wr_digest:
            self.r_delivered = True
            self.host.rbc_r_deliver(self, self.val)
