"""Per-node plumbing shared by every protocol layer.

Protocol objects never talk to the network directly. They append to the
runtime's outbox; whoever drives the node (the simulator, or a test)
drains it after each event. ``None`` as a destination means all n nodes,
including the sender itself.
"""

from __future__ import annotations

from ..crypto.qc import Blocklist, VerifyStats


class NodeRuntime:
    def __init__(self, node_id: int, params, backend):
        self.id = node_id
        self.params = params
        self.n = params.n
        self.f = params.f
        self.quorum = params.quorum
        self.backend = backend
        self.outbox: list = []
        self.handlers: dict = {}
        self.fallback = None
        self.blocklist = Blocklist()
        self.verify_stats = VerifyStats()
        self.epoch_tag = 0

    def send(self, dst: int, session: tuple, kind: str, body, auth: int = 0) -> None:
        self.outbox.append((dst, kind, session, body, auth, self.epoch_tag))

    def multicast(self, session: tuple, kind: str, body, auth: int = 0) -> None:
        self.outbox.append((None, kind, session, body, auth, self.epoch_tag))

    def register(self, session: tuple, handler) -> None:
        self.handlers[session] = handler

    def unregister(self, session: tuple) -> None:
        self.handlers.pop(session, None)

    def deliver(self, src: int, kind: str, session: tuple, body) -> None:
        handler = self.handlers.get(session)
        if handler is not None:
            handler.handle(src, kind, body)
        elif self.fallback is not None:
            self.fallback(src, kind, session, body)

    def drain(self) -> list:
        out, self.outbox = self.outbox, []
        return out
