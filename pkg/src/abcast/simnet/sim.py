"""Deterministic discrete-event network.

Events are ordered by (virtual time, sequence number). All randomness comes
from one seeded generator, so a (scenario, seed) pair fixes the whole run.
An adversary may delay or hold messages, but every message it holds is
force-released ``reorder_window`` time units after it was sent, which
keeps links eventually reliable.
"""

from __future__ import annotations

import hashlib
import heapq
import random

from ..core.types import Envelope, envelope_size

_DELIVER = 0
_CALL = 1
_DEADLINE = 2


class Simulator:
    def __init__(self, n: int, seed: int = 0, delay=(0.5, 1.5), reorder_window: float = 50.0, adversary=None, metrics=None, trace: bool = True, delay_model: str = "uniform"):
        if delay_model not in ("uniform", "exponential"):
            raise ValueError(f"unknown delay model {delay_model!r}")
        self.n = n
        self.exponential = delay_model == "exponential"
        self.rng = random.Random(seed)
        self.delay_lo, self.delay_hi = delay
        self.reorder_window = reorder_window
        self.adversary = adversary
        self.metrics = metrics
        self.nodes: list = [None] * n
        self.queue: list = []
        self.seq = 0
        self.now = 0.0
        self.corrupted: set = set()
        self.crashed: set = set()
        self.events = 0
        self.max_honest_delay = 0.0
        self._trace_on = trace
        self._trace = hashlib.sha256()
        self._trace_buf: list = []

    # wiring

    def add_node(self, node) -> None:
        self.nodes[node.rt.id] = node

    def flush(self, i: int) -> None:
        rt = self.nodes[i].rt
        if not rt.outbox:
            return
        items = rt.drain()
        if i in self.crashed:
            return
        honest = i not in self.corrupted
        for dst, kind, session, body, auth, epoch in items:
            size = envelope_size(kind, session, body)
            if dst is None:
                for d in range(self.n):
                    self._send(i, d, kind, session, body, size, auth, epoch, honest)
            else:
                self._send(i, dst, kind, session, body, size, auth, epoch, honest)

    def _send(self, src, dst, kind, session, body, size, auth, epoch, honest) -> None:
        env = Envelope(src, dst, kind, session, body, size, auth, epoch)
        env.sent_at = self.now
        if src == dst:
            self._push(self.now, _DELIVER, env)
            return
        if honest and self.metrics is not None:
            self.metrics.account(env)
        if self.exponential:
            # shifted exponential, mean halfway between the bounds
            base = self.delay_lo + self.rng.expovariate(2.0 / max(self.delay_hi - self.delay_lo, 1e-9))
        else:
            base = self.delay_lo + (self.delay_hi - self.delay_lo) * self.rng.random()
        if self.adversary is not None:
            delay = self.adversary.route(self, env, base)
            if delay is None:
                env.status = 1
                self._push(self.now + self.reorder_window, _DEADLINE, env)
                return
        else:
            delay = base
        delay = min(delay, self.reorder_window)
        self._push(self.now + delay, _DELIVER, env)

    def _push(self, t, what, obj) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (t, self.seq, what, obj))

    # adversary controls

    def release(self, env: Envelope, delay: float = 0.0) -> None:
        if env.status == 1:
            env.status = 0
            t = min(self.now + delay, env.sent_at + self.reorder_window)
            self._push(max(t, self.now), _DELIVER, env)

    def retract(self, env: Envelope) -> None:
        """After-fact removal: drop a message that has not been delivered."""
        env.status = 2

    def call_at(self, t: float, fn) -> None:
        self._push(max(t, self.now), _CALL, fn)

    def corrupt(self, i: int) -> None:
        self.corrupted.add(i)

    def crash(self, i: int) -> None:
        self.corrupted.add(i)
        self.crashed.add(i)

    # main loop

    def run(self, until: float | None = None, stop=None, max_events: int | None = None, check_every: int = 64) -> None:
        queue = self.queue
        nodes = self.nodes
        pop = heapq.heappop
        crashed = self.crashed
        trace = self._trace_buf if self._trace_on else None
        since_check = 0
        while queue:
            t, seq, what, obj = queue[0]
            if until is not None and t > until:
                break
            pop(queue)
            self.now = t
            if what == _DELIVER:
                env = obj
                if env.status:
                    continue
                dst = env.dst
                src = env.src
                if src != dst and src not in self.corrupted and dst not in self.corrupted:
                    d = t - env.sent_at
                    if d > self.max_honest_delay:
                        self.max_honest_delay = d
                if dst in crashed:
                    continue
                if trace is not None:
                    trace.append(f"{t!r} {src} {dst} {env.kind} {env.session!r} {env.size_bytes}\n")
                    if len(trace) >= 4096:
                        self._trace.update("".join(trace).encode())
                        trace.clear()
                node = nodes[dst]
                node.rt.deliver(src, env.kind, env.session, env.body)
                if node.rt.outbox:
                    self.flush(dst)
            elif what == _DEADLINE:
                if obj.status == 1:
                    obj.status = 0
                    self._push(t, _DELIVER, obj)
                continue
            else:
                obj()
            self.events += 1
            if max_events is not None and self.events >= max_events:
                break
            if stop is not None:
                since_check += 1
                if since_check >= check_every:
                    since_check = 0
                    if stop():
                        break

    def trace_digest(self) -> str:
        if self._trace_buf:
            self._trace.update("".join(self._trace_buf).encode())
            self._trace_buf.clear()
        return self._trace.hexdigest()

    def flush_all(self) -> None:
        for i in range(self.n):
            if self.nodes[i] is not None:
                self.flush(i)
