"""Adversary strategies for full protocol runs.

A strategy picks the nodes it corrupts in ``setup`` and may then delay,
hold or drop-in-flight messages through ``route``. The simulator enforces
eventual delivery of honest messages via the reorder window.
"""

from __future__ import annotations

import hashlib

from ..crypto.coin import coin_tag_bytes, coin_value
from .quality import RUSH

AGREEMENT_PREFIXES = ("ag", "ji")


class Strategy:
    name = "none"

    def __init__(self, count: int | None = None):
        self.count = count
        self.corrupted: set = set()

    def budget(self, f: int) -> int:
        return f if self.count is None else min(self.count, f)

    def choose(self, runner, k: int) -> list:
        nodes = list(range(runner.n))
        runner.adv_rng.shuffle(nodes)
        return sorted(nodes[:k])

    def setup(self, runner) -> None:
        """Pick the statically corrupted set; nodes do not exist yet."""

    def backend_for(self, node_id: int, backend):
        return backend

    def attach(self, runner) -> None:
        """Act on the freshly built nodes before they start."""

    def route(self, sim, env, base):
        return base


class NoAdversary(Strategy):
    pass


class Crash(Strategy):
    name = "crash"

    def setup(self, runner) -> None:
        for i in self.choose(runner, self.budget(runner.f)):
            self.corrupted.add(i)
            runner.sim.crash(i)


class _GarbageSigner:
    """Wraps a backend; signatures and coin shares it produces are junk."""

    def __init__(self, inner, node_id: int):
        self._inner = inner
        self._id = node_id
        self._ctr = 0

    def __getattr__(self, name):
        return getattr(self._inner, name)

    def _junk(self, size: int) -> bytes:
        self._ctr += 1
        seed = f"junk-{self._id}-{self._ctr}".encode()
        return hashlib.shake_256(seed).digest(size)

    def sign(self, signer, message):
        return self._junk(self._inner.sig_size)

    def coin_share(self, signer, tag_bytes):
        return self._junk(len(self._inner.coin_share(signer, tag_bytes)))


class BadSignature(Strategy):
    name = "bad-signature"

    def setup(self, runner) -> None:
        for i in self.choose(runner, self.budget(runner.f)):
            self.corrupted.add(i)
            runner.sim.corrupt(i)

    def backend_for(self, node_id: int, backend):
        return _GarbageSigner(backend, node_id) if node_id in self.corrupted else backend


class Flooding(Strategy):
    """Corrupted senders broadcast at ``multiplier`` times the honest pace:
    they always have full batches and their own chain's traffic is fast."""

    name = "flooding"

    def __init__(self, count=None, multiplier: float = 10.0):
        super().__init__(count)
        self.multiplier = multiplier

    def setup(self, runner) -> None:
        for i in self.choose(runner, self.budget(runner.f)):
            self.corrupted.add(i)
            runner.sim.corrupt(i)

    def attach(self, runner) -> None:
        for i in self.corrupted:
            runner.nodes[i].saturate = True

    def route(self, sim, env, base):
        fast = self.corrupted
        if env.session == ("qc",):
            if (env.kind == "PROP" and env.src in fast) or (env.kind == "VOTE" and env.dst in fast):
                return base / self.multiplier
        elif env.session == ("bc",):
            owner = env.src if env.kind == "VAL" else env.body[0]
            if owner in fast:
                return base / self.multiplier
        return base


class Fluctuation(Strategy):
    """Network-wide delay swings: every other ``period`` time units all
    delays are multiplied by ``factor``."""

    name = "fluctuation"

    def __init__(self, period: float = 10.0, factor: float = 4.0):
        super().__init__(0)
        self.period = period
        self.factor = factor

    def route(self, sim, env, base):
        if int(sim.now // self.period) % 2 == 1:
            return base * self.factor
        return base


class _SessionAttack:
    __slots__ = ("held", "shares", "held_shares", "k", "holding", "attacked")

    def __init__(self):
        self.held: list = []
        self.shares: dict = {}
        self.held_shares: list = []
        self.k = None
        self.holding = True
        self.attacked = False


class QualityAttack(Strategy):
    """The single-session quality attack applied to every agreement session
    of a run.

    A (f - 1 nodes) is corrupted up front and proposes censoring inputs. The
    agreement traffic of D (f honest nodes) is held until the adversary can
    compute the first election of that session; A's election shares are held
    until then too. If the elected node is in D and one corruption remains,
    that node is corrupted, its held agreement messages are retracted (or
    released first, without after-fact removal) and, where the protocol
    allows, it restarts the session with a censoring input.
    """

    name = "quality-attack"

    def __init__(self, after_fact_removal: bool = True):
        super().__init__(None)
        self.removal = after_fact_removal
        self.sessions: dict = {}
        self.A: set = set()
        self.D: set = set()
        self.spare = 0
        self.log: list = []

    def setup(self, runner) -> None:
        f = runner.f
        self.runner = runner
        order = list(range(runner.n))
        runner.adv_rng.shuffle(order)
        self.A = set(order[: max(f - 1, 0)])
        self.D = set(order[max(f - 1, 0): max(f - 1, 0) + f])
        self.H = set(order) - self.A - self.D
        self.spare = f - len(self.A)
        self.target = min(self.H) if self.H else None
        for a in sorted(self.A):
            self.corrupted.add(a)
            runner.sim.corrupt(a)

    def attach(self, runner) -> None:
        for a in self.A:
            runner.nodes[a].censor = self._censor

    def _censor(self, node, value):
        t = self.target
        if t is None:
            return value
        if node.protocol == "fin-ng":
            trimmed = list(value)
            trimmed[t] = node.ordered[t]
            quorum = node.rt.quorum
            if sum(1 for p, o in zip(trimmed, node.ordered) if p > o) >= quorum:
                return tuple(trimmed)
        return value

    def _state(self, session) -> _SessionAttack:
        st = self.sessions.get(session)
        if st is None:
            st = self.sessions[session] = _SessionAttack()
        return st

    def route(self, sim, env, base):
        session = env.session
        if not session or session[0] not in AGREEMENT_PREFIXES:
            return base
        st = self._state(session)
        kind = env.kind
        src = env.src
        if kind == "ELECT" and env.body[0] == 0:
            if src in self.A and st.k is None:
                st.held_shares.append(env)
                return None
            if src not in sim.corrupted and st.k is None:
                self._observe(sim, session, st, src, env.body[1])
        if st.holding and (src in self.D or env.dst in self.D):
            st.held.append(env)
            return None
        if st.attacked and kind in ("VAL", "ECHO", "READY", "FIN"):
            owner = src if kind == "VAL" else env.body[0]
            if owner == st.k:
                return RUSH * (1 + sim.rng.random())
        return base

    def _observe(self, sim, session, st, signer, share) -> None:
        st.shares[signer] = share
        if len(st.shares) + len(self.A) < self.runner.rt_quorum:
            return
        backend = self.runner.backend
        tag = coin_tag_bytes(session + ("elect", 0))
        shares = {a: backend.coin_share(a, tag) for a in self.A}
        shares.update(st.shares)
        st.k = coin_value(backend.coin_combine(tag, shares), self.runner.n)
        sim.call_at(sim.now, lambda: self._act(sim, session, st))

    def _act(self, sim, session, st) -> None:
        k = st.k
        self.log.append((session, k))
        if k in self.D and self.spare > 0 and k not in sim.corrupted:
            self.spare -= 1
            st.attacked = True
            sim.corrupt(k)
            self.corrupted.add(k)
            mine = [e for e in st.held if e.src == k]
            for e in mine:
                if self.removal:
                    sim.retract(e)
                else:
                    sim.release(e, RUSH / 10)
            st.held = [e for e in st.held if e.src != k]
            node = self.runner.nodes[k]
            node.censor = self._censor
            restart = getattr(node, "restart_agreement", None)
            if restart is not None and session[0] == "ag" and session[1] == node.epoch:
                mvba = node.mvbas.get(node.epoch)
                if mvba is not None and mvba.input is not None:
                    restart(self._censor(node, mvba.input))
                    sim.flush(k)
        elif k in self.A:
            st.attacked = True
        st.holding = False
        for e in st.held:
            sim.release(e, sim.delay_lo + (sim.delay_hi - sim.delay_lo) * sim.rng.random())
        st.held = []
        for e in st.held_shares:
            sim.release(e, sim.delay_lo)
        st.held_shares = []


def make_strategy(cfg) -> Strategy:
    kind = cfg.adversary
    if kind == "none":
        return NoAdversary(0)
    if kind == "crash":
        return Crash(cfg.adversary_count)
    if kind == "bad-signature":
        return BadSignature(cfg.adversary_count)
    if kind == "flooding":
        return Flooding(cfg.adversary_count, cfg.flood_multiplier)
    if kind == "fluctuation":
        return Fluctuation(cfg.fluctuation_period, cfg.fluctuation_factor)
    if kind == "quality-attack":
        return QualityAttack(cfg.after_fact_removal)
    raise ValueError(f"unknown adversary {kind!r}")
