"""The quality attack against a single MVBA session, and the harness that
measures how often the adversary authors the decided value.

Attack outline:
  * statically corrupt a set A of f - 1 nodes; they follow the protocol
    but input adversarial values and never vote 0 in the first binary
    agreement round of an attacked election;
  * pick f honest nodes D and hold every message to or from them;
  * withhold A's election shares until the adversary can compute the
    elected index k from n - f shares (its own included);
  * if k is in D and budget remains: corrupt P_k, retract its undelivered
    messages, restart it with an adversarial input and rush instance k;
  * then release everything.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..agreement.mvba import FinMvba
from ..core.params import ProtocolParams
from ..core.runtime import NodeRuntime
from ..crypto.backends import MockBackend
from ..crypto.coin import coin_tag_bytes, coin_value
from .sim import Simulator

RUSH = 0.01


class _Node:
    __slots__ = ("rt", "mvba")

    def __init__(self, rt):
        self.rt = rt
        self.mvba = None


def _instance_of(env) -> int | None:
    kind = env.kind
    if kind == "VAL":
        return env.src
    if kind in ("ECHO", "READY", "FIN"):
        body = env.body
        if type(body) is tuple and body:
            return body[0]
    return None


class QualityAttacker:
    """Network-level half of the attack for one MVBA session.

    ``substitute(k, removal)`` is supplied by the harness: it restarts node
    k's session with an adversarial input.
    """

    def __init__(self, n: int, f: int, rng: random.Random, backend, session: tuple, substitute, after_fact_removal: bool = True):
        self.n = n
        self.f = f
        self.quorum = n - f
        self.backend = backend
        self.session = session
        self.substitute = substitute
        self.removal = after_fact_removal
        nodes = list(range(n))
        rng.shuffle(nodes)
        self.A = set(nodes[: f - 1]) if f >= 1 else set()
        self.D = set(nodes[f - 1: 2 * f - 1]) if f >= 1 else set()
        self.H = set(nodes) - self.A - self.D
        self.budget = f - len(self.A)
        self.holding_d = True
        self.held_d: list = []
        self.held_shares: dict = {}  # round -> [envelope]
        self.honest_shares: dict = {}  # round -> {signer: share}
        self.known_k: dict = {}
        self.attacked_k = None
        self.corrupted_k = None
        self.events: list = []

    def route(self, sim, env, base):
        kind = env.kind
        src = env.src
        if kind == "ELECT":
            r, share = env.body
            if src in self.A:
                if r not in self.known_k:
                    self.held_shares.setdefault(r, []).append(env)
                    return None
            elif src not in sim.corrupted:
                self._observe_share(sim, r, src, share)
        if kind == "BVAL" and src in self.A and self.attacked_k is not None:
            r, rr, bit = env.body
            if rr == 1 and bit == 0 and self.known_k.get(r) == self.attacked_k:
                sim.retract(env)
                return None
        if self.holding_d and (src in self.D or env.dst in self.D):
            self.held_d.append(env)
            return None
        if self.attacked_k is not None and _instance_of(env) == self.attacked_k:
            return RUSH * (1 + sim.rng.random())
        return base

    def _observe_share(self, sim, r, signer, share) -> None:
        if r in self.known_k:
            return
        shares = self.honest_shares.setdefault(r, {})
        shares[signer] = share
        if len(shares) + len(self.A) < self.quorum:
            return
        tag = coin_tag_bytes(self.session + ("elect", r))
        own = {a: self.backend.coin_share(a, tag) for a in self.A}
        own.update(shares)
        k = coin_value(self.backend.coin_combine(tag, own), self.n)
        self.known_k[r] = k
        sim.call_at(sim.now, lambda: self._act(sim, r, k))

    def _act(self, sim, r, k) -> None:
        if r == 0:
            self.events.append(("elected", k))
            if k in self.D and self.budget > 0:
                self.budget -= 1
                self.attacked_k = k
                self.corrupted_k = k
                sim.corrupt(k)
                mine = [e for e in self.held_d if e.src == k]
                if self.removal:
                    for e in mine:
                        sim.retract(e)
                else:
                    # without retraction the old messages stay ahead of the new ones
                    for e in mine:
                        sim.release(e, RUSH / 10)
                self.held_d = [e for e in self.held_d if e.src != k]
                self.substitute(k)
                self.events.append(("corrupt", k))
            elif k in self.A:
                self.attacked_k = k
            self.holding_d = False
            for e in self.held_d:
                delay = sim.delay_lo + (sim.delay_hi - sim.delay_lo) * sim.rng.random()
                if self.attacked_k is not None and _instance_of(e) == self.attacked_k:
                    delay = RUSH
                sim.release(e, delay)
            self.held_d = []
        for e in self.held_shares.pop(r, []):
            sim.release(e, sim.delay_lo)


@dataclass
class QualityOutcome:
    adversary_won: bool
    elected_first: int
    first_in_D: bool
    decided_round: int
    agreement: bool | None


def run_attacked_session(n: int, seed: int, abandon: bool = True, after_fact_removal: bool = True, to_completion: bool = False) -> QualityOutcome:
    params = ProtocolParams(n)
    f = params.f
    rng = random.Random(seed)
    backend = MockBackend(n, seed)
    session = ("mvba", seed)
    nodes = [_Node(NodeRuntime(i, params, backend)) for i in range(n)]

    def substitute(k):
        node = nodes[k]
        node.mvba = FinMvba(node.rt, session, None, abandon)
        node.mvba.start(("adv", k))
        sim.flush(k)

    attacker = QualityAttacker(n, f, rng, backend, session, substitute, after_fact_removal)
    sim = Simulator(n, seed, adversary=attacker, trace=False, reorder_window=1e9)
    for node in nodes:
        sim.add_node(node)
        node.mvba = FinMvba(node.rt, session, None, abandon)
    for a in attacker.A:
        sim.corrupt(a)
    for i, node in enumerate(nodes):
        node.mvba.start(("adv", i) if i in attacker.A else ("h", i))
        sim.flush(i)

    def honest_decided():
        return any(nodes[i].mvba.has_decided for i in range(n) if i not in sim.corrupted)

    def all_decided():
        return all(nodes[i].mvba.has_decided for i in range(n) if i not in sim.corrupted)

    sim.run(stop=all_decided if to_completion else honest_decided, check_every=1)
    honest = [nodes[i].mvba for i in range(n) if i not in sim.corrupted]
    deciders = [m for m in honest if m.has_decided]
    if not deciders:
        raise RuntimeError(f"no honest decision (n={n}, seed={seed})")
    value = deciders[0].decided
    agreement = None
    if to_completion:
        agreement = all(m.has_decided and m.decided == value for m in honest)
    first_k = attacker.known_k.get(0, -1)
    return QualityOutcome(
        adversary_won=value[0] == "adv",
        elected_first=first_k,
        first_in_D=first_k in attacker.D,
        decided_round=deciders[0].decided_round,
        agreement=agreement,
    )


def expected_success(n: int, abandon: bool, after_fact_removal: bool = True) -> float:
    """Closed-form success rate of this attack at finite n.

    With |A| = f - 1, |D| = f and |H| = f + 2, the first election picks A,
    D or H with probabilities proportional to their sizes. Without abandon
    a D pick is also a win (given retraction). With abandon a D pick only
    forces another election, in which D instances can no longer finish.
    """
    f = (n - 1) // 3
    a, d, h = f - 1, f, n - (2 * f - 1)
    if not abandon:
        return (a + (d if after_fact_removal else 0)) / n
    return a / (a + h)


@dataclass
class QualitySummary:
    n: int
    runs: int
    abandon: bool
    after_fact_removal: bool
    wins: int
    mean_rounds: float

    @property
    def rate(self) -> float:
        return self.wins / self.runs if self.runs else 0.0


def quality_experiment(n: int, runs: int, abandon: bool, after_fact_removal: bool = True, seed0: int = 0) -> QualitySummary:
    wins = 0
    rounds = 0
    for s in range(runs):
        out = run_attacked_session(n, seed0 + s, abandon, after_fact_removal)
        wins += out.adversary_won
        rounds += out.decided_round + 1
    return QualitySummary(n, runs, abandon, after_fact_removal, wins, rounds / max(runs, 1))
