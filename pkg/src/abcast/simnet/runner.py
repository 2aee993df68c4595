"""Run one scenario end to end.

Builds the backend, nodes, adversary and client load for a ScenarioConfig,
drives the simulator until every honest node has committed ``epochs``
blocks and every deliverable transaction, and checks the common-prefix
property on every block as it is emitted.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..core.runtime import NodeRuntime
from ..crypto.backends import BLSBackend, MockBackend, make_backend
from ..crypto.keys import read_key_file
from ..protocols.base import NodeOptions, PrefixChecker
from ..protocols.finng import FinNgNode
from ..protocols.jumbo import JumboNode
from .adversary import make_strategy
from .config import ScenarioConfig
from .load import ClientLoad, SaturatingSource
from .metrics import Metrics
from .sim import Simulator


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: Metrics
    ledgers: dict  # node -> list of LedgerBlock, honest nodes only
    trace_digest: str
    honest: frozenset
    corrupted: frozenset
    live: bool
    outstanding: int
    stats: dict = field(default_factory=dict)

    @property
    def rows(self) -> list:
        return self.metrics.committed_rows()

    def csv(self) -> str:
        return self.metrics.to_csv()


def node_options(cfg: ScenarioConfig) -> NodeOptions:
    opts = NodeOptions(
        pull_mode=cfg.pull_mode,
        eager_pull=cfg.eager_pull,
        fairness=cfg.fairness,
        strict_validation=cfg.strict_validation,
    )
    if cfg.protocol == "fin-baseline":
        opts.abandon = False
    elif cfg.protocol == "jumbo-multicast-baseline":
        opts.dispersal = False
        opts.aggregate_vectors = False
    return opts


def backend_from_key_dir(directory, n: int):
    """One simulation hosts every node, so it needs every node's secret."""
    files = sorted(Path(directory).glob("node-*.key"))
    keys = [read_key_file(p) for p in files]
    if len(keys) != n or sorted(k.node for k in keys) != list(range(n)) or any(k.n != n for k in keys):
        raise ValueError(f"{directory} does not hold key files for nodes 0..{n - 1}")
    first = keys[0]
    if first.scheme.startswith("bls-real"):
        return BLSBackend(first.public_keys, {k.node: k.secret_key for k in keys}, first.coin_vks, {k.node: k.coin_secret for k in keys})
    return MockBackend(n, first.seed, first.scheme, list(first.public_keys), list(first.coin_vks))


class ScenarioRunner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.params = cfg.params()
        self.n = cfg.n
        self.f = self.params.f
        self.rt_quorum = self.params.quorum
        if cfg.key_dir is not None:
            self.backend = backend_from_key_dir(cfg.key_dir, cfg.n)
        else:
            self.backend = make_backend(cfg.backend, cfg.n, cfg.seed)
        self.adv_rng = random.Random(f"{cfg.seed}-adversary")
        self.metrics = Metrics(cfg.n)
        self.strategy = make_strategy(cfg)
        self.sim = Simulator(
            cfg.n, cfg.seed, (cfg.delay_lo, cfg.delay_hi), cfg.reorder_window,
            adversary=self.strategy, metrics=self.metrics, trace=cfg.trace, delay_model=cfg.delay_model,
        )
        self.checker = PrefixChecker()
        self.strategy.setup(self)
        static_bad = frozenset(self.strategy.corrupted)
        opts = node_options(cfg)
        cls = FinNgNode if cfg.protocol.startswith("fin") else JumboNode
        source = SaturatingSource(cfg.tx_size, b"S")
        self.nodes = []
        for i in range(cfg.n):
            rt = NodeRuntime(i, self.params, self.strategy.backend_for(i, self.backend))
            node = cls(rt, opts, random.Random(f"{cfg.seed}-node-{i}"), static_bad, self._on_block)
            node.tx_factory = source
            node.saturate = cfg.honest_saturate
            self.nodes.append(node)
            self.sim.add_node(node)
        self.strategy.attach(self)
        self.load = ClientLoad(self.sim, self.nodes, cfg.rate, cfg.client_kappa, cfg.tx_size, self._injecting)
        self._scan = 0
        self._order: list = []

    # live views

    def honest(self) -> list:
        bad = self.sim.corrupted
        return [nd for nd in self.nodes if nd.me not in bad]

    def _on_block(self, node, block) -> None:
        if node.me in self.sim.corrupted:
            return
        self.checker.check(node.me, block)
        honest = frozenset(nd.me for nd in self.honest())
        self.metrics.on_block(node.me, block, self.sim.now, honest, self._round_unit())

    def _round_unit(self) -> float:
        return max(self.sim.max_honest_delay, self.cfg.delay_hi)

    def _injecting(self) -> bool:
        return min(nd.epoch for nd in self.honest()) <= self.cfg.injection_epochs

    def _eligible(self, payload, honest_ids) -> bool:
        return any(d in honest_ids for d in self.load.routes[payload])

    def _all_committed(self) -> bool:
        """Every transaction with an honest recipient is in every honest ledger.
        Scans forward from where the last call stopped."""
        order = self._order
        if len(order) < len(self.load.routes):
            order.extend(list(self.load.routes)[len(order):])
        honest = self.honest()
        ids = {nd.me for nd in honest}
        while self._scan < len(order):
            p = order[self._scan]
            if self._eligible(p, ids) and not all(p in nd.committed for nd in honest):
                return False
            self._scan += 1
        return True

    def outstanding(self) -> int:
        honest = self.honest()
        ids = {nd.me for nd in honest}
        return sum(
            1 for p in self.load.routes
            if self._eligible(p, ids) and not all(p in nd.committed for nd in honest)
        )

    def _done(self) -> bool:
        honest = self.honest()
        if min(nd.epoch for nd in honest) > self.cfg.epoch_cap:
            return True
        if min(len(nd.ledger) for nd in honest) < self.cfg.epochs or self._injecting():
            return False
        return self._all_committed()

    # driving

    def run(self) -> RunResult:
        sim = self.sim
        for nd in self.nodes:
            nd.start()
            sim.flush(nd.me)
        self.load.start()
        sim.run(stop=self._done, check_every=128)
        honest = self.honest()
        left = self.outstanding()
        short = min(len(nd.ledger) for nd in honest) < self.cfg.epochs
        return RunResult(
            config=self.cfg,
            metrics=self.metrics,
            ledgers={nd.me: list(nd.ledger) for nd in honest},
            trace_digest=sim.trace_digest(),
            honest=frozenset(nd.me for nd in honest),
            corrupted=frozenset(sim.corrupted),
            live=left == 0 and not short,
            outstanding=left,
            stats=self._stats(),
        )

    def _stats(self) -> dict:
        sim = self.sim
        honest = self.honest()
        ref = honest[0]
        rounds = []
        attempts = []
        if isinstance(ref, FinNgNode):
            for e in sorted(ref.mvbas):
                m = ref.mvbas[e]
                if m.has_decided:
                    rounds.append(m.decided_round + 1)
        else:
            for e in sorted(ref.agreements):
                a = ref.agreements[e]
                if not a.has_decided:
                    continue
                if hasattr(a, "attempts"):
                    attempts.append(a.rounds)
                    inner = a.attempts[a.rounds - 1].inner
                    if inner.has_decided:
                        rounds.append(inner.decided_round + 1)
                else:
                    rounds.append(a.decided_round + 1)
        verifications = sum(nd.rt.verify_stats.individual_verifications for nd in honest)
        batch_failures = sum(nd.rt.verify_stats.batch_failures for nd in honest)
        stats = {
            "events": sim.events,
            "sim_time": sim.now,
            "max_honest_delay": sim.max_honest_delay,
            "injected": len(self.load.routes),
            "agreement_rounds": rounds,
            "dispersal_attempts": attempts,
            "individual_verifications": verifications,
            "batch_failures": batch_failures,
            "blocklisted": sorted(set().union(*(nd.rt.blocklist.banned for nd in honest))),
            "by_session": {k: list(v) for k, v in sorted(self.metrics.by_session.items())},
        }
        if isinstance(ref, JumboNode):
            stats["gate_holds"] = sum(nd.gate_holds_total for nd in honest)
            stats["held_at_end"] = sum(len(nd.held) for nd in honest)
        return stats


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Run ``cfg``; if ``out_dir`` is given also write metrics.csv, one
    ledger-<node>.log per honest node and trace.digest there."""
    result = ScenarioRunner(cfg).run()
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def write_outputs(result: RunResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(result.csv())
    for node, ledger in sorted(result.ledgers.items()):
        with open(out / f"ledger-{node}.log", "w") as fh:
            for block in ledger:
                fh.write(json.dumps(block.record(), sort_keys=True) + "\n")
    (out / "trace.digest").write_text(result.trace_digest + "\n")
