"""Small shared fixtures: bare simulated nodes that host protocol objects."""

from __future__ import annotations

from abcast.core.params import ProtocolParams
from abcast.core.runtime import NodeRuntime
from abcast.crypto.backends import MockBackend
from abcast.simnet.sim import Simulator

# acceptance criterion -> report line, printed in the terminal summary
ACCEPTANCE: dict = {}


class Host:
    """A simulator node that only routes messages to registered sessions."""

    def __init__(self, rt):
        self.rt = rt


def network(n, seed=0, adversary=None, scheme="mock-deterministic", **params):
    backend = MockBackend(n, seed, scheme)
    pp = ProtocolParams(n, **params)
    sim = Simulator(n, seed, adversary=adversary, trace=False)
    hosts = []
    for i in range(n):
        h = Host(NodeRuntime(i, pp, backend))
        sim.add_node(h)
        hosts.append(h)
    return sim, hosts, backend


class Scripted:
    """Adversary hook built from a function (sim, env, base) -> delay | None."""

    def __init__(self, fn):
        self.fn = fn

    def route(self, sim, env, base):
        return self.fn(sim, env, base)


def stuck_holds(runner) -> list:
    """Votes honest nodes still hold, at the end of a run, on honest chains
    whose batch carries a client transaction nobody committed."""
    bad = runner.sim.corrupted
    out = []
    for nd in runner.honest():
        for j, s in getattr(nd, "held", {}).items():
            if j in bad:
                continue
            batch = nd.chains[j].batches.get(s)
            if batch is None:
                continue
            pending = [t for t in batch.txs if t.payload in runner.load.routes and t.payload not in nd.committed]
            if pending:
                out.append((nd.me, j, s, len(pending)))
    return out
