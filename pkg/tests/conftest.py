from collections import deque

import pytest

from smtmanet.crypto import SimulatedCrypto
from smtmanet.discovery import DiscoveryAgent
from smtmanet.sim import ScenarioConfig


def flood(adjacency, source, destination, crypto=None, reply_all=True, agents=None, tamper=None):
    """Run one discovery round breadth-first over a static graph, without the simulator.

    ``adjacency`` maps node -> iterable of neighbours. ``tamper(node, req)`` may
    rewrite a request a node is about to rebroadcast. Returns (agents, paths accepted by the source).
    """
    crypto = crypto or SimulatedCrypto(7)
    if agents is None:
        agents = {v: DiscoveryAgent(v, crypto, reply_all=reply_all) for v in adjacency}
    req = agents[source].initiate_request(destination)
    queue = deque((source, nb, req) for nb in sorted(adjacency[source]))
    accepted = []
    while queue:
        frm, node, req = queue.popleft()
        agent = agents[node]
        if node == destination:
            resp = agent.initiate_response(req)
            if resp is not None:
                path = agents[source].accept_response(resp)
                if path is not None:
                    accepted.append(path)
            continue
        if node == source:
            continue
        grown = agent.propagate_request(req)
        if grown is None:
            continue
        if tamper is not None:
            grown = tamper(node, grown)
        queue.extend((node, nb, grown) for nb in sorted(adjacency[node]))
    return agents, accepted


def undirected(edges):
    adj = {}
    for u, v in edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    return adj


# 10 static nodes. Honest chain 0-2-3-4-5-1 is 5 hops with 80 m spacing
# (no shortcuts at 150 m range). Wormhole endpoints 6 and 7 each neighbour only
# the source or the destination and tunnel to each other, so 0-6-7-1 looks
# like 3 hops. Nodes 8 and 9 are isolated bystanders.
WORMHOLE_POSITIONS = (
    (50.0, 250.0), (450.0, 250.0),
    (130.0, 250.0), (210.0, 250.0), (290.0, 250.0), (370.0, 250.0),
    (0.0, 150.0), (500.0, 150.0),
    (250.0, 480.0), (250.0, 20.0),
)


def wormhole_config(protocol, **kw):
    base = dict(node_count=10, positions=WORMHOLE_POSITIONS, speed_min=0.0, speed_max=0.0,
                adversary_count=2, adversary_model="wormhole", adversaries=(6, 7), wormhole_pairs=((6, 7),),
                queue_loss_prob=0.0, duration=60.0, protocol=protocol, seed=3)
    base.update(kw)
    return ScenarioConfig(**base)


# Diamond: 0 - {2 | 3} - 1, node 2 is a black hole.
DIAMOND_POSITIONS = ((0.0, 100.0), (200.0, 100.0), (100.0, 0.0), (100.0, 200.0))


def diamond_config(protocol, **kw):
    base = dict(node_count=4, width=200.0, height=200.0, reception_range=150.0, positions=DIAMOND_POSITIONS,
                speed_min=0.0, speed_max=0.0, adversary_count=1, adversaries=(2,), adversary_model="black-hole",
                queue_loss_prob=0.0, duration=30.0, protocol=protocol, seed=11)
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture
def crypto():
    return SimulatedCrypto(42)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
