"""Byzantine behaviours: black holes and colluding wormhole pairs.

Both follow the route discovery protocol (that is what gets them onto
routes) and then silently drop data packets and the acks riding back
toward the source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FORWARD = "forward"
DROP = "drop"
TUNNEL = "tunnel"

DATA_KINDS = frozenset({"data", "ack"})


@dataclass(frozen=True)
class AdversaryBehavior:
    model: str
    peer: int | None = None


def apply_adversary(behavior: AdversaryBehavior, node: int, kind: str) -> str:
    if kind in DATA_KINDS:
        return DROP
    if kind == "rreq" and behavior.model == "wormhole" and behavior.peer is not None:
        return TUNNEL
    return FORWARD


def place_adversaries(config, rng: np.random.Generator) -> dict[int, AdversaryBehavior]:
    """Pick adversaries uniformly among non-endpoints unless the config lists them."""
    if config.adversary_count == 0:
        return {}
    if config.adversaries is not None:
        chosen = list(config.adversaries)
    else:
        pool = np.array([v for v in range(config.node_count) if v not in (config.source, config.destination)])
        fixed = [x for p in config.wormhole_pairs for x in p]
        rest = [v for v in pool if v not in fixed]
        extra = rng.choice(rest, size=config.adversary_count - len(fixed), replace=False) if rest else []
        chosen = fixed + sorted(int(v) for v in extra)

    behaviors = {v: AdversaryBehavior(config.adversary_model) for v in chosen}
    if config.adversary_model == "wormhole":
        pairs = list(config.wormhole_pairs)
        if not pairs:
            ordered = list(chosen)
            pairs = [(ordered[i], ordered[i + 1]) for i in range(0, len(ordered) - 1, 2)]
        for a, b in pairs:
            behaviors[a] = AdversaryBehavior("wormhole", b)
            behaviors[b] = AdversaryBehavior("wormhole", a)
    return behaviors
