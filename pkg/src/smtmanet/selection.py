"""Route rating, node-disjoint active path set selection, dispersion sizing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .dispersal import DispersalConfig
from .metrics import LinkWeightTable


class NoRouteError(LookupError):
    """No eligible candidate route; the caller should rediscover."""


@dataclass(frozen=True)
class Route:
    nodes: tuple[int, ...]
    rating: float = 0.0
    trust: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(self.nodes) < 2:
            raise ValueError("a route needs a source and a destination")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError(f"route {self.nodes} has a loop")

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    @property
    def intermediates(self) -> tuple[int, ...]:
        return self.nodes[1:-1]

    @property
    def links(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))


@dataclass
class ActivePathSet:
    routes: list[Route] = field(default_factory=list)
    k: int = 4

    def __len__(self) -> int:
        return len(self.routes)

    def __iter__(self):
        return iter(self.routes)

    def is_disjoint(self) -> bool:
        used: set[int] = set()
        for r in self.routes:
            mids = set(r.intermediates)
            if mids & used:
                return False
            used |= mids
        return True


def rate_route(route, weights: LinkWeightTable) -> float:
    """Mean intermediate-node rating divided by mean link weight.

    A direct link has no intermediate that could misbehave, so its node
    term is 1.
    """
    nodes = route.nodes if isinstance(route, Route) else tuple(route)
    mids = nodes[1:-1]
    node_term = sum(weights.rating(n) for n in mids) / len(mids) if mids else 1.0
    link_weights = [weights.weight(u, v) for u, v in zip(nodes[:-1], nodes[1:])]
    return node_term / (sum(link_weights) / len(link_weights))


def rank_key(route: Route):
    return (-route.rating, route.length, route.nodes)


def _greedy(candidates: list[Route], k: int) -> list[Route]:
    taken: list[Route] = []
    used: set[int] = set()
    for route in sorted(candidates, key=rank_key):
        if len(taken) >= k:
            break
        mids = set(route.intermediates)
        if mids & used:
            continue
        taken.append(route)
        used |= mids
    return taken


def select_aps(candidates, k: int = 4, *, trust_threshold: float = 0.2,
               weights: LinkWeightTable | None = None) -> ActivePathSet:
    """Greedy node-disjoint selection by (rating desc, length asc, node ids asc).

    With a weight table, routes crossing a penalized link are set aside
    and only used when no clean route is eligible at all.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    routes = [c if isinstance(c, Route) else Route(tuple(c)) for c in candidates]
    if weights is not None:
        routes = [replace(r, rating=rate_route(r, weights)) for r in routes]
    eligible = [r for r in routes if r.trust >= trust_threshold]
    if weights is not None:
        clean = [r for r in eligible if not any(weights.is_penalized(u, v) for u, v in r.links)]
        if clean:
            eligible = clean
    taken = _greedy(eligible, k)
    if not taken:
        raise NoRouteError("no eligible candidate route")
    return ActivePathSet(taken, k)


def choose_dispersion(aps, trust_cut: float = 0.5) -> DispersalConfig:
    """One share per route; tolerate as many losses as there are low-trust routes, up to half."""
    routes = list(aps)
    n = len(routes)
    if n < 1:
        raise ValueError("active path set is empty")
    if n == 1:
        return DispersalConfig(1, 1)
    expected_failures = sum(1 for r in routes if r.trust < trust_cut)
    m = max(1, n - expected_failures, math.ceil(n / 2))
    return DispersalConfig(n, m)
