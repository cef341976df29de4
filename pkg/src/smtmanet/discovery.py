"""Signed on-demand route discovery, one agent per node.

The agent is a pure state machine: it never touches the network itself.
The simulator hands it packets and broadcasts whatever it returns.

Flow: the source signs a request; each intermediate node checks its seen
list, verifies the source and per-hop signatures, appends itself and signs
the result; the destination signs a response for every distinct copy it
gets and the response travels back along the accumulated path.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field, replace

from .crypto import CryptoProvider

WeightList = tuple[tuple[tuple[int, int], float], ...]


def _header_bytes(source: int, destination: int, seq: int, weights: WeightList) -> bytes:
    parts = [struct.pack(">IIQI", source, destination, seq, len(weights))]
    for (u, v), w in weights:
        parts.append(struct.pack(">IId", u, v, w))
    return b"".join(parts)


def _path_bytes(path: tuple[int, ...]) -> bytes:
    return struct.pack(f">I{len(path)}I", len(path), *path)


@dataclass(frozen=True)
class RouteRequest:
    source: int
    destination: int
    sequence_number: int
    weight_list: WeightList = ()
    accumulated_path: tuple[int, ...] = ()
    source_signature: bytes = b""
    hop_signatures: tuple[bytes, ...] = ()

    def source_body(self) -> bytes:
        return _header_bytes(self.source, self.destination, self.sequence_number, self.weight_list)

    def hop_body(self, hops: int) -> bytes:
        """Bytes covered by the signature of the ``hops``-th appended node (1-based)."""
        return self.source_body() + self.source_signature + _path_bytes(self.accumulated_path[:hops])

    @property
    def key(self) -> tuple[int, int]:
        return (self.source, self.sequence_number)


@dataclass(frozen=True)
class RouteResponse:
    request: RouteRequest
    discovered_path: tuple[int, ...]
    request_received_at: float = 0.0
    response_sent_at: float = 0.0
    destination_signature: bytes = b""

    @property
    def source(self) -> int:
        return self.request.source

    @property
    def destination(self) -> int:
        return self.request.destination

    @property
    def sequence_number(self) -> int:
        return self.request.sequence_number

    def body(self) -> bytes:
        return (self.request.source_body() + _path_bytes(self.discovered_path)
                + struct.pack(">dd", self.request_received_at, self.response_sent_at))


def verify_request(req: RouteRequest, crypto: CryptoProvider) -> bool:
    if not crypto.verify(req.source, req.source_body(), req.source_signature):
        return False
    if len(req.hop_signatures) != len(req.accumulated_path):
        return False
    for i, (node, sig) in enumerate(zip(req.accumulated_path, req.hop_signatures)):
        if not crypto.verify(node, req.hop_body(i + 1), sig):
            return False
    return True


def is_loop_free(path) -> bool:
    return len(set(path)) == len(path)


ProbeKeySet = dict[int, bytes]


@dataclass
class DiscoveryAgent:
    """Route discovery state held by one node."""

    node: int
    crypto: CryptoProvider
    reply_all: bool = True
    sequence_number: int = 0
    seen: set = field(default_factory=set)
    answered: set = field(default_factory=set)
    pending: dict = field(default_factory=dict)
    routes: dict = field(default_factory=dict)
    stats: Counter = field(default_factory=Counter)

    def initiate_request(self, destination: int, weight_list: WeightList = ()) -> RouteRequest:
        self.sequence_number += 1
        req = RouteRequest(self.node, destination, self.sequence_number, tuple(weight_list))
        req = replace(req, source_signature=self.crypto.sign(self.node, req.source_body()))
        self.seen.add(req.key)
        self.pending[destination] = self.sequence_number
        self.stats["requests_initiated"] += 1
        return req

    def propagate_request(self, req: RouteRequest) -> RouteRequest | None:
        """Return the extended request to rebroadcast, or ``None`` to drop it."""
        if req.key in self.seen:
            self.stats["duplicates"] += 1
            return None
        if not verify_request(req, self.crypto):
            self.stats["forged"] += 1
            return None
        if self.node in req.accumulated_path or self.node in (req.source, req.destination):
            self.stats["loops"] += 1
            return None
        self.seen.add(req.key)
        grown = replace(req, accumulated_path=req.accumulated_path + (self.node,))
        sig = self.crypto.sign(self.node, grown.hop_body(len(grown.accumulated_path)))
        self.stats["propagated"] += 1
        return replace(grown, hop_signatures=req.hop_signatures + (sig,))

    def initiate_response(self, req: RouteRequest, received_at: float = 0.0,
                          sent_at: float | None = None) -> RouteResponse | None:
        if req.destination != self.node:
            return None
        if not verify_request(req, self.crypto):
            self.stats["forged"] += 1
            return None
        path = (req.source,) + req.accumulated_path + (self.node,)
        if not is_loop_free(path):
            self.stats["loops"] += 1
            return None
        token = (req.source, req.sequence_number) if not self.reply_all else (req.source, req.sequence_number, path)
        if token in self.answered:
            self.stats["duplicates"] += 1
            return None
        self.answered.add(token)
        resp = RouteResponse(req, path, received_at, received_at if sent_at is None else sent_at)
        self.stats["responses"] += 1
        return replace(resp, destination_signature=self.crypto.sign(self.node, resp.body()))

    def accept_response(self, resp: RouteResponse) -> tuple[int, ...] | None:
        """Verify a response and store its path; returns the path if it was new."""
        if resp.source != self.node or self.pending.get(resp.destination) != resp.sequence_number:
            self.stats["stale"] += 1
            return None
        path = resp.discovered_path
        expected = (resp.source,) + resp.request.accumulated_path + (resp.destination,)
        if (path != expected or not is_loop_free(path)
                or not verify_request(resp.request, self.crypto)
                or not self.crypto.verify(resp.destination, resp.body(), resp.destination_signature)):
            self.stats["forged"] += 1
            return None
        known = self.routes.setdefault(resp.destination, [])
        if path in known:
            return None
        known.append(path)
        self.stats["routes_accepted"] += 1
        return path

    def establish_probe_keys(self, route) -> ProbeKeySet:
        """Shared keys with every node after the source on ``route``."""
        return {node: self.crypto.shared_key(self.node, node) for node in route[1:]}
