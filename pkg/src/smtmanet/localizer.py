"""Source-side Byzantine fault localization by adaptive binary search.

Every data packet on a route names a list of probe nodes (route indices);
each probe and the destination return an authenticated ack. The probes
split the route into intervals. When the recent loss rate of an interval
crosses the threshold a fault is registered there and the interval is
split at its midpoint, until the faulty interval is a single link.
"""

from __future__ import annotations

import struct
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable

from .crypto import CryptoProvider

DELIVERED = "delivered"
LOST = "lost"
UNKNOWN = "unknown"

_ACK = struct.Struct(">QI8s")
ACK_SIZE = _ACK.size


class ProbeKeyError(RuntimeError):
    """A probe node has no shared key; discovery did not finish key setup."""


@dataclass(frozen=True)
class ProbeList:
    route: tuple[int, ...]
    positions: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "route", tuple(self.route))
        n = self.links
        if n < 1:
            raise ValueError("a route needs at least one link")
        positions = tuple(sorted(set(self.positions) | {n}))
        if positions[0] < 1 or positions[-1] > n:
            raise ValueError(f"probe positions must lie in [1, {n}]")
        object.__setattr__(self, "positions", positions)

    @property
    def links(self) -> int:
        return len(self.route) - 1

    @property
    def intervals(self) -> list[tuple[int, int]]:
        ends = (0,) + self.positions
        return list(zip(ends[:-1], ends[1:]))

    @property
    def nodes(self) -> list[int]:
        return [self.route[p] for p in self.positions]

    def header(self) -> bytes:
        """count(1) followed by one byte per probe index, ascending."""
        return bytes([len(self.positions), *self.positions])

    @classmethod
    def from_header(cls, route, header: bytes) -> "ProbeList":
        count = header[0]
        if len(header) != count + 1:
            raise ValueError("probe header length mismatch")
        return cls(tuple(route), tuple(header[1:]))


@dataclass(frozen=True)
class FaultVerdict:
    faulty_link: tuple[int, int]
    evidence: int
    position: int = 0


@dataclass
class LossWindow:
    size: int = 10
    loss_threshold: float = 0.2
    outcomes: deque = field(default_factory=deque)

    def __post_init__(self):
        self.outcomes = deque(self.outcomes, maxlen=self.size)

    def push(self, lost: bool) -> None:
        self.outcomes.append(bool(lost))

    @property
    def losses(self) -> int:
        return sum(self.outcomes)

    def __len__(self) -> int:
        return len(self.outcomes)

    def reset(self) -> None:
        self.outcomes.clear()


def check_threshold(window: LossWindow, w_min: int = 5) -> bool:
    """True (and the window is cleared) when a fault must be registered."""
    if len(window) < w_min:
        return False
    if window.losses / window.size > window.loss_threshold:
        window.reset()
        return True
    return False


def subdivide(probes: ProbeList, interval: tuple[int, int]) -> ProbeList | FaultVerdict:
    a, b = interval
    if interval not in probes.intervals:
        raise ValueError(f"{interval} is not a current interval")
    if b - a == 1:
        return FaultVerdict((probes.route[a], probes.route[b]), evidence=1, position=a)
    return ProbeList(probes.route, probes.positions + ((a + b) // 2,))


def attach_probes(probes: ProbeList, keys: dict) -> bytes:
    missing = [node for node in probes.nodes if node not in keys]
    if missing:
        raise ProbeKeyError(f"no shared key for probe nodes {missing}")
    return probes.header()


def ack_tag(crypto: CryptoProvider, key: bytes, packet_id: int, node: int) -> bytes:
    return crypto.mac(key, struct.pack(">QI", packet_id, node))


def make_ack(crypto: CryptoProvider, key: bytes, packet_id: int, node: int) -> bytes:
    """Ack wire form: packet-id(8) | probe-node-id(4) | tag(8)."""
    return _ACK.pack(packet_id, node, ack_tag(crypto, key, packet_id, node))


def parse_ack(data: bytes) -> tuple[int, int, bytes]:
    return _ACK.unpack(data)


def classify(probes: ProbeList, acked_positions: Iterable[int]) -> dict[tuple[int, int], str]:
    """Per-interval outcome given the probe positions that acked.

    Everything up to the furthest acking probe got through; the interval
    right after it is charged with the loss and later ones are unknown.
    """
    reach = max(acked_positions, default=0)
    out = {}
    for a, b in probes.intervals:
        if b <= reach:
            out[(a, b)] = DELIVERED
        elif a == reach:
            out[(a, b)] = LOST
        else:
            out[(a, b)] = UNKNOWN
    return out


def record_ack(probes: ProbeList, packet_id: int, acks: Iterable[bytes], keys: dict,
               crypto: CryptoProvider, stats: Counter | None = None) -> dict[tuple[int, int], str]:
    """Verify raw acks for one packet and turn them into interval outcomes."""
    stats = stats if stats is not None else Counter()
    index = {probes.route[p]: p for p in probes.positions}
    acked = set()
    for raw in acks:
        try:
            pid, node, tag = parse_ack(raw)
        except struct.error:
            stats["malformed_acks"] += 1
            continue
        if pid != packet_id:
            stats["foreign_acks"] += 1
            continue
        if node not in index:
            stats["unlisted_acks"] += 1
            continue
        if tag != ack_tag(crypto, keys[node], pid, node):
            stats["forged_acks"] += 1
            continue
        acked.add(index[node])
    return classify(probes, acked)


class FaultLocalizer:
    """Loss tracking and binary search for one (source, route) pair."""

    def __init__(self, route, keys: dict, crypto: CryptoProvider, *, window: int = 10,
                 loss_threshold: float = 0.2, w_min: int = 5):
        self.route = tuple(route)
        self.keys = keys
        self.crypto = crypto
        self.window = window
        self.loss_threshold = loss_threshold
        self.w_min = w_min
        self.stats: Counter = Counter()
        self.verdict: FaultVerdict | None = None
        self.reset()

    def reset(self) -> None:
        self.probes = ProbeList(self.route)
        self.windows = {iv: self._new_window() for iv in self.probes.intervals}
        self.registrations = 0
        self.epoch = 0
        self.verdict = None

    def _new_window(self) -> LossWindow:
        return LossWindow(self.window, self.loss_threshold)

    def header(self) -> bytes:
        return attach_probes(self.probes, self.keys)

    def on_acks(self, packet_id: int, acks: Iterable[bytes], epoch: int | None = None) -> FaultVerdict | None:
        if self.verdict is not None:
            return None
        if epoch is not None and epoch != self.epoch:
            self.stats["stale_outcomes"] += 1
            return None
        outcomes = record_ack(self.probes, packet_id, acks, self.keys, self.crypto, self.stats)
        return self.observe(outcomes)

    def observe(self, outcomes: dict[tuple[int, int], str]) -> FaultVerdict | None:
        faulted = None
        for interval, outcome in outcomes.items():
            if outcome == UNKNOWN:
                continue
            win = self.windows[interval]
            win.push(outcome == LOST)
            if outcome == LOST and faulted is None and check_threshold(win, self.w_min):
                faulted = interval
        if faulted is None:
            return None
        self.registrations += 1
        result = subdivide(self.probes, faulted)
        if isinstance(result, FaultVerdict):
            # the registration on the whole path only opens the search
            evidence = max(1, self.registrations - 1)
            self.verdict = FaultVerdict(result.faulty_link, evidence, result.position)
            return self.verdict
        a, b = faulted
        mid = (a + b) // 2
        del self.windows[faulted]
        self.windows[(a, mid)] = self._new_window()
        self.windows[(mid, b)] = self._new_window()
        self.probes = result
        self.epoch += 1
        return None
