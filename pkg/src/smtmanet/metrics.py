"""Traffic tables, path anomaly metrics, link weights and path trust."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


def link_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


@dataclass
class TrafficRecord:
    packet_id: int
    sent_at: float
    received_at: float | None = None

    @property
    def delivered(self) -> bool:
        return self.received_at is not None


@dataclass(frozen=True)
class DiscoveryTimestamps:
    request_sent: float
    request_received: float
    reply_sent: float
    reply_received: float

    def __post_init__(self):
        if self.request_received < self.request_sent or self.reply_received < self.reply_sent:
            raise ValueError("receive time precedes send time")


class TrafficTable:
    """Packet id -> send/receive time for one flow (or one route of a flow)."""

    def __init__(self):
        self.records: dict[int, TrafficRecord] = {}

    def __len__(self) -> int:
        return len(self.records)

    def record_send(self, packet_id: int, t: float) -> None:
        self.records[packet_id] = TrafficRecord(packet_id, t)

    def record_receive(self, packet_id: int, t: float) -> None:
        rec = self.records.get(packet_id)
        if rec is None or rec.received_at is not None:
            return
        if t < rec.sent_at:
            raise ValueError("packet received before it was sent")
        rec.received_at = t

    def between(self, start: float, end: float) -> list[TrafficRecord]:
        return [r for r in self.records.values() if start <= r.sent_at <= end]


def trip_time(sent_at: float, received_at: float) -> float:
    return received_at - sent_at


def reference_time(d: DiscoveryTimestamps) -> float:
    """Half the sum of the request and reply flight durations."""
    return ((d.request_received - d.request_sent) + (d.reply_received - d.reply_sent)) / 2


def trip_variation(reference: float, trip: float) -> float:
    return reference - trip


def frequency_change(sent_times: Iterable[float], recv_times: Iterable[float], window: float,
                     end: float | None = None) -> float:
    """Sent minus received packet rate (packets/s) over ``window`` seconds ending at ``end``."""
    if window <= 0:
        raise ValueError("window must be positive")
    sent_times, recv_times = list(sent_times), list(recv_times)
    if end is None:
        sent = len(sent_times)
        recv = len(recv_times)
    else:
        start = end - window
        sent = sum(start <= t <= end for t in sent_times)
        recv = sum(start <= t <= end for t in recv_times)
    return sent / window - recv / window


def lost_packets(records: TrafficTable | Iterable[TrafficRecord], now: float, timeout: float) -> int:
    """Undelivered records old enough to be called lost."""
    if isinstance(records, TrafficTable):
        records = records.records.values()
    return sum(1 for r in records if r.received_at is None and now - r.sent_at >= timeout)


def ack_timeout(reference: float, factor: float = 4.0, floor: float = 1.0) -> float:
    return max(floor, factor * reference)


@dataclass(frozen=True)
class AnomalyInputs:
    delta_trip: float
    delta_frequency: float
    lost: int
    sent: int
    window: float
    reference: float

    @property
    def send_rate(self) -> float:
        return self.sent / self.window if self.window > 0 else 0.0


DEFAULT_ANOMALY_WEIGHTS = (0.3, 0.3, 0.4)


def _clamp(x: float, lo: float = 0.0, hi: float = 1.0) -> float:
    return min(hi, max(lo, x))


def anomaly(a: AnomalyInputs, weights: tuple[float, float, float] = DEFAULT_ANOMALY_WEIGHTS) -> float:
    """Convex combination of normalised delay, rate-drop and loss terms, in [0, 1]."""
    w1, w2, w3 = weights
    if min(weights) < 0 or abs(w1 + w2 + w3 - 1.0) > 1e-9:
        raise ValueError("anomaly weights must be non-negative and sum to 1")
    delay = _clamp(-a.delta_trip / a.reference) if a.reference > 0 else 0.0
    rate = a.send_rate
    drop = _clamp(a.delta_frequency / rate) if rate > 0 else 0.0
    loss = _clamp(a.lost / a.sent) if a.sent > 0 else 0.0
    return w1 * delay + w2 * drop + w3 * loss


def window_anomaly(records: list[TrafficRecord], reference: float, send_interval: float,
                   weights: tuple[float, float, float] = DEFAULT_ANOMALY_WEIGHTS) -> tuple[AnomalyInputs, float]:
    """Anomaly inputs and score for a batch of already-classified records."""
    sent = len(records)
    delivered = [r for r in records if r.delivered]
    if sent:
        window = records[-1].sent_at - records[0].sent_at + send_interval
    else:
        window = send_interval
    if delivered:
        mean_trip = sum(trip_time(r.sent_at, r.received_at) for r in delivered) / len(delivered)
        delta_trip = trip_variation(reference, mean_trip)
    else:
        delta_trip = 0.0
    delta_freq = (sent - len(delivered)) / window if window > 0 else 0.0
    inputs = AnomalyInputs(delta_trip, delta_freq, sent - len(delivered), sent, window, reference)
    return inputs, anomaly(inputs, weights)


@dataclass
class LinkWeightTable:
    initial_rating: float = 0.5
    weights: dict = field(default_factory=dict)
    ratings: dict = field(default_factory=dict)

    def weight(self, u: int, v: int) -> float:
        return self.weights.get(link_key(u, v), 1.0)

    def rating(self, node: int) -> float:
        return self.ratings.get(node, self.initial_rating)

    def set_rating(self, node: int, value: float) -> None:
        self.ratings[node] = _clamp(value)

    def is_penalized(self, u: int, v: int) -> bool:
        return self.weight(u, v) > 1.0

    def weight_list(self) -> tuple:
        return tuple(sorted((k, w) for k, w in self.weights.items() if w != 1.0))

    def reward(self, nodes: Iterable[int], delta: float) -> None:
        for node in nodes:
            self.set_rating(node, self.rating(node) + delta)

    def decay(self) -> None:
        """Halve every weight's excess over 1.0; tiny excesses snap back to 1.0."""
        for k, w in list(self.weights.items()):
            excess = (w - 1.0) / 2
            if excess < 1e-3:
                del self.weights[k]
            else:
                self.weights[k] = 1.0 + excess


def penalize_link(table: LinkWeightTable, link: tuple[int, int], factor: float = 2.0,
                  rating_factor: float = 0.5) -> LinkWeightTable:
    """Multiply the link weight by ``factor`` and cut both endpoint ratings."""
    if factor <= 1.0:
        raise ValueError("penalty factor must exceed 1")
    u, v = link
    key = link_key(u, v)
    table.weights[key] = table.weight(u, v) * factor
    for node in key:
        table.set_rating(node, table.rating(node) * rating_factor)
    return table


@dataclass(frozen=True)
class TrustPolicy:
    initial: float = 0.5
    up: float = 0.05
    down: float = 0.5
    threshold: float = 0.2
    window: int = 20
    anomaly_threshold: float = 0.2


def update_trust(trust: float, a_f: float, well_behaved: bool | None = None,
                 policy: TrustPolicy = TrustPolicy()) -> float:
    if well_behaved is None:
        well_behaved = a_f < policy.anomaly_threshold
    if well_behaved:
        return min(1.0, trust + policy.up)
    return trust * policy.down
