"""Scenario configuration for one simulator run."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

PROTOCOLS = ("APS-SMT", "NSP")
ADVERSARY_MODELS = ("none", "black-hole", "wormhole")


class ScenarioError(ValueError):
    """Rejected configuration; raised before any event runs."""


@dataclass(frozen=True)
class ScenarioConfig:
    # area and radio
    width: float = 500.0
    height: float = 500.0
    node_count: int = 50
    reception_range: float = 150.0
    per_hop_latency: float = 0.005
    queue_loss_prob: float = 0.01
    broadcast_jitter: float = 0.002
    # random waypoint
    speed_min: float = 1.0
    speed_max: float = 10.0
    pause_time: float = 10.0
    mobility_interval: float = 0.5
    # adversaries
    adversary_count: int = 0
    adversary_model: str = "black-hole"
    wormhole_pairs: tuple = ()
    adversaries: tuple | None = None
    positions: tuple | None = None
    # traffic
    source: int = 0
    destination: int = 1
    packet_size: int = 256
    send_rate: float = 10.0
    duration: float = 120.0
    start_time: float = 1.0
    protocol: str = "APS-SMT"
    seed: int = 1
    # protocol knobs
    aps_k: int = 4
    loss_window: int = 10
    loss_threshold: float = 0.2
    loss_w_min: int = 5
    penalty_factor: float = 2.0
    rating_penalty: float = 0.5
    decay_period: float = 0.0
    trust_initial: float = 0.5
    trust_up: float = 0.05
    trust_down: float = 0.5
    trust_threshold: float = 0.2
    trust_window: int = 20
    anomaly_threshold: float = 0.2
    anomaly_weights: tuple = (0.3, 0.3, 0.4)
    ack_timeout_factor: float = 4.0
    ack_timeout_floor: float = 0.25
    # routes below this trust count as likely to fail when picking m
    dispersion_trust_cut: float = 1.0
    rediscovery_interval: float = 5.0
    empty_retry_interval: float = 1.0
    nsp_route_timeout: float = 10.0

    def __post_init__(self):
        if self.wormhole_pairs:
            object.__setattr__(self, "wormhole_pairs",
                               tuple(tuple(int(x) for x in p) for p in self.wormhole_pairs))
        if self.adversaries is not None:
            object.__setattr__(self, "adversaries", tuple(int(a) for a in self.adversaries))
        if self.positions is not None:
            object.__setattr__(self, "positions", tuple((float(x), float(y)) for x, y in self.positions))
        object.__setattr__(self, "anomaly_weights", tuple(float(w) for w in self.anomaly_weights))

    @property
    def static(self) -> bool:
        return self.speed_max == 0

    def validate(self) -> "ScenarioConfig":
        def need(cond, name, msg):
            if not cond:
                raise ScenarioError(f"{name}: {msg}")

        need(self.width > 0 and self.height > 0, "area", "width and height must be positive")
        need(self.node_count >= 2, "node_count", "need at least 2 nodes")
        need(self.reception_range > 0, "reception_range", "must be positive")
        need(self.per_hop_latency > 0, "per_hop_latency", "must be positive")
        need(0.0 <= self.queue_loss_prob <= 1.0, "queue_loss_prob", "must be a probability")
        need(self.broadcast_jitter >= 0, "broadcast_jitter", "must be non-negative")
        need(0 <= self.speed_min <= self.speed_max, "speed", "need 0 <= speed_min <= speed_max")
        need(self.pause_time >= 0, "pause_time", "must be non-negative")
        need(self.mobility_interval > 0, "mobility_interval", "must be positive")
        need(self.protocol in PROTOCOLS, "protocol", f"must be one of {PROTOCOLS}")
        need(self.adversary_model in ADVERSARY_MODELS, "adversary_model", f"must be one of {ADVERSARY_MODELS}")
        nodes = range(self.node_count)
        need(self.source in nodes and self.destination in nodes, "source/destination", "not a node id")
        need(self.source != self.destination, "source/destination", "must differ")
        need(0 <= self.adversary_count < self.node_count, "adversary_count", "must be in [0, node_count)")
        need(self.adversary_count <= self.node_count - 2, "adversary_count",
             "source and destination are never adversaries")
        if self.adversary_count and self.adversary_model == "none":
            raise ScenarioError("adversary_model: 'none' with a non-zero adversary_count")
        if self.adversaries is not None:
            advs = set(self.adversaries)
            need(len(advs) == self.adversary_count, "adversaries", "length must equal adversary_count")
            need(advs <= set(nodes), "adversaries", "unknown node id")
            need(not advs & {self.source, self.destination}, "adversaries", "cannot include an endpoint")
        if self.wormhole_pairs:
            need(self.adversary_model == "wormhole", "wormhole_pairs", "only valid with the wormhole model")
            flat = [x for p in self.wormhole_pairs for x in p]
            need(all(len(p) == 2 for p in self.wormhole_pairs), "wormhole_pairs", "pairs must have 2 nodes")
            need(len(set(flat)) == len(flat), "wormhole_pairs", "a node can be in one pair only")
            if self.adversaries is not None:
                need(set(flat) <= set(self.adversaries), "wormhole_pairs", "must be adversaries")
            else:
                need(not set(flat) & {self.source, self.destination}, "wormhole_pairs",
                     "cannot include an endpoint")
                need(len(flat) <= self.adversary_count, "wormhole_pairs", "more pair members than adversaries")
        if self.positions is not None:
            need(len(self.positions) == self.node_count, "positions", "one position per node")
            need(all(0 <= x <= self.width and 0 <= y <= self.height for x, y in self.positions),
                 "positions", "outside the area")
        need(self.packet_size >= 1, "packet_size", "must be positive")
        need(self.send_rate > 0, "send_rate", "must be positive")
        need(self.duration > 0, "duration", "must be positive")
        need(0 <= self.start_time < self.duration, "start_time", "must be in [0, duration)")
        need(0 <= self.seed < 2**64, "seed", "must fit in 64 bits")
        need(self.aps_k >= 1, "aps_k", "must be at least 1")
        need(self.loss_window >= 1 and 1 <= self.loss_w_min <= self.loss_window, "loss_w_min",
             "need 1 <= loss_w_min <= loss_window")
        need(0.0 <= self.loss_threshold <= 1.0, "loss_threshold", "must be in [0, 1]")
        need(self.penalty_factor > 1.0, "penalty_factor", "must exceed 1")
        need(0.0 < self.rating_penalty < 1.0, "rating_penalty", "must be in (0, 1)")
        need(0.0 <= self.trust_initial <= 1.0, "trust_initial", "must be in [0, 1]")
        need(0.0 < self.trust_down < 1.0, "trust_down", "must be in (0, 1)")
        need(self.trust_window >= 1, "trust_window", "must be positive")
        need(len(self.anomaly_weights) == 3 and abs(sum(self.anomaly_weights) - 1) < 1e-9
             and min(self.anomaly_weights) >= 0, "anomaly_weights", "three non-negative weights summing to 1")
        need(0.0 <= self.dispersion_trust_cut <= 1.0, "dispersion_trust_cut", "must be in [0, 1]")
        need(self.ack_timeout_floor > 0, "ack_timeout_floor", "must be positive")
        need(self.rediscovery_interval > 0 and self.empty_retry_interval > 0, "rediscovery_interval",
             "must be positive")
        need(self.nsp_route_timeout > 0, "nsp_route_timeout", "must be positive")
        return self


CONFIG_FIELDS = {f.name: f for f in fields(ScenarioConfig)}
