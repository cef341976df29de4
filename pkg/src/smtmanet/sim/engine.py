"""Discrete-event simulation of one source/destination flow.

Everything runs on one priority queue ordered by (time, insertion
sequence), so a given config and seed always produce the same event log
and the same statistics.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..crypto import NullCrypto, SimulatedCrypto
from ..discovery import DiscoveryAgent
from ..dispersal import disperse, reconstruct, DispersalError
from ..localizer import FaultLocalizer, make_ack
from ..metrics import (DiscoveryTimestamps, LinkWeightTable, TrafficRecord, TrustPolicy, ack_timeout,
                       penalize_link, reference_time, update_trust, window_anomaly)
from ..selection import NoRouteError, Route, choose_dispersion, select_aps
from .adversary import DROP, TUNNEL, apply_adversary, place_adversaries
from .config import ScenarioConfig
from .mobility import RandomWaypoint, connectivity

PACKET_DELIVERY = "packet-delivery"
MOBILITY_UPDATE = "mobility-update"
TIMER = "timer"
APP_SEND = "app-send"

DISPOSITIONS = ("delivered", "dropped_adversary", "dropped_loss", "dropped_disconnection", "in_flight")


@dataclass(slots=True)
class Event:
    time: float
    seq: int
    kind: str
    payload: tuple

    def __lt__(self, other: "Event") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


@dataclass(slots=True)
class Packet:
    kind: str
    pid: int
    route: tuple = ()
    hop: int = 0
    body: Any = None


@dataclass(slots=True)
class DataBody:
    message_id: int
    share: Any
    probes: tuple
    epoch: int
    sent_at: float


@dataclass
class RunStats:
    protocol: str
    seed: int
    adversaries: int
    messages_sent: int
    messages_delivered: int
    delivery_ratio: float
    mean_delay_s: float
    localizations: int
    discoveries: int
    overhead_packets: int
    counters: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    deliveries: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    forged_requests: int = 0
    adversary_nodes: tuple = ()
    event_log: list | None = None

    def conserved(self) -> bool:
        c = self.counters
        return c["sent"] == sum(c[k] for k in DISPOSITIONS)


def build_topology(config: ScenarioConfig, rng: np.random.Generator | None = None):
    """Initial positions (uniform over the area unless given) and unit-disk adjacency."""
    if config.positions is not None:
        positions = np.array(config.positions, dtype=float)
    else:
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        positions = rng.uniform((0.0, 0.0), (config.width, config.height), size=(config.node_count, 2))
    return positions, connectivity(positions, config.reception_range)


class Simulation:
    def __init__(self, config: ScenarioConfig, log_events: bool = False):
        self.config = config.validate()
        cfg = self.config
        place_ss, mob_ss, adv_ss, loss_ss, jit_ss, pay_ss = np.random.SeedSequence(cfg.seed).spawn(6)
        positions, self.adj = build_topology(cfg, np.random.default_rng(place_ss))
        self.mobility = RandomWaypoint(positions, cfg.width, cfg.height, (cfg.speed_min, cfg.speed_max),
                                       cfg.pause_time, np.random.default_rng(mob_ss))
        self._refresh_neighbors()
        self.adversaries = place_adversaries(cfg, np.random.default_rng(adv_ss))
        self.loss_rng = random.Random(int(loss_ss.generate_state(1, np.uint64)[0]))
        self.jitter_rng = random.Random(int(jit_ss.generate_state(1, np.uint64)[0]))
        self.payload_rng = np.random.default_rng(pay_ss)

        secure = cfg.protocol == "APS-SMT"
        self.crypto = SimulatedCrypto(cfg.seed) if secure else NullCrypto()
        self.agents = {v: DiscoveryAgent(v, self.crypto, reply_all=secure) for v in range(cfg.node_count)}

        self.queue: list[Event] = []
        self._seq = 0
        self._pid = 0
        self.now = 0.0
        self.counters = Counter({k: 0 for k in ("sent",) + DISPOSITIONS})
        self.log: list | None = [] if log_events else None

        self.messages: dict[int, list] = {}
        self.dest_shares: dict[int, dict] = {}
        self.receive_times: dict[int, float] = {}
        self.source = SmtSource(self) if secure else NspSource(self)

    # -- plumbing -------------------------------------------------------

    def _refresh_neighbors(self) -> None:
        self.neighbors = [set(np.flatnonzero(row).tolist()) for row in self.adj]

    def schedule(self, delay: float, kind: str, fn: Callable, *args) -> None:
        self._seq += 1
        heapq.heappush(self.queue, Event(self.now + delay, self._seq, kind, (fn, args)))

    def new_pid(self) -> int:
        self._pid += 1
        return self._pid

    def record(self, kind: str, frm, to, pid, disposition: str) -> None:
        if self.log is not None:
            self.log.append(f"{self.now:.6f},{kind},{frm},{to},{pid},{disposition}")

    def transmit(self, frm: int, to: int, pkt: Packet) -> None:
        c = self.counters
        c["sent"] += 1
        if pkt.kind != "data":
            c["overhead"] += 1
        if to not in self.neighbors[frm]:
            c["dropped_disconnection"] += 1
            self.record("transmit", frm, to, pkt.pid, "dropped_disconnection")
            return
        if self.loss_rng.random() < self.config.queue_loss_prob:
            c["dropped_loss"] += 1
            self.record("transmit", frm, to, pkt.pid, "dropped_loss")
            return
        self.schedule(self.config.per_hop_latency, PACKET_DELIVERY, self._deliver, frm, to, pkt, False)

    def tunnel(self, frm: int, to: int, pkt: Packet) -> None:
        """Out-of-band, zero-latency channel between wormhole partners."""
        self.counters["sent"] += 1
        self.counters["overhead"] += 1
        self.schedule(0.0, PACKET_DELIVERY, self._deliver, frm, to, pkt, True)

    def broadcast(self, frm: int, body) -> None:
        pkt = Packet("rreq", self.new_pid(), body=body)
        for to in sorted(self.neighbors[frm]):
            self.transmit(frm, to, pkt)

    def _deliver(self, frm: int, to: int, pkt: Packet, tunneled: bool) -> None:
        c = self.counters
        if not tunneled and to not in self.neighbors[frm]:
            c["dropped_disconnection"] += 1
            self.record(PACKET_DELIVERY, frm, to, pkt.pid, "dropped_disconnection")
            return
        behavior = self.adversaries.get(to)
        if behavior is not None and apply_adversary(behavior, to, pkt.kind) == DROP:
            c["dropped_adversary"] += 1
            self.record(PACKET_DELIVERY, frm, to, pkt.pid, "dropped_adversary")
            return
        c["delivered"] += 1
        self.record(PACKET_DELIVERY, frm, to, pkt.pid, "delivered")
        getattr(self, "_on_" + pkt.kind)(to, frm, pkt)

    # -- node behaviour ---------------------------------------------------

    def _on_rreq(self, node: int, frm: int, pkt: Packet) -> None:
        req = pkt.body
        agent = self.agents[node]
        if node == req.destination:
            resp = agent.initiate_response(req, received_at=self.now)
            if resp is not None:
                path = resp.discovered_path
                self._forward_reverse(node, Packet("rrep", self.new_pid(), path, len(path) - 1, resp))
            return
        grown = agent.propagate_request(req)
        if grown is None:
            return
        behavior = self.adversaries.get(node)
        if behavior is not None and apply_adversary(behavior, node, "rreq") == TUNNEL:
            self.tunnel(node, behavior.peer, Packet("rreq", self.new_pid(), body=grown))
        delay = self.jitter_rng.uniform(0.0, self.config.broadcast_jitter) if self.config.broadcast_jitter else 0.0
        self.schedule(delay, TIMER, self.broadcast, node, grown)

    def _forward_reverse(self, node: int, pkt: Packet) -> None:
        nxt = pkt.route[pkt.hop - 1]
        pkt.hop -= 1
        behavior = self.adversaries.get(node)
        if behavior is not None and behavior.peer == nxt:
            self.tunnel(node, nxt, pkt)
        else:
            self.transmit(node, nxt, pkt)

    def _on_rrep(self, node: int, frm: int, pkt: Packet) -> None:
        if pkt.hop == 0:
            self.source.on_response(pkt.body)
        else:
            self._forward_reverse(node, pkt)

    def _on_data(self, node: int, frm: int, pkt: Packet) -> None:
        body: DataBody = pkt.body
        i = pkt.hop
        last = len(pkt.route) - 1
        if i in body.probes:
            key = self.crypto.shared_key(pkt.route[0], node)
            ack = Packet("ack", self.new_pid(), pkt.route, i, make_ack(self.crypto, key, pkt.pid, node))
            self._forward_reverse(node, ack)
        if i == last:
            self._at_destination(pkt)
        else:
            pkt.hop = i + 1
            self.transmit(node, pkt.route[i + 1], pkt)

    def _on_ack(self, node: int, frm: int, pkt: Packet) -> None:
        if pkt.hop == 0:
            self.source.on_ack(pkt.body)
        else:
            self._forward_reverse(node, pkt)

    def _at_destination(self, pkt: Packet) -> None:
        body: DataBody = pkt.body
        self.receive_times.setdefault(pkt.pid, self.now)
        msg = self.messages[body.message_id]
        if msg[2] is not None:
            return
        if body.share is None:
            msg[2] = self.now
            return
        shares = self.dest_shares.setdefault(body.message_id, {})
        shares[body.share.index] = body.share
        if len(shares) >= body.share.m:
            try:
                data = reconstruct(shares.values())
            except DispersalError:
                return
            if data == msg[0]:
                msg[2] = self.now
                del self.dest_shares[body.message_id]

    # -- drivers ----------------------------------------------------------

    def _mobility_step(self) -> None:
        dt = self.config.mobility_interval
        self.mobility.advance(dt)
        self.adj = connectivity(self.mobility.positions, self.config.reception_range)
        self._refresh_neighbors()
        self.record(MOBILITY_UPDATE, "-", "-", "-", "moved")
        self.schedule(dt, MOBILITY_UPDATE, self._mobility_step)

    def _app_send(self, index: int) -> None:
        mid = index + 1
        payload = self.payload_rng.bytes(self.config.packet_size)
        self.messages[mid] = [payload, self.now, None]
        self.record(APP_SEND, self.config.source, self.config.destination, mid, "generated")
        self.source.send(mid, payload)
        nxt = self.config.start_time + (index + 1) / self.config.send_rate
        if nxt < self.config.duration:
            self.schedule(nxt - self.now, APP_SEND, self._app_send, index + 1)

    def run(self) -> RunStats:
        cfg = self.config
        if not cfg.static:
            self.schedule(cfg.mobility_interval, MOBILITY_UPDATE, self._mobility_step)
        self.schedule(0.0, TIMER, self.source.start)
        self.schedule(cfg.start_time, APP_SEND, self._app_send, 0)
        while self.queue:
            ev = self.queue[0]
            if ev.time > cfg.duration:
                break
            heapq.heappop(self.queue)
            self.now = ev.time
            fn, args = ev.payload
            fn(*args)
        self.counters["in_flight"] = sum(1 for ev in self.queue if ev.kind == PACKET_DELIVERY)
        return self._stats()

    def _stats(self) -> RunStats:
        cfg = self.config
        sent = len(self.messages)
        delays = [m[2] - m[1] for m in self.messages.values() if m[2] is not None]
        forged = sum(a.stats["forged"] for a in self.agents.values())
        return RunStats(
            protocol=cfg.protocol,
            seed=cfg.seed,
            adversaries=cfg.adversary_count,
            messages_sent=sent,
            messages_delivered=len(delays),
            delivery_ratio=len(delays) / sent if sent else 0.0,
            mean_delay_s=sum(delays) / len(delays) if delays else 0.0,
            localizations=self.counters["localizations"],
            discoveries=self.counters["discoveries"],
            overhead_packets=self.counters["overhead"],
            counters=dict(self.counters),
            verdicts=list(self.source.verdicts),
            deliveries=[(m[1], m[2]) for m in self.messages.values()],
            metrics=list(self.source.metric_rows),
            forged_requests=forged,
            adversary_nodes=tuple(sorted(self.adversaries)),
            event_log=self.log,
        )


class NspSource:
    """Unsecured single-path baseline: shortest discovered route, no acks, no dispersion."""

    def __init__(self, sim: Simulation):
        self.sim = sim
        self.cfg = sim.config
        self.agent = sim.agents[self.cfg.source]
        self.route: tuple | None = None
        self.route_time = -np.inf
        self.last_discovery = -np.inf
        self.awaiting = False
        self.verdicts: list = []
        self.metric_rows: list = []

    def start(self) -> None:
        self.discover()

    def discover(self) -> None:
        sim = self.sim
        self.last_discovery = sim.now
        self.awaiting = True
        sim.counters["discoveries"] += 1
        self.agent.routes[self.cfg.destination] = []
        sim.broadcast(self.cfg.source, self.agent.initiate_request(self.cfg.destination))

    def on_response(self, resp) -> None:
        path = self.agent.accept_response(resp)
        if path is None or not self.awaiting:
            return
        self.route, self.route_time, self.awaiting = path, self.sim.now, False

    def on_ack(self, raw: bytes) -> None:
        pass

    def send(self, mid: int, payload: bytes) -> None:
        sim, cfg = self.sim, self.cfg
        expired = self.route is None or sim.now - self.route_time >= cfg.nsp_route_timeout
        if expired and sim.now - self.last_discovery >= cfg.empty_retry_interval:
            self.discover()
        if self.route is None:
            return
        pkt = Packet("data", sim.new_pid(), self.route, 1, DataBody(mid, None, (), 0, sim.now))
        sim.transmit(cfg.source, self.route[1], pkt)


class SmtSource:
    """Multipath secure transmission with probing, penalties and trust."""

    def __init__(self, sim: Simulation):
        self.sim = sim
        cfg = self.cfg = sim.config
        self.agent = sim.agents[cfg.source]
        self.table = LinkWeightTable(initial_rating=cfg.trust_initial)
        self.policy = TrustPolicy(cfg.trust_initial, cfg.trust_up, cfg.trust_down, cfg.trust_threshold,
                                  cfg.trust_window, cfg.anomaly_threshold)
        self.candidates: dict[tuple, float] = {}
        self.trust: dict[tuple, float] = {}
        self.aps: list[Route] = []
        self.localizers: dict[tuple, FaultLocalizer] = {}
        self.pending_acks: dict[int, list] = {}
        self.batches: dict[tuple, list] = {}
        self.last_discovery = -np.inf
        self.request_sent_at = 0.0
        self.verdicts: list = []
        self.metric_rows: list = []

    def start(self) -> None:
        self.discover()
        if self.cfg.decay_period > 0:
            self.sim.schedule(self.cfg.decay_period, TIMER, self._decay)

    def _decay(self) -> None:
        self.table.decay()
        self.sim.schedule(self.cfg.decay_period, TIMER, self._decay)

    def discover(self) -> None:
        sim, cfg = self.sim, self.cfg
        self.last_discovery = self.request_sent_at = sim.now
        sim.counters["discoveries"] += 1
        keep = {r.nodes for r in self.aps}
        self.candidates = {p: te for p, te in self.candidates.items() if p in keep}
        self.agent.routes[cfg.destination] = [p for p in self.agent.routes.get(cfg.destination, []) if p in keep]
        sim.broadcast(cfg.source, self.agent.initiate_request(cfg.destination, self.table.weight_list()))

    def on_response(self, resp) -> None:
        path = self.agent.accept_response(resp)
        if path is None:
            return
        stamps = DiscoveryTimestamps(self.request_sent_at, resp.request_received_at,
                                     resp.response_sent_at, self.sim.now)
        self.candidates[path] = reference_time(stamps)
        self.trust.setdefault(path, self.cfg.trust_initial)
        self.reselect()

    def reselect(self) -> None:
        cfg = self.cfg
        routes = [Route(p, trust=self.trust[p]) for p in self.candidates]
        try:
            self.aps = select_aps(routes, cfg.aps_k, trust_threshold=cfg.trust_threshold, weights=self.table).routes
        except NoRouteError:
            self.aps = []
        chosen = {r.nodes for r in self.aps}
        for p in list(self.localizers):
            if p not in chosen:
                del self.localizers[p]
                self.batches.pop(p, None)
        for r in self.aps:
            if r.nodes not in self.localizers:
                self.localizers[r.nodes] = FaultLocalizer(
                    r.nodes, self.agent.establish_probe_keys(r.nodes), self.sim.crypto,
                    window=cfg.loss_window, loss_threshold=cfg.loss_threshold, w_min=cfg.loss_w_min)

    def _maybe_rediscover(self) -> None:
        since = self.sim.now - self.last_discovery
        if not self.aps:
            if since >= self.cfg.empty_retry_interval:
                self.discover()
        elif since >= self.cfg.rediscovery_interval and len(self.aps) < self.cfg.aps_k:
            self.discover()

    def send(self, mid: int, payload: bytes) -> None:
        sim, cfg = self.sim, self.cfg
        self._maybe_rediscover()
        if not self.aps:
            return
        shares = disperse(payload, choose_dispersion(self.aps, cfg.dispersion_trust_cut), mid)
        for route, share in zip(self.aps, shares):
            path = route.nodes
            loc = self.localizers[path]
            loc.header()
            pid = sim.new_pid()
            self.pending_acks[pid] = []
            timeout = ack_timeout(self.candidates[path], cfg.ack_timeout_factor, cfg.ack_timeout_floor)
            sim.schedule(timeout, TIMER, self._finalize, path, loc, pid, loc.epoch, sim.now)
            body = DataBody(mid, share, loc.probes.positions, loc.epoch, sim.now)
            sim.transmit(cfg.source, path[1], Packet("data", pid, path, 1, body))

    def on_ack(self, raw: bytes) -> None:
        pid = int.from_bytes(raw[:8], "big")
        acks = self.pending_acks.get(pid)
        if acks is not None:
            acks.append(raw)

    def _finalize(self, path: tuple, loc: FaultLocalizer, pid: int, epoch: int, sent_at: float) -> None:
        acks = self.pending_acks.pop(pid, [])
        if self.localizers.get(path) is not loc:
            return
        verdict = loc.on_acks(pid, acks, epoch)
        batch = self.batches.setdefault(path, [])
        batch.append(TrafficRecord(pid, sent_at, self.sim.receive_times.get(pid)))
        if len(batch) >= self.cfg.trust_window:
            self._evaluate_trust(path, batch)
            self.batches[path] = []
        if verdict is not None:
            self._handle_verdict(path, loc, verdict)

    def _evaluate_trust(self, path: tuple, batch: list) -> None:
        cfg = self.cfg
        inputs, score = window_anomaly(batch, self.candidates.get(path, 0.0), 1.0 / cfg.send_rate,
                                       cfg.anomaly_weights)
        good = score < cfg.anomaly_threshold
        trust = self.trust[path] = update_trust(self.trust[path], score, good, self.policy)
        if good:
            self.table.reward(path[1:-1], cfg.trust_up)
        self.metric_rows.append((round(self.sim.now, 6), "-".join(map(str, path)), inputs.delta_trip,
                                 inputs.delta_frequency, inputs.lost, score, trust))
        self.reselect()

    def _handle_verdict(self, path: tuple, loc: FaultLocalizer, verdict) -> None:
        cfg = self.cfg
        penalize_link(self.table, verdict.faulty_link, cfg.penalty_factor, cfg.rating_penalty)
        self.verdicts.append((round(self.sim.now, 6), path, verdict.faulty_link, verdict.evidence))
        self.sim.counters["localizations"] += 1
        loc.reset()
        self.reselect()
        # candidates from an old flood are probably stale as well
        if self.sim.now - self.last_discovery >= self.cfg.empty_retry_interval:
            self.discover()


def run(config: ScenarioConfig, log_events: bool = False) -> RunStats:
    return Simulation(config, log_events=log_events).run()
