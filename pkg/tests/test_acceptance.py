"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The lines are collected in ``RESULTS`` and echoed by the terminal summary
hook in conftest.py, so they show up even when pytest captures output.
"""

import itertools
import math
import os
import random
import statistics
import time

import pytest

from smtmanet.crypto import SimulatedCrypto
from smtmanet.discovery import DiscoveryAgent
from smtmanet.dispersal import DispersalConfig, InsufficientSharesError, disperse, reconstruct
from smtmanet.harness import execute, parse_plan
from smtmanet.localizer import FaultLocalizer, make_ack
from smtmanet.metrics import (DiscoveryTimestamps, LinkWeightTable, penalize_link, reference_time, trip_time,
                              trip_variation)
from smtmanet.selection import Route, rank_key, rate_route, select_aps
from smtmanet.sim import ScenarioConfig, Simulation, run

from conftest import wormhole_config

RESULTS = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# -- 1 ------------------------------------------------------------------------------

def test_criterion_1_dispersal_exhaustive():
    rng = random.Random(2024)
    start = time.perf_counter()
    failures = []
    checked = 0
    for n in range(1, 7):
        for m in range(1, n + 1):
            for trial in range(200):
                msg = rng.randbytes(rng.randint(1, 1024))
                shares = disperse(msg, DispersalConfig(n, m), trial)
                for subset in itertools.combinations(shares, m):
                    checked += 1
                    if reconstruct(subset) != msg:
                        failures.append((n, m, trial))
                for subset in itertools.combinations(shares, m - 1):
                    checked += 1
                    try:
                        reconstruct(subset)
                        failures.append((n, m, trial, "short"))
                    except InsufficientSharesError:
                        pass
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    report(1, ok, f"{checked} subsets checked, {len(failures)} wrong, {elapsed:.1f}s (limit 60s)")
    assert ok


# -- 2 ------------------------------------------------------------------------------

def test_criterion_2_equation_identities():
    rng = random.Random(7)
    bad = 0
    for _ in range(1000):
        rq_s = rng.uniform(0, 100)
        rq_r = rq_s + rng.uniform(0, 5)
        rp_s = rq_r + rng.uniform(0, 1)
        rp_r = rp_s + rng.uniform(0, 5)
        t_s, t_r = rng.uniform(0, 100), rng.uniform(0, 100)
        te = reference_time(DiscoveryTimestamps(rq_s, rq_r, rp_s, rp_r))
        bad += te != ((rq_r - rq_s) + (rp_r - rp_s)) / 2
        bad += trip_time(t_s, t_r) != t_r - t_s
        bad += trip_variation(te, t_r - t_s) != te - (t_r - t_s)
    worked = reference_time(DiscoveryTimestamps(0, 4, 4, 10))
    ok = bad == 0 and worked == 5.0
    report(2, ok, f"{bad} mismatches in 1000 tuples; worked example T_E={worked}")
    assert ok


# -- 3 ------------------------------------------------------------------------------

def drive_to_verdict(n, bad_link, crypto):
    route = tuple(range(200, 201 + n))
    keys = DiscoveryAgent(route[0], crypto).establish_probe_keys(route)
    loc = FaultLocalizer(route, keys, crypto)
    for pid in range(1, 100_000):
        acks = [make_ack(crypto, keys[route[p]], pid, route[p]) for p in loc.probes.positions if p <= bad_link]
        verdict = loc.on_acks(pid, acks, loc.epoch)
        if verdict is not None:
            return route, verdict
    raise AssertionError("no verdict")


def test_criterion_3_localization_bound():
    crypto = SimulatedCrypto(3)
    start = time.perf_counter()
    cases = wrong = over = 0
    worst = {}
    for n in (1, 2, 3, 4, 8, 16):
        bound = max(1, math.ceil(math.log2(n)))
        for bad in range(n):
            route, verdict = drive_to_verdict(n, bad, crypto)
            cases += 1
            wrong += verdict.faulty_link != (route[bad], route[bad + 1])
            over += verdict.evidence > bound
            worst[n] = max(worst.get(n, 0), verdict.evidence)
    elapsed = time.perf_counter() - start
    ok = wrong == 0 and over == 0 and elapsed < 10
    report(3, ok, f"{cases} placements, {wrong} wrong links, {over} over bound; "
                  f"max registrations per n {worst}; {elapsed:.2f}s")
    assert ok


# -- 4 ------------------------------------------------------------------------------

def test_criterion_4_penalty_avoidance():
    crypto = SimulatedCrypto(4)
    checks = failures = 0
    # a one-link route has no twin that avoids its link, so start at two
    for n in range(2, 7):
        for bad in range(n):
            route, verdict = drive_to_verdict(n, bad, crypto)
            table = LinkWeightTable()
            penalize_link(table, verdict.faulty_link)
            src, dst = route[0], route[-1]
            # same shape, fresh intermediates
            mirror = (src,) + tuple(v + 100 for v in route[1:-1]) + (dst,)
            tainted = Route(route, rate_route(route, table))
            clean = Route(mirror, rate_route(mirror, table))
            checks += 1
            failures += not rank_key(clean) < rank_key(tainted)
            aps = select_aps([tainted, clean], k=4, weights=table)
            checks += 1
            failures += route in {r.nodes for r in aps}
    # one non-identical fixture: a longer clean detour still beats the short tainted route
    table = LinkWeightTable()
    penalize_link(table, (3, 4))
    aps = select_aps([Route((0, 3, 4, 1)), Route((0, 5, 6, 7, 1))], weights=table)
    checks += 1
    failures += [r.nodes for r in aps] != [(0, 5, 6, 7, 1)]
    ok = failures == 0
    report(4, ok, f"{checks} ranking/selection checks, {failures} failures")
    assert ok


# -- 5 ------------------------------------------------------------------------------

TREND_PLAN = """\
nodes=50
protocols=both
sweep=5,10,15,20,25
seeds=1..20
"""


@pytest.mark.slow
def test_criterion_5_end_to_end_trend(tmp_path):
    start = time.perf_counter()
    plan = parse_plan(TREND_PLAN)
    result = execute(plan, out=tmp_path / "trend.csv", parallel=os.cpu_count() or 1)
    elapsed = time.perf_counter() - start
    by = {(r.protocol, r.adversaries, r.seed): r.delivery_ratio for r in result.rows}
    lines = []
    trend_ok = True
    for adv in plan.sweep:
        aps = [by[("APS-SMT", adv, s)] for s in plan.seeds]
        nsp = [by[("NSP", adv, s)] for s in plan.seeds]
        wins = sum(a > b for a, b in zip(aps, nsp)) / len(aps)
        cell_ok = statistics.fmean(aps) > statistics.fmean(nsp) and (adv < 10 or wins >= 0.9)
        trend_ok &= cell_ok
        gain = (statistics.fmean(aps) - statistics.fmean(nsp)) / statistics.fmean(nsp)
        lines.append(f"{adv}:{statistics.fmean(aps):.3f}/{statistics.fmean(nsp):.3f} win {wins:.0%} gain {gain:+.0%}")
    floor = statistics.fmean(by[("APS-SMT", 25, s)] for s in plan.seeds)
    floor_ok = floor >= 0.80
    in_time = elapsed < 600
    report("5a", trend_ok, "APS-SMT/NSP mean delivery, paired wins, gain "
                            "(reference band 32% to 150%, informational): " + "; ".join(lines))
    report("5b", floor_ok, f"APS-SMT mean delivery at 25 adversaries = {floor:.3f} (floor 0.80; "
                           f"reference 95%, informational)")
    report("5t", in_time, f"runtime {elapsed:.0f}s (limit 600s)")
    assert trend_ok and floor_ok and in_time


# -- 6 ------------------------------------------------------------------------------

def test_criterion_6_wormhole():
    start = time.perf_counter()
    nsp_sim = Simulation(wormhole_config("NSP"))
    nsp = nsp_sim.run()
    timeout = nsp_sim.config.nsp_route_timeout
    nsp_first = nsp_sim.source.route
    early = [d for s, d in nsp.deliveries if s < timeout]
    nsp_ok = nsp_first == (0, 6, 7, 1) and early and all(d is None for d in early)

    aps_sim = Simulation(wormhole_config("APS-SMT"))
    aps = aps_sim.run()
    route_len = 3
    limit = 2 * math.ceil(math.log2(route_len))
    verdict = aps.verdicts[0] if aps.verdicts else None
    incident = verdict is not None and bool({6, 7} & set(verdict[2]))
    within = verdict is not None and verdict[3] <= limit
    after = [d for s, d in aps.deliveries if verdict is not None and s >= verdict[0]]
    recovered = sum(d is not None for d in after) / len(after) if after else 0.0
    elapsed = time.perf_counter() - start
    ok = bool(nsp_ok) and incident and within and recovered >= 0.9 and elapsed < 10
    report(6, ok, f"NSP first route {nsp_first}, delivered before timeout {sum(d is not None for d in early)}/"
                  f"{len(early)}; APS-SMT verdict {verdict and verdict[2]} after {verdict and verdict[3]} "
                  f"registrations (limit {limit}); delivery afterwards {recovered:.3f}; {elapsed:.2f}s")
    assert ok


# -- 7 ------------------------------------------------------------------------------

def random_config(rng, index):
    nodes = rng.randint(4, 40)
    model = rng.choice(["none", "black-hole", "wormhole"])
    adv = 0 if model == "none" else rng.randint(0, nodes - 2)
    side = rng.uniform(150, 600)
    return ScenarioConfig(
        width=side, height=side, node_count=nodes, reception_range=rng.uniform(80, 250),
        queue_loss_prob=rng.choice([0.0, 0.01, 0.1, 0.3]), speed_min=0.0, speed_max=rng.choice([0.0, 5.0, 20.0]),
        adversary_count=adv, adversary_model=model, protocol=rng.choice(["APS-SMT", "NSP"]),
        duration=rng.uniform(3, 15), send_rate=rng.choice([2.0, 10.0, 25.0]), seed=rng.getrandbits(64),
    )


def test_criterion_7_conservation_and_determinism():
    rng = random.Random(77)
    start = time.perf_counter()
    unbalanced = differing = 0
    for i in range(50):
        cfg = random_config(rng, i)
        a = run(cfg, log_events=True)
        b = run(cfg, log_events=True)
        unbalanced += not a.conserved()
        differing += a != b
    elapsed = time.perf_counter() - start
    ok = unbalanced == 0 and differing == 0 and elapsed < 60
    report(7, ok, f"50 random configs: {unbalanced} unbalanced, {differing} non-identical reruns; {elapsed:.1f}s")
    assert ok
