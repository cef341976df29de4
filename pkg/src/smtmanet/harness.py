"""Experiment plans: parse, execute over paired seeds, write CSV, summarize.

A plan is a flat ``key=value`` file with ``#`` comments::

    nodes=50
    protocols=both
    sweep=5,10,15,20,25
    seeds=1..20
    duration=120

Every key other than the four required ones names a scenario knob.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

from .sim import CONFIG_FIELDS, PROTOCOLS, ScenarioConfig, ScenarioError, run

CSV_HEADER = ("protocol", "adversaries", "seed", "delivery_ratio", "mean_delay_s", "localizations",
              "discoveries", "overhead_packets")
METRICS_HEADER = ("protocol", "adversaries", "seed", "time", "route", "delta_trip", "delta_frequency",
                  "lost_packets", "anomaly", "trust")
REQUIRED = ("nodes", "protocols", "sweep", "seeds")
# knobs a plan may not set directly: they are driven by the sweep or only make sense for fixtures
RESERVED = {"node_count", "adversary_count", "protocol", "seed", "adversaries", "positions", "wormhole_pairs"}
PLAN_KEYS = set(REQUIRED) | {"out"} | (set(CONFIG_FIELDS) - RESERVED)
REFERENCE_BAND = (0.32, 1.50)
REFERENCE_DELIVERY = 0.95


class PlanError(ValueError):
    """Invalid plan text; the message names the offending key and line."""


class HarnessError(RuntimeError):
    """Execution aborted, e.g. the output file could not be written."""


@dataclass(frozen=True)
class ExperimentPlan:
    base: ScenarioConfig
    sweep: tuple[int, ...]
    protocols: tuple[str, ...]
    seeds: tuple[int, ...]
    out: str | None = None
    explicit: frozenset = frozenset()

    def __post_init__(self):
        if not self.seeds:
            raise PlanError("seeds: at least one seed is required")
        if not self.sweep:
            raise PlanError("sweep: at least one adversary count is required")
        for a in self.sweep:
            if not 0 <= a <= self.base.node_count - 2:
                raise PlanError(f"sweep: adversary count {a} out of range for {self.base.node_count} nodes")

    def cells(self) -> list[ScenarioConfig]:
        """One config per (protocol, adversary count, seed), in CSV order."""
        out = []
        for proto in sorted(self.protocols):
            for adv in sorted(self.sweep):
                for seed in sorted(self.seeds):
                    out.append(replace(self.base, protocol=proto, adversary_count=adv, seed=seed))
        return out

    def header_lines(self) -> list[str]:
        """Every parameter of the plan, defaults included, as ``# key=value`` lines."""
        lines = [f"# nodes={self.base.node_count}",
                 f"# protocols={','.join(sorted(self.protocols))}",
                 f"# sweep={','.join(map(str, sorted(self.sweep)))}",
                 f"# seeds={','.join(map(str, sorted(self.seeds)))}"]
        for f in fields(ScenarioConfig):
            if f.name in RESERVED:
                continue
            tag = "" if f.name in self.explicit else "  (default)"
            lines.append(f"# {f.name}={_format_value(getattr(self.base, f.name))}{tag}")
        return lines


@dataclass(frozen=True)
class RunRow:
    protocol: str
    adversaries: int
    seed: int
    delivery_ratio: float
    mean_delay_s: float
    localizations: int
    discoveries: int
    overhead_packets: int


@dataclass(frozen=True)
class AggregateResult:
    protocol: str
    adversaries: int
    runs: int
    mean_delivery: float
    std_delivery: float
    mean_delay_s: float
    mean_overhead: float
    # APS-SMT over NSP at the same adversary count; None when not comparable
    improvement: float | None = None


@dataclass
class ExperimentResult:
    rows: list[RunRow]
    aggregates: list[AggregateResult]
    metrics: list[tuple] = field(default_factory=list)
    header: list[str] = field(default_factory=list)

    def aggregate(self, protocol: str, adversaries: int) -> AggregateResult | None:
        for agg in self.aggregates:
            if agg.protocol == protocol and agg.adversaries == adversaries:
                return agg
        return None


# -- parsing ------------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def _parse_int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty range {part}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return out


def _coerce(key: str, text: str):
    default = CONFIG_FIELDS[key].default
    if isinstance(default, bool):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"expected a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value
    if isinstance(default, tuple):
        return tuple(float(x) for x in text.split(","))
    return text


def parse_plan(text: str) -> ExperimentPlan:
    """Parse and fully validate a plan; errors carry the key and line number."""
    seen: dict[str, int] = {}
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PlanError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PLAN_KEYS:
            raise PlanError(f"{key}: unknown key (line {lineno})")
        if key in seen:
            raise PlanError(f"{key}: duplicate key (line {lineno}, first set on line {seen[key]})")
        seen[key] = lineno
        raw[key] = value
    for key in REQUIRED:
        if key not in raw:
            raise PlanError(f"{key}: missing required key")

    def fail(key, msg):
        raise PlanError(f"{key}: {msg} (line {seen[key]})")

    try:
        nodes = int(raw["nodes"])
    except ValueError:
        fail("nodes", f"not an integer: {raw['nodes']!r}")
    protocols_text = raw["protocols"].strip()
    if protocols_text.lower() == "both":
        protocols = PROTOCOLS
    else:
        protocols = tuple(p.strip() for p in protocols_text.split(",") if p.strip())
        bad = [p for p in protocols if p not in PROTOCOLS]
        if bad or not protocols or len(set(protocols)) != len(protocols):
            fail("protocols", f"expected 'both' or a subset of {', '.join(PROTOCOLS)}")
    parsed = {}
    for key in ("sweep", "seeds"):
        try:
            parsed[key] = _parse_int_list(raw[key])
        except ValueError as exc:
            fail(key, f"bad integer list ({exc})")
        if not parsed[key]:
            fail(key, "must not be empty")
        if len(set(parsed[key])) != len(parsed[key]):
            fail(key, "repeated value")
    for s in parsed["seeds"]:
        if not 0 <= s < 2**64:
            fail("seeds", f"seed {s} does not fit in 64 bits")
    for a in parsed["sweep"]:
        if not 0 <= a < nodes:
            fail("sweep", f"adversary count {a} must be in [0, {nodes})")
        if a > nodes - 2:
            fail("sweep", f"adversary count {a} leaves no room for the two endpoints")

    knobs = {}
    for key, value in raw.items():
        if key in REQUIRED or key == "out":
            continue
        try:
            knobs[key] = _coerce(key, value)
        except ValueError as exc:
            fail(key, f"bad value {value!r} ({exc})")
    try:
        base = ScenarioConfig(node_count=nodes, **knobs)
        for adv in parsed["sweep"]:
            replace(base, adversary_count=adv).validate()
    except ScenarioError as exc:
        name = str(exc).split(":", 1)[0]
        name = {"node_count": "nodes", "adversary_count": "sweep", "area": "width"}.get(name, name)
        lines = sorted(n for k, n in seen.items() if k == name or k.startswith(name + "_") or k in name.split("/"))
        suffix = f" (line {', '.join(map(str, lines))})" if lines else ""
        raise PlanError(f"{exc}{suffix}") from None
    return ExperimentPlan(base, tuple(parsed["sweep"]), tuple(protocols), tuple(parsed["seeds"]),
                          raw.get("out"), frozenset(knobs) | {"nodes"})


# -- execution ------------------------------------------------------------------

def _run_cell(config: ScenarioConfig, log_events: bool):
    stats = run(config, log_events=log_events)
    row = RunRow(config.protocol, config.adversary_count, config.seed, stats.delivery_ratio,
                 stats.mean_delay_s, stats.localizations, stats.discoveries, stats.overhead_packets)
    metrics = [(config.protocol, config.adversary_count, config.seed) + tuple(m) for m in stats.metrics]
    return row, metrics, stats.event_log


def aggregate(rows: Iterable[RunRow]) -> list[AggregateResult]:
    groups: dict[tuple[str, int], list[RunRow]] = {}
    for r in rows:
        groups.setdefault((r.protocol, r.adversaries), []).append(r)
    means = {k: statistics.fmean(r.delivery_ratio for r in g) for k, g in groups.items()}
    out = []
    for (proto, adv), g in sorted(groups.items()):
        ratios = [r.delivery_ratio for r in g]
        improvement = None
        if proto == "APS-SMT":
            base = means.get(("NSP", adv))
            if base:
                improvement = means[(proto, adv)] / base - 1.0
        out.append(AggregateResult(
            proto, adv, len(g), means[(proto, adv)],
            statistics.stdev(ratios) if len(ratios) > 1 else 0.0,
            statistics.fmean(r.mean_delay_s for r in g),
            statistics.fmean(r.overhead_packets for r in g),
            improvement))
    return out


def execute(plan: ExperimentPlan, out: str | Path | None = None, parallel: int = 1,
            log_events: bool = False, metrics_out: str | Path | None = None) -> ExperimentResult:
    """Run every cell, with both protocols on identical seeds, and write the CSV if asked."""
    cells = plan.cells()
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outputs = list(pool.map(_run_cell, cells, [log_events] * len(cells)))
    else:
        outputs = [_run_cell(c, log_events) for c in cells]
    rows = sorted((o[0] for o in outputs), key=lambda r: (r.protocol, r.adversaries, r.seed))
    metrics = [m for o in outputs for m in o[1]]
    result = ExperimentResult(rows, aggregate(rows), metrics, plan.header_lines())

    target = out if out is not None else plan.out
    if target is not None:
        _write(Path(target), to_csv(result), len(rows))
        if log_events:
            log_dir = Path(str(target) + ".events")
            try:
                log_dir.mkdir(parents=True, exist_ok=True)
                for cfg, (_, _, log) in zip(cells, outputs):
                    name = f"{cfg.protocol}_{cfg.adversary_count}_{cfg.seed}.log"
                    (log_dir / name).write_text("time,kind,from,to,packet,disposition\n" + "\n".join(log) + "\n")
            except OSError as exc:
                raise HarnessError(f"could not write event logs to {log_dir}: {exc}; "
                                   f"the results CSV at {target} is complete") from exc
    if metrics_out is not None:
        _write(Path(metrics_out), metrics_csv(result), len(rows))
    return result


def _write(path: Path, text: str, done: int) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise HarnessError(f"could not write {path}: {exc}; {done} runs had completed, "
                           "nothing was saved") from exc


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def to_csv(result: ExperimentResult) -> str:
    """Raw rows sorted by (protocol, adversaries, seed); each group ends with its seed=ALL row."""
    buf = io.StringIO()
    for line in result.header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    by_group: dict[tuple[str, int], list[RunRow]] = {}
    for r in result.rows:
        by_group.setdefault((r.protocol, r.adversaries), []).append(r)
    for (proto, adv), group in sorted(by_group.items()):
        for r in group:
            w.writerow([r.protocol, r.adversaries, r.seed, _fmt(r.delivery_ratio), _fmt(r.mean_delay_s),
                        r.localizations, r.discoveries, r.overhead_packets])
        w.writerow([proto, adv, "ALL", _fmt(statistics.fmean(r.delivery_ratio for r in group)),
                    _fmt(statistics.fmean(r.mean_delay_s for r in group)),
                    _fmt(statistics.fmean(r.localizations for r in group)),
                    _fmt(statistics.fmean(r.discoveries for r in group)),
                    _fmt(statistics.fmean(r.overhead_packets for r in group))])
    return buf.getvalue()


def metrics_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for row in sorted(result.metrics, key=lambda m: m[:4]):
        w.writerow([x if isinstance(x, (str, int)) else _fmt(x) for x in row])
    return buf.getvalue()


def read_csv(path: str | Path) -> ExperimentResult:
    """Load raw rows back from a results CSV; aggregate rows are recomputed."""
    text = Path(path).read_text()
    header = [ln for ln in text.splitlines() if ln.startswith("#")]
    reader = csv.reader(ln for ln in text.splitlines() if ln and not ln.startswith("#"))
    cols = next(reader, None)
    if cols is None or tuple(cols) != CSV_HEADER:
        raise HarnessError(f"{path}: not a results file (unexpected header {cols})")
    rows = []
    for rec in reader:
        if rec[2] == "ALL":
            continue
        rows.append(RunRow(rec[0], int(rec[1]), int(rec[2]), float(rec[3]), float(rec[4]),
                           int(rec[5]), int(rec[6]), int(rec[7])))
    return ExperimentResult(rows, aggregate(rows), header=header)


# -- reporting --------------------------------------------------------------------

def summarize(result: ExperimentResult) -> str:
    """Per-adversary-count delivery table plus the improvement range."""
    counts = sorted({a.adversaries for a in result.aggregates})
    protos = [p for p in PROTOCOLS if any(a.protocol == p for a in result.aggregates)]
    lines = ["adversaries  " + "  ".join(f"{p:>16}" for p in protos) + "  improvement"]
    improvements = []
    for adv in counts:
        cells = []
        for p in protos:
            agg = result.aggregate(p, adv)
            cells.append(f"{agg.mean_delivery:7.3f} ±{agg.std_delivery:6.3f}  " if agg else f"{'-':>16}")
        aps = result.aggregate("APS-SMT", adv)
        imp = aps.improvement if aps else None
        if imp is not None:
            improvements.append(imp)
        lines.append(f"{adv:>11}  " + "  ".join(f"{c:>16}" for c in cells)
                     + f"  {'n/a' if imp is None else f'{imp:+.1%}':>11}")
    lines.append("")
    if improvements:
        lo, hi = min(improvements), max(improvements)
        inside = REFERENCE_BAND[0] <= lo and hi <= REFERENCE_BAND[1]
        lines.append(f"improvement range: {lo:+.1%} to {hi:+.1%} "
                     f"(reference band {REFERENCE_BAND[0]:.0%} to {REFERENCE_BAND[1]:.0%}: "
                     f"{'within' if inside else 'outside'}, informational)")
    else:
        lines.append("improvement range: n/a (needs both protocols)")
    aps_counts = [a for a in result.aggregates if a.protocol == "APS-SMT"]
    if aps_counts:
        worst = max(aps_counts, key=lambda a: a.adversaries)
        lines.append(f"APS-SMT delivery at {worst.adversaries} adversaries: {worst.mean_delivery:.3f} "
                     f"(reference {REFERENCE_DELIVERY:.0%}, informational)")
    return "\n".join(lines)
