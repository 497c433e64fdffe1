"""Vehicular scenario: configuration, simulation run, calibration, metrics."""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .autonomic import (AuditLog, AutonomicManager, KnowledgeBase, NodeEffector,
                        PlanTemplate, RttSample, SymptomKind, plan, reversal_plan,
                        Symptom)
from .errors import ConfigInvalid, QosError, UnreachableTarget
from .message import Kind, Message, ResourceAddress, Verb
from .netsim import LinkProfile, Simulator, Topology
from .node import NodeRole, NodeRuntime

CSV_HEADER = "window,mean_rtt_s,bandwidth_bps,mode"


class Mode(str, Enum):
    BASELINE = "baseline"
    ADAPTIVE = "adaptive"


class PayloadClass(str, Enum):
    REPETITIVE = "REPETITIVE"
    MIXED = "MIXED"
    RANDOM = "RANDOM"


# -- payloads -------------------------------------------------------------------

def _mesh_tile(rng: np.random.Generator, size: int) -> bytes:
    # int16 records (x, y, height, flag) over a smooth, coarsely quantized terrain
    side = int(math.ceil(math.sqrt(size / 8 + 1)))
    x, y = np.meshgrid(np.arange(side), np.arange(side))
    phase = rng.uniform(0, 2 * math.pi)
    h = np.round(20 * np.sin(x / 17.0 + phase) * np.cos(y / 23.0)) * 2
    flag = rng.random(h.shape) < 0.05
    rec = np.stack([x, y, h, flag], axis=-1).astype("<i2")
    return rec.tobytes()[:size]


def synthesize_payload(cls: PayloadClass, size: int, seed: Sequence[int]) -> bytes:
    rng = np.random.default_rng(list(seed))
    cls = PayloadClass(cls)
    if size == 0:
        return b""
    if cls is PayloadClass.RANDOM:
        return rng.bytes(size)
    if cls is PayloadClass.MIXED:
        half = size // 2
        return _mesh_tile(rng, half) + rng.bytes(size - half)
    return _mesh_tile(rng, size)


# -- configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class NodeSpec:
    id: str
    role: NodeRole


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    latency_s: float
    bandwidth_bps: Optional[float] = None
    radio: bool = False


@dataclass(frozen=True)
class ResourceSpec:
    path: str
    size_bytes: int
    cls: PayloadClass = PayloadClass.REPETITIVE


@dataclass(frozen=True)
class Churn:
    """Forced deploy/reverse cycles (stress testing), one per ``period_s``."""

    period_s: float
    cycles: int
    start_s: float = 0.0


@dataclass
class ScenarioConfig:
    nodes: list
    links: list
    radio_bandwidth_bps: float
    app_node: str
    entry_node: str
    resource_node: str
    resources: list
    request_rate: float = 2.0
    duration_s: float = 320.0
    warmup_s: float = 20.0
    window_s: float = 20.0
    onset_s: float = 140.0
    decay: list = field(default_factory=lambda: [(240.0, 0.2)])
    step_s: float = 1.0
    kb: KnowledgeBase = field(default_factory=KnowledgeBase)
    min_payload_bytes: int = 64
    mode: Mode = Mode.ADAPTIVE
    seed: int = 0
    churn: Optional[Churn] = None

    # -- JSON mapping --
    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        try:
            return _parse(doc)
        except ConfigInvalid:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigInvalid(f"{type(exc).__name__}: {exc}") from None

    def to_dict(self) -> dict:
        kb = self.kb
        doc = {
            "topology": {
                "nodes": [{"id": n.id, "role": n.role.value} for n in self.nodes],
                "links": [_link_doc(lk) for lk in self.links],
                "radio_bandwidth_bps": self.radio_bandwidth_bps,
                "application": {"node": self.app_node, "entry": self.entry_node},
            },
            "resources": {
                "node": self.resource_node,
                "items": [{"path": r.path, "size_bytes": r.size_bytes, "class": r.cls.value}
                          for r in self.resources],
            },
            "traffic": {"request_rate": self.request_rate, "duration_s": self.duration_s,
                        "warmup_s": self.warmup_s, "window_s": self.window_s},
            "degradation": {"onset_s": self.onset_s,
                            "decay": [[t, f] for t, f in self.decay],
                            "step_s": self.step_s},
            "knowledge_base": {
                "rtt_threshold": kb.rtt_threshold,
                "activation_fraction": kb.activation_fraction,
                "forecast_horizon_windows": kb.forecast_horizon_windows,
                "reversal_enabled": kb.reversal_enabled,
                "reversal_fraction": kb.reversal_fraction,
                "min_payload_bytes": self.min_payload_bytes,
            },
            "mode": self.mode.value,
            "seed": self.seed,
        }
        if self.churn is not None:
            doc["churn"] = {"period_s": self.churn.period_s, "cycles": self.churn.cycles,
                            "start_s": self.churn.start_s}
        return doc


def _link_doc(lk: LinkSpec) -> dict:
    d = {"a": lk.a, "b": lk.b, "latency_s": lk.latency_s}
    if lk.radio:
        d["radio"] = True
    else:
        d["bandwidth_bps"] = lk.bandwidth_bps
    return d


def _num(v, name) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigInvalid(f"{name} must be a finite number, got {v!r}")
    return float(v)


def _parse(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigInvalid("config must be a JSON object")
    missing = {"topology", "resources", "traffic", "degradation",
               "knowledge_base", "mode", "seed"} - set(doc)
    if missing:
        raise ConfigInvalid(f"missing top-level keys: {sorted(missing)}")
    topo = doc["topology"]
    nodes = [NodeSpec(str(n["id"]), NodeRole(n["role"])) for n in topo["nodes"]]
    links = []
    for lk in topo["links"]:
        radio = bool(lk.get("radio", False))
        bw = None if radio else _num(lk["bandwidth_bps"], "bandwidth_bps")
        links.append(LinkSpec(lk["a"], lk["b"], _num(lk["latency_s"], "latency_s"), bw, radio))
    res = doc["resources"]
    if "items" in res:
        items = [ResourceSpec(r["path"], int(r["size_bytes"]),
                              PayloadClass(r.get("class", "REPETITIVE")))
                 for r in res["items"]]
    else:
        items = [ResourceSpec(f"{res['prefix']}{i}", int(res["size_bytes"]),
                              PayloadClass(res.get("class", "REPETITIVE")))
                 for i in range(int(res["count"]))]
    traffic = doc["traffic"]
    deg = doc["degradation"]
    kbd = doc["knowledge_base"]
    min_payload = int(kbd.get("min_payload_bytes", 64))
    window_s = _num(traffic.get("window_s", 20.0), "window_s")
    try:
        kb = KnowledgeBase(
            rtt_threshold=_num(kbd.get("rtt_threshold", 1.0), "rtt_threshold"),
            activation_fraction=_num(kbd.get("activation_fraction", 0.8), "activation_fraction"),
            forecast_horizon_windows=int(kbd.get("forecast_horizon_windows", 2)),
            window_s=window_s,
            reversal_enabled=bool(kbd.get("reversal_enabled", False)),
            reversal_fraction=_num(kbd.get("reversal_fraction", 0.3), "reversal_fraction"),
            plan_templates={SymptomKind.QOS_DEGRADATION_PREDICTED:
                            PlanTemplate(min_payload_bytes=min_payload)},
        )
    except ValueError as exc:
        raise ConfigInvalid(f"knowledge_base: {exc}") from None
    churn = None
    if doc.get("churn") is not None:
        c = doc["churn"]
        churn = Churn(_num(c["period_s"], "period_s"), int(c["cycles"]),
                      _num(c.get("start_s", 0.0), "start_s"))
    app = topo.get("application", {})
    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigInvalid("seed must be an integer")
    cfg = ScenarioConfig(
        nodes=nodes, links=links,
        radio_bandwidth_bps=_num(topo["radio_bandwidth_bps"], "radio_bandwidth_bps"),
        app_node=app.get("node", _role_id(nodes, NodeRole.APPLICATION)),
        entry_node=app.get("entry", _role_id(nodes, NodeRole.SERVER)),
        resource_node=res.get("node", _role_id(nodes, NodeRole.GATEWAY)),
        resources=items,
        request_rate=_num(traffic["request_rate"], "request_rate"),
        duration_s=_num(traffic["duration_s"], "duration_s"),
        warmup_s=_num(traffic.get("warmup_s", 0.0), "warmup_s"),
        window_s=window_s,
        onset_s=_num(deg["onset_s"], "onset_s"),
        decay=[(_num(t, "decay time"), _num(f, "decay fraction")) for t, f in deg["decay"]],
        step_s=_num(deg.get("step_s", 1.0), "step_s"),
        kb=kb, min_payload_bytes=min_payload,
        mode=Mode(str(doc["mode"]).lower()), seed=seed, churn=churn,
    )
    validate(cfg)
    return cfg


def _role_id(nodes, role) -> Optional[str]:
    return next((n.id for n in nodes if n.role is role), None)


def validate(cfg: ScenarioConfig) -> None:
    """Raise :class:`ConfigInvalid` with a diagnostic on the first problem."""
    def fail(msg):
        raise ConfigInvalid(msg)

    ids = [n.id for n in cfg.nodes]
    if len(set(ids)) != len(ids):
        fail("duplicate node ids")
    for i in ids:
        if not i or "/" in i:
            fail(f"invalid node id {i!r}")
    roles = {n.id: n.role for n in cfg.nodes}
    pairs = set()
    for lk in cfg.links:
        if lk.a not in roles or lk.b not in roles:
            fail(f"link {lk.a}-{lk.b} references an unknown node")
        if lk.a == lk.b:
            fail(f"self link on {lk.a}")
        if lk.latency_s < 0:
            fail(f"negative latency on {lk.a}-{lk.b}")
        if not lk.radio and not (lk.bandwidth_bps and lk.bandwidth_bps > 0):
            fail(f"link {lk.a}-{lk.b} needs a positive bandwidth")
        pairs |= {(lk.a, lk.b), (lk.b, lk.a)}
    if not cfg.radio_bandwidth_bps > 0:
        fail("radio_bandwidth_bps must be > 0")
    if roles.get(cfg.app_node) is not NodeRole.APPLICATION:
        fail("application node missing or not an APPLICATION")
    if cfg.entry_node not in roles or (cfg.app_node, cfg.entry_node) not in pairs:
        fail("application entry node must be linked to the application")
    if cfg.resource_node not in roles:
        fail("resource node does not exist")
    if not cfg.resources:
        fail("no resources")
    seen = set()
    for r in cfg.resources:
        try:
            ResourceAddress.parse(f"{cfg.resource_node}/{r.path}")
        except ValueError as exc:
            fail(f"resource path {r.path!r}: {exc}")
        if r.path in seen:
            fail(f"duplicate resource {r.path}")
        seen.add(r.path)
        if r.size_bytes < 0:
            fail(f"negative size for {r.path}")
    if not cfg.request_rate > 0:
        fail("request_rate must be > 0")
    if not cfg.duration_s > 0:
        fail("duration must be > 0")
    if not 0 <= cfg.warmup_s < cfg.duration_s:
        fail("warmup must lie in [0, duration)")
    if not cfg.window_s > 0:
        fail("window_s must be > 0")
    if not 0 <= cfg.onset_s < cfg.duration_s:
        fail("onset_time must lie in [0, duration)")
    last = cfg.onset_s
    for t, f in cfg.decay:
        if t <= last:
            fail("decay breakpoints must be strictly increasing and after onset")
        if not 0 < f <= 1:
            fail("decay fractions must lie in (0, 1]")
        last = t
    if not cfg.step_s > 0:
        fail("step_s must be > 0")
    if cfg.min_payload_bytes < 0:
        fail("min_payload_bytes must be >= 0")
    if cfg.churn is not None and (cfg.churn.period_s <= 0 or cfg.churn.cycles < 0):
        fail("churn needs a positive period and non-negative cycles")


def load_config(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from None
    return ScenarioConfig.from_dict(doc)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")


# -- topology construction ------------------------------------------------------------

def radio_schedule(cfg: ScenarioConfig) -> tuple:
    """Piecewise-constant radio bandwidth: flat, then the linear decay
    sampled at segment midpoints every ``step_s``, then the last level."""
    base = cfg.radio_bandwidth_bps
    points = [(cfg.onset_s, 1.0)] + list(cfg.decay)
    sched = {0.0: base}
    for (t0, f0), (t1, f1) in zip(points, points[1:]):
        n = max(1, math.ceil((t1 - t0) / cfg.step_s - 1e-9))
        for k in range(n):
            a = t0 + k * cfg.step_s
            b = min(t0 + (k + 1) * cfg.step_s, t1)
            mid = (a + b) / 2
            sched[a] = base * (f0 + (f1 - f0) * (mid - t0) / (t1 - t0))
    sched[points[-1][0]] = base * points[-1][1]
    out = []
    for t in sorted(sched):
        if not out or out[-1][1] != sched[t]:
            out.append((t, sched[t]))
    return tuple(out)


def resource_payloads(cfg: ScenarioConfig) -> dict[str, bytes]:
    return {r.path: synthesize_payload(r.cls, r.size_bytes, (cfg.seed, i))
            for i, r in enumerate(cfg.resources)}


def build_topology(cfg: ScenarioConfig, payloads: Optional[dict] = None) -> Topology:
    topo = Topology()
    if payloads is None:
        payloads = resource_payloads(cfg)
    for n in cfg.nodes:
        store = payloads if n.id == cfg.resource_node else None
        topo.add_node(NodeRuntime(n.id, n.role, store))
    radio = radio_schedule(cfg)
    for lk in cfg.links:
        sched = radio if lk.radio else ((0.0, lk.bandwidth_bps),)
        topo.connect(lk.a, lk.b, LinkProfile(lk.latency_s, sched))
    return topo


def radio_profile(cfg: ScenarioConfig) -> LinkProfile:
    return LinkProfile(0.0, radio_schedule(cfg))


# -- metrics ----------------------------------------------------------------------

@dataclass(frozen=True)
class WindowRecord:
    window_index: int
    mean_rtt_s: Optional[float]
    available_bandwidth_bps: float
    mode: str


@dataclass
class MetricsLog:
    mode: str
    windows: list = field(default_factory=list)
    events: list = field(default_factory=list)
    audit: AuditLog = field(default_factory=AuditLog)
    samples: list = field(default_factory=list)
    requests: int = 0
    responses: int = 0
    failed: int = 0
    error_codes: list = field(default_factory=list)
    hops: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for w in self.windows:
            mean = "" if w.mean_rtt_s is None else f"{w.mean_rtt_s:.6f}"
            lines.append(f"{w.window_index},{mean},{w.available_bandwidth_bps:.6f},{w.mode}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    def means(self) -> list:
        return [w.mean_rtt_s for w in self.windows]


class _SimEffector(NodeEffector):
    def __init__(self, nodes, sim: Simulator, events: list):
        super().__init__(nodes)
        self.sim = sim
        self.events = events

    def apply(self, cmd):
        inverse = super().apply(cmd)
        self.events.append({"t": self.sim.now, "event": "lifecycle", "node": cmd.target_node,
                            "action": cmd.action.value, "plugin": cmd.plugin.plugin_id})
        return inverse


def run_scenario(cfg: ScenarioConfig, record_hops: bool = False) -> MetricsLog:
    validate(cfg)
    topo = build_topology(cfg)
    sim = Simulator(topo)
    sim.record_hops = record_hops
    rng = random.Random(cfg.seed)
    log = MetricsLog(cfg.mode.value)
    effector = _SimEffector(topo.nodes, sim, log.events)
    adaptive = cfg.mode is Mode.ADAPTIVE
    am = AutonomicManager(cfg.kb, topo, log.audit) if adaptive else None
    app_addr = ResourceAddress(cfg.app_node, ("navigation",))
    paths = [r.path for r in cfg.resources]

    def on_response(request: Message, response: Message) -> None:
        log.responses += 1
        if response.kind is not Kind.RESPONSE or response.correlation_id != request.correlation_id:
            log.failed += 1
            log.error_codes.append("MISMATCHED_RESPONSE")
            return
        if response.is_error:
            log.failed += 1
            log.error_codes.append(response.error_code)
            return
        sample = RttSample(request.correlation_id, sim.now - request.created_at, sim.now)
        log.samples.append(sample)
        if am is not None:
            am.observe(sample)

    def issue(k: int) -> None:
        path = rng.choice(paths)
        msg = Message(Kind.REQUEST, Verb.RETRIEVE, f"req-{k:06d}", app_addr,
                      ResourceAddress.parse(f"{cfg.resource_node}/{path}"), b"",
                      created_at=sim.now)
        log.requests += 1
        sim.send(cfg.app_node, cfg.entry_node, msg, lambda r: on_response(msg, r))

    k = 0
    while k / cfg.request_rate < cfg.duration_s:
        sim.schedule(k / cfg.request_rate, issue, k)
        k += 1

    def launch(gen, label):
        if gen is None:
            return
        log.events.append({"t": sim.now, "event": "plan_start", "label": label})
        sim.spawn(gen, None, lambda report: log.events.append(
            {"t": sim.now, "event": "plan_done", "plan_id": report.plan_id,
             "applied": report.applied, "rolled_back": report.rolled_back}))

    if am is not None and cfg.churn is None:
        def tick():
            launch(am.tick(sim.now, effector), "analysis")
        t = cfg.window_s
        while t <= cfg.duration_s + 1e-9:
            sim.schedule(t, tick)
            t += cfg.window_s

    if am is not None and cfg.churn is not None:
        ch = cfg.churn
        forced = Symptom(SymptomKind.QOS_DEGRADATION_PREDICTED, 0.0, 0.0,
                         cfg.kb.rtt_threshold, 0.0)
        for i in range(ch.cycles):
            t0 = ch.start_s + i * ch.period_s
            sim.schedule(t0 + ch.period_s * 0.25, lambda i=i: launch(
                am.apply(sim.now, plan(forced, cfg.kb, topo, f"plan-{i + 1}"), effector),
                "churn-deploy"))
            sim.schedule(t0 + ch.period_s * 0.75, lambda i=i: launch(
                am.apply(sim.now, reversal_plan(cfg.kb, topo, f"reverse-{i + 1}"), effector),
                "churn-reverse"))

    sim.run()

    radio = radio_profile(cfg)
    has_radio = any(lk.radio for lk in cfg.links)
    n_windows = math.ceil((cfg.duration_s - cfg.warmup_s) / cfg.window_s - 1e-9)
    for i in range(n_windows):
        lo = cfg.warmup_s + i * cfg.window_s
        hi = lo + cfg.window_s
        rtts = [s.rtt for s in log.samples if lo <= s.at < hi]
        mean = math.fsum(rtts) / len(rtts) if rtts else None
        bw = radio.mean_bandwidth(lo, hi) if has_radio else 0.0
        log.windows.append(WindowRecord(i + 1, mean, bw, cfg.mode.value))
    log.hops = sim.hop_log
    return log


# -- calibration ---------------------------------------------------------------------

def _representative(cfg: ScenarioConfig, payloads: dict) -> tuple[Message, Message]:
    first = cfg.resources[0]
    req = Message(Kind.REQUEST, Verb.RETRIEVE, "req-000000",
                  ResourceAddress(cfg.app_node, ("navigation",)),
                  ResourceAddress.parse(f"{cfg.resource_node}/{first.path}"))
    return req, req.reply(payloads[first.path])


def _baseline_terms(cfg: ScenarioConfig) -> tuple[float, float]:
    """RTT(B) = fixed + radio_bits / B for the baseline path."""
    links = {(lk.a, lk.b): lk for lk in cfg.links}
    links.update({(lk.b, lk.a): lk for lk in cfg.links})
    hops = [(cfg.app_node, cfg.entry_node)]
    if cfg.entry_node != cfg.resource_node:
        hops.append((cfg.entry_node, cfg.resource_node))
    req, resp = _representative(cfg, resource_payloads(cfg))
    bits = 8.0 * (req.wire_size + resp.wire_size)
    fixed = 0.0
    radio_bits = 0.0
    for hop in hops:
        lk = links.get(hop)
        if lk is None:
            raise UnreachableTarget(f"no link {hop[0]}-{hop[1]} on the baseline path")
        fixed += 2 * lk.latency_s
        if lk.radio:
            radio_bits += bits
        else:
            fixed += bits / lk.bandwidth_bps
    return fixed, radio_bits


def analytic_baseline_rtt(cfg: ScenarioConfig, radio_bandwidth_bps: Optional[float] = None) -> float:
    fixed, radio_bits = _baseline_terms(cfg)
    bw = cfg.radio_bandwidth_bps if radio_bandwidth_bps is None else radio_bandwidth_bps
    return fixed + radio_bits / bw


def calibrate(target_baseline_rtt: float, cfg: ScenarioConfig) -> ScenarioConfig:
    """Stage-1 radio bandwidth giving the requested baseline RTT."""
    fixed, radio_bits = _baseline_terms(cfg)
    if radio_bits == 0:
        raise UnreachableTarget("baseline path has no radio hop to calibrate")
    if not target_baseline_rtt > fixed:
        raise UnreachableTarget(
            f"target {target_baseline_rtt} s is not above the latency floor {fixed:.6f} s")
    bw = radio_bits / (target_baseline_rtt - fixed)
    if not math.isfinite(bw):
        raise UnreachableTarget("target too close to the latency floor")
    return replace(cfg, radio_bandwidth_bps=bw)


# -- comparison -----------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str


def read_csv(path) -> list[dict]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def parse_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        out.append({"window": int(r["window"]),
                    "mean_rtt_s": float(r["mean_rtt_s"]) if r["mean_rtt_s"] else None,
                    "bandwidth_bps": float(r["bandwidth_bps"]),
                    "mode": r["mode"]})
    return out


def split_stages(rows: list[dict]) -> tuple[list[int], list[int]]:
    """Stage 1 = windows at the initial bandwidth; stage 2 = the rest."""
    top = rows[0]["bandwidth_bps"]
    stage1 = [r["window"] for r in rows if r["bandwidth_bps"] >= top * (1 - 1e-9)]
    stage2 = [r["window"] for r in rows if r["bandwidth_bps"] < top * (1 - 1e-9)]
    return stage1, stage2


def compare(baseline: list[dict], adaptive: list[dict], target_rtt: float = 0.5,
            tolerance: float = 0.10, max_ratio: float = 0.6, threshold: float = 1.0,
            baseline_exceeds: float = 2.0) -> tuple[str, list[Verdict]]:
    if [r["window"] for r in baseline] != [r["window"] for r in adaptive]:
        raise ConfigInvalid("baseline and adaptive CSVs cover different windows")
    b = {r["window"]: r["mean_rtt_s"] for r in baseline}
    a = {r["window"]: r["mean_rtt_s"] for r in adaptive}
    stage1, stage2 = split_stages(baseline)
    lines = [f"{'window':>6} {'bandwidth_bps':>16} {'baseline_s':>11} {'adaptive_s':>11} stage"]
    for r in baseline:
        w = r["window"]
        fmt = lambda v: "-" if v is None else f"{v:.3f}"
        lines.append(f"{w:>6} {r['bandwidth_bps']:>16.1f} {fmt(b[w]):>11} {fmt(a[w]):>11} "
                     f"{1 if w in stage1 else 2}")
    verdicts = []
    s1b = [b[w] for w in stage1]
    ok = bool(s1b) and all(v is not None and abs(v - target_rtt) <= tolerance * target_rtt
                           for v in s1b)
    verdicts.append(Verdict("stage1-baseline", ok,
                            f"baseline stage-1 means within {target_rtt}+/-{tolerance:.0%}"))
    ok = bool(s1b) and all(a[w] is not None and b[w] is not None
                           and a[w] <= max_ratio * b[w] for w in stage1)
    verdicts.append(Verdict("stage1-ratio", ok,
                            f"adaptive stage-1 means <= {max_ratio} x baseline"))
    ok = bool(stage2) and all(a[w] is not None and a[w] < threshold for w in stage2)
    verdicts.append(Verdict("stage2-adaptive", ok,
                            f"adaptive degradation-stage means < {threshold} s"))
    ok = any(b[w] is not None and b[w] > baseline_exceeds for w in stage2)
    verdicts.append(Verdict("stage2-baseline", ok,
                            f"some baseline degradation-stage mean > {baseline_exceeds} s"))
    for v in verdicts:
        lines.append(f"{'PASS' if v.passed else 'FAIL'} {v.name}: {v.detail}")
    return "\n".join(lines), verdicts
