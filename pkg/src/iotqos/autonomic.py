"""MAPE-K autonomic manager.

Monitor aggregates application RTT samples into fixed windows, Analyze
raises a degradation symptom, Plan turns it into an ordered list of
effector commands and Execute applies them node by node with rollback.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

from .anf import CompressorConfig, DecompressorConfig, RedirectionPolicy
from .errors import FatalInconsistent, NoPlacement, QosError
from .message import ResourceAddress
from .node import NodeRole, PluginDescriptor, PluginKind, PluginState

WINDOW_S = 20.0


@dataclass(frozen=True)
class RttSample:
    correlation_id: str
    rtt: float
    at: float

    def __post_init__(self):
        if self.rtt < 0:
            raise ValueError("rtt must be >= 0")


@dataclass(frozen=True)
class MetricWindow:
    window_start: float
    window_end: float
    samples: tuple = ()
    mean_rtt: Optional[float] = None

    @classmethod
    def of(cls, start: float, end: float, samples: Sequence[RttSample]) -> "MetricWindow":
        samples = tuple(samples)
        mean = math.fsum(s.rtt for s in samples) / len(samples) if samples else None
        return cls(start, end, samples, mean)


class SymptomKind(str, Enum):
    QOS_DEGRADATION_PREDICTED = "QOS_DEGRADATION_PREDICTED"


@dataclass(frozen=True)
class Symptom:
    kind: SymptomKind
    observed_mean: float
    forecast_mean: float
    threshold: float
    raised_at: float


class EffectorAction(str, Enum):
    INSTALL_AND_START = "INSTALL_AND_START"
    STOP_AND_UNINSTALL = "STOP_AND_UNINSTALL"
    UPDATE_CONFIG = "UPDATE_CONFIG"


@dataclass(frozen=True)
class EffectorCommand:
    target_node: str
    action: EffectorAction
    plugin: PluginDescriptor


@dataclass(frozen=True)
class AdaptationPlan:
    plan_id: str
    commands: tuple = ()


@dataclass(frozen=True)
class PlanTemplate:
    """Node roles hosting each ANF, plus the ANF parameters."""

    decompressor_role: NodeRole = NodeRole.GATEWAY
    compressor_role: NodeRole = NodeRole.FOG
    redirector_role: NodeRole = NodeRole.SERVER
    chain_position: int = 10
    min_payload_bytes: int = 64
    mount: str = "compress"


def _default_templates():
    return {SymptomKind.QOS_DEGRADATION_PREDICTED: PlanTemplate()}


@dataclass
class KnowledgeBase:
    rtt_threshold: float = 1.0
    activation_fraction: float = 0.8
    forecast_horizon_windows: int = 2
    window_s: float = WINDOW_S
    reversal_enabled: bool = False
    reversal_fraction: float = 0.3
    plan_templates: dict = field(default_factory=_default_templates)

    def __post_init__(self):
        if not self.rtt_threshold > 0:
            raise ValueError("rtt_threshold must be > 0")
        if not 0 < self.activation_fraction <= 1:
            raise ValueError("activation_fraction must be in (0, 1]")
        if self.forecast_horizon_windows < 1:
            raise ValueError("forecast_horizon_windows must be >= 1")
        if not self.window_s > 0:
            raise ValueError("window_s must be > 0")


@dataclass(frozen=True)
class ExecutionReport:
    plan_id: str
    applied: int = 0
    rolled_back: int = 0
    failed_command: Optional[int] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failed_command is None


# -- Monitor ------------------------------------------------------------------

class WindowMonitor:
    """Incremental windowing of RTT samples on the simulation clock."""

    def __init__(self, window_s: float = WINDOW_S, start: float = 0.0):
        self.window_s = window_s
        self.start = start
        self._index = 0
        self._pending: list[RttSample] = []

    @property
    def current_start(self) -> float:
        return self.start + self._index * self.window_s

    def add(self, sample: RttSample) -> list[MetricWindow]:
        closed = self.close_until(sample.at)
        if sample.at >= self.current_start:
            self._pending.append(sample)
        return closed

    def close_until(self, t: float) -> list[MetricWindow]:
        """Emit every window that ends at or before ``t``."""
        out = []
        while self.current_start + self.window_s <= t:
            lo = self.current_start
            hi = lo + self.window_s
            mine = [s for s in self._pending if s.at < hi]
            self._pending = [s for s in self._pending if s.at >= hi]
            out.append(MetricWindow.of(lo, hi, mine))
            self._index += 1
        return out


def monitor(samples: Iterable[RttSample], window_s: float = WINDOW_S, start: float = 0.0,
            until: Optional[float] = None) -> Iterator[MetricWindow]:
    """Yield one window per elapsed ``window_s`` of simulated time.

    At the end of the stream, windows are flushed up to ``until`` or, if
    not given, up to the end of the window holding the last sample.
    """
    mon = WindowMonitor(window_s, start)
    last = None
    for s in samples:
        if last is not None and s.at < last:
            raise ValueError("samples must arrive in timestamp order")
        last = s.at
        yield from mon.add(s)
    if until is None:
        if last is None:
            return
        until = start + (math.floor((last - start) / window_s) + 1) * window_s
    yield from mon.close_until(until)


# -- Analyze ------------------------------------------------------------------

def extrapolate(means: Sequence[float], horizon: int) -> list[float]:
    """Least-squares line through ``means`` (x = 0..n-1), evaluated ahead."""
    n = len(means)
    xbar = (n - 1) / 2
    ybar = math.fsum(means) / n
    sxx = math.fsum((i - xbar) ** 2 for i in range(n))
    slope = math.fsum((i - xbar) * (y - ybar) for i, y in enumerate(means)) / sxx
    return [ybar + slope * (n - 1 + h - xbar) for h in range(1, horizon + 1)]


def analyze(history: Sequence[MetricWindow], kb: KnowledgeBase,
            epoch_active: bool = False) -> Optional[Symptom]:
    if epoch_active or not history:
        return None
    latest = history[-1]
    if latest.mean_rtt is None:
        return None
    thr = kb.rtt_threshold
    forecast = []
    recent = [w.mean_rtt for w in history[-3:]]
    if len(recent) == 3 and None not in recent:
        forecast = extrapolate(recent, kb.forecast_horizon_windows)
    above = latest.mean_rtt > kb.activation_fraction * thr
    crossing = any(f > thr for f in forecast)
    if not (above or crossing):
        return None
    return Symptom(SymptomKind.QOS_DEGRADATION_PREDICTED, latest.mean_rtt,
                   max(forecast) if forecast else latest.mean_rtt, thr, latest.window_end)


# -- Plan -----------------------------------------------------------------------

DECOMPRESSOR_ID = "anf-decompressor"
COMPRESSOR_ID = "anf-compressor"
REDIRECTOR_ID = "anf-redirector"


def _first(topology, role: NodeRole) -> str:
    for node_id, r in topology.roles.items():
        if r is role:
            return node_id
    raise NoPlacement(f"topology has no {role.value} node")


def placement(topology, template: PlanTemplate) -> tuple[str, str, str]:
    """(decompressor node, compressor node, redirector node)."""
    return (_first(topology, template.decompressor_role),
            _first(topology, template.compressor_role),
            _first(topology, template.redirector_role))


def plan(s: Symptom, kb: KnowledgeBase, topology, plan_id: str = "plan-1") -> AdaptationPlan:
    """Deploy decompressor, then compressor, then redirector.

    Redirector rules send every resource of the gateway through the
    compressor's mount on the fog node.
    """
    try:
        template = kb.plan_templates[s.kind]
    except KeyError:
        raise NoPlacement(f"no plan template for {s.kind}") from None
    gw, fog, server = placement(topology, template)
    pos = template.chain_position
    rules = {
        str(ResourceAddress.parse(f"{gw}/{p}")):
            ResourceAddress(fog, (template.mount,) + tuple(p.split("/")))
        for p in topology.resource_paths(gw)
    }
    u = PluginDescriptor(DECOMPRESSOR_ID, PluginKind.DECOMPRESSOR,
                         DecompressorConfig(frozenset({fog}), template.min_payload_bytes), pos)
    c = PluginDescriptor(COMPRESSOR_ID, PluginKind.COMPRESSOR,
                         CompressorConfig(gw, template.min_payload_bytes, template.mount), pos)
    r = PluginDescriptor(REDIRECTOR_ID, PluginKind.REDIRECTOR, RedirectionPolicy(rules), pos)
    install = EffectorAction.INSTALL_AND_START
    return AdaptationPlan(plan_id, (
        EffectorCommand(gw, install, u),
        EffectorCommand(fog, install, c),
        EffectorCommand(server, install, r),
    ))


def reversal_plan(kb: KnowledgeBase, topology, plan_id: str = "reverse-1",
                  kind: SymptomKind = SymptomKind.QOS_DEGRADATION_PREDICTED) -> AdaptationPlan:
    """Remove redirector, then compressor, then decompressor."""
    gw, fog, server = placement(topology, kb.plan_templates[kind])
    remove = EffectorAction.STOP_AND_UNINSTALL
    return AdaptationPlan(plan_id, (
        EffectorCommand(server, remove, PluginDescriptor(REDIRECTOR_ID, PluginKind.REDIRECTOR)),
        EffectorCommand(fog, remove, PluginDescriptor(COMPRESSOR_ID, PluginKind.COMPRESSOR)),
        EffectorCommand(gw, remove, PluginDescriptor(DECOMPRESSOR_ID, PluginKind.DECOMPRESSOR)),
    ))


# -- Execute --------------------------------------------------------------------

class NodeEffector:
    """Applies effector commands to :class:`NodeRuntime` objects.

    ``apply`` returns the inverse command used for rollback.  ``fail_on``
    lets tests make a node refuse commands (e.g. an unreachable fog host).
    """

    def __init__(self, nodes: dict, settle_timeout: float = 30.0):
        self.nodes = nodes
        self.settle_timeout = settle_timeout
        self.fail_on: set = set()
        self.history: list[EffectorCommand] = []

    def _node(self, node_id: str):
        if node_id in self.fail_on:
            raise QosError(f"node {node_id} unreachable")
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NoPlacement(f"unknown node {node_id}") from None

    def apply(self, cmd: EffectorCommand) -> EffectorCommand:
        node = self._node(cmd.target_node)
        pid = cmd.plugin.plugin_id
        if cmd.action is EffectorAction.INSTALL_AND_START:
            stored = node.install_plugin(cmd.plugin)
            try:
                node.start_plugin(pid)
            except QosError:
                node.uninstall_plugin(pid)
                raise
            inverse = EffectorCommand(cmd.target_node, EffectorAction.STOP_AND_UNINSTALL, stored)
        elif cmd.action is EffectorAction.STOP_AND_UNINSTALL:
            previous = node.plugins.get(pid)
            if previous is not None and previous.state is PluginState.STARTED:
                node.stop_plugin(pid)
            node.uninstall_plugin(pid)
            inverse = EffectorCommand(cmd.target_node, EffectorAction.INSTALL_AND_START, previous)
        else:
            previous = node.plugins.get(pid)
            node.update_plugin(pid, cmd.plugin.config)
            inverse = EffectorCommand(
                cmd.target_node, EffectorAction.UPDATE_CONFIG,
                previous if previous is not None else cmd.plugin)
        self.history.append(cmd)
        return inverse

    def settle(self, node_id: str) -> None:
        node = self.nodes.get(node_id)
        if node is not None and not node.wait_settled(self.settle_timeout):
            raise FatalInconsistent(f"{node_id} did not drain")


def execute_steps(p: AdaptationPlan, effector):
    """Generator form of :func:`execute`.

    After each applied command it yields the target node id; the driver
    resumes it once that node has no messages left from older snapshots.
    """
    undo: list[EffectorCommand] = []
    for k, cmd in enumerate(p.commands):
        try:
            undo.append(effector.apply(cmd))
        except QosError as exc:
            rolled = 0
            for inverse in reversed(undo):
                try:
                    effector.apply(inverse)
                except QosError as rb_exc:
                    raise FatalInconsistent(
                        f"rollback of {p.plan_id} failed: {rb_exc}") from rb_exc
                rolled += 1
                yield inverse.target_node
            return ExecutionReport(p.plan_id, len(undo), rolled, k, str(exc))
        yield cmd.target_node
    return ExecutionReport(p.plan_id, len(undo), 0)


def execute(p: AdaptationPlan, effector) -> ExecutionReport:
    gen = execute_steps(p, effector)
    try:
        node_id = next(gen)
        while True:
            effector.settle(node_id)
            node_id = gen.send(None)
    except StopIteration as stop:
        return stop.value


# -- Knowledge / audit / loop ------------------------------------------------------

class AuditLog:
    """Append-only records ``{timestamp, phase, payload}``."""

    def __init__(self):
        self.records: list[dict] = []

    def append(self, timestamp: float, phase: str, payload: Any) -> None:
        self.records.append({"timestamp": timestamp, "phase": phase, "payload": payload})

    def lines(self) -> list[str]:
        return [json.dumps(r, separators=(",", ":"), sort_keys=False) for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())


def describe_plan(p: AdaptationPlan) -> dict:
    return {"plan_id": p.plan_id,
            "commands": [[c.target_node, c.action.value, c.plugin.plugin_id,
                          getattr(c.plugin.kind, "value", str(c.plugin.kind))]
                         for c in p.commands]}


class AutonomicManager:
    """Stateful MAPE-K loop.  Feed samples with :meth:`observe`; call
    :meth:`tick` at window boundaries.  ``tick`` returns an execution
    generator (see :func:`execute_steps`) when a plan must be applied."""

    def __init__(self, kb: KnowledgeBase, topology, audit: Optional[AuditLog] = None,
                 history_len: int = 8):
        self.kb = kb
        self.topology = topology
        self.audit = audit if audit is not None else AuditLog()
        self.monitor = WindowMonitor(kb.window_s)
        self.history: list[MetricWindow] = []
        self.history_len = history_len
        self.deployed = False
        self.reports: list[ExecutionReport] = []
        self._plans = 0
        self._fresh: list[MetricWindow] = []

    def observe(self, sample: RttSample) -> None:
        self._fresh.extend(self.monitor.add(sample))

    def _next_id(self, prefix: str) -> str:
        self._plans += 1
        return f"{prefix}-{self._plans}"

    def tick(self, now: float, effector):
        closed = self._fresh + self.monitor.close_until(now)
        self._fresh = []
        self.history.extend(closed)
        del self.history[:-self.history_len]
        for w in closed:
            self.audit.append(now, "monitor", {"window_start": w.window_start,
                                               "window_end": w.window_end,
                                               "samples": len(w.samples),
                                               "mean_rtt": w.mean_rtt})
        if not closed:
            return None
        symptom = analyze(self.history, self.kb, epoch_active=self.deployed)
        if symptom is None:
            latest = self.history[-1].mean_rtt
            if (self.deployed and self.kb.reversal_enabled and latest is not None
                    and latest <= self.kb.reversal_fraction * self.kb.rtt_threshold):
                self.audit.append(now, "analyze", {"symptom": None, "recovered": latest})
                return self.apply(now, reversal_plan(self.kb, self.topology,
                                                     self._next_id("reverse")), effector)
            return None
        self.audit.append(now, "analyze", {"symptom": symptom.kind.value,
                                           "observed_mean": symptom.observed_mean,
                                           "forecast_mean": symptom.forecast_mean,
                                           "threshold": symptom.threshold})
        try:
            p = plan(symptom, self.kb, self.topology, self._next_id("plan"))
        except QosError as exc:
            self.audit.append(now, "plan", {"error": exc.code, "detail": exc.detail})
            return None
        return self.apply(now, p, effector)

    def apply(self, now: float, p: AdaptationPlan, effector):
        """Execution generator for ``p``; records the outcome when exhausted."""
        self.audit.append(now, "plan", describe_plan(p))
        deploying = not p.plan_id.startswith("reverse")
        if deploying:
            self.deployed = True

        def run():
            report = yield from execute_steps(p, effector)
            self.reports.append(report)
            if report.ok:
                self.deployed = deploying
            elif deploying:
                self.deployed = False
            self.audit.append(now, "execute", {"plan_id": report.plan_id,
                                               "applied": report.applied,
                                               "rolled_back": report.rolled_back,
                                               "failed_command": report.failed_command,
                                               "error": report.error})
            return report

        return run()


def run_loop(sensor: Iterable[RttSample], effector, kb: KnowledgeBase, topology,
             audit: Optional[AuditLog] = None,
             on_report: Optional[Callable[[ExecutionReport], None]] = None) -> AutonomicManager:
    """Chain monitor, analyze, plan and execute once per completed window
    for as long as ``sensor`` yields samples."""
    am = AutonomicManager(kb, topology, audit)
    boundary = kb.window_s
    for sample in sensor:
        while sample.at >= boundary:
            _run_tick(am, boundary, effector, on_report)
            boundary += kb.window_s
        am.observe(sample)
    return am


def _run_tick(am: AutonomicManager, now: float, effector, on_report) -> None:
    try:
        gen = am.tick(now, effector)
        if gen is None:
            return
        node_id = next(gen)
        while True:
            effector.settle(node_id)
            node_id = gen.send(None)
    except StopIteration as stop:
        if on_report is not None:
            on_report(stop.value)
    except QosError as exc:
        am.audit.append(now, "execute", {"error": exc.code, "detail": exc.detail})
