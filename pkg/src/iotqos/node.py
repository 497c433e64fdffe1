"""Middleware node runtime with a hot-swappable handler chain.

Lifecycle operations (install/start/stop/update/uninstall) are serialized
by an administrative lock and publish a new immutable
:class:`HandlerChainSnapshot`.  A message binds to the snapshot current at
admission and keeps it until its response is produced, so a reconfiguration
never affects messages already inside the node.
"""

from __future__ import annotations

import itertools
import threading
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Iterable, Optional

from . import anf
from .anf import Forward, Handler, HandlerContext
from .errors import (AlreadyStarted, CoreProtected, DuplicatePlugin, InvalidPosition,
                     NotFound, NotStarted, QosError, UninstallWhileStarted,
                     UnknownPlugin, UpstreamUnreachable)
from .message import Kind, Message, Verb

CORE_ID = "core"
CORE_POSITION = 1000


class NodeRole(str, Enum):
    APPLICATION = "APPLICATION"
    SERVER = "SERVER"
    FOG = "FOG"
    GATEWAY = "GATEWAY"
    DEVICE = "DEVICE"


class PluginKind(str, Enum):
    REDIRECTOR = "REDIRECTOR"
    COMPRESSOR = "COMPRESSOR"
    DECOMPRESSOR = "DECOMPRESSOR"
    CORE = "CORE"


class PluginState(str, Enum):
    INSTALLED = "INSTALLED"
    STARTED = "STARTED"
    STOPPED = "STOPPED"


@dataclass(frozen=True)
class PluginDescriptor:
    plugin_id: str
    kind: Any
    config: Any = None
    chain_position: int = 0
    state: PluginState = PluginState.INSTALLED


@dataclass(frozen=True)
class HandlerChainSnapshot:
    snapshot_id: int
    entries: tuple  # (plugin_id, kind, config) of STARTED plugins, chain order
    handlers: tuple = ()

    @property
    def kinds(self) -> list:
        return [kind for _, kind, _ in self.entries]


class Core(Handler):
    """Terminal handler: local store access or retargeting to another node."""

    def __init__(self, node: "NodeRuntime"):
        self.node = node

    def on_request(self, m, ctx):
        dst = m.destination
        if dst is None:
            return m.error_reply("MALFORMED_MESSAGE", ctx.now())
        if dst.node_id != self.node.node_id:
            response = yield Forward(m, dst.node_id)
            return response
        path = dst.resource_path
        store = self.node.resource_store
        if m.verb is Verb.RETRIEVE:
            if path not in store:
                raise NotFound(path)
            return m.reply(store[path], t=ctx.now())
        if m.verb is Verb.DELETE:
            if store.pop(path, None) is None:
                raise NotFound(path)
            return m.reply(t=ctx.now())
        if m.verb is Verb.UPDATE and path not in store:
            raise NotFound(path)
        store[path] = m.payload
        return m.reply(t=ctx.now())


# kind -> factory(config, node) -> Handler.  Extensible with further NF kinds.
HANDLER_FACTORIES: dict = {
    PluginKind.REDIRECTOR: lambda cfg, node: anf.Redirector(cfg),
    PluginKind.COMPRESSOR: lambda cfg, node: anf.Compressor(cfg),
    PluginKind.DECOMPRESSOR: lambda cfg, node: anf.Decompressor(
        cfg if cfg is not None else anf.DecompressorConfig()),
    PluginKind.CORE: lambda cfg, node: Core(node),
}


def register_handler(kind, factory: Callable[[Any, "NodeRuntime"], Handler]) -> None:
    HANDLER_FACTORIES[kind] = factory


class NodeRuntime:
    def __init__(self, node_id: str, role: NodeRole, resources: Optional[dict] = None,
                 core_position: int = CORE_POSITION):
        self.node_id = node_id
        self.role = NodeRole(role)
        self.resource_store: dict[str, bytes] = dict(resources or {})
        self._admin = threading.RLock()
        self._cond = threading.Condition()
        self._snapshot_ids = itertools.count(1)
        self._plugins: dict[str, PluginDescriptor] = {
            CORE_ID: PluginDescriptor(CORE_ID, PluginKind.CORE, None, core_position,
                                      PluginState.STARTED)
        }
        self._inflight: Counter = Counter()
        self._settle_listeners: list = []
        self.admitted = 0
        self.completed = 0
        self.failed = 0
        self.lifecycle_log: list[tuple[str, str]] = []
        self._snapshot = self._build_snapshot()

    def __repr__(self):
        return f"NodeRuntime({self.node_id!r}, {self.role.value})"

    # -- inspection ---------------------------------------------------------

    @property
    def snapshot(self) -> HandlerChainSnapshot:
        return self._snapshot

    @property
    def plugins(self) -> dict[str, PluginDescriptor]:
        with self._admin:
            return dict(self._plugins)

    def inventory(self) -> dict:
        """Hashable view of installed plugins, for before/after comparisons."""
        return {pid: (d.kind, d.state, d.config, d.chain_position)
                for pid, d in self.plugins.items()}

    @property
    def in_flight(self) -> int:
        with self._cond:
            return sum(self._inflight.values())

    # -- lifecycle ------------------------------------------------------------

    def _build_snapshot(self) -> HandlerChainSnapshot:
        started = sorted((d for d in self._plugins.values()
                          if d.state is PluginState.STARTED),
                         key=lambda d: d.chain_position)
        entries = tuple((d.plugin_id, d.kind, d.config) for d in started)
        handlers = tuple(HANDLER_FACTORIES[d.kind](d.config, self) for d in started)
        return HandlerChainSnapshot(next(self._snapshot_ids), entries, handlers)

    def _publish(self) -> HandlerChainSnapshot:
        snap = self._build_snapshot()
        with self._cond:
            self._snapshot = snap
        self._check_settled()
        return snap

    def _get(self, plugin_id: str) -> PluginDescriptor:
        try:
            return self._plugins[plugin_id]
        except KeyError:
            raise UnknownPlugin(f"{plugin_id} on {self.node_id}") from None

    def _guard_core(self, plugin_id: str) -> None:
        if self._get(plugin_id).kind is PluginKind.CORE:
            raise CoreProtected(self.node_id)

    def install_plugin(self, descriptor: PluginDescriptor) -> PluginDescriptor:
        with self._admin:
            if descriptor.kind is PluginKind.CORE:
                raise CoreProtected("only one CORE per node")
            if descriptor.kind not in HANDLER_FACTORIES:
                raise ValueError(f"no handler registered for {descriptor.kind!r}")
            if descriptor.plugin_id in self._plugins:
                raise DuplicatePlugin(descriptor.plugin_id)
            pos = descriptor.chain_position
            core_pos = self._plugins[CORE_ID].chain_position
            taken = {d.chain_position for d in self._plugins.values()}
            if pos < 0 or pos >= core_pos or pos in taken:
                raise InvalidPosition(f"{descriptor.plugin_id} at {pos}")
            stored = replace(descriptor, state=PluginState.INSTALLED)
            self._plugins[stored.plugin_id] = stored
            self.lifecycle_log.append(("install", stored.plugin_id))
            return stored

    def start_plugin(self, plugin_id: str) -> HandlerChainSnapshot:
        with self._admin:
            d = self._get(plugin_id)
            if d.state is PluginState.STARTED:
                raise AlreadyStarted(plugin_id)
            self._plugins[plugin_id] = replace(d, state=PluginState.STARTED)
            self.lifecycle_log.append(("start", plugin_id))
            return self._publish()

    def stop_plugin(self, plugin_id: str) -> HandlerChainSnapshot:
        with self._admin:
            self._guard_core(plugin_id)
            d = self._get(plugin_id)
            if d.state is not PluginState.STARTED:
                raise NotStarted(plugin_id)
            self._plugins[plugin_id] = replace(d, state=PluginState.STOPPED)
            self.lifecycle_log.append(("stop", plugin_id))
            return self._publish()

    def update_plugin(self, plugin_id: str, config: Any) -> HandlerChainSnapshot:
        with self._admin:
            self._guard_core(plugin_id)
            d = self._get(plugin_id)
            self._plugins[plugin_id] = replace(d, config=config)
            self.lifecycle_log.append(("update", plugin_id))
            if d.state is PluginState.STARTED:
                return self._publish()
            return self._snapshot

    def uninstall_plugin(self, plugin_id: str) -> None:
        with self._admin:
            self._guard_core(plugin_id)
            if self._get(plugin_id).state is PluginState.STARTED:
                raise UninstallWhileStarted(plugin_id)
            del self._plugins[plugin_id]
            self.lifecycle_log.append(("uninstall", plugin_id))

    # -- settling -------------------------------------------------------------

    def settled(self) -> bool:
        """True once no message admitted under an older snapshot is in flight."""
        with self._cond:
            current = self._snapshot.snapshot_id
            return not any(n for sid, n in self._inflight.items() if sid < current)

    def wait_settled(self, timeout: Optional[float] = None) -> bool:
        with self._cond:
            return self._cond.wait_for(self.settled, timeout)

    def when_settled(self, callback: Callable[[], None]) -> None:
        with self._cond:
            if not self.settled():
                self._settle_listeners.append(callback)
                return
        callback()

    def _check_settled(self) -> None:
        with self._cond:
            if not self.settled():
                return
            fire, self._settle_listeners = self._settle_listeners, []
            self._cond.notify_all()
        for cb in fire:
            cb()

    # -- message handling -------------------------------------------------------

    def _admit(self, snapshot: Optional[HandlerChainSnapshot]) -> HandlerChainSnapshot:
        with self._cond:
            snap = snapshot or self._snapshot
            self.admitted += 1
            self._inflight[snap.snapshot_id] += 1
            return snap

    def _finish(self, snap: HandlerChainSnapshot, failed: bool) -> None:
        with self._cond:
            self._inflight[snap.snapshot_id] -= 1
            if not self._inflight[snap.snapshot_id]:
                del self._inflight[snap.snapshot_id]
            if failed:
                self.failed += 1
            else:
                self.completed += 1
        self._check_settled()

    def handle_message(self, m: Message, snapshot: Optional[HandlerChainSnapshot] = None,
                       clock: Callable[[], float] = lambda: 0.0):
        """Generator processing one REQUEST; returns its RESPONSE.

        Yields :class:`~iotqos.anf.Forward` actions that the driver must
        answer with the upstream response.
        """
        if m.kind is not Kind.REQUEST:
            raise ValueError("handle_message expects a REQUEST")
        snap = self._admit(snapshot)
        ctx = HandlerContext(self.node_id, snap.snapshot_id, clock)
        response = None
        try:
            response = yield from _run_chain(snap.handlers, m, ctx)
        finally:
            self._finish(snap, failed=response is None or response.is_error)
        return response


def _run_chain(handlers, m: Message, ctx: HandlerContext):
    trail = []
    current = m
    response = None
    for handler in handlers:
        try:
            out = yield from handler.on_request(current, ctx)
        except QosError as exc:
            out = current.error_reply(exc.code, ctx.now())
        if out.kind is Kind.RESPONSE:
            response = out
            break
        trail.append((handler, current))
        current = out
    if response is None:
        response = m.error_reply("NOT_FOUND", ctx.now())
    for handler, seen in reversed(trail):
        try:
            response = handler.on_response(seen, response, ctx)
        except QosError as exc:
            response = seen.error_reply(exc.code, ctx.now())
    return response


class LocalNetwork:
    """Synchronous in-process network: forwards are direct nested calls.

    ``links`` restricts which node pairs may talk; ``None`` allows all.
    Safe to drive from several threads at once.
    """

    def __init__(self, nodes: Iterable[NodeRuntime],
                 links: Optional[Iterable[tuple[str, str]]] = None,
                 clock: Callable[[], float] = lambda: 0.0):
        self.nodes = {n.node_id: n for n in nodes}
        self.links = None if links is None else (
            {tuple(p) for p in links} | {(b, a) for a, b in links})
        self.clock = clock

    def reachable(self, a: str, b: str) -> bool:
        if b not in self.nodes:
            return False
        return self.links is None or (a, b) in self.links

    def deliver(self, m: Message, to: str, sender: Optional[str] = None) -> Message:
        if sender is not None and not self.reachable(sender, to) or to not in self.nodes:
            return m.error_reply(UpstreamUnreachable.code, self.clock())
        gen = self.nodes[to].handle_message(m, clock=self.clock)
        return anf.drive(gen, lambda fwd: self.deliver(fwd.message, fwd.to, sender=to))
