"""Virtual-time network model and discrete-event engine.

Links are store-and-forward with no contention between messages: a message
of ``n`` bytes leaving at ``t`` is serialized at the link's scheduled
bandwidth (integrated piecewise over breakpoints) and then propagates for
``base_latency`` seconds.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .anf import Forward
from .message import Message
from .node import NodeRole, NodeRuntime


@dataclass(frozen=True)
class LinkProfile:
    base_latency: float
    bandwidth_schedule: tuple  # ((start_time, bits_per_second), ...)

    def __post_init__(self):
        sched = tuple((float(t), float(bw)) for t, bw in self.bandwidth_schedule)
        object.__setattr__(self, "bandwidth_schedule", sched)
        if not sched:
            raise ValueError("empty bandwidth schedule")
        if self.base_latency < 0:
            raise ValueError("negative latency")
        if any(bw <= 0 for _, bw in sched):
            raise ValueError("bandwidths must be > 0")
        times = [t for t, _ in sched]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "_times", times)

    @classmethod
    def constant(cls, latency: float, bandwidth_bps: float) -> "LinkProfile":
        return cls(latency, ((0.0, bandwidth_bps),))

    def _segment(self, t: float) -> int:
        return max(bisect.bisect_right(self._times, t) - 1, 0)

    def bandwidth_at(self, t: float) -> float:
        return self.bandwidth_schedule[self._segment(t)][1]

    def mean_bandwidth(self, t0: float, t1: float) -> float:
        """Time-averaged bandwidth over ``[t0, t1)``."""
        total = 0.0
        t = t0
        i = self._segment(t0)
        while t < t1:
            end = self._times[i + 1] if i + 1 < len(self._times) else t1
            end = min(end, t1)
            total += self.bandwidth_schedule[i][1] * (end - t)
            t = end
            i += 1
        return total / (t1 - t0)


def transmit(size_bytes: int, link: LinkProfile, depart_time: float) -> float:
    """Arrival time of ``size_bytes`` sent over ``link`` at ``depart_time``."""
    if size_bytes < 0:
        raise ValueError("size_bytes must be >= 0")
    bits = 8.0 * size_bytes
    t = depart_time
    i = link._segment(t)
    sched = link.bandwidth_schedule
    while bits > 0:
        bw = sched[i][1]
        if i + 1 < len(sched):
            room = (sched[i + 1][0] - t) * bw
            if room < bits:
                bits -= room
                t = sched[i + 1][0]
                i += 1
                continue
        t += bits / bw
        bits = 0.0
    return t + link.base_latency


class Topology:
    """Nodes plus undirected links; both orientations map to one profile."""

    def __init__(self):
        self.nodes: dict[str, NodeRuntime] = {}
        self.links: dict[tuple[str, str], LinkProfile] = {}

    def add_node(self, node: NodeRuntime) -> NodeRuntime:
        if node.node_id in self.nodes:
            raise ValueError(f"duplicate node {node.node_id}")
        self.nodes[node.node_id] = node
        return node

    def connect(self, a: str, b: str, profile: LinkProfile) -> None:
        for n in (a, b):
            if n not in self.nodes:
                raise ValueError(f"unknown node {n}")
        self.links[(a, b)] = profile
        self.links[(b, a)] = profile

    def link(self, a: str, b: str) -> Optional[LinkProfile]:
        return self.links.get((a, b))

    @property
    def roles(self) -> dict[str, NodeRole]:
        return {nid: n.role for nid, n in self.nodes.items()}

    def resource_paths(self, node_id: str) -> list[str]:
        return sorted(self.nodes[node_id].resource_store)


class Simulator:
    """Single-clock event loop driving node handler generators."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self.now = 0.0
        self._queue: list = []
        self._seq = itertools.count()
        self.hop_log: list[tuple[float, str, str, int]] = []
        self.record_hops = False

    def clock(self) -> float:
        return self.now

    def schedule(self, at: float, fn: Callable, *args) -> None:
        if at < self.now:
            raise ValueError("cannot schedule in the past")
        heapq.heappush(self._queue, (at, next(self._seq), fn, args))

    def run(self, until: Optional[float] = None) -> None:
        while self._queue:
            at = self._queue[0][0]
            if until is not None and at > until:
                break
            at, _, fn, args = heapq.heappop(self._queue)
            self.now = at
            fn(*args)

    def send(self, sender: str, to: str, message: Message,
             on_response: Callable[[Message], None]) -> None:
        """Carry ``message`` to node ``to`` and its response back."""
        link = self.topology.link(sender, to)
        if link is None or to not in self.topology.nodes:
            reply = message.error_reply("UPSTREAM_UNREACHABLE", self.now)
            self.schedule(self.now, on_response, reply)
            return
        size = message.wire_size
        if self.record_hops:
            self.hop_log.append((self.now, sender, to, size))
        self.schedule(transmit(size, link, self.now), self._deliver,
                      sender, to, message, link, on_response)

    def _deliver(self, sender, to, message, link, on_response) -> None:
        node = self.topology.nodes[to]
        gen = node.handle_message(message, clock=self.clock)

        def back(response: Message) -> None:
            size = response.wire_size
            if self.record_hops:
                self.hop_log.append((self.now, to, sender, size))
            self.schedule(transmit(size, link, self.now), on_response, response)

        self.spawn(gen, to, back)

    def spawn(self, gen, origin: Optional[str], done: Callable) -> None:
        """Drive ``gen``: ``Forward`` actions travel from ``origin``; a
        string action waits until that node has settled."""
        self._step(gen, origin, done, None, True)

    def _step(self, gen, origin, done, value, first=False) -> None:
        try:
            action = next(gen) if first else gen.send(value)
        except StopIteration as stop:
            done(stop.value)
            return

        def resume(v=None):
            self._step(gen, origin, done, v)

        if isinstance(action, Forward):
            self.send(origin, action.to, action.message, resume)
        elif isinstance(action, str):
            node = self.topology.nodes.get(action)
            if node is None:
                self.schedule(self.now, resume)
            else:
                node.when_settled(lambda: self.schedule(self.now, resume))
        else:
            raise TypeError(f"unexpected action {action!r}")
