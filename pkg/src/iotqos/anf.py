"""Application network functions: redirector, compressor, decompressor.

Handlers are written as generators so the same code runs under the
synchronous in-process network and under the discrete-event simulator.
``on_request`` may ``yield Forward(message, to)`` and receives the
upstream response back; it returns either a REQUEST (continue down the
chain) or a RESPONSE (chain terminates here).  ``on_response`` is then
called in reverse order on every handler that let the request continue.
"""

from __future__ import annotations

import zlib
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Generator, Mapping, Optional, Union

from .errors import CorruptStream, DoubleCompression, InvalidPolicy
from .message import Encoding, Kind, Message, ResourceAddress

DEFAULT_MIN_PAYLOAD = 64


@dataclass(frozen=True)
class Forward:
    """Action yielded by a handler: send ``message`` to node ``to``."""

    message: Message
    to: str


@dataclass(frozen=True)
class HandlerContext:
    node_id: str
    snapshot_id: int
    clock: Callable[[], float] = lambda: 0.0

    def now(self) -> float:
        return self.clock()


HandlerGen = Generator[Forward, Message, Message]
Forwarder = Callable[[Message, str], Message]


class _Pass:
    def __repr__(self):
        return "PASS"


PASS = _Pass()


# -- DEFLATE / INFLATE -------------------------------------------------------

@lru_cache(maxsize=256)
def deflate(data: bytes, level: int = -1) -> bytes:
    """Raw RFC 1951 stream (no zlib or gzip wrapper).

    Memoized: the simulator re-sends the same resources many times.
    """
    c = zlib.compressobj(level, zlib.DEFLATED, -15)
    return c.compress(data) + c.flush()


def inflate(stream: bytes) -> bytes:
    d = zlib.decompressobj(-15)
    try:
        out = d.decompress(stream) + d.flush()
    except zlib.error as exc:
        raise CorruptStream(str(exc)) from None
    if not d.eof or d.unused_data:
        raise CorruptStream("truncated stream or trailing data")
    return out


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class RedirectionPolicy:
    """Exact-match map from canonical destination text to a new address."""

    rules: Mapping[str, ResourceAddress] = field(default_factory=dict)

    def __post_init__(self):
        rules = {}
        for key, target in dict(self.rules).items():
            key = str(ResourceAddress.parse(key)) if isinstance(key, str) else str(key)
            if isinstance(target, str):
                target = ResourceAddress.parse(target)
            rules[key] = target
        for key, target in rules.items():
            if str(target) == key:
                raise InvalidPolicy(f"rule maps {key} to itself")
            if str(target) in rules:
                raise InvalidPolicy(f"replacement {target} is itself a key")
        object.__setattr__(self, "rules", dict(sorted(rules.items())))

    def __hash__(self):
        return hash(tuple(self.rules.items()))

    def match(self, destination: Optional[ResourceAddress]) -> Optional[ResourceAddress]:
        if destination is None:
            return None
        return self.rules.get(str(destination))


@dataclass(frozen=True)
class CompressorConfig:
    """``forward_to`` is the next-hop node id.

    Requests reach the compressor addressed ``<fog>/<mount>/<path...>``;
    they are forwarded as ``<forward_to>/<path...>``.
    """

    forward_to: str
    min_payload_bytes: int = DEFAULT_MIN_PAYLOAD
    mount: str = "compress"

    def __post_init__(self):
        if self.min_payload_bytes < 0:
            raise ValueError("min_payload_bytes must be >= 0")


@dataclass(frozen=True)
class DecompressorConfig:
    """``peers``: node ids whose requests get DEFLATE-encoded responses."""

    peers: frozenset = frozenset()
    min_payload_bytes: int = DEFAULT_MIN_PAYLOAD

    def __post_init__(self):
        object.__setattr__(self, "peers", frozenset(self.peers))
        if self.min_payload_bytes < 0:
            raise ValueError("min_payload_bytes must be >= 0")


# -- payload transforms ---------------------------------------------------------

def deflate_message(m: Message, min_payload_bytes: int = 0) -> Message:
    if m.encoding is Encoding.DEFLATE:
        raise DoubleCompression(m.correlation_id)
    if len(m.payload) < min_payload_bytes:
        return m
    return m.evolve(payload=deflate(m.payload), encoding=Encoding.DEFLATE)


def inflate_message(m: Message) -> Message:
    if m.encoding is Encoding.IDENTITY:
        return m
    return m.evolve(payload=inflate(m.payload), encoding=Encoding.IDENTITY)


# -- handlers ------------------------------------------------------------------

class Handler:
    def on_request(self, m: Message, ctx: HandlerContext) -> HandlerGen:
        return m
        yield  # pragma: no cover

    def on_response(self, request: Message, response: Message,
                    ctx: HandlerContext) -> Message:
        return response


class Redirector(Handler):
    def __init__(self, policy: RedirectionPolicy):
        self.policy = policy

    def on_request(self, m, ctx):
        target = self.policy.match(m.destination)
        if target is None:
            return m
        response = yield Forward(m.evolve(destination=target), target.node_id)
        return m.reply(response.payload, response.encoding, ctx.now())


class Compressor(Handler):
    def __init__(self, config: CompressorConfig):
        self.config = config

    def on_request(self, m, ctx):
        dst = m.destination
        if dst is None or len(dst.path) < 2 or dst.path[0] != self.config.mount:
            return m
        out = deflate_message(m, self.config.min_payload_bytes)
        out = out.evolve(
            source=m.source.with_node(ctx.node_id),
            destination=ResourceAddress(self.config.forward_to, dst.path[1:]),
        )
        response = yield Forward(out, self.config.forward_to)
        response = inflate_message(response)
        return m.reply(response.payload, response.encoding, ctx.now())


class Decompressor(Handler):
    def __init__(self, config: DecompressorConfig = DecompressorConfig()):
        self.config = config

    def on_request(self, m, ctx):
        return inflate_message(m)
        yield  # pragma: no cover

    def on_response(self, request, response, ctx):
        if request.source.node_id not in self.config.peers or response.is_error:
            return response
        if response.encoding is Encoding.DEFLATE:
            return response
        return deflate_message(response, self.config.min_payload_bytes)


# -- synchronous forms of the three operations ----------------------------------

def drive(gen: HandlerGen, forward: Callable[[Forward], Message]) -> Message:
    """Run a handler generator to completion, serving its forwards."""
    try:
        action = next(gen)
        while True:
            action = gen.send(forward(action))
    except StopIteration as stop:
        return stop.value


def _ctx() -> HandlerContext:
    return HandlerContext("local", 0)


def redirect(m: Message, policy: RedirectionPolicy,
             forwarder: Forwarder) -> Union[Message, _Pass]:
    """Redirect ``m`` if its destination is a policy key, else ``PASS``."""
    out = drive(Redirector(policy).on_request(m, _ctx()),
                lambda f: forwarder(f.message, f.to))
    return PASS if out is m else out


def compress(m: Message, cfg: CompressorConfig, forwarder: Forwarder) -> Message:
    """Deflate the payload, send to ``cfg.forward_to`` and return the response.

    Unlike the chain handler, ``m`` is forwarded with its own destination
    path rebased onto ``cfg.forward_to``.
    """
    out = deflate_message(m, cfg.min_payload_bytes)
    out = out.evolve(destination=ResourceAddress(cfg.forward_to, m.destination.path))
    response = forwarder(out, cfg.forward_to)
    if response.kind is not Kind.RESPONSE:
        raise ValueError("forwarder returned a non-response")
    response = inflate_message(response)
    return m.reply(response.payload, response.encoding, response.created_at)


def decompress(m: Message) -> Message:
    return inflate_message(m)

