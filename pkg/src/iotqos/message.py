"""Message model exchanged between middleware nodes.

The wire form is a compact UTF-8 JSON object with a fixed key order::

    {"kind":"REQUEST","verb":"RETRIEVE","cid":"req-000001","src":"app/nav",
     "dst":"gw/maps/tile0","enc":"identity","payload_b64":"","t":0.0}

Its byte length is the size used for every bandwidth computation in the
simulator, so ``serialize`` must stay deterministic.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .errors import MalformedMessage

WIRE_KEYS = ("kind", "verb", "cid", "src", "dst", "enc", "payload_b64", "t")

# Error responses carry this prefix followed by the ASCII error code.
ERROR_MARKER = b"\x00ERROR\x00"


class Kind(str, Enum):
    REQUEST = "REQUEST"
    RESPONSE = "RESPONSE"


class Verb(str, Enum):
    CREATE = "CREATE"
    RETRIEVE = "RETRIEVE"
    UPDATE = "UPDATE"
    DELETE = "DELETE"


class Encoding(str, Enum):
    IDENTITY = "identity"
    DEFLATE = "deflate"


@dataclass(frozen=True)
class ResourceAddress:
    """``node_id`` plus a non-empty resource path, e.g. ``gw1/maps/tile7``."""

    node_id: str
    path: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))
        if not isinstance(self.node_id, str) or not self.node_id or "/" in self.node_id:
            raise ValueError(f"invalid node id {self.node_id!r}")
        if not self.path:
            raise ValueError("resource path needs at least one segment")
        for seg in self.path:
            if not isinstance(seg, str) or not seg or "/" in seg:
                raise ValueError(f"invalid path segment {seg!r}")

    @classmethod
    def parse(cls, text: str) -> "ResourceAddress":
        parts = text.split("/")
        if len(parts) < 2:
            raise ValueError(f"address {text!r} has no path")
        return cls(parts[0], tuple(parts[1:]))

    @property
    def resource_path(self) -> str:
        return "/".join(self.path)

    def with_node(self, node_id: str) -> "ResourceAddress":
        return ResourceAddress(node_id, self.path)

    def __str__(self):
        return self.node_id + "/" + "/".join(self.path)


@dataclass(frozen=True)
class Message:
    kind: Kind
    verb: Verb
    correlation_id: str
    source: ResourceAddress
    destination: Optional[ResourceAddress]
    payload: bytes = b""
    encoding: Encoding = Encoding.IDENTITY
    created_at: float = 0.0
    # Not part of the wire format.
    _size: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "verb", Verb(self.verb))
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        object.__setattr__(self, "payload", bytes(self.payload))
        object.__setattr__(self, "created_at", float(self.created_at))
        if not isinstance(self.correlation_id, str) or not self.correlation_id:
            raise ValueError("correlation_id must be a non-empty string")

    @property
    def is_error(self) -> bool:
        return self.kind is Kind.RESPONSE and self.payload.startswith(ERROR_MARKER)

    @property
    def error_code(self) -> Optional[str]:
        if not self.is_error:
            return None
        return self.payload[len(ERROR_MARKER):].decode("ascii", "replace")

    def reply(self, payload: bytes = b"", encoding: Encoding = Encoding.IDENTITY,
              t: float = 0.0) -> "Message":
        """Response to this request, addressed back to its source."""
        src = self.destination if self.destination is not None else self.source
        return Message(Kind.RESPONSE, self.verb, self.correlation_id, src,
                       self.source, payload, encoding, t)

    def error_reply(self, code: str, t: float = 0.0) -> "Message":
        return self.reply(ERROR_MARKER + code.encode("ascii"), Encoding.IDENTITY, t)

    def evolve(self, **changes) -> "Message":
        return replace(self, **changes)

    @property
    def wire_size(self) -> int:
        """``len(serialize(self))`` without encoding the payload."""
        if not self._size:
            header = len(serialize(replace(self, payload=b"")))
            self._size.append(header + 4 * ((len(self.payload) + 2) // 3))
        return self._size[0]


def serialize(m: Message) -> bytes:
    doc = {
        "kind": m.kind.value,
        "verb": m.verb.value,
        "cid": m.correlation_id,
        "src": str(m.source),
        "dst": None if m.destination is None else str(m.destination),
        "enc": m.encoding.value,
        "payload_b64": base64.b64encode(m.payload).decode("ascii"),
        "t": float(m.created_at),
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False).encode("utf-8")


def _ordered_pairs(pairs):
    keys = tuple(k for k, _ in pairs)
    if keys != WIRE_KEYS:
        raise MalformedMessage(f"expected keys {WIRE_KEYS}, got {keys}")
    return dict(pairs)


def deserialize(b: bytes) -> Message:
    try:
        doc = json.loads(bytes(b).decode("utf-8"), object_pairs_hook=_ordered_pairs)
    except MalformedMessage:
        raise
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedMessage(f"not a JSON message: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedMessage("top level is not an object")
    try:
        kind = Kind(doc["kind"])
        verb = Verb(doc["verb"])
        enc = Encoding(doc["enc"])
    except ValueError as exc:
        raise MalformedMessage(str(exc)) from None
    cid, src, dst, t = doc["cid"], doc["src"], doc["dst"], doc["t"]
    if not isinstance(cid, str) or not cid:
        raise MalformedMessage("bad cid")
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
        raise MalformedMessage("bad timestamp")
    if not isinstance(doc["payload_b64"], str):
        raise MalformedMessage("payload_b64 is not a string")
    try:
        payload = base64.b64decode(doc["payload_b64"].encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise MalformedMessage(f"invalid base64 payload: {exc}") from None
    try:
        source = ResourceAddress.parse(src) if isinstance(src, str) else None
        destination = ResourceAddress.parse(dst) if isinstance(dst, str) else None
    except ValueError as exc:
        raise MalformedMessage(str(exc)) from None
    if source is None or (dst is not None and destination is None):
        raise MalformedMessage("bad address")
    return Message(kind, verb, cid, source, destination, payload, enc, float(t))
