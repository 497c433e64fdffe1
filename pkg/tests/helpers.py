from pathlib import Path

from iotqos.message import Kind, Message, ResourceAddress, Verb
from iotqos.netsim import Topology
from iotqos.node import NodeRole, NodeRuntime

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG = ROOT / "scenarios" / "vehicular-default.json"


def retrieve(dst: str, cid: str = "c1", src: str = "app/navigation", t: float = 0.0) -> Message:
    return Message(Kind.REQUEST, Verb.RETRIEVE, cid, ResourceAddress.parse(src),
                   ResourceAddress.parse(dst), b"", created_at=t)


def middleware(resources: dict[str, bytes] | None = None) -> Topology:
    """server, fog and gw nodes; gw holds ``resources``."""
    topo = Topology()
    topo.add_node(NodeRuntime("server", NodeRole.SERVER))
    topo.add_node(NodeRuntime("fog", NodeRole.FOG))
    topo.add_node(NodeRuntime("gw", NodeRole.GATEWAY, resources or {}))
    return topo
