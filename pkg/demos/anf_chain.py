"""Deploy redirector, compressor and decompressor by hand and watch a
map tile travel through them.

    python demos/anf_chain.py
"""

from iotqos import anf
from iotqos.message import Kind, Message, ResourceAddress, Verb
from iotqos.node import LocalNetwork, NodeRole, NodeRuntime, PluginDescriptor, PluginKind
from iotqos.scenario import PayloadClass, synthesize_payload

tile = synthesize_payload(PayloadClass.REPETITIVE, 200_000, (1, 0))

server = NodeRuntime("server", NodeRole.SERVER)
fog = NodeRuntime("fog", NodeRole.FOG)
gw = NodeRuntime("gw", NodeRole.GATEWAY, {"maps/tile0": tile})
net = LocalNetwork([server, fog, gw])

# Log every node-to-node hop with its wire size.
deliver = net.deliver


def traced(m, to, sender=None):
    r = deliver(m, to, sender)
    print(f"  {sender or 'app':>6} -> {to:<6} request {m.wire_size:>7} B, "
          f"response {r.wire_size:>7} B ({r.encoding.value})")
    return r


net.deliver = traced

req = Message(Kind.REQUEST, Verb.RETRIEVE, "req-1", ResourceAddress.parse("app/navigation"),
              ResourceAddress.parse("gw/maps/tile0"))

print("without ANFs:")
plain = net.deliver(req, "server")

# gateway first, so compressed traffic is understood before it arrives
gw.install_plugin(PluginDescriptor("u", PluginKind.DECOMPRESSOR,
                                   anf.DecompressorConfig(peers=frozenset({"fog"})), 10))
gw.start_plugin("u")
fog.install_plugin(PluginDescriptor("c", PluginKind.COMPRESSOR, anf.CompressorConfig("gw"), 10))
fog.start_plugin("c")
server.install_plugin(PluginDescriptor(
    "r", PluginKind.REDIRECTOR,
    anf.RedirectionPolicy({"gw/maps/tile0": "fog/compress/maps/tile0"}), 10))
server.start_plugin("r")

print("with redirector, compressor and decompressor:")
chained = net.deliver(req, "server")
assert chained.payload == plain.payload == tile
print(f"payload identical: {len(tile)} bytes; radio hop carried "
      f"{len(anf.deflate(tile))} compressed bytes")
