"""Feed a rising RTT trace to the autonomic manager and print its audit log.

    python demos/mape_loop.py
"""

from iotqos.autonomic import AuditLog, KnowledgeBase, NodeEffector, RttSample, run_loop
from iotqos.netsim import Topology
from iotqos.node import NodeRole, NodeRuntime

topo = Topology()
for node_id, role in [("server", NodeRole.SERVER), ("fog", NodeRole.FOG),
                      ("gw", NodeRole.GATEWAY)]:
    topo.add_node(NodeRuntime(node_id, role))
topo.nodes["gw"].resource_store.update({f"maps/tile{i}": b"" for i in range(3)})

# RTT creeps up by 0.15 s per 20 s window, ten samples per window
trace = [RttSample(f"req-{w}-{i}", 0.3 + 0.15 * w, 20.0 * w + 2.0 * i)
         for w in range(8) for i in range(10)]

audit = AuditLog()
am = run_loop(trace, NodeEffector(topo.nodes), KnowledgeBase(), topo, audit,
              on_report=lambda r: print(f"executed {r.plan_id}: {r.applied} commands"))
for line in audit.lines():
    print(line)
for node_id, node in topo.nodes.items():
    print(node_id, [e[0] for e in node.snapshot.entries])
