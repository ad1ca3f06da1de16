"""Enforcing policies live, one event at a time.

The monitor consumes the same records as batch checking, but decides each
event as it arrives: if admitting the event would complete a match that
fails its requirement, the event is denied and rolled back as if it never
happened.  Everything already committed stays committed.

Run me:  python3 demos/03_streaming_monitor.py
"""

from policygraph import Monitor, ingest_trace, parse_policy, verdict_all

# A counting policy: four parallel edges, the fourth of which is forbidden.
# Three retrievals by one client against one server are fine; the fourth
# completes an assignment of all four edges and is denied.
budget = parse_policy(
    """
policy retrieval_budget {
  node c domain: type = "client"
  node s domain: type = "server"
  edge g1: c -> s domain: op = "get"
  edge g2: c -> s domain: op = "get"
  edge g3: c -> s domain: op = "get"
  edge g4: c -> s domain: op = "get" req: false
}
"""
)

records = [
    {"t": 1, "object": {"id": "cam", "attrs": {"type": "client"}}},
    {"t": 1, "object": {"id": "img", "attrs": {"type": "server"}}},
    {"t": 2, "event": {"src": "cam", "dest": "img", "params": {"op": "get"}}},
    {"t": 3, "event": {"src": "cam", "dest": "img", "params": {"op": "get"}}},
    {"t": 4, "event": {"src": "cam", "dest": "img", "params": {"op": "get"}}},
    {"t": 5, "event": {"src": "cam", "dest": "img", "params": {"op": "get"}}},
    {"t": 6, "event": {"src": "cam", "dest": "img", "params": {"op": "get"}}},
]

print("=== Streaming decisions ===\n")
monitor = Monitor([budget])
for decision in monitor.run(records):
    print(" ", decision.line())

# The two denied attempts left nothing behind: the committed history holds
# three get events, and judging it batch-style agrees it is clean.
print("\n=== Committed history ===\n")
print(f"  events committed: {len(monitor.graph.events)}")
print(f"  end-of-stream verdicts upheld: {monitor.verdicts().upheld}")

# A denial-free stream commits everything, and the monitor's final verdicts
# coincide with checking the full trace in batch.
print("\n=== Batch agreement on a clean stream ===\n")
clean = records[:5]  # stop after the third get
fresh = Monitor([budget])
decisions = list(fresh.run(clean))
print(f"  decisions: {', '.join('allow' if d.allowed else 'deny' for d in decisions)}")
print(f"  monitor graph == batch graph: {fresh.graph == ingest_trace(clean)}")
print(f"  verdicts agree: {fresh.verdicts() == verdict_all([budget], ingest_trace(clean))}")
