"""Checking a recorded trace against a policy.

Traces are JSON Lines.  Object records declare attribute snapshots at an
instant; event records connect two declared objects.  Ingestion builds a
system graph, matching finds every place a policy's domain holds, and the
verdict tests each match's requirement.

Run me:  python3 demos/02_checking_traces.py
"""

from policygraph import (
    build_report,
    find_matches,
    ingest_trace,
    parse_policy,
    read_jsonl,
    render_jsonl,
    render_text,
    verdict,
)

TRACE = """\
{"t": 1, "object": {"id": "john", "attrs": {"type": "user", "sec_level": 0}}}
{"t": 1, "object": {"id": "jane", "attrs": {"type": "user", "sec_level": 2}}}
{"t": 1, "object": {"id": "a", "attrs": {"type": "file", "sec_level": 0}}}
{"t": 1, "object": {"id": "b", "attrs": {"type": "file", "sec_level": 2}}}
{"t": 1, "event": {"src": "john", "dest": "a", "params": {"method": "read"}}}
{"t": 2, "event": {"src": "john", "dest": "b", "params": {"method": "read"}}}
{"t": 3, "event": {"src": "jane", "dest": "b", "params": {"method": "write"}}}
"""

policy = parse_policy(
    """
policy no_read_up {
  node u domain: type = "user" && sec_level = $UL
  node f domain: type = "file" && sec_level = $FL
  edge r: u -> f domain: method = "read" req: $UL >= $FL
}
"""
)

graph = ingest_trace(read_jsonl(TRACE.splitlines()))
print(f"ingested {graph.object_count()} objects, {len(graph.events)} events, horizon t={graph.horizon}\n")

# The domain matches wherever a user reads a file.  John's two reads match;
# jane's write does not (the edge domain wants method = "read").
print("=== Domain matches ===\n")
for m in find_matches(policy, graph):
    event = graph.events[m.edge_events["r"]]
    print(
        f"  t={event.time}  {event.src} -> {event.dest}   "
        f"captured: " + ", ".join(f"${v}={val!r}" for v, val in sorted(m.bindings.items()))
    )

# The verdict applies the requirement ($UL >= $FL) at each match.  Reading
# the public file is fine; reading the secret one from an unclassified
# account is the violation.
print("\n=== Verdict ===\n")
v = verdict(policy, graph)
print(f"  upheld: {v.upheld}")
for w in v.violations:
    event = graph.events[w.match.edge_events["r"]]
    print(
        f"  violation at t={event.time}: {event.src} read {event.dest} "
        f"with ${'UL'}={w.match.bindings['UL']} < ${'FL'}={w.match.bindings['FL']}"
    )

# Reports wrap composite verdicts for people (text) and machines (jsonl).
print("\n=== Text report ===\n")
report = build_report([policy], graph)
print(render_text(report))

print("=== JSON Lines report ===\n")
print(render_jsonl(report))
