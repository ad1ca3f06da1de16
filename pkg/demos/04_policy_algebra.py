"""Combining and comparing policies.

Policies compose: conjunction enforces both, disjunction excuses a match
when either requirement holds, reversal demands that every match FAIL.
Where two policies share a graph and domain there is a graph form (one new
policy); otherwise composites are evaluated per match.  Coverage and
containment questions are answered exhaustively over a small, explicit
universe of systems — bounded evidence, labeled as such.

Run me:  python3 demos/04_policy_algebra.py
"""

from policygraph import (
    PolicyGraph,
    UniverseBounds,
    conjoin_same_domain,
    contains,
    coverage_compare,
    disjoin,
    domain_of,
    enumerate_systems,
    eval_policy_expr,
    ingest_trace,
    parse_policy,
    parse_predicate,
    print_policy,
    reverse,
    verdict,
)

no_read_up = parse_policy(
    """
policy no_read_up {
  node u domain: type = "user" && sec_level = $UL
  node f domain: type = "file" && sec_level = $FL
  edge r: u -> f domain: method = "read" req: $UL >= $FL
}
"""
)

print("=== Conjunction (graph form, same domain) ===\n")
# Same graph and domain, extra requirement: files above level 8 are off
# limits no matter who asks.  The conjunction just ANDs the requirements.
ceiling = PolicyGraph(
    "level_ceiling",
    no_read_up.graph,
    dict(no_read_up.domain_preds),
    {"u": parse_predicate("true"), "f": parse_predicate("true"), "r": parse_predicate("$FL < 8")},
)
both = conjoin_same_domain(no_read_up, ceiling)
print(print_policy(both), end="")

print("\n=== Reversal (graph form) ===\n")
# The reversal of no-read-up holds only where the original fails: a system
# upholds it when EVERY read is a read-up.  Useful for writing honeypot or
# anomaly policies as the mirror image of a safety policy.
for disjunct in reverse(no_read_up).operands:
    print(print_policy(disjunct.policy), end="")

TRACE = [
    {"t": 1, "object": {"id": "john", "attrs": {"type": "user", "sec_level": 0}}},
    {"t": 1, "object": {"id": "a", "attrs": {"type": "file", "sec_level": 0}}},
    {"t": 1, "object": {"id": "b", "attrs": {"type": "file", "sec_level": 2}}},
    {"t": 1, "event": {"src": "john", "dest": "a", "params": {"method": "read"}}},
    {"t": 2, "event": {"src": "john", "dest": "b", "params": {"method": "read"}}},
]
graph = ingest_trace(TRACE)

print("\n=== Disjunction (per-match semantics) ===\n")
# Each policy alone is violated somewhere, but every individual match is
# excused by one of the two, so the disjunction is upheld.
secret_only = PolicyGraph(
    "secret_files_only",
    no_read_up.graph,
    dict(no_read_up.domain_preds),
    {"u": parse_predicate("true"), "f": parse_predicate("true"), "r": parse_predicate("$FL = 2")},
)
print(f"  no_read_up alone:        {'upheld' if verdict(no_read_up, graph).upheld else 'violated'}")
print(f"  secret_files_only alone: {'upheld' if verdict(secret_only, graph).upheld else 'violated'}")
upheld = eval_policy_expr(disjoin(no_read_up, secret_only), graph)
print(f"  their disjunction:       {'upheld' if upheld else 'violated'}   (each match excused by one side)")

print("\n=== Coverage over a bounded universe ===\n")
universe = UniverseBounds(
    max_objects=1,
    max_instances=1,
    attributes=("level",),
    parameters=(),
    values=(0, 1, 2, 3),
    max_events=0,
)
print(f"  universe holds {sum(1 for _ in enumerate_systems(universe))} systems")

wild = parse_policy("policy wild {\n  node n\n}")
low = parse_policy("policy low {\n  node n domain: level < 2\n}")
result = coverage_compare(domain_of(wild), domain_of(low), universe)
print(f"  coverage(wild, low):  {result}")
result = coverage_compare(domain_of(low), domain_of(wild), universe)
print(f"  coverage(low, wild):  {result}")

print("\n=== Containment over a bounded universe ===\n")
tight = parse_policy("policy tight {\n  node n domain: level = $L req: $L <= 1\n}")
loose = parse_policy("policy loose {\n  node n domain: level = $L req: $L <= 2\n}")
print(f"  enforcing tight implies loose?  {contains(tight, loose, universe)}")
print(f"  enforcing loose implies tight?  {contains(loose, tight, universe)}")
