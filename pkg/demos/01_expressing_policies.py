"""Writing predicates and policies.

A policy is a small directed graph.  Nodes stand for objects (users, files,
accounts), edges for events between them.  Every element carries two
predicates: a *domain* saying where the policy applies, and a *requirement*
saying what must hold there.  Predicates share logical variables ($NAME)
whose values are captured during matching.

Run me:  python3 demos/01_expressing_policies.py
"""

from policygraph import (
    Conditions,
    evaluate,
    extract_bindings,
    format_expr,
    merge_conditions,
    parse_policy,
    parse_predicate,
    print_policy,
    reduce_conditions,
    satisfy,
    validate_policy,
)

print("=== Predicates ===\n")

# The expression language has attributes (bare names, looked up in whatever
# context the predicate is evaluated against), constants, variables, boolean
# connectives, comparisons, arithmetic, and finite sets.
pred = parse_predicate('type = "user" && (sec_level >= 2 || "admin" in roles)')
print("parsed and printed back:", format_expr(pred))

# Evaluation folds the predicate against an attribute context.
alice = {"type": "user", "sec_level": 3, "roles": ["ops"]}
print("alice:", format_expr(evaluate(pred, alice, {})))

# A missing attribute never raises: the smallest boolean subexpression
# mentioning it simply becomes false.  Here `roles` is absent but the
# sec_level disjunct still carries the day.
bob = {"type": "user", "sec_level": 2}
print("bob (no roles attribute):", format_expr(evaluate(pred, bob, {})))

print("\n=== Variables and conditions ===\n")

# Matching never guesses variable values.  A predicate is satisfied relative
# to a context; reducing the result harvests the equalities the context
# forces as bindings, and anything left over stays as a residual condition.
guard = parse_predicate("owner = $O && $O != \"root\"")
conds = reduce_conditions(satisfy(guard, {"owner": "deploy"}, {}))
print("bindings:", dict(conds.bindings), " residual:", format_expr(conds.residual))

# Conditions from different graph elements merge; a contradiction between
# forced values kills the candidate match on the spot.
other = satisfy(parse_predicate("owner = $O"), {"owner": "root"}, {})
merged = merge_conditions([conds, other])
print("after merging a conflicting owner:", format_expr(merged.residual))

# Chained equalities settle by iterating extraction to a fixpoint.
harvested, rest = extract_bindings(parse_predicate("$a = 3 && $b = $a + 1"))
print("one extraction pass:", harvested, "with", format_expr(rest), "left")
settled = reduce_conditions(Conditions(harvested, rest))
print("after reducing to a fixpoint:", dict(settled.bindings))

print("\n=== Policies ===\n")

# The classic multilevel-security rule: a user may read only files at or
# below their clearance.  Node domains capture the two levels into $UL and
# $FL; the edge requirement compares them.
policy = parse_policy(
    """
policy no_read_up {
  node u domain: type = "user" && sec_level = $UL
  node f domain: type = "file" && sec_level = $FL
  edge r: u -> f domain: method = "read" req: $UL >= $FL
}
"""
)
print(print_policy(policy), end="")
print("validates cleanly:", validate_policy(policy) == [])

# Well-formedness has two rules.  R1: every variable must be pinned down by
# some domain equality (otherwise its value would be a guess).  R2: node
# requirements may not read attributes (a node spans many instants; capture
# the value into a variable instead).
broken = parse_policy(
    """
policy broken {
  node n req: size = $LIMIT
}
"""
)
print("\na policy that breaks both rules:")
for issue in validate_policy(broken):
    print(" ", issue)
