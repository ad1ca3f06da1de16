"""Independent reference implementations used to cross-check the engine.

Everything here is coded directly from the documented semantics in a
deliberately different style from the library: one recursive evaluator with
explicit short-circuiting and poison checks, and brute-force enumeration of
candidate matches over a finite value pool.  Tests treat disagreement
between the engine and these functions as an engine bug.

Also home to the seeded random generators (expressions, contexts, policies,
traces) shared by the differential test files.
"""

from __future__ import annotations

import itertools
import random
from typing import Any, Iterator, Mapping

from policygraph.policy import PolicyGraph, make_policy
from policygraph.predicates import Attr, BinOp, Const, Expr, Not, Var
from policygraph.system import SystemGraph
from policygraph.values import ValueSet, canonical


class OracleTypeError(Exception):
    """Mirror of the engine's PredicateTypeError."""


BOOLEAN_OPS = {"&&", "||", "=", "!=", "<", ">", "<=", ">=", "in", "subset", "subseteq"}


# --- independent value equality -------------------------------------------


def same_value(a: Any, b: Any) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a is b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return float(a) == float(b)
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, ValueSet) and isinstance(b, ValueSet):
        return _set_le(a, b) and _set_le(b, a)
    return False


def _set_member(v: Any, s: ValueSet) -> bool:
    return any(same_value(v, m) for m in s)


def _set_le(a: ValueSet, b: ValueSet) -> bool:
    return all(_set_member(m, b) for m in a)


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


# --- independent evaluator -------------------------------------------------


def _mentions_missing(e: Expr, ctx: Mapping[str, Any]) -> bool:
    """Does e reference an absent attribute outside any nested boolean node?

    A nested boolean node absorbs its own missing names (it will evaluate to
    false itself), so only the non-boolean region directly under the caller
    counts.
    """
    if isinstance(e, Attr):
        return e.name not in ctx
    if isinstance(e, (Const, Var)):
        return False
    if isinstance(e, Not):
        return False
    if isinstance(e, BinOp) and e.op in BOOLEAN_OPS:
        return False
    return _mentions_missing(e.left, ctx) or _mentions_missing(e.right, ctx)


def _flag(v: Any) -> bool:
    if not isinstance(v, bool):
        raise OracleTypeError(f"expected a boolean, got {v!r}")
    return v


def _eval(e: Expr, ctx: Mapping[str, Any], bindings: Mapping[str, Any]) -> Any:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Attr):
        return ctx[e.name]
    if isinstance(e, Var):
        if e.name not in bindings:
            raise AssertionError(f"oracle evaluated with unbound ${e.name}")
        return bindings[e.name]
    if isinstance(e, Not):
        if _mentions_missing(e.operand, ctx):
            return False
        return not _flag(_eval(e.operand, ctx, bindings))
    if not isinstance(e, BinOp):
        raise AssertionError(f"not an expression: {e!r}")
    if e.op in BOOLEAN_OPS:
        if _mentions_missing(e.left, ctx) or _mentions_missing(e.right, ctx):
            return False
    if e.op == "&&":
        if not _flag(_eval(e.left, ctx, bindings)):
            return False
        return _flag(_eval(e.right, ctx, bindings))
    if e.op == "||":
        if _flag(_eval(e.left, ctx, bindings)):
            return True
        return _flag(_eval(e.right, ctx, bindings))
    a = _eval(e.left, ctx, bindings)
    b = _eval(e.right, ctx, bindings)
    if e.op == "=":
        return same_value(a, b)
    if e.op == "!=":
        return not same_value(a, b)
    if e.op in ("<", ">", "<=", ">="):
        if not (_is_num(a) and _is_num(b)):
            raise OracleTypeError("ordered comparison needs numbers")
        return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[e.op]
    if e.op == "in":
        if not isinstance(b, ValueSet):
            raise OracleTypeError("'in' needs a set on the right")
        return _set_member(a, b)
    if e.op in ("subset", "subseteq"):
        if not (isinstance(a, ValueSet) and isinstance(b, ValueSet)):
            raise OracleTypeError(f"'{e.op}' needs sets")
        if e.op == "subseteq":
            return _set_le(a, b)
        return _set_le(a, b) and not _set_le(b, a)
    if e.op in ("intersect", "union"):
        if not (isinstance(a, ValueSet) and isinstance(b, ValueSet)):
            raise OracleTypeError(f"'{e.op}' needs sets")
        if e.op == "intersect":
            return ValueSet(m for m in a if _set_member(m, b))
        return ValueSet(list(a) + list(b))
    if e.op in ("+", "-", "*", "/"):
        if not (_is_num(a) and _is_num(b)):
            raise OracleTypeError("arithmetic needs numbers")
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise OracleTypeError("division by zero")
        return a / b
    raise AssertionError(f"unknown operator {e.op!r}")


def oracle_eval(e: Expr, ctx: Mapping[str, Any], bindings: Mapping[str, Any]) -> Any:
    """Evaluate a fully-bindable expression to a Python value.

    Missing attributes falsify their innermost boolean ancestor; if the
    poison reaches the root (bare attribute, arithmetic root) the whole
    predicate is false.
    """
    if _mentions_missing(e, ctx):
        return False
    return _eval(e, ctx, bindings)


# --- brute-force matching ---------------------------------------------------


def _oracle_attrs_at(graph: SystemGraph, obj_id: str, t: int) -> Mapping[str, Any]:
    best_t, best = None, None
    for snap in graph.objects():
        if snap.id == obj_id and snap.time <= t and (best_t is None or snap.time >= best_t):
            best_t, best = snap.time, snap.attrs
    if best is None:
        raise AssertionError(f"{obj_id} has no snapshot at or before {t}")
    return best


def _object_births(graph: SystemGraph) -> dict[str, int]:
    births: dict[str, int] = {}
    for snap in graph.objects():
        if snap.id not in births or snap.time < births[snap.id]:
            births[snap.id] = snap.time
    return births


def value_pool(policy: PolicyGraph, graph: SystemGraph) -> list[Any]:
    """Every value a forced binding could take: trace values + policy constants."""
    pool: list[Any] = []

    def add(v: Any) -> None:
        if not any(same_value(v, p) for p in pool):
            pool.append(v)

    def consts(e: Expr) -> None:
        if isinstance(e, Const):
            add(e.value)
            if isinstance(e.value, ValueSet):
                for m in e.value:
                    add(m)
        elif isinstance(e, Not):
            consts(e.operand)
        elif isinstance(e, BinOp):
            consts(e.left)
            consts(e.right)

    for snap in graph.objects():
        for v in snap.attrs.values():
            add(v)
    for event in graph.events:
        for v in event.params.values():
            add(v)
    for pred in list(policy.domain_preds.values()) + list(policy.requirement_preds.values()):
        consts(pred)
    return pool


def oracle_matches(policy: PolicyGraph, graph: SystemGraph) -> set[tuple]:
    """Brute-force the match set; returns keys comparable with Match.key().

    Enumerates every injective edge-to-event map, every consistent
    node-object assignment, every isolated-node placement, and every
    complete binding over the finite value pool, then tests all domain
    predicates with the independent evaluator.
    """
    g = policy.graph
    edge_ids = sorted(g.edges)
    iso_ids = sorted(g.isolated_nodes())
    variables = sorted(policy.variables)
    pool = value_pool(policy, graph)
    births = _object_births(graph)
    event_indexes = range(len(graph.events))
    found: set[tuple] = set()

    for picked in itertools.permutations(event_indexes, len(edge_ids)):
        assignment = dict(zip(edge_ids, picked))
        node_objects: dict[str, str] = {}
        consistent = True
        for edge_id, idx in assignment.items():
            event = graph.events[idx]
            spec = g.edges[edge_id]
            for node, obj in ((spec.src, event.src), (spec.dest, event.dest)):
                if node_objects.setdefault(node, obj) != obj:
                    consistent = False
        if not consistent or len(set(node_objects.values())) != len(node_objects):
            continue
        used = set(node_objects.values())
        iso_choices: list[list[tuple[str, int]]] = []
        for _ in iso_ids:
            iso_choices.append(
                [
                    (obj, t)
                    for obj, birth in sorted(births.items())
                    for t in range(birth, graph.horizon + 1)
                ]
            )
        for iso_pick in itertools.product(*iso_choices):
            iso_objs = [obj for obj, _ in iso_pick]
            if len(set(iso_objs)) != len(iso_objs) or used & set(iso_objs):
                continue
            iso = dict(zip(iso_ids, iso_pick))
            for values in itertools.product(pool, repeat=len(variables)):
                bindings = dict(zip(variables, values))
                if _domain_holds(policy, graph, assignment, iso, node_objects, bindings):
                    found.add(
                        (
                            tuple(sorted(assignment.items())),
                            tuple(sorted(iso.items())),
                            tuple(sorted((v, canonical(b)) for v, b in bindings.items())),
                        )
                    )
    return found


def _domain_holds(policy, graph, assignment, iso, node_objects, bindings) -> bool:
    g = policy.graph
    for edge_id, idx in assignment.items():
        event = graph.events[idx]
        spec = g.edges[edge_id]
        try:
            if oracle_eval(policy.domain_preds[edge_id], event.params, bindings) is not True:
                return False
            src_attrs = _oracle_attrs_at(graph, node_objects[spec.src], event.time)
            dest_attrs = _oracle_attrs_at(graph, node_objects[spec.dest], event.time)
            if oracle_eval(policy.domain_preds[spec.src], src_attrs, bindings) is not True:
                return False
            if oracle_eval(policy.domain_preds[spec.dest], dest_attrs, bindings) is not True:
                return False
        except OracleTypeError:
            return False
    for node_id, (obj, t) in iso.items():
        try:
            if oracle_eval(policy.domain_preds[node_id], _oracle_attrs_at(graph, obj, t), bindings) is not True:
                return False
        except OracleTypeError:
            return False
    return True


def oracle_verdict(policy: PolicyGraph, graph: SystemGraph) -> bool:
    """Upheld iff every brute-forced match satisfies every requirement."""
    g = policy.graph
    for key in oracle_matches(policy, graph):
        edges, iso, bound = dict(key[0]), dict(key[1]), dict(key[2])
        bindings = {v: _uncanonical(c) for v, c in bound.items()}
        for node_id in g.nodes:
            if oracle_eval(policy.requirement_preds[node_id], {}, bindings) is not True:
                return False
        for edge_id, idx in edges.items():
            params = graph.events[idx].params
            if oracle_eval(policy.requirement_preds[edge_id], params, bindings) is not True:
                return False
    return True


def _uncanonical(c: tuple) -> Any:
    kind, payload = c
    if kind == "num":
        return int(payload) if float(payload).is_integer() else payload
    if kind == "set":
        return ValueSet(_uncanonical(m) for m in payload)
    return payload


# --- seeded random generators ------------------------------------------------

ATTR_NAMES = ["kind", "level", "size", "tags", "owner"]
VAR_NAMES = ["X", "Y", "Z"]


def random_scalar(rng: random.Random) -> Any:
    choice = rng.randrange(4)
    if choice == 0:
        return rng.choice(["red", "green", "blue"])
    if choice == 1:
        return rng.choice([True, False])
    if choice == 2:
        return rng.randrange(-3, 7)
    return rng.choice([0.5, 1.5, 2.0])


def random_value(rng: random.Random, allow_set: bool = True) -> Any:
    if allow_set and rng.random() < 0.25:
        return ValueSet(random_scalar(rng) for _ in range(rng.randrange(3)))
    return random_scalar(rng)


def random_context(rng: random.Random, names=ATTR_NAMES) -> dict[str, Any]:
    return {n: random_value(rng) for n in names if rng.random() < 0.7}


def random_expr(rng: random.Random, depth: int = 4, attrs=ATTR_NAMES, variables=VAR_NAMES) -> Expr:
    """Random predicate tree; leaves are constants, attributes, variables."""
    if depth <= 0 or rng.random() < 0.25:
        roll = rng.random()
        if roll < 0.5:
            return Const(random_value(rng))
        if roll < 0.8:
            return Attr(rng.choice(attrs))
        return Var(rng.choice(variables))
    if rng.random() < 0.15:
        return Not(random_expr(rng, depth - 1, attrs, variables))
    op = rng.choice(
        ["&&", "||", "=", "!=", "<", ">", "<=", ">=", "in",
         "subset", "subseteq", "+", "-", "*", "/", "intersect", "union"]
    )
    return BinOp(
        op,
        random_expr(rng, depth - 1, attrs, variables),
        random_expr(rng, depth - 1, attrs, variables),
    )


def random_bool_expr(rng: random.Random, depth: int = 3, attrs=ATTR_NAMES, variables=VAR_NAMES) -> Expr:
    """Random boolean-rooted predicate (comparison or connective at the root)."""
    if depth <= 0 or rng.random() < 0.3:
        op = rng.choice(["=", "!=", "<", ">", "<=", ">=", "in"])
        return BinOp(
            op,
            random_expr(rng, 1, attrs, variables),
            random_expr(rng, 1, attrs, variables),
        )
    roll = rng.random()
    if roll < 0.2:
        return Not(random_bool_expr(rng, depth - 1, attrs, variables))
    op = "&&" if roll < 0.6 else "||"
    return BinOp(
        op,
        random_bool_expr(rng, depth - 1, attrs, variables),
        random_bool_expr(rng, depth - 1, attrs, variables),
    )


# --- type-disciplined generator ---------------------------------------------
#
# Expressions from random_expr freely mix kinds, so folding them can raise
# type errors (itself worth testing).  The typed generator below never
# produces a type error on any evaluation path, which lets properties like
# fold/substitution commutation be asserted as strict equalities.

ATTR_TYPES = {
    "kind": "text",
    "owner": "text",
    "level": "num",
    "size": "num",
    "tags": "set",
    "active": "flag",
}
VAR_TYPES = {"X": "num", "Y": "text", "Z": "set"}


def _typed_const(rng: random.Random, want: str) -> Any:
    if want == "num":
        return rng.choice([0, 1, 2, 5, 0.5, 7])
    if want == "text":
        return rng.choice(["red", "green", "blue"])
    if want == "flag":
        return rng.choice([True, False])
    return ValueSet(rng.choice([["red"], [1, 2], [], [True], ["blue", 5]]))


def typed_expr(rng: random.Random, want: str, depth: int) -> Expr:
    """Random expression guaranteed to evaluate without type errors."""
    attrs = [a for a, k in ATTR_TYPES.items() if k == want]
    variables = [v for v, k in VAR_TYPES.items() if k == want]
    if depth <= 0 or want == "text" or rng.random() < 0.2:
        roll = rng.random()
        if roll < 0.3 and attrs:
            return Attr(rng.choice(attrs))
        if roll < 0.5 and variables:
            return Var(rng.choice(variables))
        return Const(_typed_const(rng, want))
    if want == "num":
        op = rng.choice(["+", "-", "*"])  # '/' can divide by zero; tested by hand
        return BinOp(op, typed_expr(rng, "num", depth - 1), typed_expr(rng, "num", depth - 1))
    if want == "set":
        op = rng.choice(["intersect", "union"])
        return BinOp(op, typed_expr(rng, "set", depth - 1), typed_expr(rng, "set", depth - 1))
    # want == "flag"
    roll = rng.random()
    if roll < 0.25:
        op = rng.choice(["&&", "||"])
        return BinOp(op, typed_expr(rng, "flag", depth - 1), typed_expr(rng, "flag", depth - 1))
    if roll < 0.35:
        return Not(typed_expr(rng, "flag", depth - 1))
    if roll < 0.55:
        op = rng.choice(["<", ">", "<=", ">="])
        return BinOp(op, typed_expr(rng, "num", depth - 1), typed_expr(rng, "num", depth - 1))
    if roll < 0.75:
        kind = rng.choice(["num", "text", "set", "flag"])
        op = rng.choice(["=", "!="])
        return BinOp(op, typed_expr(rng, kind, depth - 1), typed_expr(rng, kind, depth - 1))
    if roll < 0.85:
        member = rng.choice(["num", "text"])
        return BinOp("in", typed_expr(rng, member, depth - 1), typed_expr(rng, "set", depth - 1))
    op = rng.choice(["subset", "subseteq"])
    return BinOp(op, typed_expr(rng, "set", depth - 1), typed_expr(rng, "set", depth - 1))


def typed_context(rng: random.Random, present: float = 0.8) -> dict[str, Any]:
    """Context whose present attributes always carry their scheduled kind."""
    return {
        name: _typed_const(rng, kind)
        for name, kind in ATTR_TYPES.items()
        if rng.random() < present
    }


def typed_bindings(rng: random.Random, names=None) -> dict[str, Any]:
    chosen = VAR_TYPES if names is None else {n: VAR_TYPES[n] for n in names}
    return {name: _typed_const(rng, kind) for name, kind in chosen.items()}


# --- random policies and traces (for differential matching tests) -----------

GEN_ATTRS = ["kind", "level"]
GEN_PARAMS = ["act", "grade"]
GEN_VALUES = ["alpha", "beta", 1, 2]


def _binding_conjunct(rng: random.Random, var: str, names) -> Expr:
    name = rng.choice(names)
    return BinOp("=", Attr(name), Var(var)) if rng.random() < 0.5 else BinOp("=", Var(var), Attr(name))


def _domain_clause(rng: random.Random, names, values=GEN_VALUES) -> Expr:
    name = rng.choice(names)
    value = Const(rng.choice(values))
    op = rng.choice(["=", "!="])
    return BinOp(op, Attr(name), value)


def random_policy(rng: random.Random, name: str, values=GEN_VALUES) -> PolicyGraph:
    """Small random policy: 1-2 edges or an edge plus an isolated node,
    0-2 variables.

    Every variable is bound by an `attr = $v` conjunct on some domain
    predicate's top spine, so the result always passes validation and the
    oracle's finite pool covers all bindings.
    """
    n_vars = rng.randrange(3)
    variables = [f"V{i}" for i in range(n_vars)]
    shape = rng.randrange(3)  # 0: one edge, 1: two edges, 2: edge + isolated
    node_ids = ["n1", "n2"]
    edge_ends = {"e1": ("n1", "n2")}
    if shape == 1:
        node_ids.append("n3")
        edge_ends["e2"] = (rng.choice(["n1", "n2"]), "n3")
    elif shape == 2:
        node_ids.append("n3")

    elements = node_ids + sorted(edge_ends)
    domains: dict[str, Expr] = {}
    for elt in elements:
        is_edge = elt.startswith("e")
        names = GEN_PARAMS if is_edge else GEN_ATTRS
        clause: Expr | None = None
        if rng.random() < 0.45:
            clause = _domain_clause(rng, names, values)
        if rng.random() < 0.2 and clause is not None:
            clause = BinOp("&&", clause, _domain_clause(rng, names, values))
        domains[elt] = clause if clause is not None else Const(True)
    for i, var in enumerate(variables):
        host = elements[i % len(elements)]
        host_names = GEN_PARAMS if host.startswith("e") else GEN_ATTRS
        domains[host] = BinOp("&&", domains[host], _binding_conjunct(rng, var, host_names))

    requirements: dict[str, Expr] = {}
    for elt in elements:
        roll = rng.random()
        if roll < 0.4:
            requirements[elt] = Const(True)
        elif roll < 0.7 and elt.startswith("e"):
            requirements[elt] = _domain_clause(rng, GEN_PARAMS, values)
        elif variables:
            var = rng.choice(variables)
            requirements[elt] = BinOp("=", Var(var), Const(rng.choice(values)))
        else:
            requirements[elt] = Const(rng.random() < 0.8)

    return make_policy(
        name,
        nodes={n: (domains[n], requirements[n]) for n in node_ids},
        edges={
            e: (src, dest, domains[e], requirements[e])
            for e, (src, dest) in edge_ends.items()
        },
    )


def random_trace_records(
    rng: random.Random, n_objects: int = 3, n_events: int = 4, values=GEN_VALUES
) -> list[dict]:
    """Trace records over the same small vocabulary the policies draw from."""
    ids = [f"o{i}" for i in range(1, n_objects + 1)]
    records = [
        {
            "t": 1,
            "object": {
                "id": obj,
                "attrs": {name: rng.choice(values) for name in GEN_ATTRS if rng.random() < 0.85},
            },
        }
        for obj in ids
    ]
    t = 1
    for _ in range(rng.randrange(1, n_events + 1)):
        t += rng.randrange(2)
        src, dest = rng.choice(ids), rng.choice(ids)
        params = {name: rng.choice(values) for name in GEN_PARAMS if rng.random() < 0.85}
        records.append({"t": t, "event": {"src": src, "dest": dest, "params": params}})
        if rng.random() < 0.25:
            t += 1
            obj = rng.choice(ids)
            records.append(
                {
                    "t": t,
                    "object": {
                        "id": obj,
                        "attrs": {name: rng.choice(values) for name in GEN_ATTRS},
                    },
                }
            )
    return records
