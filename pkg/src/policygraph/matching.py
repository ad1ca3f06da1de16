"""Enumerating the places where a policy's domain holds in a system graph.

A match assigns policy edges to distinct events and isolated policy nodes to
(object, instant) pairs, together with the variable bindings the domain
forces.  Connected policy nodes are not assigned directly: each incident
event fixes them, and all events incident to one policy node must agree on
the object.  Distinct policy nodes must map to distinct objects.

Bindings are never guessed from the value universe.  They are derived solely
from forced equalities in the residual conditions (see predicates.reduce
machinery); rule R1 guarantees every variable is forced before a match can
complete, which is why find_matches demands a policy that validates cleanly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

from .policy import PatternGraph, PolicyGraph, domain_of, validate_policy
from .predicates import (
    FALSE,
    TRUE,
    Conditions,
    Const,
    Expr,
    PredicateTypeError,
    evaluate,
    merge_conditions,
    satisfy,
)
from .system import SystemGraph
from .values import canonical

DEFAULT_MATCH_CAP = 100_000


class MatchCapExceeded(RuntimeError):
    def __init__(self, policy: str, cap: int):
        super().__init__(f"policy {policy!r} exceeded the match cap of {cap}")
        self.policy = policy
        self.cap = cap


class InvalidPolicyError(ValueError):
    def __init__(self, issues):
        super().__init__("; ".join(str(i) for i in issues))
        self.issues = list(issues)


class MatchingError(RuntimeError):
    """Internal consistency failure; indicates a bug, not a bad input."""


@dataclass(frozen=True)
class Match:
    """One place a pattern holds: edge and isolated-node assignments plus
    the variable bindings the domain forced there."""

    policy: str
    edge_events: Mapping[str, int]  # policy edge id -> index into graph.events
    isolated_objects: Mapping[str, tuple[str, int]]  # node id -> (object, instant)
    node_objects: Mapping[str, str]  # every policy node -> object id
    bindings: Mapping[str, Any]

    def key(self) -> tuple:
        """Structural identity, independent of enumeration order."""
        return (
            tuple(sorted(self.edge_events.items())),
            tuple(sorted(self.isolated_objects.items())),
            tuple(sorted((v, canonical(b)) for v, b in self.bindings.items())),
        )


def match_node(pred: Expr, attrs: Mapping[str, Any], bindings: Mapping[str, Any]) -> Conditions:
    return satisfy(pred, attrs, bindings)


def match_edge(pred: Expr, params: Mapping[str, Any], bindings: Mapping[str, Any]) -> Conditions:
    return satisfy(pred, params, bindings)


def match_graph(
    pattern: PatternGraph,
    edge_events: Mapping[str, int],
    isolated_objects: Mapping[str, tuple[str, int]],
    graph: SystemGraph,
    bindings: Mapping[str, Any],
) -> bool:
    """Whether the pattern holds at the given assignment under complete
    bindings.  Purely predicate-level; injectivity and node-object agreement
    are the enumerator's business.  An empty pattern holds trivially.
    """
    g = pattern.graph
    for edge_id, spec in g.edges.items():
        event = graph.events[edge_events[edge_id]]
        merged = merge_conditions(
            [
                match_edge(pattern.preds[edge_id], event.params, bindings),
                match_node(pattern.preds[spec.src], graph.src_attr(event), bindings),
                match_node(pattern.preds[spec.dest], graph.dest_attr(event), bindings),
            ]
        )
        if merged.residual != TRUE:
            return False
    for node_id in g.isolated_nodes():
        obj_id, instant = isolated_objects[node_id]
        if match_node(pattern.preds[node_id], graph.attrs_at(obj_id, instant), bindings).residual != TRUE:
            return False
    return True


@dataclass
class _EdgeCandidate:
    event_index: int
    src_obj: str
    dest_obj: str
    conds: Conditions


def _edge_candidates(pattern: PatternGraph, graph: SystemGraph) -> dict[str, list[_EdgeCandidate]]:
    """Per policy edge, the events that pass its local predicate check."""
    out: dict[str, list[_EdgeCandidate]] = {}
    for edge_id, spec in sorted(pattern.graph.edges.items()):
        candidates = []
        for index, event in enumerate(graph.events):
            conds = merge_conditions(
                [
                    match_edge(pattern.preds[edge_id], event.params, {}),
                    match_node(pattern.preds[spec.src], graph.src_attr(event), {}),
                    match_node(pattern.preds[spec.dest], graph.dest_attr(event), {}),
                ]
            )
            if not conds.is_false:
                candidates.append(_EdgeCandidate(index, event.src, event.dest, conds))
        out[edge_id] = candidates
    return out


def _iso_candidates(pattern: PatternGraph, graph: SystemGraph) -> dict[str, list[tuple[str, int, Conditions]]]:
    out: dict[str, list[tuple[str, int, Conditions]]] = {}
    for node_id in pattern.graph.isolated_nodes():
        candidates = []
        for obj_id in graph.object_ids():
            for instant in graph.instants(obj_id):
                conds = match_node(pattern.preds[node_id], graph.attrs_at(obj_id, instant), {})
                if not conds.is_false:
                    candidates.append((obj_id, instant, conds))
        out[node_id] = candidates
    return out


def match_pattern(
    pattern: PatternGraph,
    graph: SystemGraph,
    cap: int = DEFAULT_MATCH_CAP,
    policy_name: str = "?",
) -> list[Match]:
    """Backtracking enumeration of every match of a pattern.

    Edges are assigned first, in ascending candidate-count order, merging
    variable conditions and pruning as soon as a residual folds to false;
    isolated nodes follow.  The enumeration visits each assignment once, so
    the result is duplicate-free.
    """
    edge_cands = _edge_candidates(pattern, graph)
    edge_order = sorted(edge_cands, key=lambda e: (len(edge_cands[e]), e))
    iso_cands = _iso_candidates(pattern, graph)
    iso_order = sorted(iso_cands, key=lambda n: (len(iso_cands[n]), n))
    edge_specs = pattern.graph.edges

    matches: list[Match] = []
    edge_events: dict[str, int] = {}
    node_objects: dict[str, str] = {}
    object_nodes: dict[str, str] = {}  # inverse view, for the injectivity check
    iso_objects: dict[str, tuple[str, int]] = {}

    def claim(node_id: str, obj_id: str) -> Optional[list[str]]:
        """Try to map node_id to obj_id; returns the rollback list or None."""
        if node_id in node_objects:
            return [] if node_objects[node_id] == obj_id else None
        if obj_id in object_nodes:
            return None
        node_objects[node_id] = obj_id
        object_nodes[obj_id] = node_id
        return [node_id]

    def release(claimed: list[str]) -> None:
        for node_id in claimed:
            obj_id = node_objects.pop(node_id)
            object_nodes.pop(obj_id)

    def finish(conds: Conditions) -> None:
        if conds.residual != TRUE:
            if conds.residual == FALSE:
                return
            raise MatchingError(
                f"policy {policy_name!r}: residual condition did not settle; "
                "was the policy validated?"
            )
        missing = pattern.variables - conds.bindings.keys()
        if missing:
            raise MatchingError(
                f"policy {policy_name!r}: variables {sorted(missing)} unbound at completion"
            )
        bindings = {v: conds.bindings[v] for v in pattern.variables}
        matches.append(
            Match(policy_name, dict(edge_events), dict(iso_objects), dict(node_objects), bindings)
        )
        if len(matches) > cap:
            raise MatchCapExceeded(policy_name, cap)

    def assign_iso(position: int, conds: Conditions) -> None:
        if position == len(iso_order):
            finish(conds)
            return
        node_id = iso_order[position]
        for obj_id, instant, cand_conds in iso_cands[node_id]:
            claimed = claim(node_id, obj_id)
            if claimed is None:
                continue
            merged = merge_conditions([conds, cand_conds])
            if not merged.is_false:
                iso_objects[node_id] = (obj_id, instant)
                assign_iso(position + 1, merged)
                del iso_objects[node_id]
            release(claimed)

    def assign_edges(position: int, conds: Conditions) -> None:
        if position == len(edge_order):
            assign_iso(0, conds)
            return
        edge_id = edge_order[position]
        spec = edge_specs[edge_id]
        for cand in edge_cands[edge_id]:
            if cand.event_index in edge_events.values():
                continue
            if spec.src == spec.dest and cand.src_obj != cand.dest_obj:
                continue
            claimed_src = claim(spec.src, cand.src_obj)
            if claimed_src is None:
                continue
            claimed_dest = claim(spec.dest, cand.dest_obj) if spec.dest != spec.src else []
            if claimed_dest is None:
                release(claimed_src)
                continue
            merged = merge_conditions([conds, cand.conds])
            if not merged.is_false:
                edge_events[edge_id] = cand.event_index
                assign_edges(position + 1, merged)
                del edge_events[edge_id]
            release(claimed_dest)
            release(claimed_src)

    assign_edges(0, Conditions({}, TRUE))
    matches.sort(key=lambda m: m.key())
    return matches


def find_matches(p: PolicyGraph, graph: SystemGraph, cap: int = DEFAULT_MATCH_CAP) -> list[Match]:
    """Every match of the policy's domain.  The policy must validate cleanly."""
    issues = validate_policy(p)
    if issues:
        raise InvalidPolicyError(issues)
    return match_pattern(domain_of(p), graph, cap, p.name)


# --- verdicts ----------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    match: Match
    satisfied: bool
    failing: tuple[str, ...]  # element ids whose requirement came out false


@dataclass(frozen=True)
class Verdict:
    policy: str
    upheld: bool
    witnesses: tuple[Witness, ...]

    @property
    def violations(self) -> tuple[Witness, ...]:
        return tuple(w for w in self.witnesses if not w.satisfied)


@dataclass(frozen=True)
class CompositeVerdict:
    """A set of policies enforced together: upheld only if every one is."""

    upheld: bool
    verdicts: tuple[Verdict, ...]


def check_requirement(p: PolicyGraph, m: Match, graph: SystemGraph) -> tuple[bool, tuple[str, ...]]:
    """Evaluate the requirement predicates at a domain match.

    Edge requirements see the matched event's parameters; node requirements
    see no attributes (rule R2 bans them) and run on bindings alone.  The
    bindings are complete, so every predicate folds to a constant.
    """
    failing: list[str] = []
    for node_id in sorted(p.graph.nodes):
        if not _settled(evaluate(p.requirement_preds[node_id], {}, m.bindings), p, node_id):
            failing.append(node_id)
    for edge_id in sorted(p.graph.edges):
        event = graph.events[m.edge_events[edge_id]]
        if not _settled(evaluate(p.requirement_preds[edge_id], event.params, m.bindings), p, edge_id):
            failing.append(edge_id)
    return (not failing, tuple(failing))


def _settled(result: Expr, p: PolicyGraph, elt: str) -> bool:
    if not isinstance(result, Const) or not isinstance(result.value, bool):
        raise PredicateTypeError(
            f"requirement on {p.name}/{elt} did not settle to a boolean", result
        )
    return result.value


def verdict(p: PolicyGraph, graph: SystemGraph, cap: int = DEFAULT_MATCH_CAP) -> Verdict:
    """Upheld exactly when every domain match satisfies the requirement."""
    witnesses = []
    for m in find_matches(p, graph, cap):
        satisfied, failing = check_requirement(p, m, graph)
        witnesses.append(Witness(m, satisfied, failing))
    return Verdict(p.name, all(w.satisfied for w in witnesses), tuple(witnesses))


def verdict_all(
    policies: Sequence[PolicyGraph],
    graph: SystemGraph,
    cap: int = DEFAULT_MATCH_CAP,
    parallel: bool = False,
) -> CompositeVerdict:
    """Judge each policy against the system; the whole set holds iff all do.

    With ``parallel=True`` the per-policy verdicts are computed on a thread
    pool.  Policies never share mutable state, so the result is identical to
    the serial order either way.
    """
    if parallel and len(policies) > 1:
        with ThreadPoolExecutor() as pool:
            verdicts = tuple(pool.map(lambda p: verdict(p, graph, cap), policies))
    else:
        verdicts = tuple(verdict(p, graph, cap) for p in policies)
    return CompositeVerdict(all(v.upheld for v in verdicts), verdicts)
