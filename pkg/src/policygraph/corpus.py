"""Bundled corpus of classic access-control policies with fixture traces.

Each corpus entry pairs a policy with traces that violate and uphold it;
``manifest.json`` records the expected verdict (and match count) for every
pairing.  :func:`run_corpus` replays all of them through the matching
engine and reports any disagreement, making the corpus a quick end-to-end
health check for the whole stack.  Also runnable as
``python -m policygraph.corpus``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from importlib import resources

from .matching import DEFAULT_MATCH_CAP, verdict
from .policy import PolicyGraph, parse_policy_set
from .system import SystemGraph, ingest_trace, read_jsonl

__all__ = [
    "CorpusCase",
    "CorpusEntry",
    "CaseResult",
    "corpus_text",
    "load_manifest",
    "load_corpus_policy",
    "load_corpus_trace",
    "run_corpus",
    "main",
]


def corpus_text(name: str) -> str:
    """Return the text of a bundled corpus file."""
    return (resources.files(__package__) / "corpus_data" / name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class CorpusCase:
    """One trace paired with the verdict (and match count) it should produce."""

    trace: str
    expected: str  # "upheld" or "violated"
    matches: int | None = None


@dataclass(frozen=True)
class CorpusEntry:
    """One policy from the bundle together with its fixture cases."""

    policy_file: str
    policy: str
    cases: tuple[CorpusCase, ...]


@dataclass(frozen=True)
class CaseResult:
    """Outcome of replaying one corpus case through the engine."""

    policy: str
    trace: str
    expected: str
    actual: str
    expected_matches: int | None
    actual_matches: int

    @property
    def ok(self) -> bool:
        if self.expected != self.actual:
            return False
        return self.expected_matches is None or self.expected_matches == self.actual_matches

    def line(self) -> str:
        status = "ok" if self.ok else "MISMATCH"
        detail = f"expected {self.expected}, got {self.actual}"
        detail += f" ({self.actual_matches} matches"
        if self.expected_matches is not None and self.expected_matches != self.actual_matches:
            detail += f", expected {self.expected_matches}"
        detail += ")"
        return f"{status}\t{self.policy} on {self.trace}: {detail}"


def load_manifest() -> list[CorpusEntry]:
    """Read ``manifest.json`` from the bundle."""
    raw = json.loads(corpus_text("manifest.json"))
    entries = []
    for item in raw:
        cases = tuple(
            CorpusCase(c["trace"], c["expected"], c.get("matches")) for c in item["cases"]
        )
        entries.append(CorpusEntry(item["policy_file"], item["policy"], cases))
    return entries


def load_corpus_policy(entry: CorpusEntry) -> PolicyGraph:
    """Parse the policy file of a manifest entry and pick the named policy."""
    for policy in parse_policy_set(corpus_text(entry.policy_file)):
        if policy.name == entry.policy:
            return policy
    raise KeyError(f"policy {entry.policy!r} not found in {entry.policy_file}")


def load_corpus_trace(name: str) -> SystemGraph:
    """Ingest a bundled fixture trace into a system graph."""
    return ingest_trace(read_jsonl(corpus_text(name).splitlines()))


def run_corpus(match_cap: int = DEFAULT_MATCH_CAP) -> list[CaseResult]:
    """Replay every corpus case and return one result per (policy, trace)."""
    results = []
    for entry in load_manifest():
        policy = load_corpus_policy(entry)
        for case in entry.cases:
            graph = load_corpus_trace(case.trace)
            v = verdict(policy, graph, cap=match_cap)
            actual = "upheld" if v.upheld else "violated"
            results.append(
                CaseResult(
                    policy=entry.policy,
                    trace=case.trace,
                    expected=case.expected,
                    actual=actual,
                    expected_matches=case.matches,
                    actual_matches=len(v.witnesses),
                )
            )
    return results


def main(argv: list[str] | None = None) -> int:
    """Print one line per corpus case; exit nonzero if any case mismatches."""
    del argv  # no options
    results = run_corpus()
    for result in results:
        print(result.line())
    bad = [r for r in results if not r.ok]
    print(f"{len(results) - len(bad)}/{len(results)} corpus cases agree")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
