"""A tour of the bundled policy corpus.

The package ships a corpus of policies with paired traces — for each policy,
one trace that upholds it and one that violates it.  A manifest records the
expected outcome and match count for every pairing, so the whole corpus
doubles as an end-to-end regression suite.  This script walks the manifest,
shows a couple of the policies, and replays every case.

Run me:  python3 demos/05_corpus_tour.py
"""

from policygraph.corpus import corpus_text, load_manifest, run_corpus

manifest = load_manifest()
n_cases = sum(len(entry.cases) for entry in manifest)
print(f"=== Manifest: {len(manifest)} policy files, {n_cases} cases ===\n")
for entry in manifest:
    pairings = ", ".join(f"{c.trace} ({c.expected})" for c in entry.cases)
    print(f"  {entry.policy:24s} {pairings}")

print("\n=== Two policies from the corpus ===\n")
for name in ("no_read_up.policy", "chinese_wall.policy"):
    print(corpus_text(name), end="")
    print()

print("=== Replaying every case ===\n")
results = run_corpus()
for result in results:
    print(f"  {result.line()}")
ok = sum(1 for r in results if r.ok)
print(f"\n  {ok}/{len(results)} cases behaved as recorded")

print(
    """
The same checks are available from the command line:

    python3 -m policygraph.corpus                     # replay all cases, exit 0 iff all ok
    policygraph --policies P.policy --trace T.jsonl   # check any policy file against a trace
"""
)
