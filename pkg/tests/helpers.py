"""Shared test fixtures: synthetic graph construction and brute-force oracles.

The oracles re-derive expected values from plain dict/list structures,
independently of the package's data structures and algorithms, so they can
legitimately arbitrate the implementation.
"""

from __future__ import annotations

from itertools import product

from kgcert import Edge, KnowledgeGraph, Node, WalkPath


def make_graph(
    edges: list[tuple[str, str, str]],
    node_aliases: dict[str, list[str]] | None = None,
    rel_aliases: dict[str, list[str]] | None = None,
) -> KnowledgeGraph:
    """Build a KnowledgeGraph directly from triples with synthetic texts.

    Every node gets a lead sentence plus one sentence per out-edge that
    mentions the target's first alias, and that sentence is the edge's
    evidence, so all graph invariants hold by construction.
    """
    node_aliases = node_aliases or {}
    rel_aliases = rel_aliases or {}
    node_ids = sorted({h for h, _, _ in edges} | {t for _, _, t in edges})

    def aliases_of(nid: str) -> tuple[str, ...]:
        return tuple(node_aliases.get(nid, [f"{nid} name"]))

    sentences: dict[str, list[str]] = {
        nid: [f"{aliases_of(nid)[0]} is an entity."] for nid in node_ids
    }
    evidence: dict[tuple[str, str, str], int] = {}
    for h, r, t in edges:
        sentences[h].append(f"{aliases_of(h)[0]} has {r} {aliases_of(t)[0]}.")
        evidence[(h, r, t)] = len(sentences[h]) - 1

    nodes = {
        nid: Node(nid, aliases_of(nid), tuple(sentences[nid])) for nid in node_ids
    }
    relation_ids = sorted({r for _, r, _ in edges})
    relations = {rid: tuple(rel_aliases.get(rid, [f"{rid} rel"])) for rid in relation_ids}
    edge_records = [
        Edge(h, t, r, relations[r], (evidence[(h, r, t)],), ())
        for h, r, t in edges
    ]
    return KnowledgeGraph(nodes, edge_records, relations)


def path_from_nodes(graph, node_ids: list[str]) -> WalkPath:
    """Assemble a WalkPath along existing edges (first matching edge per hop)."""
    edges = []
    for u, v in zip(node_ids, node_ids[1:]):
        candidates = [e for e in graph.out_edges(u) if e.dst == v]
        assert candidates, f"no edge {u}->{v}"
        edges.append(candidates[0])
    return WalkPath(tuple(node_ids), tuple(edges))


# ---------------------------------------------------------------------------
# Brute-force oracles over plain adjacency structures
# ---------------------------------------------------------------------------

def plain_adjacency(graph) -> dict[str, list[tuple[str, frozenset[str]]]]:
    """Reduce a graph-like object to {src: [(dst, alias set), ...]}."""
    out: dict[str, list[tuple[str, frozenset[str]]]] = {}
    for nid in sorted(getattr(graph, "member_nodes", None) or graph.nodes):
        out[nid] = [
            (e.dst, frozenset(e.rel_aliases)) for e in graph.out_edges(nid)
        ]
    return out


def oracle_reachable(adj: dict, pivot: str, radius: int) -> set[str]:
    """Reachability by exhaustive enumeration of all walks up to ``radius``."""
    reached = {pivot}
    walks: list[list[str]] = [[pivot]]
    for _ in range(radius):
        nxt = []
        for walk in walks:
            for dst, _ in adj.get(walk[-1], []):
                nxt.append(walk + [dst])
                reached.add(dst)
        walks = nxt
    return reached


def oracle_resolve(adj: dict, head: str, alias_keys: list[frozenset[str]]) -> set[str]:
    """Terminal set of following every matching-alias edge from the head."""
    frontier = {head}
    for key in alias_keys:
        frontier = {
            dst for u in frontier for dst, k in adj.get(u, []) if k == key
        }
    return frontier


def oracle_is_unique(adj: dict, nodes: list[str], alias_keys: list[frozenset[str]]) -> bool:
    return len(oracle_resolve(adj, nodes[0], alias_keys)) == 1


def oracle_distractors(adj: dict, nodes: list[str],
                       alias_keys: list[frozenset[str]]) -> set[tuple[str, int]]:
    """Definition-level scan over every (candidate node, attach position) pair.

    d is a distractor at 1-based position j <= len(nodes)-2 iff d is off the
    path and some edge (nodes[j-1], d) carries the same alias set as the
    path edge (nodes[j-1], nodes[j]).
    """
    out = set()
    all_nodes = set(adj)
    ell = len(nodes)
    for d in all_nodes - set(nodes):
        for j in range(1, ell - 1):  # 1-based positions 1..ell-2
            mirrored = alias_keys[j - 1]
            if any(dst == d and k == mirrored for dst, k in adj.get(nodes[j - 1], [])):
                out.add((d, j))
    return out


def oracle_simple_edge_paths(graph, pivot: str, max_hops: int):
    """Enumerate (node list, edge list) for every simple path of 1..max_hops hops."""
    results = []

    def recurse(nodes, edges):
        if edges:
            results.append((list(nodes), list(edges)))
        if len(edges) == max_hops:
            return
        for e in graph.out_edges(nodes[-1]):
            if e.dst in nodes:
                continue
            recurse(nodes + [e.dst], edges + [e])

    recurse([pivot], [])
    return results


def oracle_count_queries(graph, pivot: str, max_hops: int) -> int:
    """Sum alias products over unique-answer paths, all derived by brute force."""
    adj = plain_adjacency(graph)
    total = 0
    for nodes, edges in oracle_simple_edge_paths(graph, pivot, max_hops):
        keys = [frozenset(e.rel_aliases) for e in edges]
        if not oracle_is_unique(adj, nodes, keys):
            continue
        count = len(graph.node(nodes[0]).aliases)
        for e in edges:
            count *= len(e.rel_aliases)
        total += count
    return total


def oracle_enumerate_query_strings(graph, pivot: str, max_hops: int) -> set[str]:
    """Every rendered query string the sampler could emit (small graphs only)."""
    adj = plain_adjacency(graph)
    queries = set()
    for nodes, edges in oracle_simple_edge_paths(graph, pivot, max_hops):
        keys = [frozenset(e.rel_aliases) for e in edges]
        if not oracle_is_unique(adj, nodes, keys):
            continue
        head_aliases = graph.node(nodes[0]).aliases
        for combo in product(head_aliases, *[e.rel_aliases for e in edges]):
            head, *rels = combo
            queries.add(head + "".join(f"->({r})" for r in rels) + "->?")
    return queries
