"""Knowledge-graph ingestion and preprocessing.

Builds an immutable graph from four tab-separated files (triples, entity
aliases, relation aliases, corpus texts). Preprocessing removes ambiguous
relations, folds text to ASCII, splits node texts into sentences, and keeps
an edge only when at least one sentence of one endpoint explicitly mentions
an alias of the other endpoint; those sentence indices become the edge's
evidence and later feed prompt construction.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import EmptyGraphError, FormatError
from .textnorm import normalize_ascii, split_sentences

log = logging.getLogger(__name__)

GRAPH_FORMAT_HEADER = "kgcert-graph 1"

DEFAULT_BANNED_RELATIONS = frozenset({"instance of", "subclass of", "part of"})

NodeId = str
RelationId = str


@dataclass(frozen=True)
class Node:
    id: NodeId
    aliases: tuple[str, ...]            # non-empty, deduplicated, file order
    context_sentences: tuple[str, ...]  # ASCII, sentence-split

    @property
    def lead_sentence(self) -> str:
        return self.context_sentences[0]


@dataclass(frozen=True)
class Edge:
    src: NodeId
    dst: NodeId
    relation: RelationId
    rel_aliases: tuple[str, ...]
    evidence_src: tuple[int, ...]  # indices into src.context_sentences
    evidence_dst: tuple[int, ...]  # indices into dst.context_sentences

    @property
    def alias_key(self) -> frozenset[str]:
        """Alias sets, not relation ids, determine query-time ambiguity."""
        return frozenset(self.rel_aliases)


@dataclass
class BuildStats:
    """Per-stage drop counters emitted by preprocessing."""
    triples_parsed: int = 0
    skipped_lines: dict[str, int] = field(default_factory=dict)
    dropped_banned_relation: int = 0
    dropped_duplicate: int = 0
    dropped_self_loop: int = 0
    dropped_missing_node: int = 0
    dropped_no_evidence: int = 0
    orphan_nodes_removed: int = 0
    nodes: int = 0
    edges: int = 0

    def to_json_dict(self) -> dict:
        return {
            "triples_parsed": self.triples_parsed,
            "skipped_lines": dict(sorted(self.skipped_lines.items())),
            "dropped_banned_relation": self.dropped_banned_relation,
            "dropped_duplicate": self.dropped_duplicate,
            "dropped_self_loop": self.dropped_self_loop,
            "dropped_missing_node": self.dropped_missing_node,
            "dropped_no_evidence": self.dropped_no_evidence,
            "orphan_nodes_removed": self.orphan_nodes_removed,
            "nodes": self.nodes,
            "edges": self.edges,
        }


@dataclass
class RawDataset:
    """Parsed but unreconciled input files; may be mutually inconsistent."""
    triples: list[tuple[NodeId, RelationId, NodeId]]
    entity_aliases: dict[NodeId, list[str]]
    relation_aliases: dict[RelationId, list[str]]
    corpus: dict[NodeId, str]
    skipped_lines: dict[str, int] = field(default_factory=dict)


class KnowledgeGraph:
    """Immutable node/edge store with per-edge evidence sentence indices.

    Nodes are keyed by id; adjacency is kept in canonical (sorted) order so
    identical inputs always produce identical in-memory structure and
    serialized bytes. Instances are safe to share across threads.
    """

    def __init__(
        self,
        nodes: Mapping[NodeId, Node],
        edges: Iterable[Edge],
        relation_aliases: Mapping[RelationId, tuple[str, ...]],
        stats: BuildStats | None = None,
    ):
        self._nodes = {nid: nodes[nid] for nid in sorted(nodes)}
        ordered = sorted(edges, key=lambda e: (e.src, e.dst, e.relation))
        out: dict[NodeId, list[Edge]] = {}
        inc: dict[NodeId, list[Edge]] = {}
        for e in ordered:
            if e.src not in self._nodes or e.dst not in self._nodes:
                raise ValueError(f"edge {e.src}->{e.dst} references unknown node")
            if e.src == e.dst:
                raise ValueError(f"self-loop on {e.src}")
            if not e.rel_aliases:
                raise ValueError(f"edge {e.src}->{e.dst} has no relation aliases")
            out.setdefault(e.src, []).append(e)
            inc.setdefault(e.dst, []).append(e)
        self._edges = tuple(ordered)
        self._out = {nid: tuple(es) for nid, es in out.items()}
        self._in = {nid: tuple(es) for nid, es in inc.items()}
        self._relation_aliases = {
            rid: tuple(relation_aliases[rid]) for rid in sorted(relation_aliases)
        }
        self.stats = stats

    @property
    def nodes(self) -> Mapping[NodeId, Node]:
        return self._nodes

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def relation_aliases(self) -> Mapping[RelationId, tuple[str, ...]]:
        return self._relation_aliases

    def node(self, node_id: NodeId) -> Node:
        return self._nodes[node_id]

    def __contains__(self, node_id: NodeId) -> bool:
        return node_id in self._nodes

    def out_edges(self, node_id: NodeId) -> tuple[Edge, ...]:
        return self._out.get(node_id, ())

    def in_edges(self, node_id: NodeId) -> tuple[Edge, ...]:
        return self._in.get(node_id, ())

    def out_degree(self, node_id: NodeId) -> int:
        return len(self._out.get(node_id, ()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self._nodes == other._nodes
            and self._edges == other._edges
            and self._relation_aliases == other._relation_aliases
        )

    def __repr__(self) -> str:
        return f"KnowledgeGraph(nodes={len(self._nodes)}, edges={len(self._edges)})"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _parse_lines(
    path: str | Path,
    min_fields: int,
    strict: bool,
    skipped: dict[str, int],
) -> Iterator[list[str]]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < min_fields or any(not f for f in fields[:min_fields]):
                if strict:
                    raise FormatError(
                        str(path), line_no,
                        f"expected at least {min_fields} tab-separated fields",
                    )
                skipped[path.name] = skipped.get(path.name, 0) + 1
                continue
            yield fields


def parse_raw_dataset(
    triples_file: str | Path,
    entity_alias_file: str | Path,
    relation_alias_file: str | Path,
    corpus_file: str | Path,
    strict: bool = False,
) -> RawDataset:
    """Load the four tab-separated input files.

    Malformed lines are skipped and counted per file; with ``strict=True``
    they raise :class:`FormatError` carrying the line number instead.
    Corpus lines split on the first tab only, so texts may contain tabs.
    """
    skipped: dict[str, int] = {}

    triples = [
        (f[0], f[1], f[2])
        for f in _parse_lines(triples_file, 3, strict, skipped)
    ]

    entity_aliases: dict[NodeId, list[str]] = {}
    for fields in _parse_lines(entity_alias_file, 2, strict, skipped):
        aliases = entity_aliases.setdefault(fields[0], [])
        for alias in fields[1:]:
            if alias and alias not in aliases:
                aliases.append(alias)

    relation_aliases: dict[RelationId, list[str]] = {}
    for fields in _parse_lines(relation_alias_file, 2, strict, skipped):
        aliases = relation_aliases.setdefault(fields[0], [])
        for alias in fields[1:]:
            if alias and alias not in aliases:
                aliases.append(alias)

    corpus: dict[NodeId, str] = {}
    for fields in _parse_lines(corpus_file, 2, strict, skipped):
        corpus[fields[0]] = "\t".join(fields[1:])

    if skipped:
        log.info("skipped malformed lines: %s", skipped)
    return RawDataset(triples, entity_aliases, relation_aliases, corpus, skipped)


# ---------------------------------------------------------------------------
# Preprocessing stages
# ---------------------------------------------------------------------------

def filter_relations(
    raw: RawDataset,
    banned: frozenset[str] | set[str] = DEFAULT_BANNED_RELATIONS,
) -> RawDataset:
    """Drop triples whose relation has any banned alias (case-insensitive).

    Relations are matched by alias rather than raw id because the ids are
    dataset-specific. ``banned=set()`` is the identity.
    """
    if not banned:
        return replace(raw, triples=list(raw.triples))
    banned_lower = {b.lower() for b in banned}

    def is_banned(rel: RelationId) -> bool:
        aliases = raw.relation_aliases.get(rel, [rel])
        return any(a.lower() in banned_lower for a in aliases)

    kept = [t for t in raw.triples if not is_banned(t[1])]
    return replace(raw, triples=kept)


def normalize_dataset(raw: RawDataset) -> RawDataset:
    """ASCII-fold every alias and corpus text; dedup aliases post-folding."""

    def fold_aliases(table: dict[str, list[str]]) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for key, aliases in table.items():
            folded: list[str] = []
            for alias in aliases:
                a = " ".join(normalize_ascii(alias).split())
                if a and a not in folded:
                    folded.append(a)
            out[key] = folded
        return out

    return replace(
        raw,
        triples=list(raw.triples),
        entity_aliases=fold_aliases(raw.entity_aliases),
        relation_aliases=fold_aliases(raw.relation_aliases),
        corpus={k: normalize_ascii(v) for k, v in raw.corpus.items()},
    )


def _alias_pattern(aliases: Iterable[str]) -> re.Pattern | None:
    """Case-insensitive alternation matching any alias on word boundaries.

    ``(?<!\\w)...(?!\\w)`` instead of ``\\b`` so aliases that begin or end
    with punctuation still anchor correctly.
    """
    parts = [re.escape(a) for a in aliases if a]
    if not parts:
        return None
    parts.sort(key=len, reverse=True)
    return re.compile(r"(?<!\w)(?:" + "|".join(parts) + r")(?!\w)", re.IGNORECASE)


def attach_edge_evidence(raw: RawDataset, stats: BuildStats | None = None) -> KnowledgeGraph:
    """Reconcile triples with the corpus and attach evidence to each edge.

    For edge (u, v), evidence is the indices of u's sentences mentioning any
    alias of v plus v's sentences mentioning any alias of u. Edges with no
    evidence on either side are dropped, as are duplicates, self-loops, and
    triples whose endpoints have no corpus text. Expects a normalized
    dataset (see :func:`normalize_dataset`).
    """
    stats = stats if stats is not None else BuildStats()
    stats.triples_parsed = len(raw.triples)
    for name, count in raw.skipped_lines.items():
        stats.skipped_lines[name] = stats.skipped_lines.get(name, 0) + count

    sentences: dict[NodeId, tuple[str, ...]] = {}
    patterns: dict[NodeId, re.Pattern | None] = {}

    def node_sentences(nid: NodeId) -> tuple[str, ...] | None:
        if nid not in sentences:
            text = raw.corpus.get(nid)
            sentences[nid] = tuple(split_sentences(text)) if text else ()
        return sentences[nid] or None

    def node_pattern(nid: NodeId) -> re.Pattern | None:
        if nid not in patterns:
            patterns[nid] = _alias_pattern(raw.entity_aliases.get(nid, [nid]))
        return patterns[nid]

    edges: list[Edge] = []
    seen: set[tuple[NodeId, RelationId, NodeId]] = set()
    used_relations: set[RelationId] = set()
    for head, rel, tail in raw.triples:
        if (head, rel, tail) in seen:
            stats.dropped_duplicate += 1
            continue
        seen.add((head, rel, tail))
        if head == tail:
            stats.dropped_self_loop += 1
            continue
        head_sents = node_sentences(head)
        tail_sents = node_sentences(tail)
        if head_sents is None or tail_sents is None:
            stats.dropped_missing_node += 1
            continue
        tail_pat = node_pattern(tail)
        head_pat = node_pattern(head)
        ev_src = tuple(
            i for i, s in enumerate(head_sents) if tail_pat and tail_pat.search(s)
        )
        ev_dst = tuple(
            i for i, s in enumerate(tail_sents) if head_pat and head_pat.search(s)
        )
        if not ev_src and not ev_dst:
            stats.dropped_no_evidence += 1
            continue
        rel_aliases = tuple(raw.relation_aliases.get(rel) or [rel])
        edges.append(Edge(head, tail, rel, rel_aliases, ev_src, ev_dst))
        used_relations.add(rel)

    node_ids = {e.src for e in edges} | {e.dst for e in edges}
    nodes = {
        nid: Node(
            id=nid,
            aliases=tuple(raw.entity_aliases.get(nid) or [nid]),
            context_sentences=sentences[nid],
        )
        for nid in node_ids
    }
    relation_aliases = {
        rid: tuple(raw.relation_aliases.get(rid) or [rid]) for rid in used_relations
    }
    stats.nodes = len(nodes)
    stats.edges = len(edges)
    return KnowledgeGraph(nodes, edges, relation_aliases, stats)


def build_graph(
    raw: RawDataset,
    banned: frozenset[str] | set[str] = DEFAULT_BANNED_RELATIONS,
) -> KnowledgeGraph:
    """Full preprocessing pipeline: filter, normalize, evidence, prune.

    Nodes left with no retained incident edge are removed so degree-based
    pivot statistics stay meaningful. Deterministic: identical input yields
    a structurally identical (and byte-identically serializable) graph.
    Raises :class:`EmptyGraphError` when nothing survives.
    """
    stats = BuildStats()
    filtered = filter_relations(raw, banned)
    stats.dropped_banned_relation = len(raw.triples) - len(filtered.triples)
    graph = attach_edge_evidence(normalize_dataset(filtered), stats)
    stats.triples_parsed = len(raw.triples)
    if not graph.edges:
        raise EmptyGraphError("no edges survived preprocessing")
    # attach_edge_evidence already drops nodes without edges; count them here.
    candidate_nodes = {t[0] for t in filtered.triples} | {t[2] for t in filtered.triples}
    materializable = {n for n in candidate_nodes if filtered.corpus.get(n)}
    stats.orphan_nodes_removed = len(materializable) - stats.nodes
    log.info(
        "built graph: %d nodes, %d edges (banned=%d, duplicate=%d, self-loop=%d, "
        "missing-node=%d, no-evidence=%d, orphaned=%d)",
        stats.nodes, stats.edges, stats.dropped_banned_relation,
        stats.dropped_duplicate, stats.dropped_self_loop,
        stats.dropped_missing_node, stats.dropped_no_evidence,
        stats.orphan_nodes_removed,
    )
    return graph


# ---------------------------------------------------------------------------
# Serialization: line-delimited records, byte-stable across runs
# ---------------------------------------------------------------------------

def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def serialize_graph(graph: KnowledgeGraph) -> str:
    """Render the graph as versioned line-delimited JSON records."""
    lines = [GRAPH_FORMAT_HEADER]
    for rid, aliases in graph.relation_aliases.items():
        lines.append(_dump({"type": "relation", "id": rid, "aliases": list(aliases)}))
    for node in graph.nodes.values():
        lines.append(_dump({
            "type": "node",
            "id": node.id,
            "aliases": list(node.aliases),
            "sentences": list(node.context_sentences),
        }))
    for edge in graph.edges:
        lines.append(_dump({
            "type": "edge",
            "src": edge.src,
            "dst": edge.dst,
            "relation": edge.relation,
            "evidence_src": list(edge.evidence_src),
            "evidence_dst": list(edge.evidence_dst),
        }))
    return "\n".join(lines) + "\n"


def parse_graph(text: str, source: str = "<string>") -> KnowledgeGraph:
    """Inverse of :func:`serialize_graph`."""
    lines = text.splitlines()
    if not lines or lines[0] != GRAPH_FORMAT_HEADER:
        raise FormatError(source, 1, f"expected header {GRAPH_FORMAT_HEADER!r}")
    relation_aliases: dict[RelationId, tuple[str, ...]] = {}
    nodes: dict[NodeId, Node] = {}
    edges: list[Edge] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            kind = rec["type"]
            if kind == "relation":
                relation_aliases[rec["id"]] = tuple(rec["aliases"])
            elif kind == "node":
                nodes[rec["id"]] = Node(
                    rec["id"], tuple(rec["aliases"]), tuple(rec["sentences"])
                )
            elif kind == "edge":
                rel = rec["relation"]
                if rel not in relation_aliases:
                    raise KeyError(f"unknown relation {rel}")
                edges.append(Edge(
                    rec["src"], rec["dst"], rel, relation_aliases[rel],
                    tuple(rec["evidence_src"]), tuple(rec["evidence_dst"]),
                ))
            else:
                raise KeyError(f"unknown record type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(source, line_no, str(exc)) from exc
    return KnowledgeGraph(nodes, edges, relation_aliases)


def save_graph(graph: KnowledgeGraph, path: str | Path) -> None:
    Path(path).write_text(serialize_graph(graph), encoding="utf-8")


def load_graph(path: str | Path) -> KnowledgeGraph:
    path = Path(path)
    return parse_graph(path.read_text(encoding="utf-8"), source=str(path))
