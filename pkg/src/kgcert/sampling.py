"""Random instance generation over a knowledge graph.

All samplers are pure functions of (inputs, rng): callers derive an
independent ``random.Random`` per sample so generation can run concurrently
without changing results.

Path sampling first draws a hop count uniformly from {1..max_hops}, then
runs a randomized depth-first search from the pivot. A candidate path is
kept only if it is simple (all nodes distinct) and its relation sequence
resolves to a single answer node when every same-alias-set edge is followed
from the head; ambiguous candidates are rejected and re-drawn.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Iterator, Protocol, Sequence

from .errors import (
    InsufficientCandidatesError,
    NoPathError,
    PoolTooSmallError,
)
from .kg import Edge, KnowledgeGraph, Node, NodeId
from .rand import choice, shuffled, weighted_choice

# Per drawn hop count: DFS + uniqueness attempts before the length is
# declared exhausted and the hop count re-drawn.
PATH_RETRY_CAP = 128

# Subgraphs up to this many members get an exhaustive existence check before
# NoPath is raised, so the error is never a false negative on fixtures.
EXHAUSTIVE_FALLBACK_MAX_NODES = 512


class GraphLike(Protocol):
    """What samplers need from a graph; satisfied by KnowledgeGraph and SubgraphView."""

    def node(self, node_id: NodeId) -> Node: ...
    def out_edges(self, node_id: NodeId) -> Sequence[Edge]: ...
    def in_edges(self, node_id: NodeId) -> Sequence[Edge]: ...


class SpecKind(str, enum.Enum):
    VANILLA = "vanilla"
    SHUFFLE = "shuffle"
    SHUFFLE_DISTRACTOR = "shuffle-distractor"


class DistractorMode(str, enum.Enum):
    TAIL_WEIGHTED = "tail"
    HEAD_WEIGHTED = "head"
    UNIFORM = "uniform"


class OptionProvenance(str, enum.Enum):
    CORRECT = "correct"
    DISTRACTOR = "distractor"
    PATH_ENTITY = "path-entity"
    RELATED_ENTITY = "related-entity"


@dataclass(frozen=True)
class WalkPath:
    """A simple directed path: n nodes joined by n-1 edges."""
    nodes: tuple[NodeId, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if len(self.nodes) < 2 or len(self.edges) != len(self.nodes) - 1:
            raise ValueError("path needs >= 2 nodes and matching edges")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path nodes must be distinct")
        for i, e in enumerate(self.edges):
            if (e.src, e.dst) != (self.nodes[i], self.nodes[i + 1]):
                raise ValueError("edge does not connect consecutive nodes")

    @property
    def head(self) -> NodeId:
        return self.nodes[0]

    @property
    def tail(self) -> NodeId:
        return self.nodes[-1]

    @property
    def hops(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Query:
    """Alias-instantiated rendering of a path: head -> relation chain -> ?"""
    path: WalkPath
    head_alias: str
    edge_aliases: tuple[str, ...]
    rendered: str


@dataclass(frozen=True)
class SpecConfig:
    """Full descriptor of one certified prompt distribution."""
    pivot: NodeId
    kind: SpecKind = SpecKind.VANILLA
    max_hops: int = 4
    n_samples: int = 250
    confidence: float = 0.95
    seed: int = 0
    few_shot_count: int = 2
    distractor_mode: DistractorMode = DistractorMode.TAIL_WEIGHTED
    min_num_options: int = 5
    token_budget: int = 4096

    def __post_init__(self):
        if not self.pivot:
            raise ValueError("pivot must be non-empty")
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.min_num_options < 2:
            raise ValueError("min_num_options must be >= 2")
        if not 0 <= self.few_shot_count <= 5:
            raise ValueError("few_shot_count must be in [0, 5]")
        if self.token_budget < 1:
            raise ValueError("token_budget must be >= 1")

    @property
    def delta(self) -> float:
        return 1.0 - self.confidence

    def to_kv_text(self) -> str:
        pairs = [
            ("pivot", self.pivot),
            ("kind", self.kind.value),
            ("max_hops", self.max_hops),
            ("n_samples", self.n_samples),
            ("confidence", self.confidence),
            ("seed", self.seed),
            ("few_shot_count", self.few_shot_count),
            ("distractor_mode", self.distractor_mode.value),
            ("min_num_options", self.min_num_options),
            ("token_budget", self.token_budget),
        ]
        return "".join(f"{k} = {v}\n" for k, v in pairs)

    @classmethod
    def from_kv_text(cls, text: str) -> "SpecConfig":
        values: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        return cls(
            pivot=values["pivot"],
            kind=SpecKind(values.get("kind", "vanilla")),
            max_hops=int(values.get("max_hops", 4)),
            n_samples=int(values.get("n_samples", 250)),
            confidence=float(values.get("confidence", 0.95)),
            seed=int(values.get("seed", 0)),
            few_shot_count=int(values.get("few_shot_count", 2)),
            distractor_mode=DistractorMode(values.get("distractor_mode", "tail")),
            min_num_options=int(values.get("min_num_options", 5)),
            token_budget=int(values.get("token_budget", 4096)),
        )

    def to_json_dict(self) -> dict:
        return {
            "pivot": self.pivot,
            "kind": self.kind.value,
            "max_hops": self.max_hops,
            "n_samples": self.n_samples,
            "confidence": self.confidence,
            "seed": self.seed,
            "few_shot_count": self.few_shot_count,
            "distractor_mode": self.distractor_mode.value,
            "min_num_options": self.min_num_options,
            "token_budget": self.token_budget,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SpecConfig":
        return cls(
            pivot=data["pivot"],
            kind=SpecKind(data["kind"]),
            max_hops=data["max_hops"],
            n_samples=data["n_samples"],
            confidence=data["confidence"],
            seed=data["seed"],
            few_shot_count=data["few_shot_count"],
            distractor_mode=DistractorMode(data["distractor_mode"]),
            min_num_options=data["min_num_options"],
            token_budget=data["token_budget"],
        )


@dataclass(frozen=True)
class AnswerOptions:
    """Shuffled MCQ options; exactly one aliases the path tail."""
    options: tuple[str, ...]
    correct_index: int  # 1-based
    provenance: tuple[OptionProvenance, ...]
    option_nodes: tuple[NodeId, ...]

    def __post_init__(self):
        if not 1 <= self.correct_index <= len(self.options):
            raise ValueError("correct_index out of range")
        if len(self.options) != len(self.provenance) or len(self.options) != len(self.option_nodes):
            raise ValueError("options/provenance/nodes length mismatch")

    @property
    def distractor_index(self) -> int | None:
        """1-based index of the distractor-sourced option, if any."""
        for i, p in enumerate(self.provenance, start=1):
            if p is OptionProvenance.DISTRACTOR:
                return i
        return None


class SubgraphView:
    """Radius-bounded out-edge closure around a pivot.

    Adjacency is restricted to member nodes; node data is read from the
    parent graph. Because every node on a path of at most ``radius`` hops
    from the pivot lies within the closure, restriction never removes a
    path, distractor, or resolution step relevant to queries of that depth.
    """

    def __init__(self, graph: KnowledgeGraph, pivot: NodeId, radius: int):
        if pivot not in graph:
            raise KeyError(f"pivot {pivot!r} not in graph")
        if radius < 0:
            raise ValueError("radius must be >= 0")
        members = {pivot}
        frontier = [pivot]
        for _ in range(radius):
            nxt = []
            for u in frontier:
                for e in graph.out_edges(u):
                    if e.dst not in members:
                        members.add(e.dst)
                        nxt.append(e.dst)
            if not nxt:
                break
            frontier = nxt
        self.graph = graph
        self.pivot = pivot
        self.radius = radius
        self.member_nodes = frozenset(members)
        self._out = {
            u: tuple(e for e in graph.out_edges(u) if e.dst in members)
            for u in members
        }
        self._in = {
            u: tuple(e for e in graph.in_edges(u) if e.src in members)
            for u in members
        }

    def node(self, node_id: NodeId) -> Node:
        if node_id not in self.member_nodes:
            raise KeyError(node_id)
        return self.graph.node(node_id)

    def out_edges(self, node_id: NodeId) -> tuple[Edge, ...]:
        return self._out.get(node_id, ())

    def in_edges(self, node_id: NodeId) -> tuple[Edge, ...]:
        return self._in.get(node_id, ())

    def __len__(self) -> int:
        return len(self.member_nodes)


def extract_subgraph(graph: KnowledgeGraph, pivot: NodeId, radius: int) -> SubgraphView:
    """Breadth-first out-edge closure to depth ``radius`` around ``pivot``."""
    return SubgraphView(graph, pivot, radius)


# ---------------------------------------------------------------------------
# Pivot selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PivotCriteria:
    """Qualifying pool: top-k out-degree union large-subgraph nodes."""
    top_k: int = 2000
    min_subgraph_nodes: int = 2000
    radius: int = 4


def select_pivots(
    graph: KnowledgeGraph,
    count: int,
    criteria: PivotCriteria,
    rng: random.Random,
) -> list[NodeId]:
    """Sample ``count`` distinct pivots uniformly from the qualifying pool."""
    by_degree = sorted(graph.nodes, key=lambda n: (-graph.out_degree(n), n))
    pool = set(by_degree[: criteria.top_k])
    for nid in graph.nodes:
        if nid in pool:
            continue
        if len(SubgraphView(graph, nid, criteria.radius)) >= criteria.min_subgraph_nodes:
            pool.add(nid)
    if len(pool) < count:
        raise PoolTooSmallError(
            f"{len(pool)} qualifying pivots < requested {count}"
        )
    return rng.sample(sorted(pool), count)


# ---------------------------------------------------------------------------
# Path sampling
# ---------------------------------------------------------------------------

def is_unique_path(graph: GraphLike, path: WalkPath) -> bool:
    """True iff the path's relation sequence identifies a single answer node.

    From the head, every edge whose alias set equals the corresponding path
    edge's alias set is followed (relations are indistinguishable in a query
    exactly when their alias sets coincide); the query is well-posed only if
    exactly one terminal node remains.
    """
    frontier: set[NodeId] = {path.head}
    for edge in path.edges:
        key = edge.alias_key
        nxt: set[NodeId] = set()
        for u in frontier:
            for e in graph.out_edges(u):
                if e.alias_key == key:
                    nxt.add(e.dst)
        frontier = nxt
    return len(frontier) == 1


def _dfs_path(graph: GraphLike, source: NodeId, hops: int, rng: random.Random) -> WalkPath | None:
    """Randomized DFS for a simple path with exactly ``hops`` edges.

    Neighbor order is uniformly shuffled at each level; with backtracking the
    search returns None only when no simple path of that length exists.
    """
    nodes: list[NodeId] = [source]
    edges: list[Edge] = []
    on_path: set[NodeId] = {source}

    def recurse(u: NodeId) -> bool:
        if len(edges) == hops:
            return True
        by_neighbor: dict[NodeId, list[Edge]] = {}
        for e in graph.out_edges(u):
            if e.dst not in on_path:
                by_neighbor.setdefault(e.dst, []).append(e)
        for v in shuffled(rng, sorted(by_neighbor)):
            edge = choice(rng, by_neighbor[v])
            nodes.append(v)
            edges.append(edge)
            on_path.add(v)
            if recurse(v):
                return True
            on_path.discard(v)
            nodes.pop()
            edges.pop()
        return False

    if recurse(source):
        return WalkPath(tuple(nodes), tuple(edges))
    return None


def iter_simple_paths(graph: GraphLike, source: NodeId, max_hops: int) -> Iterator[WalkPath]:
    """Deterministically enumerate every simple path of 1..max_hops hops."""
    nodes: list[NodeId] = [source]
    edges: list[Edge] = []
    on_path: set[NodeId] = {source}

    def recurse() -> Iterator[WalkPath]:
        if edges:
            yield WalkPath(tuple(nodes), tuple(edges))
        if len(edges) == max_hops:
            return
        for e in graph.out_edges(nodes[-1]):
            if e.dst in on_path:
                continue
            nodes.append(e.dst)
            edges.append(e)
            on_path.add(e.dst)
            yield from recurse()
            on_path.discard(e.dst)
            nodes.pop()
            edges.pop()

    yield from recurse()


def sample_path(subgraph: SubgraphView, config: SpecConfig, rng: random.Random) -> WalkPath:
    """Draw a hop count uniformly, then a unique-answer simple path of that length.

    Lengths whose attempts are exhausted are re-drawn; after ``max_hops``
    consecutive exhausted lengths a bounded exhaustive search decides
    whether any valid path exists at all before :class:`NoPathError`.
    """
    pivot = subgraph.pivot
    if not subgraph.out_edges(pivot):
        raise NoPathError(f"pivot {pivot!r} has no out-edges")

    def try_length(hops: int) -> WalkPath | None:
        for _ in range(PATH_RETRY_CAP):
            candidate = _dfs_path(subgraph, pivot, hops, rng)
            if candidate is None:
                return None  # no simple path of this length exists at all
            if is_unique_path(subgraph, candidate):
                return candidate
        return None

    failures = 0
    while failures < config.max_hops:
        hops = rng.randint(1, config.max_hops)
        path = try_length(hops)
        if path is not None:
            return path
        failures += 1

    if len(subgraph) <= EXHAUSTIVE_FALLBACK_MAX_NODES:
        valid = [
            p for p in iter_simple_paths(subgraph, pivot, config.max_hops)
            if is_unique_path(subgraph, p)
        ]
        if valid:
            lengths = sorted({p.hops for p in valid})
            hops = choice(rng, lengths)
            return choice(rng, [p for p in valid if p.hops == hops])
    raise NoPathError(
        f"no unique-answer path of 1..{config.max_hops} hops from {pivot!r}"
    )


def render_query(head_alias: str, edge_aliases: Sequence[str]) -> str:
    return head_alias + "".join(f"->({a})" for a in edge_aliases) + "->?"


def sample_query(path: WalkPath, graph: GraphLike, rng: random.Random) -> Query:
    """Instantiate the path as a query with uniformly drawn aliases."""
    head_alias = choice(rng, graph.node(path.head).aliases)
    edge_aliases = tuple(choice(rng, e.rel_aliases) for e in path.edges)
    return Query(path, head_alias, edge_aliases, render_query(head_alias, edge_aliases))


# ---------------------------------------------------------------------------
# Distractors and answer options
# ---------------------------------------------------------------------------

def enumerate_distractors(graph: GraphLike, path: WalkPath) -> set[tuple[NodeId, int]]:
    """All (node, attach position) pairs that can derail the path's query.

    A distractor mirrors the relation leaving attach position j (1-based,
    j <= hops-1): it is an off-path out-neighbor of path node j via an edge
    whose alias set equals that of the path's j-th edge. The final edge has
    no distractors; a same-alias fork there would be an alternative correct
    answer, and such paths are already rejected by the uniqueness predicate.
    """
    out: set[tuple[NodeId, int]] = set()
    on_path = set(path.nodes)
    for j0 in range(len(path.nodes) - 2):
        mirrored = path.edges[j0].alias_key
        for e in graph.out_edges(path.nodes[j0]):
            if e.dst not in on_path and e.alias_key == mirrored:
                out.add((e.dst, j0 + 1))
    return out


def sample_distractor(
    graph: GraphLike,
    path: WalkPath,
    mode: DistractorMode,
    rng: random.Random,
) -> tuple[NodeId, int] | None:
    """Weighted draw over the distractor set; None when the set is empty.

    Tail weighting gives attach position j weight j (rising toward the
    answer node), head weighting mirrors it, uniform is flat.
    """
    candidates = sorted(enumerate_distractors(graph, path))
    if not candidates:
        return None
    n_positions = len(path.nodes) - 2  # valid attach positions: 1..n_positions
    if mode is DistractorMode.TAIL_WEIGHTED:
        weights = [float(j) for _, j in candidates]
    elif mode is DistractorMode.HEAD_WEIGHTED:
        weights = [float(n_positions + 1 - j) for _, j in candidates]
    else:
        weights = [1.0] * len(candidates)
    return weighted_choice(rng, candidates, weights)


def _related_entities(graph: GraphLike, path: WalkPath, exclude: set[NodeId]) -> list[NodeId]:
    related: set[NodeId] = set()
    for nid in path.nodes:
        for e in graph.out_edges(nid):
            related.add(e.dst)
        for e in graph.in_edges(nid):
            related.add(e.src)
    return sorted(related - set(path.nodes) - exclude)


def generate_answer_options(
    graph: GraphLike,
    path: WalkPath,
    distractor: tuple[NodeId, int] | None,
    config: SpecConfig,
    rng: random.Random,
) -> AnswerOptions:
    """Build the MCQ option list for a path.

    Candidates fill in priority order (correct tail, distractor, on-path
    entities, entities sharing an edge with the path) up to
    ``min_num_options``, deduplicated by node; each option renders as one
    uniformly drawn alias, and the final order is shuffled. The distractor
    pool participates only in shuffle-distractor specifications.
    """
    tail = path.tail
    tail_aliases_cf = {a.casefold() for a in graph.node(tail).aliases}

    candidates: list[tuple[NodeId, OptionProvenance]] = [
        (tail, OptionProvenance.CORRECT)
    ]
    if config.kind is SpecKind.SHUFFLE_DISTRACTOR and distractor is not None:
        candidates.append((distractor[0], OptionProvenance.DISTRACTOR))
    for nid in shuffled(rng, path.nodes[:-1]):
        candidates.append((nid, OptionProvenance.PATH_ENTITY))
    exclude = {distractor[0]} if distractor is not None else set()
    for nid in shuffled(rng, _related_entities(graph, path, exclude)):
        candidates.append((nid, OptionProvenance.RELATED_ENTITY))

    picked: list[tuple[str, NodeId, OptionProvenance]] = []
    used_nodes: set[NodeId] = set()
    used_texts: set[str] = set()
    for nid, provenance in candidates:
        if len(picked) >= config.min_num_options:
            break
        if nid in used_nodes:
            continue
        aliases = shuffled(rng, graph.node(nid).aliases)
        text = None
        for alias in aliases:
            a_cf = alias.casefold()
            if a_cf in used_texts:
                continue
            if provenance is not OptionProvenance.CORRECT and a_cf in tail_aliases_cf:
                continue  # only one option may alias the answer node
            text = alias
            break
        if text is None:
            continue
        picked.append((text, nid, provenance))
        used_nodes.add(nid)
        used_texts.add(text.casefold())

    if len(picked) < 2:
        raise InsufficientCandidatesError(
            f"only {len(picked)} answer option(s) available for path {path.nodes}"
        )
    rng.shuffle(picked)
    correct_index = next(
        i for i, (_, _, p) in enumerate(picked, start=1)
        if p is OptionProvenance.CORRECT
    )
    return AnswerOptions(
        options=tuple(t for t, _, _ in picked),
        correct_index=correct_index,
        provenance=tuple(p for _, _, p in picked),
        option_nodes=tuple(n for _, n, _ in picked),
    )


# ---------------------------------------------------------------------------
# Query-space size
# ---------------------------------------------------------------------------

def count_unique_queries(subgraph: SubgraphView, max_hops: int) -> int:
    """Number of distinct queries the sampler can emit from this subgraph.

    Streams over every unique-answer simple path of 1..max_hops hops and
    sums |head aliases| * prod |edge aliases|; Python integers keep the sum
    exact at any magnitude.
    """
    total = 0
    for path in iter_simple_paths(subgraph, subgraph.pivot, max_hops):
        if not is_unique_path(subgraph, path):
            continue
        product = len(subgraph.node(path.head).aliases)
        for e in path.edges:
            product *= len(e.rel_aliases)
        total += product
    return total


def save_pivots(pivots: Sequence[NodeId], path: str | FsPath) -> None:
    FsPath(path).write_text("".join(f"{p}\n" for p in pivots), encoding="utf-8")


def load_pivots(path: str | FsPath) -> list[NodeId]:
    return [
        line.strip()
        for line in FsPath(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
