"""Prompt assembly: evidence selection, budget trimming, block layout, template.

The context shown to the model is built in three tiers. Query evidence (the
sentences justifying each path edge, each node's lead sentence first) is
mandatory; option evidence (sentences justifying the edges that admitted
answer-option entities) and remaining background sentences fill whatever
budget is left. Trimming takes the longest prefix that fits, so enlarging
the budget never removes or reorders previously included sentences.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

from . import data as _data
from .errors import QueryEvidenceOverflowError
from .kg import NodeId
from .sampling import AnswerOptions, GraphLike, Query, SpecKind, WalkPath

PROMPT_TEMPLATE = _data.prompt_template()
PROMPT_TEMPLATE_VERSION = _data.PROMPT_TEMPLATE_VERSION

_FEW_SHOT_CONTEXT, _FEW_SHOT_EXAMPLES = _data.few_shot_bank()
MAX_FEW_SHOT = len(_FEW_SHOT_EXAMPLES)


class ContextTier(str, Enum):
    QUERY_EVIDENCE = "query-evidence"
    OPTION_EVIDENCE = "option-evidence"
    BACKGROUND = "background"


class SentenceRef(NamedTuple):
    """One sentence of one node's text, addressed by (owner, index)."""
    owner: NodeId
    index: int
    text: str

    @property
    def key(self) -> tuple[NodeId, int]:
        return (self.owner, self.index)


@dataclass(frozen=True)
class ContextBlock:
    """All selected sentences of one node, rendered as one paragraph."""
    owner: NodeId
    sentences: tuple[str, ...]
    tier: ContextTier

    def render(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class Prompt:
    few_shot: str
    context: tuple[ContextBlock, ...]
    query: Query
    options: AnswerOptions
    rendered: str
    token_estimate: int


def estimate_tokens(text: str) -> int:
    """Budget proxy: ceil(utf-8 bytes / 4). Monotone and tokenizer-free."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def _sentence_cost(text: str) -> int:
    # One separator byte is charged per sentence so that any later joining
    # with single spaces or newlines stays within the same budget.
    return estimate_tokens(text + " ")


def _dedup(refs: Sequence[SentenceRef]) -> list[SentenceRef]:
    seen: set[tuple[NodeId, int]] = set()
    out: list[SentenceRef] = []
    for ref in refs:
        if ref.key not in seen:
            seen.add(ref.key)
            out.append(ref)
    return out


def _edge_relevant(graph: GraphLike, src: NodeId, dst: NodeId,
                   ev_src: Sequence[int], ev_dst: Sequence[int]) -> list[SentenceRef]:
    """Per-edge relevant sentences: each endpoint's lead, then its evidence."""
    refs: list[SentenceRef] = []
    src_sents = graph.node(src).context_sentences
    dst_sents = graph.node(dst).context_sentences
    refs.append(SentenceRef(src, 0, src_sents[0]))
    refs.extend(SentenceRef(src, i, src_sents[i]) for i in ev_src)
    refs.append(SentenceRef(dst, 0, dst_sents[0]))
    refs.extend(SentenceRef(dst, i, dst_sents[i]) for i in ev_dst)
    return refs


def collect_evidence(
    graph: GraphLike,
    path: WalkPath,
    options: AnswerOptions,
) -> tuple[list[SentenceRef], list[SentenceRef], list[SentenceRef]]:
    """Return (s_query, s_options, s_all), each deduplicated internally.

    s_query: relevant sentences of every path edge, in path order.
    s_options: relevant sentences of the edges linking each off-path option
    entity to the path.
    s_all: every sentence of every involved node.
    """
    s_query: list[SentenceRef] = []
    for e in path.edges:
        s_query.extend(_edge_relevant(graph, e.src, e.dst, e.evidence_src, e.evidence_dst))

    on_path = set(path.nodes)
    s_options: list[SentenceRef] = []
    for option_node in options.option_nodes:
        if option_node in on_path:
            continue
        for pn in path.nodes:
            for e in graph.out_edges(pn):
                if e.dst == option_node:
                    s_options.extend(
                        _edge_relevant(graph, e.src, e.dst, e.evidence_src, e.evidence_dst)
                    )
            for e in graph.in_edges(pn):
                if e.src == option_node:
                    s_options.extend(
                        _edge_relevant(graph, e.src, e.dst, e.evidence_src, e.evidence_dst)
                    )

    involved: list[NodeId] = list(path.nodes)
    for option_node in options.option_nodes:
        if option_node not in involved:
            involved.append(option_node)
    s_all = [
        SentenceRef(nid, i, s)
        for nid in involved
        for i, s in enumerate(graph.node(nid).context_sentences)
    ]
    return _dedup(s_query), _dedup(s_options), _dedup(s_all)


def build_context(
    s_query: Sequence[SentenceRef],
    s_options: Sequence[SentenceRef],
    s_all: Sequence[SentenceRef],
    budget: int,
) -> list[SentenceRef]:
    """Select sentences under the token budget.

    All of s_query is mandatory; if it alone exceeds the budget,
    :class:`QueryEvidenceOverflowError` is raised. Then s_options followed by
    unseen s_all extends the selection, taking the longest prefix that fits
    (prefix semantics keep the output stable as the budget grows). A node's
    lead sentence is pulled in with the first of its sentences to be
    selected, so no block ever lacks its lead.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    selected = _dedup(s_query)
    total = sum(_sentence_cost(r.text) for r in selected)
    if total > budget:
        raise QueryEvidenceOverflowError(
            f"query evidence needs {total} tokens > budget {budget}"
        )
    seen = {r.key for r in selected}
    leads = {r.owner: r for r in [*s_query, *s_options, *s_all] if r.index == 0}
    for ref in [*s_options, *s_all]:
        if ref.key in seen:
            continue
        batch = [ref]
        lead = leads.get(ref.owner)
        if ref.index != 0 and lead is not None and lead.key not in seen:
            batch.insert(0, lead)
        cost = sum(_sentence_cost(r.text) for r in batch)
        if total + cost > budget:
            break
        selected.extend(batch)
        seen.update(r.key for r in batch)
        total += cost
    return selected


def group_context_blocks(
    selected: Sequence[SentenceRef],
    path: WalkPath,
    distractor_node: NodeId | None,
) -> tuple[list[ContextBlock], ContextBlock | None, list[ContextBlock]]:
    """Group selected sentences into per-node blocks.

    Returns (path blocks in path order, distractor block if its sentences
    survived trimming, remaining background blocks in first-selection order).
    Within a block, sentences follow their original text order.
    """
    by_owner: dict[NodeId, list[SentenceRef]] = {}
    owner_order: list[NodeId] = []
    for ref in selected:
        if ref.owner not in by_owner:
            by_owner[ref.owner] = []
            owner_order.append(ref.owner)
        by_owner[ref.owner].append(ref)

    def block(owner: NodeId, tier: ContextTier) -> ContextBlock:
        refs = sorted(by_owner[owner], key=lambda r: r.index)
        return ContextBlock(owner, tuple(r.text for r in refs), tier)

    path_blocks = [
        block(nid, ContextTier.QUERY_EVIDENCE) for nid in path.nodes if nid in by_owner
    ]
    distractor_block = None
    if distractor_node is not None and distractor_node in by_owner:
        distractor_block = block(distractor_node, ContextTier.OPTION_EVIDENCE)
    background = [
        block(nid, ContextTier.BACKGROUND)
        for nid in owner_order
        if nid not in set(path.nodes) and nid != distractor_node
    ]
    return path_blocks, distractor_block, background


def arrange_context(
    blocks: Sequence[ContextBlock],
    kind: SpecKind,
    distractor_block: ContextBlock | None,
    rng: random.Random,
) -> list[ContextBlock]:
    """Order the node blocks according to the specification kind.

    Vanilla keeps path order with no distractor; shuffle permutes the path
    blocks uniformly; shuffle-distractor inserts the distractor block before
    permuting. The block multiset is otherwise preserved.
    """
    if kind is SpecKind.VANILLA:
        return list(blocks)
    pool = list(blocks)
    if kind is SpecKind.SHUFFLE_DISTRACTOR and distractor_block is not None:
        pool.append(distractor_block)
    rng.shuffle(pool)
    return pool


def few_shot_block(count: int) -> str:
    """First ``count`` examples of the fixed bank, preceded by their shared context."""
    if not 0 <= count <= MAX_FEW_SHOT:
        raise ValueError(f"few_shot_count must be in [0, {MAX_FEW_SHOT}]")
    if count == 0:
        return ""
    parts = [_FEW_SHOT_CONTEXT, *_FEW_SHOT_EXAMPLES[:count]]
    return "\n\n".join(parts) + "\n\n"


def render_options(options: AnswerOptions) -> str:
    return "\n".join(f"{i}. {text}" for i, text in enumerate(options.options, start=1))


def render_prompt(
    few_shot_count: int,
    context: Sequence[ContextBlock],
    query: Query,
    options: AnswerOptions,
) -> Prompt:
    """Assemble the final prompt string; byte-exact given its parts."""
    few_shot = few_shot_block(few_shot_count)
    context_text = "\n".join(b.render() for b in context)
    rendered = PROMPT_TEMPLATE.format(
        few_shot=few_shot,
        context=context_text,
        query=query.rendered,
        options=render_options(options),
    )
    return Prompt(
        few_shot=few_shot,
        context=tuple(context),
        query=query,
        options=options,
        rendered=rendered,
        token_estimate=estimate_tokens(context_text),
    )
