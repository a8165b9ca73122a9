"""kgcert: probabilistic certificates of multi-hop knowledge comprehension.

The pipeline: preprocess a triple/alias/corpus dataset into an immutable
knowledge graph with per-edge evidence sentences, sample multi-hop queries
with answer options and optional distractors from a pivot's subgraph, ask a
text-generation model, and bound its success probability with an exact
Clopper-Pearson confidence interval.
"""

from .certify import (
    Certificate,
    Interval,
    PerHopRow,
    Summary,
    aggregate,
    binomial_cdf,
    build_prompt_sample,
    certify,
    clopper_pearson,
    per_hop_report,
    prompt_export_record,
    regularized_incomplete_beta,
)
from .client import (
    HttpModelClient,
    MockModelClient,
    MockMode,
    MockOracleConfig,
    ModelEndpoint,
    PromptMetadata,
    mock_complete,
)
from .evaluation import CHECKER_VERSION, Verdict, check_response
from .kg import (
    DEFAULT_BANNED_RELATIONS,
    Edge,
    KnowledgeGraph,
    Node,
    RawDataset,
    attach_edge_evidence,
    build_graph,
    filter_relations,
    load_graph,
    normalize_dataset,
    parse_graph,
    parse_raw_dataset,
    save_graph,
    serialize_graph,
)
from .prompting import (
    ContextBlock,
    ContextTier,
    Prompt,
    SentenceRef,
    arrange_context,
    build_context,
    collect_evidence,
    estimate_tokens,
    render_prompt,
)
from .sampling import (
    AnswerOptions,
    DistractorMode,
    OptionProvenance,
    PivotCriteria,
    Query,
    SpecConfig,
    SpecKind,
    SubgraphView,
    WalkPath,
    count_unique_queries,
    enumerate_distractors,
    extract_subgraph,
    generate_answer_options,
    is_unique_path,
    sample_distractor,
    sample_path,
    sample_query,
    select_pivots,
)
from .textnorm import normalize_ascii, split_sentences

__version__ = "0.1.0"

__all__ = [
    "AnswerOptions",
    "CHECKER_VERSION",
    "Certificate",
    "ContextBlock",
    "ContextTier",
    "DEFAULT_BANNED_RELATIONS",
    "DistractorMode",
    "Edge",
    "HttpModelClient",
    "Interval",
    "KnowledgeGraph",
    "MockMode",
    "MockModelClient",
    "MockOracleConfig",
    "ModelEndpoint",
    "Node",
    "OptionProvenance",
    "PerHopRow",
    "PivotCriteria",
    "Prompt",
    "PromptMetadata",
    "Query",
    "RawDataset",
    "SentenceRef",
    "SpecConfig",
    "SpecKind",
    "SubgraphView",
    "Summary",
    "Verdict",
    "WalkPath",
    "aggregate",
    "arrange_context",
    "attach_edge_evidence",
    "binomial_cdf",
    "build_context",
    "build_graph",
    "build_prompt_sample",
    "certify",
    "check_response",
    "clopper_pearson",
    "collect_evidence",
    "count_unique_queries",
    "enumerate_distractors",
    "estimate_tokens",
    "extract_subgraph",
    "filter_relations",
    "generate_answer_options",
    "is_unique_path",
    "load_graph",
    "mock_complete",
    "normalize_ascii",
    "normalize_dataset",
    "parse_graph",
    "parse_raw_dataset",
    "per_hop_report",
    "prompt_export_record",
    "regularized_incomplete_beta",
    "render_prompt",
    "sample_distractor",
    "sample_path",
    "sample_query",
    "save_graph",
    "select_pivots",
    "serialize_graph",
    "split_sentences",
]
