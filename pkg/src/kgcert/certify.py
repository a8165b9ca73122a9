"""Certification core: exact binomial confidence bounds and the sampling loop.

A certificate bounds the probability p that the model answers a random
prompt from the configured distribution correctly. Each of the n samples is
one Bernoulli observation; with k successes the two-sided Clopper-Pearson
interval at confidence 1-delta is

    lower: the p solving Pr[Bin(n, p) >= k] = delta/2   (0 when k = 0)
    upper: the p solving Pr[Bin(n, p) <= k] = delta/2   (1 when k = n)

Both equations are inverted by bisection on the exact binomial CDF,
evaluated through the regularized incomplete beta function, because the
coverage guarantee Pr[p in interval] >= 1-delta requires exact tails, not a
normal approximation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Sequence

from .client import PromptMetadata
from .errors import (
    CertificationError,
    InsufficientCandidatesError,
    NoPathError,
    QueryEvidenceOverflowError,
)
from .evaluation import CHECKER_VERSION, check_response
from .kg import KnowledgeGraph
from .prompting import (
    Prompt,
    arrange_context,
    build_context,
    collect_evidence,
    group_context_blocks,
    render_prompt,
)
from .rand import derive_rng
from .sampling import (
    SpecConfig,
    SpecKind,
    SubgraphView,
    extract_subgraph,
    generate_answer_options,
    sample_distractor,
    sample_path,
    sample_query,
)

log = logging.getLogger(__name__)

CERTIFICATE_SCHEMA_VERSION = "1"

# Sampler-level failures (no path at a sub-seed, context overflow, too few
# options) re-draw the sample with a fresh sub-seed; they are defects of the
# instance generator, not of the model. A cap keeps hopeless specs finite.
MAX_SAMPLE_REDRAWS = 32

_BISECT_TOL = 1e-13
_BISECT_MAX_ITER = 200
_CF_EPS = 3e-16
_CF_MAX_ITER = 600
_CF_TINY = 1e-300


# ---------------------------------------------------------------------------
# Exact binomial tail machinery
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, by the modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Evaluate the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def binomial_cdf(k: int, n: int, p: float) -> float:
    """Pr[Bin(n, p) <= k], exact through the incomplete beta relation."""
    if not (isinstance(k, int) and isinstance(n, int)):
        raise ValueError("k and n must be integers")
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if k == n or p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    return regularized_incomplete_beta(n - k, k + 1, 1.0 - p)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, p: float) -> bool:
        return self.lower <= p <= self.upper


def _bisect_decreasing(f, target: float) -> float:
    """Solve f(p) = target for f nonincreasing on [0, 1] with f(0) >= target >= f(1)."""
    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_MAX_ITER):
        if hi - lo <= _BISECT_TOL:
            break
        mid = (lo + hi) / 2.0
        if f(mid) >= target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def clopper_pearson(k: int, n: int, delta: float) -> Interval:
    """Exact two-sided binomial interval with delta split evenly per tail."""
    if not (isinstance(k, int) and isinstance(n, int)) or n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    half = delta / 2.0
    if k == 0:
        lower = 0.0
    else:
        # Pr[Bin(n, p) >= k] = delta/2  <=>  cdf(k-1, n, p) = 1 - delta/2
        lower = _bisect_decreasing(lambda p: binomial_cdf(k - 1, n, p), 1.0 - half)
    if k == n:
        upper = 1.0
    else:
        upper = _bisect_decreasing(lambda p: binomial_cdf(k, n, p), half)
    return Interval(lower, upper)


# ---------------------------------------------------------------------------
# Sampling loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PromptSample:
    """One fully constructed prompt plus the ground truth needed to judge it."""
    prompt: Prompt
    metadata: PromptMetadata
    distractor: tuple[str, int] | None
    s_query: tuple


def build_prompt_sample(subgraph: SubgraphView, spec: SpecConfig, rng) -> PromptSample:
    """Run one pass of the instance generator: path, query, options, context."""
    path = sample_path(subgraph, spec, rng)
    query = sample_query(path, subgraph, rng)
    distractor = None
    if spec.kind is SpecKind.SHUFFLE_DISTRACTOR:
        distractor = sample_distractor(subgraph, path, spec.distractor_mode, rng)
    options = generate_answer_options(subgraph, path, distractor, spec, rng)
    s_query, s_options, s_all = collect_evidence(subgraph, path, options)
    selected = build_context(s_query, s_options, s_all, spec.token_budget)
    distractor_node = distractor[0] if distractor is not None else None
    path_blocks, distractor_block, background = group_context_blocks(
        selected, path, distractor_node
    )
    arranged = arrange_context(path_blocks, spec.kind, distractor_block, rng)
    prompt = render_prompt(spec.few_shot_count, [*arranged, *background], query, options)
    metadata = PromptMetadata(
        correct_index=options.correct_index,
        n_options=len(options.options),
        hops=path.hops,
        distractor_index=options.distractor_index,
    )
    return PromptSample(prompt, metadata, distractor, tuple(s_query))


def prompt_export_record(spec: SpecConfig, sample: PromptSample) -> dict:
    """Line-delimited-JSON-ready record of one constructed prompt, for offline inspection."""
    return {
        "spec": spec.to_json_dict(),
        "query": sample.prompt.query.rendered,
        "options": list(sample.prompt.options.options),
        "correct_index": sample.prompt.options.correct_index,
        "prompt": sample.prompt.rendered,
    }


@dataclass(frozen=True)
class SampleRecord:
    index: int
    hops: int
    prompt_sha256: str
    correct: bool
    chosen_option: int | None
    redraws: int

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "hops": self.hops,
            "prompt_sha256": self.prompt_sha256,
            "verdict": self.correct,
            "chosen_option": self.chosen_option,
            "redraws": self.redraws,
        }


@dataclass(frozen=True)
class Certificate:
    spec: SpecConfig
    model_name: str
    model_info: dict
    n: int
    k: int
    interval: Interval
    accuracy: float
    per_hop: dict[int, tuple[int, int]]  # hops -> (n_h, k_h)
    checker_version: str
    created_at: str
    redraws: int
    samples: tuple[SampleRecord, ...] = ()
    log_ref: str | None = None

    def __post_init__(self):
        if not 0 <= self.k <= self.n:
            raise ValueError("need 0 <= k <= n")
        if abs(self.accuracy - self.k / self.n) > 1e-12:
            raise ValueError("accuracy must equal k/n")
        if not self.interval.contains(self.accuracy):
            raise ValueError("point estimate escaped its own interval")
        if sum(nh for nh, _ in self.per_hop.values()) != self.n:
            raise ValueError("per-hop tallies must sum to n")

    def with_log_ref(self, log_ref: str) -> "Certificate":
        return replace(self, log_ref=log_ref)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": CERTIFICATE_SCHEMA_VERSION,
            "spec": self.spec.to_json_dict(),
            "model": {"name": self.model_name, **self.model_info},
            "results": {
                "n": self.n,
                "k": self.k,
                "lower": self.interval.lower,
                "upper": self.interval.upper,
                "accuracy": self.accuracy,
                "per_hop": [
                    {"hops": h, "n": nh, "k": kh}
                    for h, (nh, kh) in sorted(self.per_hop.items())
                ],
                "redraws": self.redraws,
            },
            "checker_version": self.checker_version,
            "created_at": self.created_at,
            "samples_log": self.log_ref,
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, data: dict) -> "Certificate":
        if data.get("schema_version") != CERTIFICATE_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {data.get('schema_version')!r}")
        results = data["results"]
        model = dict(data["model"])
        name = model.pop("name")
        return cls(
            spec=SpecConfig.from_json_dict(data["spec"]),
            model_name=name,
            model_info=model,
            n=results["n"],
            k=results["k"],
            interval=Interval(results["lower"], results["upper"]),
            accuracy=results["accuracy"],
            per_hop={
                row["hops"]: (row["n"], row["k"]) for row in results["per_hop"]
            },
            checker_version=data["checker_version"],
            created_at=data["created_at"],
            redraws=results["redraws"],
            log_ref=data.get("samples_log"),
        )


def default_created_at() -> str:
    """Wall-clock UTC, or SOURCE_DATE_EPOCH when set for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def certify(
    graph: KnowledgeGraph,
    spec: SpecConfig,
    model,
    *,
    parallelism: int = 1,
    max_redraws: int = MAX_SAMPLE_REDRAWS,
    created_at: str | None = None,
) -> Certificate:
    """Estimate the model's success probability on the spec's distribution.

    Sample i derives its own RNG from (seed, i, redraw), so any degree of
    sample-level parallelism yields an identical certificate. A model-client
    failure aborts the run: dropping samples would bias the estimate.
    """
    if spec.pivot not in graph:
        raise KeyError(f"pivot {spec.pivot!r} not in graph")
    subgraph = extract_subgraph(graph, spec.pivot, spec.max_hops)

    def run_sample(index: int) -> SampleRecord:
        for redraw in range(max_redraws + 1):
            rng = derive_rng(spec.seed, index, redraw)
            try:
                sample = build_prompt_sample(subgraph, spec, rng)
            except (NoPathError, QueryEvidenceOverflowError, InsufficientCandidatesError) as exc:
                log.debug("sample %d redraw %d: %s", index, redraw, exc)
                continue
            response = model.complete(
                sample.prompt.rendered, metadata=sample.metadata, rng=rng
            )
            verdict = check_response(response, sample.metadata.correct_index)
            digest = hashlib.sha256(sample.prompt.rendered.encode("utf-8")).hexdigest()
            return SampleRecord(
                index=index,
                hops=sample.metadata.hops,
                prompt_sha256=digest,
                correct=verdict.correct,
                chosen_option=verdict.chosen_option,
                redraws=redraw,
            )
        raise CertificationError(
            f"sample {index} exhausted {max_redraws} re-draws for pivot {spec.pivot!r}"
        )

    indices = range(1, spec.n_samples + 1)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(run_sample, indices))
    else:
        records = [run_sample(i) for i in indices]

    k = sum(r.correct for r in records)
    per_hop: dict[int, list[int]] = {}
    for r in records:
        tally = per_hop.setdefault(r.hops, [0, 0])
        tally[0] += 1
        tally[1] += r.correct
    interval = clopper_pearson(k, spec.n_samples, spec.delta)
    return Certificate(
        spec=spec,
        model_name=model.name,
        model_info=model.describe(),
        n=spec.n_samples,
        k=k,
        interval=interval,
        accuracy=k / spec.n_samples,
        per_hop={h: (nh, kh) for h, (nh, kh) in sorted(per_hop.items())},
        checker_version=CHECKER_VERSION,
        created_at=created_at if created_at is not None else default_created_at(),
        redraws=sum(r.redraws for r in records),
        samples=tuple(records),
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class SummaryRow:
    model: str
    kind: SpecKind
    count: int
    mean_lower: float
    std_lower: float
    mean_upper: float
    std_upper: float
    mean_accuracy: float
    std_accuracy: float
    mean_width: float

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "kind": self.kind.value,
            "count": self.count,
            "mean_lower": self.mean_lower,
            "std_lower": self.std_lower,
            "mean_upper": self.mean_upper,
            "std_upper": self.std_upper,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "mean_width": self.mean_width,
        }


@dataclass(frozen=True)
class Summary:
    rows: tuple[SummaryRow, ...]

    def to_json_dict(self) -> dict:
        return {"rows": [r.to_json_dict() for r in self.rows]}

    def to_text_table(self) -> str:
        header = (
            f"{'model':<28} {'kind':<20} {'n certs':>7} "
            f"{'lower':>13} {'upper':>13} {'accuracy':>13} {'width':>7}"
        )
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.model:<28} {r.kind.value:<20} {r.count:>7d} "
                f"{r.mean_lower:>6.3f}+-{r.std_lower:<5.3f} "
                f"{r.mean_upper:>6.3f}+-{r.std_upper:<5.3f} "
                f"{r.mean_accuracy:>6.3f}+-{r.std_accuracy:<5.3f} "
                f"{r.mean_width:>7.3f}"
            )
        return "\n".join(lines)


def aggregate(certs: Sequence[Certificate]) -> Summary:
    """Mean and population std of bounds and accuracy per (model, kind)."""
    if not certs:
        raise ValueError("no certificates to aggregate")
    groups: dict[tuple[str, SpecKind], list[Certificate]] = {}
    for cert in certs:
        groups.setdefault((cert.model_name, cert.spec.kind), []).append(cert)
    rows = []
    for (model, kind), members in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        mean_lo, std_lo = _mean_std([c.interval.lower for c in members])
        mean_up, std_up = _mean_std([c.interval.upper for c in members])
        mean_acc, std_acc = _mean_std([c.accuracy for c in members])
        mean_width, _ = _mean_std([c.interval.width for c in members])
        rows.append(SummaryRow(
            model=model, kind=kind, count=len(members),
            mean_lower=mean_lo, std_lower=std_lo,
            mean_upper=mean_up, std_upper=std_up,
            mean_accuracy=mean_acc, std_accuracy=std_acc,
            mean_width=mean_width,
        ))
    return Summary(tuple(rows))


@dataclass(frozen=True)
class PerHopRow:
    hops: int
    n: int
    k: int
    accuracy: float
    interval: Interval

    def to_json_dict(self) -> dict:
        return {
            "hops": self.hops,
            "n": self.n,
            "k": self.k,
            "accuracy": self.accuracy,
            "lower": self.interval.lower,
            "upper": self.interval.upper,
        }


def per_hop_report(certs: Sequence[Certificate]) -> list[PerHopRow]:
    """Pool per-hop tallies across certificates; empty hop buckets are omitted.

    All certificates must share one confidence level, since the pooled
    intervals are computed at that level.
    """
    if not certs:
        raise ValueError("no certificates to pool")
    deltas = {c.spec.delta for c in certs}
    if len(deltas) > 1:
        raise ValueError("certificates mix confidence levels")
    delta = deltas.pop()
    pooled: dict[int, list[int]] = {}
    for cert in certs:
        for hops, (nh, kh) in cert.per_hop.items():
            tally = pooled.setdefault(hops, [0, 0])
            tally[0] += nh
            tally[1] += kh
    rows = []
    for hops in sorted(pooled):
        nh, kh = pooled[hops]
        if nh == 0:
            continue
        rows.append(PerHopRow(
            hops=hops, n=nh, k=kh, accuracy=kh / nh,
            interval=clopper_pearson(kh, nh, delta),
        ))
    return rows


def per_hop_text_table(rows: Sequence[PerHopRow]) -> str:
    header = f"{'hops':>4} {'n':>7} {'k':>7} {'accuracy':>9} {'lower':>8} {'upper':>8}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.hops:>4d} {r.n:>7d} {r.k:>7d} {r.accuracy:>9.4f} "
            f"{r.interval.lower:>8.4f} {r.interval.upper:>8.4f}"
        )
    return "\n".join(lines)
