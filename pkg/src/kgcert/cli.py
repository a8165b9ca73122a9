"""Command-line entry point.

Subcommands: preprocess (raw files -> graph artifact), pivots (qualifying
pivot sampling), certify (run certifications, resumable), report (summary
and per-hop tables over a certificate directory), validate-mock (Monte
Carlo check of the coverage guarantee against the bundled toy graph).

Exit codes: 0 ok, 1 usage, 2 io/format, 3 model failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data as _data
from .certify import (
    Certificate,
    aggregate,
    certify,
    per_hop_report,
    per_hop_text_table,
)
from .client import (
    HttpModelClient,
    MockModelClient,
    MockOracleConfig,
    ModelEndpoint,
)
from .errors import KgcertError, ModelClientError
from .kg import (
    DEFAULT_BANNED_RELATIONS,
    build_graph,
    load_graph,
    parse_raw_dataset,
    save_graph,
)
from .rand import derive_rng
from .sampling import (
    DistractorMode,
    PivotCriteria,
    SpecConfig,
    SpecKind,
    load_pivots,
    save_pivots,
    select_pivots,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_MODEL = 3
EXIT_VALIDATION = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def parse_model_spec(args) -> MockModelClient | HttpModelClient:
    """Build a client from --model plus the http flags.

    Mock syntax: ``mock:always-correct``, ``mock:always-distracted``,
    ``mock:fixed:<p>``, ``mock:per-hop:1=0.9,2=0.7``.
    """
    spec: str = args.model
    if spec == "http":
        if not args.base_url or not args.model_name:
            raise ValueError("--model http requires --base-url and --model-name")
        return HttpModelClient(ModelEndpoint(
            base_url=args.base_url,
            model_name=args.model_name,
            api_key_ref=args.api_key_env,
            temperature=args.temperature,
            timeout=args.timeout,
            max_retries=args.max_retries,
            rate_limit=args.rate_limit,
            max_tokens=args.max_tokens,
        ))
    if not spec.startswith("mock:"):
        raise ValueError(f"unknown model spec {spec!r} (expected http or mock:...)")
    rest = spec[len("mock:"):]
    seed = args.mock_seed
    if rest == "always-correct":
        return MockModelClient(MockOracleConfig.always_correct(seed))
    if rest == "always-distracted":
        return MockModelClient(MockOracleConfig.always_distracted(seed))
    if rest.startswith("fixed:"):
        return MockModelClient(MockOracleConfig.fixed(float(rest[len("fixed:"):]), seed))
    if rest.startswith("per-hop:"):
        table = {}
        for pair in rest[len("per-hop:"):].split(","):
            hops, _, p = pair.partition("=")
            table[int(hops)] = float(p)
        return MockModelClient(MockOracleConfig.per_hop(table, seed))
    raise ValueError(f"unknown mock mode {rest!r}")


def cmd_preprocess(args) -> int:
    raw = parse_raw_dataset(
        args.triples, args.entity_aliases, args.relation_aliases, args.corpus
    )
    banned = (
        frozenset(args.banned_relation) if args.banned_relation
        else DEFAULT_BANNED_RELATIONS
    )
    graph = build_graph(raw, banned)
    save_graph(graph, args.out)
    stats = graph.stats.to_json_dict() if graph.stats else {}
    print(f"wrote {args.out}: {stats.get('nodes')} nodes, {stats.get('edges')} edges")
    if args.stats:
        Path(args.stats).write_text(
            json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.stats}")
    return EXIT_OK


def cmd_pivots(args) -> int:
    graph = load_graph(args.graph)
    criteria = PivotCriteria(
        top_k=args.top_k,
        min_subgraph_nodes=args.min_subgraph,
        radius=args.max_hops,
    )
    pivots = select_pivots(graph, args.count, criteria, derive_rng(args.seed, "pivots"))
    save_pivots(pivots, args.out)
    print(f"wrote {args.out}: {len(pivots)} pivots")
    return EXIT_OK


def _certificate_paths(out_dir: Path, pivot: str, kind: SpecKind) -> tuple[Path, Path]:
    stem = f"{pivot}_{kind.value}"
    return out_dir / f"certificate_{stem}.json", out_dir / f"samples_{stem}.jsonl"


def _load_finished(path: Path, spec: SpecConfig) -> Certificate | None:
    if not path.exists():
        return None
    try:
        cert = Certificate.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
    except (ValueError, KeyError):
        return None
    return cert if cert.spec == spec else None


def cmd_certify(args) -> int:
    graph = load_graph(args.graph)
    model = parse_model_spec(args)
    pivots = load_pivots(args.pivots) if args.pivots else list(args.pivot or [])
    if not pivots:
        raise ValueError("no pivots given (use --pivots FILE or --pivot ID)")
    kinds = [SpecKind(k) for k in (args.kind or ["vanilla"])]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    for pivot in pivots:
        for kind in kinds:
            spec = SpecConfig(
                pivot=pivot,
                kind=kind,
                max_hops=args.max_hops,
                n_samples=args.n_samples,
                confidence=args.confidence,
                seed=args.seed,
                few_shot_count=args.few_shot,
                distractor_mode=DistractorMode(args.distractor_mode),
                min_num_options=args.min_options,
                token_budget=args.token_budget,
            )
            cert_path, log_path = _certificate_paths(out_dir, pivot, kind)
            if _load_finished(cert_path, spec) is not None:
                print(f"skip {cert_path.name}: already certified")
                continue
            cert = certify(graph, spec, model, parallelism=args.parallelism)
            cert = cert.with_log_ref(log_path.name)
            tmp = log_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for record in cert.samples:
                    fh.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")
            tmp.replace(log_path)
            tmp = cert_path.with_suffix(".tmp")
            tmp.write_text(cert.to_json_text(), encoding="utf-8")
            tmp.replace(cert_path)
            print(
                f"wrote {cert_path.name}: k={cert.k}/{cert.n} "
                f"interval=[{cert.interval.lower:.4f}, {cert.interval.upper:.4f}]"
            )
    return EXIT_OK


def _load_certificates(cert_dir: Path) -> list[Certificate]:
    certs = []
    for path in sorted(cert_dir.glob("certificate_*.json")):
        certs.append(Certificate.from_json_dict(
            json.loads(path.read_text(encoding="utf-8"))
        ))
    return certs


def cmd_report(args) -> int:
    cert_dir = Path(args.certs)
    certs = _load_certificates(cert_dir)
    if not certs:
        print(f"no certificates found in {cert_dir}", file=sys.stderr)
        return EXIT_IO
    summary = aggregate(certs)
    hop_rows = per_hop_report(certs)
    print(summary.to_text_table())
    print()
    print(per_hop_text_table(hop_rows))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "summary.json").write_text(
            json.dumps(summary.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (out_dir / "per_hop.json").write_text(
            json.dumps([r.to_json_dict() for r in hop_rows], indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(f"\nwrote {out_dir}/summary.json and {out_dir}/per_hop.json")
    return EXIT_OK


def load_toy_graph():
    paths = _data.toy_dataset_paths()
    raw = parse_raw_dataset(
        paths["triples"], paths["entity_aliases"], paths["relation_aliases"], paths["corpus"]
    )
    return build_graph(raw)


def cmd_validate_mock(args) -> int:
    graph = load_toy_graph()
    covered = 0
    for run in range(args.runs):
        spec = SpecConfig(
            pivot=args.pivot,
            kind=SpecKind(args.kind),
            n_samples=args.n_samples,
            confidence=args.confidence,
            seed=args.seed + run,
            token_budget=args.token_budget,
        )
        model = MockModelClient(MockOracleConfig.fixed(args.p, seed=args.seed + run))
        cert = certify(graph, spec, model)
        if cert.interval.contains(args.p):
            covered += 1
    coverage = covered / args.runs
    report = {
        "runs": args.runs,
        "p": args.p,
        "n_samples": args.n_samples,
        "confidence": args.confidence,
        "covered": covered,
        "coverage": coverage,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if coverage < args.confidence:
        print(
            f"coverage {coverage:.4f} below target {args.confidence}", file=sys.stderr
        )
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgcert", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="build a graph artifact from raw files")
    p.add_argument("--triples", required=True)
    p.add_argument("--entity-aliases", required=True)
    p.add_argument("--relation-aliases", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="also write a JSON stats report")
    p.add_argument(
        "--banned-relation", action="append",
        help="relation alias to remove (repeatable; default: instance of, subclass of, part of)",
    )
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("pivots", help="sample qualifying pivot nodes")
    p.add_argument("--graph", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=2000)
    p.add_argument("--min-subgraph", type=int, default=2000)
    p.add_argument("--max-hops", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_pivots)

    p = sub.add_parser("certify", help="run certifications for pivots x kinds")
    p.add_argument("--graph", required=True)
    p.add_argument("--pivots", help="file with one pivot id per line")
    p.add_argument("--pivot", action="append", help="pivot id (repeatable)")
    p.add_argument(
        "--kind", action="append", choices=[k.value for k in SpecKind],
        help="specification kind (repeatable; default vanilla)",
    )
    p.add_argument("--n-samples", type=int, default=250)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--max-hops", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--few-shot", type=int, default=2)
    p.add_argument(
        "--distractor-mode", choices=[m.value for m in DistractorMode], default="tail",
    )
    p.add_argument("--min-options", type=int, default=5)
    p.add_argument("--token-budget", type=int, default=4096)
    p.add_argument("--model", required=True, help="http or mock:<mode>")
    p.add_argument("--base-url")
    p.add_argument("--model-name")
    p.add_argument("--api-key-env", default="MODEL_API_KEY")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--rate-limit", type=float)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--mock-seed", type=int, default=0)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("report", help="summarize a directory of certificates")
    p.add_argument("--certs", required=True)
    p.add_argument("--out", help="directory for summary.json / per_hop.json")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser(
        "validate-mock",
        help="Monte Carlo coverage check of the certifier on the toy graph",
    )
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--p", type=float, default=0.52)
    p.add_argument("--n-samples", type=int, default=250)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pivot", default="Q1")
    p.add_argument("--kind", choices=[k.value for k in SpecKind], default="vanilla")
    p.add_argument("--token-budget", type=int, default=4096)
    p.set_defaults(handler=cmd_validate_mock)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except ModelClientError as exc:
        print(f"model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (KgcertError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
