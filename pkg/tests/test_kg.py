from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgcert import (
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
from kgcert.errors import EmptyGraphError, FormatError


def write_dataset(tmp_path, triples, entity_aliases, relation_aliases, corpus):
    files = {}
    files["triples"] = tmp_path / "triples.tsv"
    files["triples"].write_text(
        "".join(f"{h}\t{r}\t{t}\n" for h, r, t in triples), encoding="utf-8"
    )
    files["entities"] = tmp_path / "entities.tsv"
    files["entities"].write_text(
        "".join(f"{e}\t" + "\t".join(al) + "\n" for e, al in entity_aliases.items()),
        encoding="utf-8",
    )
    files["relations"] = tmp_path / "relations.tsv"
    files["relations"].write_text(
        "".join(f"{r}\t" + "\t".join(al) + "\n" for r, al in relation_aliases.items()),
        encoding="utf-8",
    )
    files["corpus"] = tmp_path / "corpus.tsv"
    files["corpus"].write_text(
        "".join(f"{e}\t{text}\n" for e, text in corpus.items()), encoding="utf-8"
    )
    return files


def parse(files, **kwargs):
    return parse_raw_dataset(
        files["triples"], files["entities"], files["relations"], files["corpus"], **kwargs
    )


class TestParseRawDataset:
    def test_triple_line(self, tmp_path):
        files = write_dataset(
            tmp_path, [("Q1", "P1", "Q2")], {"Q1": ["a"]}, {"P1": ["r"]}, {"Q1": "x"}
        )
        raw = parse(files)
        assert raw.triples == [("Q1", "P1", "Q2")]

    def test_alias_line(self, tmp_path):
        files = write_dataset(
            tmp_path, [], {"Q1": ["Douglas Adams", "D. Adams"]}, {}, {}
        )
        raw = parse(files)
        assert raw.entity_aliases["Q1"] == ["Douglas Adams", "D. Adams"]

    def test_malformed_corpus_line_skipped_and_counted(self, tmp_path):
        files = write_dataset(tmp_path, [], {}, {}, {"Q1": "text"})
        files["corpus"].write_text("Q1\ttext\nno-tab-here\n", encoding="utf-8")
        raw = parse(files)
        assert raw.corpus == {"Q1": "text"}
        assert raw.skipped_lines == {"corpus.tsv": 1}

    def test_malformed_triple_skipped_and_counted(self, tmp_path):
        files = write_dataset(tmp_path, [("Q1", "P1", "Q2")], {}, {}, {})
        files["triples"].write_text("Q1\tP1\tQ2\nQ1\tP1\n", encoding="utf-8")
        raw = parse(files)
        assert raw.triples == [("Q1", "P1", "Q2")]
        assert raw.skipped_lines == {"triples.tsv": 1}

    def test_strict_mode_raises_with_line_number(self, tmp_path):
        files = write_dataset(tmp_path, [], {}, {}, {})
        files["triples"].write_text("Q1\tP1\tQ2\nQ1\tP1\n", encoding="utf-8")
        with pytest.raises(FormatError) as err:
            parse(files, strict=True)
        assert err.value.line_no == 2

    def test_missing_file(self, tmp_path):
        files = write_dataset(tmp_path, [], {}, {}, {})
        files["triples"].unlink()
        with pytest.raises(OSError):
            parse(files)

    def test_corpus_text_may_contain_tabs(self, tmp_path):
        files = write_dataset(tmp_path, [], {}, {}, {})
        files["corpus"].write_text("Q1\tleft\tright\n", encoding="utf-8")
        raw = parse(files)
        assert raw.corpus["Q1"] == "left\tright"

    def test_duplicate_alias_deduplicated(self, tmp_path):
        files = write_dataset(tmp_path, [], {"Q1": ["A", "A", "B"]}, {}, {})
        raw = parse(files)
        assert raw.entity_aliases["Q1"] == ["A", "B"]


class TestFilterRelations:
    def make_raw(self):
        return RawDataset(
            triples=[("Q1", "P31", "Q2"), ("Q1", "P5", "Q3")],
            entity_aliases={},
            relation_aliases={"P31": ["instance of"], "P5": ["director"]},
            corpus={},
        )

    def test_banned_alias_removed(self):
        raw = self.make_raw()
        out = filter_relations(raw)
        assert out.triples == [("Q1", "P5", "Q3")]

    def test_empty_banned_is_identity(self):
        raw = self.make_raw()
        out = filter_relations(raw, banned=set())
        assert out.triples == raw.triples

    def test_case_insensitive(self):
        raw = RawDataset(
            triples=[("Q1", "P5", "Q2")],
            entity_aliases={},
            relation_aliases={"P5": ["Part Of"]},
            corpus={},
        )
        assert filter_relations(raw).triples == []

    def test_monotone_subset(self):
        raw = self.make_raw()
        out = filter_relations(raw, banned={"director"})
        assert set(out.triples) <= set(raw.triples)


class TestAttachEdgeEvidence:
    def test_evidence_indices(self, tmp_path):
        files = write_dataset(
            tmp_path,
            [("U", "P1", "V")],
            {"U": ["X"], "V": ["Y"]},
            {"P1": ["stars"]},
            {"U": "X is a film. It stars Y.", "V": "Y is an actor."},
        )
        graph = build_graph(parse(files))
        edge = graph.out_edges("U")[0]
        assert edge.evidence_src == (1,)
        assert edge.evidence_dst == ()

    def test_no_mention_drops_edge(self, tmp_path):
        files = write_dataset(
            tmp_path,
            [("U", "P1", "V"), ("U", "P2", "W")],
            {"U": ["X"], "V": ["Y"], "W": ["Z"]},
            {"P1": ["r1"], "P2": ["r2"]},
            {"U": "X is a film. It stars Y.", "V": "Y is an actor.", "W": "Z is unrelated."},
        )
        graph = build_graph(parse(files))
        assert [e.dst for e in graph.out_edges("U")] == ["V"]
        assert graph.stats.dropped_no_evidence == 1

    def test_word_boundary(self, tmp_path):
        # "Y" inside "Yearly" must not count as a mention of Y.
        files = write_dataset(
            tmp_path,
            [("U", "P1", "V"), ("U", "P2", "W")],
            {"U": ["X"], "V": ["Y"], "W": ["Z"]},
            {"P1": ["r1"], "P2": ["r2"]},
            {"U": "X has a Yearly budget. X funds Z.", "V": "Y is here.", "W": "Z is here."},
        )
        graph = build_graph(parse(files))
        assert [e.dst for e in graph.out_edges("U")] == ["W"]

    def test_case_insensitive_mention(self, tmp_path):
        files = write_dataset(
            tmp_path,
            [("U", "P1", "V")],
            {"U": ["X"], "V": ["Port Mira"]},
            {"P1": ["r1"]},
            {"U": "X lies near PORT MIRA.", "V": "Port Mira is a city."},
        )
        graph = build_graph(parse(files))
        assert graph.out_edges("U")[0].evidence_src == (0,)


class TestBuildGraph:
    def test_chain_construction(self, tmp_path):
        files = write_dataset(
            tmp_path,
            [("A", "P1", "B"), ("B", "P2", "C")],
            {"A": ["Ann"], "B": ["Bob"], "C": ["Cat"]},
            {"P1": ["knows"], "P2": ["likes"]},
            {"A": "Ann knows Bob.", "B": "Bob likes Cat.", "C": "Cat is a cat."},
        )
        graph = build_graph(parse(files))
        assert len(graph.nodes) == 3
        assert len(graph.out_edges("A")) == 1 and len(graph.out_edges("B")) == 1

    def test_missing_corpus_entity_drops_edge(self, tmp_path):
        files = write_dataset(
            tmp_path,
            [("A", "P1", "B"), ("A", "P1", "C")],
            {"A": ["Ann"], "B": ["Bob"], "C": ["Cat"]},
            {"P1": ["knows"]},
            {"A": "Ann knows Bob. Ann knows Cat.", "B": "Bob met Ann."},
        )
        graph = build_graph(parse(files))
        assert "C" not in graph
        assert graph.stats.dropped_missing_node == 1

    def test_empty_graph_error(self, tmp_path):
        files = write_dataset(
            tmp_path,
            [("A", "P1", "B")],
            {"A": ["Ann"], "B": ["Bob"]},
            {"P1": ["knows"]},
            {"A": "Nothing relevant here.", "B": "Nor here."},
        )
        with pytest.raises(EmptyGraphError):
            build_graph(parse(files))

    def test_deterministic_serialization(self, toy_raw):
        one = serialize_graph(build_graph(toy_raw))
        two = serialize_graph(build_graph(toy_raw))
        assert one == two

    def test_toy_fixture_counts(self, toy_graph):
        stats = toy_graph.stats
        assert len(toy_graph.nodes) == 12
        assert len(toy_graph.edges) == 13
        assert stats.dropped_banned_relation == 1
        assert stats.dropped_duplicate == 1
        assert stats.dropped_self_loop == 1
        assert stats.dropped_missing_node == 1
        assert stats.dropped_no_evidence == 2
        assert stats.orphan_nodes_removed == 1

    def test_every_edge_endpoint_present(self, toy_graph):
        for edge in toy_graph.edges:
            assert edge.src in toy_graph.nodes
            assert edge.dst in toy_graph.nodes

    def test_adjacency_consistent_with_edge_set(self, toy_graph):
        from_adjacency = {
            e for nid in toy_graph.nodes for e in toy_graph.out_edges(nid)
        }
        assert from_adjacency == set(toy_graph.edges)


class TestSerialization:
    def test_round_trip_structural_equality(self, toy_graph, tmp_path):
        path = tmp_path / "graph.jsonl"
        save_graph(toy_graph, path)
        assert load_graph(path) == toy_graph

    def test_round_trip_byte_stability(self, toy_graph):
        text = serialize_graph(toy_graph)
        assert serialize_graph(parse_graph(text)) == text

    def test_header_required(self):
        with pytest.raises(FormatError):
            parse_graph('{"type":"node"}\n')

    def test_bad_record_reports_line(self):
        text = "kgcert-graph 1\n{\"type\":\"edge\",\"src\":\"A\"}\n"
        with pytest.raises(FormatError) as err:
            parse_graph(text)
        assert err.value.line_no == 2


# Random small corpora: nodes that mention a neighbor by alias in their text
# must yield evidenced edges; nothing else survives.
@st.composite
def random_dataset(draw):
    n_nodes = draw(st.integers(min_value=2, max_value=6))
    ids = [f"N{i}" for i in range(n_nodes)]
    aliases = {nid: [f"{nid} alias"] for nid in ids}
    edges = draw(
        st.lists(
            st.tuples(
                st.sampled_from(ids), st.sampled_from(["R1", "R2"]), st.sampled_from(ids)
            ),
            max_size=8,
        )
    )
    mentions = draw(st.lists(st.booleans(), min_size=len(edges), max_size=len(edges)))
    corpus = {nid: f"{nid} alias is a node." for nid in ids}
    for (h, r, t), mention in zip(edges, mentions):
        if mention:
            corpus[h] += f" {h} alias has {r} toward {t} alias."
    return RawDataset(
        triples=list(edges),
        entity_aliases=aliases,
        relation_aliases={"R1": ["relates to"], "R2": ["belongs with"]},
        corpus=corpus,
    )


@given(random_dataset())
@settings(max_examples=60, deadline=None)
def test_every_retained_edge_has_evidence(raw):
    graph = attach_edge_evidence(normalize_dataset(raw))
    for edge in graph.edges:
        assert edge.evidence_src or edge.evidence_dst


@given(random_dataset(), st.sets(st.sampled_from(["relates to", "belongs with"])))
@settings(max_examples=40, deadline=None)
def test_filter_relations_monotone(raw, banned):
    out = filter_relations(raw, banned=banned)
    assert set(out.triples) <= set(raw.triples)
    if not banned:
        assert out.triples == raw.triples
