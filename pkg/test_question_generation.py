#!/usr/bin/env python3
"""
Question Generation Test Suite
==============================
Relation chains, question construction, distractors, categories and the
benchmark file format.

Test Cases:
1. Chain sampling equals exhaustive simple-path enumeration on 50 random graphs; chain tails equal
   the nodes within reach
2. KA questions on the toy knowledge base are multiple choice with one correct option
3. Category assignment by provenance
4. Gold option position is uniform over 1000 seeds; options distinct under answer normalization
5. Benchmark file round trip and determinism
"""

import sys

import networkx as nx
import numpy as np
import pytest
from scipy import stats

from entity_synthesis import CLASS_COMMON, EXTENSION, HEREDITY, VARIATION, SynthesisConfig, generate_batch
from knowledge_base import AttributeTriplet, AttributeValue, RelationTriplet
from pipeline_errors import ArtifactFormatError, InsufficientDistractors, UsageError
from question_generation import (DROPOUT, KA, KD, KU, NO, Question, QuestionConfig, RelationChain,
                                 build_relation_graph, follow_relations, generate_benchmark,
                                 generate_questions, make_boolean, make_choices, make_onehop_question,
                                 read_benchmark, sample_chains, write_benchmark)
from question_templates import BOOLEAN, FILL_IN_BLANK, MULTIPLE_CHOICE, QuestionTemplate

RELATION_NAMES = ("eaten by", "prey on", "compete with")


def random_graph(rng: np.random.Generator) -> nx.MultiDiGraph:
    size = int(rng.integers(2, 16))
    nodes = [f"n{i}" for i in range(size)]
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(nodes)
    density = 2.0 / size
    for u in nodes:
        for v in nodes:
            if u == v:
                continue
            for relation in RELATION_NAMES:
                if rng.random() < density / len(RELATION_NAMES):
                    graph.add_edge(u, v, key=relation)
    return graph


def all_simple_paths(graph: nx.MultiDiGraph, root: str, min_hops: int, max_hops: int) -> set:
    found = set()

    def extend(node, path, visited):
        if len(path) >= min_hops:
            found.add(path)
        if len(path) == max_hops:
            return
        for _, target, key in graph.out_edges(node, keys=True):
            if target not in visited:
                extend(target, path + ((node, key, target),), visited | {target})

    extend(root, (), {root})
    return found


def as_tuples(chain: RelationChain) -> tuple:
    return tuple((link.subject, link.relation, link.object) for link in chain.links)


def test_chain_sampling_matches_exhaustive_enumeration():
    rng = np.random.default_rng(123)
    for _ in range(50):
        graph = random_graph(rng)
        min_hops = int(rng.integers(1, 3))
        max_hops = min_hops + int(rng.integers(0, 3))
        chains = sample_chains(graph, "n0", min_hops, max_hops, limit=None)
        sampled = [as_tuples(c) for c in chains]
        assert len(sampled) == len(set(sampled))
        assert set(sampled) == all_simple_paths(graph, "n0", min_hops, max_hops)
        assert [len(c) for c in chains] == sorted(len(c) for c in chains)


def test_chain_limit_subsamples_deterministically():
    graph = nx.MultiDiGraph()
    for i in range(6):
        graph.add_edge("root", f"a{i}", key="prey on")
        graph.add_edge(f"a{i}", f"b{i}", key="compete with")
        graph.add_edge(f"a{i}", f"c{i}", key="eaten by")
    full = sample_chains(graph, "root", 2, 2, limit=None)
    assert len(full) == 12
    first = sample_chains(graph, "root", 2, 2, limit=5, rng=np.random.default_rng(4))
    second = sample_chains(graph, "root", 2, 2, limit=5, rng=np.random.default_rng(4))
    assert first == second
    assert len(first) == 5 and set(first) <= set(full)
    assert sample_chains(graph, "root", 2, 2, limit=5) == full[:5]


def test_invalid_hop_range_is_a_usage_error():
    with pytest.raises(UsageError):
        sample_chains(nx.MultiDiGraph(), "root", 3, 2)
    assert sample_chains(nx.MultiDiGraph(), "missing", 1, 2) == []


def test_chain_rejects_revisits_and_breaks():
    with pytest.raises(ValueError):
        RelationChain((RelationTriplet("a", "prey on", "b"), RelationTriplet("b", "prey on", "a")))
    with pytest.raises(ValueError):
        RelationChain((RelationTriplet("a", "prey on", "b"), RelationTriplet("c", "prey on", "d")))


def test_chain_tails_are_the_nodes_within_reach():
    rng = np.random.default_rng(321)
    for _ in range(50):
        graph = random_graph(rng)
        max_hops = int(rng.integers(1, 4))
        tails = {c.tail for c in sample_chains(graph, "n0", 1, max_hops, limit=None)}
        reachable = nx.single_source_shortest_path_length(graph, "n0", cutoff=max_hops)
        assert tails == {node for node, hops in reachable.items() if hops >= 1}


def test_relation_graph_adds_the_entity_edges(toy_kb):
    for seed in range(5):
        entity = camelid(toy_kb, seed)
        graph = build_relation_graph(toy_kb, entity)
        kb_edges = sum(len(e.relations) for e in toy_kb.entities.values())
        assert entity.relations
        assert graph.number_of_edges() == kb_edges + len(entity.relations)
        assert sorted((key, target) for _, target, key in graph.out_edges(entity.id, keys=True)) == \
            sorted((r.relation, r.object) for r in entity.relations)
        assert graph.in_degree(entity.id) == 0


def camelid(toy_kb, seed=1):
    result = generate_batch(toy_kb, SynthesisConfig(rng_seed=seed))
    return next(e for e in result.entities if e.class_id == "camelidae")


def test_camelid_knowledge_association_questions(toy_kb):
    entity = camelid(toy_kb)
    graph = build_relation_graph(toy_kb, entity)
    assert follow_relations(graph, entity.id, ["eaten by", "compete with"]) == {"coyote"}

    questions = generate_questions(toy_kb, entity, QuestionConfig(rng_seed=1))
    ka = [q for q in questions if q.category == KA]
    assert sorted(q.gold_answers[0] for q in ka) == ["Coyote", "Guanaco", "Vicuna"]
    for question in ka:
        assert question.form == MULTIPLE_CHOICE
        assert len(question.choices) == 4
        assert question.correct_choice == question.gold_answers[0]
        assert entity.name not in question.choices
        assert question.chain.root == entity.id
        assert 2 <= len(question.chain) <= 3
        assert question.origin == "chain"


def test_category_assignment_follows_provenance(toy_kb):
    entity = camelid(toy_kb, seed=8)
    questions = generate_questions(toy_kb, entity, QuestionConfig(rng_seed=8))
    ids = [q.id for q in questions]
    assert len(ids) == len(set(ids))
    for question in questions:
        assert question.id.startswith(f"{entity.id}/{question.category}/")
        if question.category == KU:
            assert question.origin in (CLASS_COMMON, HEREDITY, EXTENSION)
        elif question.category == KD:
            assert question.origin in (VARIATION, DROPOUT)
            assert isinstance(question.evidence[0], AttributeTriplet)
        if question.origin == DROPOUT:
            assert question.form == BOOLEAN and question.gold_answers == (NO,)
        if question.choices is not None:
            assert len({c.casefold() for c in question.choices}) == 4

    dropped = {t.name for t in entity.dropped if isinstance(t, AttributeTriplet)}
    assert {q.evidence[0].name for q in questions if q.origin == DROPOUT} == dropped


def test_kd_sample_rate_zero_gives_no_kd(toy_kb):
    entity = camelid(toy_kb)
    questions = generate_questions(toy_kb, entity, QuestionConfig(kd_sample_rate=0.0))
    assert not [q for q in questions if q.category == KD]


def test_multiple_choice_for_an_attribute(toy_kb):
    triplet = AttributeTriplet("x", "body mass", AttributeValue.numeric(58.2, "kg"))
    template = QuestionTemplate("body mass", MULTIPLE_CHOICE, "What is the body mass of [T]?")
    draft = make_onehop_question(triplet, template, "Vicalpa", class_id="camelidae")
    choices = make_choices(draft, toy_kb, np.random.default_rng(0))
    assert len(choices) == 4
    assert "58.2 kg" in choices
    # class members first
    assert {"60.0 kg", "50.0 kg", "120.0 kg"} == set(choices) - {"58.2 kg"}


def test_gold_position_is_uniform(toy_kb):
    triplet = AttributeTriplet("x", "body mass", AttributeValue.numeric(58.2, "kg"))
    template = QuestionTemplate("body mass", MULTIPLE_CHOICE, "What is the body mass of [T]?")
    draft = make_onehop_question(triplet, template, "Vicalpa", class_id="camelidae")
    positions = [0, 0, 0, 0]
    for seed in range(1000):
        positions[make_choices(draft, toy_kb, np.random.default_rng(seed)).index("58.2 kg")] += 1
    assert all(200 <= count <= 300 for count in positions), positions
    assert stats.chisquare(positions).pvalue > 1e-3


def test_distractors_skip_other_values_the_entity_holds(toy_kb):
    triplet = AttributeTriplet("x", "habitat", AttributeValue.categorical(["grassland"]))
    template = QuestionTemplate("habitat", MULTIPLE_CHOICE, "What is the habitat of [T]?")
    payload = {"name": "Vicalpa", "property": {"habitat": ["grassland", "marine"]}, "rank": "species"}
    draft = make_onehop_question(triplet, template, "Vicalpa", class_id="camelidae", knowledge_payload=payload)
    for seed in range(20):
        choices = make_choices(draft, toy_kb, np.random.default_rng(seed))
        assert "marine" not in choices and "grassland" in choices


def test_multiple_choice_needs_three_distractors(alpaca_kb):
    triplet = AttributeTriplet("x", "diet", AttributeValue.categorical(["herbivore"]))
    template = QuestionTemplate("diet", FILL_IN_BLANK, "What is the diet of [T]?")
    draft = make_onehop_question(triplet, template, "Vicalpa", class_id="camelidae")
    with pytest.raises(InsufficientDistractors):
        make_choices(draft, alpaca_kb, np.random.default_rng(0))


def test_template_must_fit_the_property():
    triplet = AttributeTriplet("x", "diet", AttributeValue.categorical(["herbivore"]))
    template = QuestionTemplate("habitat", FILL_IN_BLANK, "What is the habitat of [T]?")
    with pytest.raises(UsageError):
        make_onehop_question(triplet, template, "Vicalpa")


def test_boolean_questions():
    triplet = AttributeTriplet("x", "diet", AttributeValue.categorical(["herbivore"]))
    templates = [QuestionTemplate("diet", BOOLEAN, "Is the diet of [T] [V]?")]
    rng = np.random.default_rng(0)
    positive = make_boolean(triplet, templates, rng, "positive", "Vicalpa")
    assert positive.text == "Is the diet of Vicalpa herbivore?"
    assert positive.gold_answers == ("Yes",)
    negative = make_boolean(triplet, templates, rng, "negative", "Vicalpa", distractor="carnivore")
    assert negative.text == "Is the diet of Vicalpa carnivore?"
    assert negative.gold_answers == ("No",)
    with pytest.raises(InsufficientDistractors):
        make_boolean(triplet, templates, rng, "negative", "Vicalpa")
    with pytest.raises(UsageError):
        make_boolean(RelationTriplet("x", "prey on", "y"), templates, rng, "positive", "Vicalpa")


def test_question_invariants():
    triplet = AttributeTriplet("x", "diet", AttributeValue.categorical(["herbivore"]))
    with pytest.raises(ValueError):
        Question("q", KA, BOOLEAN, "?", ("Yes",), (triplet,), "Vicalpa")
    with pytest.raises(ValueError):
        Question("q", KU, MULTIPLE_CHOICE, "?", ("herbivore",), (triplet,), "Vicalpa",
                 choices=("herbivore", "Herbivore", "carnivore", "omnivore"))
    with pytest.raises(ValueError):
        Question("q", KU, MULTIPLE_CHOICE, "?", ("savanna",), (triplet,), "Vicalpa",
                 choices=("the savanna", "savanna", "forest", "desert"))
    with pytest.raises(ValueError):
        Question("q", KU, MULTIPLE_CHOICE, "?", ("500 cm",), (triplet,), "Vicalpa",
                 choices=("500 cm", "500.0 cm", "5 cm", "50 cm"))
    question = Question("q", KU, MULTIPLE_CHOICE, "?", ("savanna",), (triplet,), "Vicalpa",
                        choices=("forest", "The Savanna", "desert", "tundra"))
    assert question.correct_choice == "The Savanna"


def test_benchmark_file_round_trip(toy_kb, tmp_path):
    entities = generate_batch(toy_kb, SynthesisConfig(rng_seed=2, entities_per_class=2)).entities
    config = QuestionConfig(rng_seed=2)
    questions = generate_benchmark(toy_kb, entities, config)
    again = generate_benchmark(toy_kb, entities, config.model_copy(update={"workers": 3}))
    assert questions == again

    write_benchmark(tmp_path / "a.jsonl", questions, toy_kb)
    loaded = read_benchmark(tmp_path / "a.jsonl")
    assert loaded == questions
    assert [q.knowledge_payload for q in loaded] == [q.knowledge_payload for q in questions]
    write_benchmark(tmp_path / "b.jsonl", loaded, toy_kb)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_writing_multiple_choice_without_choices_fails(tmp_path):
    triplet = AttributeTriplet("x", "diet", AttributeValue.categorical(["herbivore"]))
    draft = Question("q", KU, MULTIPLE_CHOICE, "?", ("herbivore",), (triplet,), "Vicalpa")
    with pytest.raises(UsageError):
        write_benchmark(tmp_path / "b.jsonl", [draft])


def test_malformed_benchmark_line(tmp_path):
    path = tmp_path / "benchmark.jsonl"
    path.write_text('{"id": "q"}\n', encoding="utf-8")
    with pytest.raises(ArtifactFormatError) as excinfo:
        read_benchmark(path)
    assert excinfo.value.line == 1


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
