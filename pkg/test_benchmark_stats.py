#!/usr/bin/env python3
"""
Benchmark Statistics Test Suite
===============================
Entity and benchmark summaries, recomputed independently from the files.
"""

import json
import sys
from collections import Counter

import pytest

import knowledge_base as kbm
from benchmark_stats import benchmark_stats, entity_stats, format_stats, stats_for_file
from entity_synthesis import (HEREDITY, ArtificialEntity, ProvenanceTag, SynthesisConfig, generate_batch,
                              write_entities)
from evaluation_harness import render_text
from knowledge_base import AttributeTriplet, AttributeValue
from pipeline_errors import ArtifactFormatError
from question_generation import CATEGORIES, KA, QuestionConfig, generate_benchmark, write_benchmark
from question_templates import MULTIPLE_CHOICE


def entity_with(entity_id, count):
    tag = ProvenanceTag(HEREDITY)
    properties = tuple(
        (AttributeTriplet(entity_id, f"attr{i}", AttributeValue.categorical([str(i)])), tag) for i in range(count))
    return ArtificialEntity(entity_id, entity_id.title(), "alpaca", "camelidae", "species", properties)


def test_mean_property_count():
    stats = entity_stats([entity_with("a", 3), entity_with("b", 5)])
    assert stats["entities"] == 2
    assert stats["mean_properties"] == 4.0
    assert stats["mean_relations"] == 0.0
    assert stats["provenance"][HEREDITY] == 8
    assert stats["attribute_histogram"] == {3: 1, 5: 1}


def test_sibling_count_excludes_the_parent(toy_kb):
    stats = entity_stats([entity_with("a", 3), entity_with("b", 2)], toy_kb)
    assert stats["mean_siblings"] == len(kbm.siblings(toy_kb, "alpaca")) == 2.0
    assert entity_stats([entity_with("a", 3)])["mean_siblings"] == 0.0


def test_empty_benchmark():
    stats = benchmark_stats([])
    assert stats["questions"] == 0 and stats["entities"] == 0
    assert stats["per_category"] == {c: 0 for c in CATEGORIES}


def test_counts_agree_with_the_file(toy_kb, tmp_path):
    entities = generate_batch(toy_kb, SynthesisConfig(rng_seed=4, entities_per_class=2)).entities
    questions = generate_benchmark(toy_kb, entities, QuestionConfig(rng_seed=4))
    path = tmp_path / "benchmark.jsonl"
    write_benchmark(path, questions, toy_kb)

    stats = stats_for_file(path)
    assert stats["kind"] == "benchmark"
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert stats["questions"] == len(records)
    assert stats["per_category"] == {c: Counter(r["category"] for r in records)[c] for c in CATEGORIES}
    assert stats["grid"][KA][MULTIPLE_CHOICE] == stats["per_category"][KA]

    table = render_text(format_stats(stats))
    assert "Total" in table and str(stats["questions"]) in table


def test_entity_file_stats(toy_kb, tmp_path):
    entities = generate_batch(toy_kb, SynthesisConfig(rng_seed=4, entities_per_class=2)).entities
    path = tmp_path / "entities.jsonl"
    write_entities(path, entities, toy_kb)
    stats = stats_for_file(path, toy_kb)
    assert stats["kind"] == "entities"
    assert stats["entities"] == len(entities)
    assert stats["mean_properties"] == round(sum(len(e.triplets) for e in entities) / len(entities), 4)
    assert stats["classes"] == len({e.class_id for e in entities})
    assert "artificial entities" in render_text(format_stats(stats))


def test_malformed_file(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"id": "a"}\nnot json\n', encoding="utf-8")
    with pytest.raises(ArtifactFormatError) as excinfo:
        stats_for_file(path)
    assert excinfo.value.line == 2


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
