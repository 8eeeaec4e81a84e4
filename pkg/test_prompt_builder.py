#!/usr/bin/env python3
"""
Prompt Builder Test Suite
=========================
Knowledge rendering and prompt assembly for every prompt setting.

Test Cases:
1. Zero-shot CoT prompt matches the stored golden text byte for byte
2. Few-shot sections, vanilla format and multiple-choice options
3. Natural-language and structured rendering of knowledge blocks
4. Parent, irrelevant and chain context injection
"""

import json
import sys

import pytest

import knowledge_base as kbm
from conftest import FIXTURES
from entity_synthesis import SynthesisConfig, generate_batch
from pipeline_errors import ConfigurationError
from prompt_builder import (COT_FORMAT, DELIMITER, KNOWLEDGE_INTRO_MANY, STEP_BY_STEP, VANILLA_FORMAT,
                            PromptSpec, build_probe_prompt, build_prompt, injected_blocks, load_exemplars,
                            render_knowledge, render_natural_language, render_structured)
from question_generation import KA, KD, QuestionConfig, generate_questions, question_from_record


@pytest.fixture
def golden_question():
    record = json.loads((FIXTURES / "prompt_question.json").read_text(encoding="utf-8"))
    return question_from_record(record)


@pytest.fixture
def camelid_questions(toy_kb):
    for seed in range(50):
        entity = next(e for e in generate_batch(toy_kb, SynthesisConfig(rng_seed=seed)).entities
                      if e.class_id == "camelidae")
        questions = generate_questions(toy_kb, entity, QuestionConfig(rng_seed=seed))
        if any(q.category == KD for q in questions):
            return questions
    pytest.fail("no camelid entity with KD questions in seeds 0..49")


def test_zero_shot_cot_golden(golden_question):
    golden = (FIXTURES / "prompt_zero_shot_cot.txt").read_text(encoding="utf-8")
    prompt = build_prompt(golden_question, PromptSpec(shots="zero", reasoning="cot"))
    assert prompt == golden
    assert prompt == build_prompt(golden_question, PromptSpec(shots="zero", reasoning="cot"))


def test_zero_shot_vanilla(golden_question):
    prompt = build_prompt(golden_question, PromptSpec())
    assert prompt.endswith(VANILLA_FORMAT)
    assert STEP_BY_STEP not in prompt
    assert prompt.count(DELIMITER) == 2


def test_few_shot_sections(golden_question):
    exemplars = load_exemplars()
    prompt = build_prompt(golden_question, PromptSpec(shots="few", reasoning="cot"), exemplars)
    assert "Here are some examples:" in prompt
    assert "Example 3:" in prompt and "Example 4:" not in prompt
    assert "Now answer the question below." in prompt
    assert prompt.count("Thought process: ") == 4
    assert prompt.endswith(COT_FORMAT)
    assert prompt.count(DELIMITER) == 2 * 4

    four = build_prompt(golden_question, PromptSpec(shots="few", few_shot_count=4), exemplars)
    assert "Example 4:" in four
    # four exemplar answers plus the desired-format line
    assert four.count("ANSWER: ") == 5


def test_few_shot_needs_enough_exemplars(golden_question):
    with pytest.raises(ConfigurationError):
        build_prompt(golden_question, PromptSpec(shots="few"), {})
    with pytest.raises(ValueError):
        PromptSpec(few_shot_count=2)


def test_multiple_choice_options(camelid_questions):
    question = next(q for q in camelid_questions if q.category == KA)
    prompt = build_prompt(question, PromptSpec())
    lines = prompt.split("\n")
    start = lines.index(next(line for line in lines if line.startswith("Answer the following multiple choice")))
    assert [line[:3] for line in lines[start + 1:start + 5]] == ["A. ", "B. ", "C. ", "D. "]
    assert [line[3:] for line in lines[start + 1:start + 5]] == list(question.choices)


def test_structured_rendering_of_an_empty_block():
    assert render_structured({"name": "Vicalpa", "property": {}, "rank": "species"}) == (
        '{\n    "name": "Vicalpa",\n    "property": {},\n    "rank": "species"\n}'
    )


def test_natural_language_rendering(golden_question):
    text = render_natural_language(golden_question.knowledge_payload)
    assert text.split("\n") == [
        "The cellularity of Bainvillevillea spinosa is multicellular.",
        "The conservation status of Bainvillevillea spinosa is least concern.",
        "The geographic distribution of Bainvillevillea spinosa is Ecuador.",
        "The habitat of Bainvillevillea spinosa is terrestrial.",
        "The leaf complexity of Bainvillevillea spinosa is compound.",
        "The leaf morphology of Bainvillevillea spinosa is broad.",
        "The leaf sheddability of Bainvillevillea spinosa is evergreen.",
        "The plant growth form of Bainvillevillea spinosa is branched.",
        "Bainvillevillea spinosa produces oxygen.",
        "The woodiness of Bainvillevillea spinosa is woody.",
        "Bainvillevillea spinosa is a taxon of rank species.",
    ]
    prompt = build_prompt(golden_question, PromptSpec(knowledge_format="natural_language"))
    assert "The habitat of Bainvillevillea spinosa is terrestrial." in prompt
    assert '"property"' not in prompt


def test_render_knowledge_of_a_single_property():
    block = {"name": "Bainvillevillea spinosa", "property": {"habitat": ["terrestrial"]}, "rank": "species"}
    assert render_knowledge(block) == (
        '{\n    "name": "Bainvillevillea spinosa",\n    "property": {\n'
        '        "habitat": ["terrestrial"]\n    },\n    "rank": "species"\n}'
    )
    assert render_knowledge(block, "natural_language") == (
        "The habitat of Bainvillevillea spinosa is terrestrial.\n"
        "Bainvillevillea spinosa is a taxon of rank species."
    )
    with pytest.raises(ConfigurationError):
        render_knowledge(block, "yaml")


def test_parent_context_adds_one_block(toy_kb, camelid_questions):
    question = next(q for q in camelid_questions if q.category == KD)
    spec = PromptSpec(context_injection="parent_entity")
    blocks = injected_blocks(question, spec, toy_kb)
    assert blocks == [kbm.knowledge_block(toy_kb, question.parent_id)]
    prompt = build_prompt(question, spec, extra_blocks=blocks)
    assert prompt.count(DELIMITER) == 4
    assert KNOWLEDGE_INTRO_MANY in prompt
    assert prompt.index(toy_kb.entity_name(question.parent_id)) < prompt.index(question.entity_name)


def test_irrelevant_context_comes_from_another_class(toy_kb, camelid_questions):
    question = next(q for q in camelid_questions if q.category == KD)
    spec = PromptSpec(context_injection="irrelevant_entity")
    blocks = injected_blocks(question, spec, toy_kb, seed=3)
    assert len(blocks) == 1
    assert blocks == injected_blocks(question, spec, toy_kb, seed=3)
    chosen = toy_kb.name_index[blocks[0]["name"]]
    assert toy_kb.entity(chosen).class_id != "camelidae"


def test_chain_context_adds_intermediate_entities(toy_kb, camelid_questions):
    spec = PromptSpec(context_injection="chain_entities")
    for question in (q for q in camelid_questions if q.category == KA):
        blocks = injected_blocks(question, spec, toy_kb)
        assert [b["name"] for b in blocks] == [toy_kb.entity_name(n) for n in question.chain.entity_ids[1:-1]]
    kd = next(q for q in camelid_questions if q.category == KD)
    assert injected_blocks(kd, spec, toy_kb) == []
    assert injected_blocks(kd, PromptSpec(), toy_kb) == []


def test_probe_prompt():
    prompt = build_probe_prompt("What is the diet of Cougar?", load_exemplars())
    assert prompt.endswith("Answer the following question in a few words: What is the diet of Cougar?\nANSWER:")
    assert prompt.count("ANSWER:") == 4
    assert DELIMITER not in prompt
    with pytest.raises(ConfigurationError):
        build_probe_prompt("?", {"probe": []})


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
