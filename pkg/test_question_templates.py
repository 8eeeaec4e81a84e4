#!/usr/bin/env python3
"""
Question Template Test Suite
============================
Template store lookups, validation, generation through a client and the
fallback patterns.
"""

import json
import logging
import sys

import pytest

from model_endpoint import MockModelEndpoint
from pipeline_errors import EndpointError
from question_templates import (BOOLEAN, DEFAULT_STORE_PATH, FILL_IN_BLANK, MULTIPLE_CHOICE, STATEMENT,
                                QuestionTemplate, TemplateStore, acquire_templates, fallback_template,
                                generation_prompt, is_valid_template, template_store)


def test_bundled_store_serves_attribute_and_chain_templates():
    templates = acquire_templates("body mass", FILL_IN_BLANK, count=5)
    assert len(templates) == 5
    assert all(t.text.count("[T]") == 1 for t in templates)

    chain = acquire_templates(("have host", "co-roost with"), MULTIPLE_CHOICE, count=5)
    assert chain[0].text == "What is the species that co-roosts with the host of [T]?"


def test_lookup_ignores_case_and_maps_multiple_choice_to_fill_in():
    assert template_store.get("Body Mass", MULTIPLE_CHOICE) == template_store.get("body mass", FILL_IN_BLANK)


def test_validation_rules():
    assert is_valid_template("Is the diet of [T] [V]?", BOOLEAN, "diet")
    assert not is_valid_template("Is [T] a herbivore?", BOOLEAN, "diet")
    assert not is_valid_template("What is the diet of [T] and [T]?", FILL_IN_BLANK, "diet")
    assert not is_valid_template("What is the diet of [T] [V]?", FILL_IN_BLANK, "diet")
    with pytest.raises(ValueError):
        QuestionTemplate("diet", FILL_IN_BLANK, "What is the diet?")


def test_fallback_patterns(caplog):
    assert fallback_template("wingspan", FILL_IN_BLANK) == "What is the wingspan of [T]?"
    assert fallback_template("wingspan", STATEMENT) == "The wingspan of [T] is [V]."
    with caplog.at_level(logging.WARNING):
        templates = acquire_templates("wingspan", FILL_IN_BLANK, store=TemplateStore())
    assert [t.text for t in templates] == ["What is the wingspan of [T]?"]

    chain = acquire_templates(("pollinated by", "eaten by"), MULTIPLE_CHOICE, store=TemplateStore())
    assert chain[0].text == "Starting from [T], which organism is reached by following 'pollinated by', then 'eaten by'?"


def test_generated_templates_are_validated_and_cached(tmp_path):
    store = TemplateStore(cache_path=tmp_path / "cache.json")
    client = MockModelEndpoint({
        "template|fill_in_blank|wingspan": (
            "1. What is the wingspan of [T]?\n"
            "2. How wide are the wings of [T]?\n"
            "3. How wide are its wings?\n"
        ),
    })
    templates = acquire_templates("wingspan", FILL_IN_BLANK, store=store, client=client)
    assert [t.text for t in templates] == ["What is the wingspan of [T]?", "How wide are the wings of [T]?"]

    again = acquire_templates("wingspan", FILL_IN_BLANK, store=store, client=client)
    assert [t.text for t in again] == [t.text for t in templates]
    assert client.calls == ["template|fill_in_blank|wingspan"]

    saved = json.loads((tmp_path / "cache.json").read_text(encoding="utf-8"))
    assert saved == {"fill_in_blank|wingspan": [t.text for t in templates]}
    reloaded = TemplateStore(DEFAULT_STORE_PATH, cache_path=tmp_path / "cache.json")
    assert reloaded.get("wingspan", FILL_IN_BLANK) == [t.text for t in templates]
    assert reloaded.get("body mass", FILL_IN_BLANK) == template_store.get("body mass", FILL_IN_BLANK)


def test_bundled_file_is_never_written(tmp_path):
    before = DEFAULT_STORE_PATH.read_bytes()
    store = TemplateStore(DEFAULT_STORE_PATH, cache_path=tmp_path / "nested" / "cache.json")
    store.put("wingspan", FILL_IN_BLANK, ["What is the wingspan of [T]?"])
    assert DEFAULT_STORE_PATH.read_bytes() == before
    assert (tmp_path / "nested" / "cache.json").exists()

    bundled_copy = tmp_path / "bundled.json"
    bundled_copy.write_bytes(before)
    memory_only = TemplateStore(bundled_copy)
    memory_only.put("wingspan", FILL_IN_BLANK, ["How wide are the wings of [T]?"])
    assert memory_only.get("wingspan", FILL_IN_BLANK) == ["How wide are the wings of [T]?"]
    assert bundled_copy.read_bytes() == before


class FailingClient:
    def send(self, prompt, question_id=""):
        raise EndpointError("unreachable")


def test_client_failure_falls_back():
    templates = acquire_templates("wingspan", BOOLEAN, store=TemplateStore(), client=FailingClient())
    assert [t.text for t in templates] == ["Is the wingspan of [T] [V]?"]


def test_generation_prompt_mentions_only_property_names():
    prompt = generation_prompt(("eaten by", "compete with"), MULTIPLE_CHOICE, 5)
    assert "(eaten by)" in prompt and "(compete with)" in prompt
    assert "[T]" in prompt
    assert "Write 5 different questions" in prompt


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
