"""
Question Templates
Template store keyed by property signature, template acquisition from the
store, an optional generation client, or a generic fallback pattern.
"""

import json
import logging
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

PLACEHOLDER = "[T]"
VALUE_SLOT = "[V]"

FILL_IN_BLANK = "fill_in_blank"
MULTIPLE_CHOICE = "multiple_choice"
BOOLEAN = "boolean"
STATEMENT = "statement"

DEFAULT_STORE_PATH = Path(__file__).parent / "data" / "question_templates.json"

Signature = Union[str, Tuple[str, ...]]


def signature_key(signature: Signature) -> str:
    """'habitat' for an attribute, 'have host > co-roost with' for a relation chain"""
    if isinstance(signature, str):
        return signature
    return " > ".join(signature)


def store_form(form: str) -> str:
    # multiple-choice questions are fill-in-the-blank questions with four options appended
    return FILL_IN_BLANK if form == MULTIPLE_CHOICE else form


@dataclass(frozen=True)
class QuestionTemplate:
    signature: Signature
    form: str
    text: str
    answer_role: str = ""

    def __post_init__(self):
        if self.text.count(PLACEHOLDER) != 1:
            raise ValueError(f"Template must contain {PLACEHOLDER} exactly once: {self.text!r}")

    def fill(self, entity_name: str, value: Optional[str] = None) -> str:
        text = self.text.replace(PLACEHOLDER, entity_name)
        if value is not None:
            text = text.replace(VALUE_SLOT, value)
        return text


def is_valid_template(text: str, form: str, signature: Signature) -> bool:
    if text.count(PLACEHOLDER) != 1:
        return False
    needs_value = form in (BOOLEAN, STATEMENT) and (isinstance(signature, str) or len(signature) == 1)
    return text.count(VALUE_SLOT) == 1 if needs_value else VALUE_SLOT not in text


class TemplateStore:
    """
    Flat mapping '<form>|<signature>' -> template texts

    The bundled file at `path` is only read. Generated templates are kept in
    memory and, when `cache_path` is set, written there; cached entries are
    overlaid on the bundled ones at load time.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None,
                 templates: Optional[Dict[str, List[str]]] = None,
                 cache_path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path else None
        self.cache_path = Path(cache_path) if cache_path else None
        self._templates: Dict[str, List[str]] = {}
        self._cached: Dict[str, List[str]] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                self._templates = json.load(f)
        if self.cache_path is not None and self.cache_path.exists():
            with open(self.cache_path, encoding="utf-8") as f:
                self._cached = json.load(f)
            self._templates.update(self._cached)
        if templates:
            self._templates.update(templates)

    @staticmethod
    def _key(signature: Signature, form: str) -> str:
        return f"{store_form(form)}|{signature_key(signature).casefold()}"

    def get(self, signature: Signature, form: str) -> List[str]:
        return list(self._templates.get(self._key(signature, form), []))

    def put(self, signature: Signature, form: str, texts: Sequence[str], persist: bool = True):
        key = self._key(signature, form)
        with self._lock:
            self._templates[key] = list(texts)
            self._cached[key] = list(texts)
            if persist and self.cache_path is not None:
                self.cache_path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.cache_path, "w", encoding="utf-8") as f:
                    json.dump(self._cached, f, indent=2, sort_keys=True, ensure_ascii=False)
                    f.write("\n")
                logger.debug("Cached templates for %s in %s", key, self.cache_path)

    def __len__(self):
        return len(self._templates)


def fallback_template(signature: Signature, form: str) -> str:
    form = store_form(form)
    if isinstance(signature, str):
        return {
            FILL_IN_BLANK: f"What is the {signature} of [T]?",
            BOOLEAN: f"Is the {signature} of [T] [V]?",
            STATEMENT: f"The {signature} of [T] is [V].",
        }[form]
    if len(signature) == 1:
        relation = signature[0]
        return {
            FILL_IN_BLANK: f"Which organism is linked to [T] by the relation '{relation}'?",
            BOOLEAN: f"Does [T] have the relation '{relation}' with [V]?",
            STATEMENT: f"[T] has the relation '{relation}' with [V].",
        }[form]
    steps = ", then ".join(f"'{r}'" for r in signature)
    return f"Starting from [T], which organism is reached by following {steps}?"


def generation_prompt(signature: Signature, form: str, count: int) -> str:
    """Prompt asking a model for templates; only property names are shown, never entity names"""
    form = store_form(form)
    if isinstance(signature, str) or len(signature) == 1:
        name = signature_key(signature)
        task = {
            FILL_IN_BLANK: f"Write {count} different questions that ask for the \"{name}\" of an organism.",
            BOOLEAN: (f"Write {count} different yes/no questions asking whether the \"{name}\" "
                      f"of an organism is a given value. Write the value as [V]."),
            STATEMENT: (f"Write {count} different sentences stating that the \"{name}\" "
                        f"of an organism is a given value. Write the value as [V]."),
        }[form]
    else:
        chain = " -> ".join(["[T]"] + [f"({r})" for r in signature] + ["?"])
        task = (f"The relation chain is {chain}. Write {count} different questions that ask for "
                f"the last organism of the chain without naming the intermediate organisms.")
    return (
        "You generate question templates for a biology benchmark.\n"
        f"{task}\n"
        "Use the placeholder [T] for the organism's name exactly once in every question.\n"
        "Return one template per line and nothing else."
    )


def _parse_generated(raw: str) -> List[str]:
    lines = []
    for line in raw.splitlines():
        line = re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", line).strip().strip('"')
        if line:
            lines.append(line)
    return lines


def acquire_templates(signature: Signature, form: str, count: int = 5,
                      store: Optional[TemplateStore] = None, client=None) -> List[QuestionTemplate]:
    """
    Templates for a property signature and question form

    Order of preference: bundled store, generation client (results cached
    into the store's cache file), generic fallback pattern.
    """
    store = store if store is not None else template_store
    texts = [t for t in store.get(signature, form) if is_valid_template(t, store_form(form), signature)]

    if not texts and client is not None:
        request_id = f"template|{store_form(form)}|{signature_key(signature)}"
        try:
            raw = client.send(generation_prompt(signature, form, count), question_id=request_id)
            generated = [t for t in _parse_generated(raw)
                         if is_valid_template(t, store_form(form), signature)]
        except Exception as e:
            logger.warning("Template generation failed for %s: %s", request_id, e)
            generated = []
        if generated:
            store.put(signature, form, generated[:count])
            texts = generated
        else:
            logger.warning("No valid generated template for %s, using fallback", request_id)

    if not texts:
        texts = [fallback_template(signature, form)]
    return [QuestionTemplate(signature, form, text) for text in texts[:count]]


template_store = TemplateStore(DEFAULT_STORE_PATH)
