"""
Prompt Builder
Renders entity knowledge (structured JSON block or one sentence per property)
and assembles evaluation prompts for zero/few-shot, vanilla/CoT settings.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

import knowledge_base as kbm
from entity_synthesis import child_rng
from knowledge_base import KnowledgeBase
from pipeline_errors import ConfigurationError
from question_generation import KA, Question
from question_templates import (BOOLEAN, FILL_IN_BLANK, MULTIPLE_CHOICE, STATEMENT, TemplateStore,
                                acquire_templates)

logger = logging.getLogger(__name__)

DEFAULT_EXEMPLARS_PATH = Path(__file__).parent / "data" / "exemplars.json"

CHOICE_LABELS = ("A", "B", "C", "D")
DELIMITER = "###"
INDENT = "    "

PREAMBLE = (
    "You are a powerful question-answering system with knowledge in the field of biology.\n"
    "Users will provide some biological information along with a question.\n"
    "Your task is to combine the information provided by the user with your biological knowledge "
    "to answer the question.\n"
    "If you are unable to answer the question, simply respond with \"I don't know.\""
)
KNOWLEDGE_INTRO = "Here is the basic information about a taxon you can refer:"
KNOWLEDGE_INTRO_MANY = "Here is the basic information about some taxa you can refer:"
EXAMPLES_INTRO = "Here are some examples:"

QUESTION_LINES = {
    FILL_IN_BLANK: "Answer the following question in a few words: {question}",
    MULTIPLE_CHOICE: "Answer the following multiple choice question with the letter of the correct option: {question}",
    BOOLEAN: "Answer the following question with Yes or No: {question}",
}
COT_FORMAT = "Desired format: Thought process: <Thought process>, Final answer: [Final answer]."
VANILLA_FORMAT = "Desired format: ANSWER: [answer]."
STEP_BY_STEP = "Let's think step by step."


class PromptSpec(BaseModel):
    """Prompt setting of one evaluation run"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    shots: Literal["zero", "few"] = "zero"
    reasoning: Literal["vanilla", "cot"] = "vanilla"
    knowledge_format: Literal["structured", "natural_language"] = "structured"
    context_injection: Literal["none", "parent_entity", "irrelevant_entity", "chain_entities"] = "none"
    name_variant: Literal["original", "similar", "random"] = "original"
    few_shot_count: int = Field(3, ge=3, le=5)

    @property
    def label(self) -> str:
        return f"{self.shots}-shot {self.reasoning}"


@dataclass(frozen=True)
class Exemplar:
    knowledge: dict
    question: str
    answer: str
    thought: str = ""
    choices: Optional[Tuple[str, ...]] = None


def load_exemplars(path: Optional[Union[str, Path]] = None) -> Dict[str, List[Exemplar]]:
    path = Path(path) if path else DEFAULT_EXEMPLARS_PATH
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read exemplar store {path}: {e}")
    store = {}
    for form, items in raw.items():
        store[form] = [Exemplar(knowledge=item["knowledge"], question=item["question"],
                                answer=item["answer"], thought=item.get("thought", ""),
                                choices=tuple(item["choices"]) if "choices" in item else None)
                       for item in items]
    return store


def render_structured(block: dict) -> str:
    """Pretty-printed block with each property's value list kept on one line"""
    prop = block.get("property", {})
    lines = ["{", f'{INDENT}"name": {json.dumps(block.get("name", ""), ensure_ascii=False)},']
    if prop:
        lines.append(f'{INDENT}"property": {{')
        items = [f"{INDENT * 2}{json.dumps(name, ensure_ascii=False)}: {json.dumps(prop[name], ensure_ascii=False)}"
                 for name in sorted(prop)]
        lines.append(",\n".join(items))
        lines.append(f"{INDENT}}},")
    else:
        lines.append(f'{INDENT}"property": {{}},')
    lines.append(f'{INDENT}"rank": {json.dumps(block.get("rank", ""), ensure_ascii=False)}')
    lines.append("}")
    return "\n".join(lines)


def render_natural_language(block: dict, store: Optional[TemplateStore] = None) -> str:
    """One declarative sentence per property, from the statement templates"""
    name = block.get("name", "")
    sentences = []
    for prop_name in sorted(block.get("property", {})):
        values = block["property"][prop_name]
        template = acquire_templates(prop_name, STATEMENT, count=1, store=store)[0]
        sentences.append(template.fill(name, ", ".join(str(v) for v in values)))
    if block.get("rank"):
        sentences.append(f"{name} is a taxon of rank {block['rank']}.")
    return "\n".join(sentences)


def render_knowledge(block: dict, knowledge_format: str = "structured",
                     store: Optional[TemplateStore] = None) -> str:
    if knowledge_format == "structured":
        return render_structured(block)
    if knowledge_format == "natural_language":
        return render_natural_language(block, store)
    raise ConfigurationError(f"Unknown knowledge format: {knowledge_format}")


def _question_lines(form: str, text: str, choices: Optional[Sequence[str]]) -> List[str]:
    lines = [QUESTION_LINES[form].format(question=text)]
    if form == MULTIPLE_CHOICE and choices:
        lines += [f"{label}. {choice}" for label, choice in zip(CHOICE_LABELS, choices)]
    return lines


def _knowledge_section(blocks: Sequence[dict], spec: PromptSpec, store: Optional[TemplateStore]) -> List[str]:
    lines = [KNOWLEDGE_INTRO if len(blocks) == 1 else KNOWLEDGE_INTRO_MANY]
    for block in blocks:
        lines += [DELIMITER, render_knowledge(block, spec.knowledge_format, store), DELIMITER]
    return lines


def _exemplar_section(exemplar: Exemplar, form: str, spec: PromptSpec,
                      store: Optional[TemplateStore]) -> List[str]:
    lines = _knowledge_section([exemplar.knowledge], spec, store)
    lines += _question_lines(form, exemplar.question, exemplar.choices)
    if spec.reasoning == "cot":
        lines.append(f"Thought process: {exemplar.thought}, Final answer: {exemplar.answer}")
    else:
        lines.append(f"ANSWER: {exemplar.answer}")
    return lines


def build_prompt(question: Question, spec: PromptSpec,
                 exemplars: Optional[Dict[str, List[Exemplar]]] = None,
                 extra_blocks: Sequence[dict] = (),
                 store: Optional[TemplateStore] = None) -> str:
    """
    Full prompt text for one question

    Args:
        question: question with its knowledge payload
        spec: prompt setting
        exemplars: form -> exemplars, required in few-shot mode
        extra_blocks: injected knowledge blocks, placed before the question entity's block
        store: statement templates for natural-language knowledge

    Returns:
        Prompt text; identical inputs give identical text
    """
    lines = [PREAMBLE]

    if spec.shots == "few":
        available = (exemplars or {}).get(question.form, [])
        if len(available) < spec.few_shot_count:
            raise ConfigurationError(
                f"Few-shot prompt needs {spec.few_shot_count} '{question.form}' exemplars, "
                f"given: {len(available)}")
        lines.append(EXAMPLES_INTRO)
        for number, exemplar in enumerate(available[:spec.few_shot_count], 1):
            lines.append(f"Example {number}:")
            lines += _exemplar_section(exemplar, question.form, spec, store)
        lines.append("Now answer the question below.")

    lines += _knowledge_section(list(extra_blocks) + [question.knowledge_payload], spec, store)
    lines += _question_lines(question.form, question.text, question.choices)
    if spec.reasoning == "cot":
        lines.append(COT_FORMAT)
        if spec.shots == "zero":
            lines.append(STEP_BY_STEP)
    else:
        lines.append(VANILLA_FORMAT)
    return "\n".join(lines)


PROBE_FORM = "probe"


def build_probe_prompt(question_text: str, exemplars: Optional[Dict[str, List[Exemplar]]] = None,
                       count: int = 3) -> str:
    """Few-shot vanilla recall prompt without any knowledge block"""
    available = (exemplars if exemplars is not None else load_exemplars()).get(PROBE_FORM, [])
    if len(available) < count:
        raise ConfigurationError(f"Recall probes need {count} '{PROBE_FORM}' exemplars, given: {len(available)}")
    lines = []
    for exemplar in available[:count]:
        lines += [QUESTION_LINES[FILL_IN_BLANK].format(question=exemplar.question),
                  f"ANSWER: {exemplar.answer}", ""]
    lines += [QUESTION_LINES[FILL_IN_BLANK].format(question=question_text), "ANSWER:"]
    return "\n".join(lines)


def injected_blocks(question: Question, spec: PromptSpec, kb: KnowledgeBase, seed: int = 0) -> List[dict]:
    """Knowledge blocks of existing entities added to the context by spec.context_injection"""
    if spec.context_injection == "none":
        return []
    if spec.context_injection == "parent_entity":
        if question.parent_id in kb.entities:
            return [kbm.knowledge_block(kb, question.parent_id)]
        return []
    if spec.context_injection == "irrelevant_entity":
        excluded_class = kb.entity(question.parent_id).class_id if question.parent_id in kb.entities \
            else question.class_id
        pool = [e for e in kb.entities if kb.entities[e].class_id != excluded_class]
        if not pool:
            logger.warning("No entity outside class %s to inject for %s", excluded_class, question.id)
            return []
        rng = child_rng(seed, f"irrelevant:{question.id}")
        return [kbm.knowledge_block(kb, pool[int(rng.integers(len(pool)))])]
    # chain_entities: intermediate chain entities that exist in the KB
    if question.category != KA:
        return []
    chain = question.chain
    return [kbm.knowledge_block(kb, node) for node in chain.entity_ids[1:-1] if node in kb.entities]
