"""
Experiments
Analysis runs over a benchmark: accuracy by parent similarity, entity name
variants, extra knowledge in the context, knowledge rendering format and
single-property modification ablation.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

import knowledge_base as kbm
from answer_matching import DEFAULT_REFUSALS
from entity_synthesis import VARIATION, ArtificialEntity, child_rng, vary_attribute
from evaluation_harness import EvalReport, evaluate, score
from knowledge_base import AttributeTriplet, KnowledgeBase
from model_endpoint import ModelEndpoint
from name_synthesis import random_name, similar_name
from pipeline_errors import UsageError, VariationUnavailable
from prompt_builder import Exemplar, PromptSpec
from question_generation import KA, KD, Question

logger = logging.getLogger(__name__)

VARIANTS = ("similarity_bins", "name_variant", "context_parent", "context_irrelevant",
            "context_chain", "format_nl_vs_json", "modification_ablation")

DEFAULT_BIN_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def assign_bins(values: Sequence[float], edges: Sequence[float]) -> np.ndarray:
    """Bin index per value, [e_i, e_i+1) with the last bin closed; -1 outside the edges"""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise UsageError(f"Bin edges must be increasing, given: {list(edges)}")
    values = np.asarray(values, dtype=float)
    index = np.searchsorted(edges, values, side="right") - 1
    index[values == edges[-1]] = len(edges) - 2
    index[(values < edges[0]) | (values > edges[-1])] = -1
    return index


def bin_label(edges: Sequence[float], i: int) -> str:
    closing = "]" if i == len(edges) - 2 else ")"
    return f"[{edges[i]:.2f}, {edges[i + 1]:.2f}{closing}"


def entity_similarity(kb: KnowledgeBase, entity: ArtificialEntity) -> float:
    return kbm.property_similarity(kb.entity(entity.parent_id).properties, entity.triplets)


class ExperimentRunner:
    """Shared evaluation plumbing of the analysis variants"""

    def __init__(self, kb: KnowledgeBase, endpoint: ModelEndpoint, spec: Optional[PromptSpec] = None,
                 entities: Sequence[ArtificialEntity] = (),
                 exemplars: Optional[Dict[str, List[Exemplar]]] = None, seed: int = 0,
                 bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
                 max_concurrency: Optional[int] = None, refusals=DEFAULT_REFUSALS):
        self.kb = kb
        self.endpoint = endpoint
        self.spec = spec or PromptSpec()
        self.entities = {e.id: e for e in entities}
        self.exemplars = exemplars
        self.seed = seed
        self.bin_edges = tuple(bin_edges)
        self.max_concurrency = max_concurrency
        self.refusals = refusals

    def _evaluate(self, questions: Sequence[Question], spec: PromptSpec, label: str) -> EvalReport:
        return evaluate(questions, spec, self.endpoint, self.exemplars, self.kb, self.seed,
                        self.max_concurrency, self.refusals, label=label)

    def _entity(self, entity_id: str) -> ArtificialEntity:
        if entity_id not in self.entities:
            raise UsageError(f"Entity {entity_id} is missing; pass the entity file of this benchmark")
        return self.entities[entity_id]

    def _binned(self, report: EvalReport, questions: Sequence[Question],
                similarities: Mapping[str, float], prefix: str = "") -> Dict[str, EvalReport]:
        index = {q.id: q for q in questions}
        ids = [j.question_id for j in report.judgments]
        bins = assign_bins([similarities[i] for i in ids], self.bin_edges)
        reports = {}
        for b in range(len(self.bin_edges) - 1):
            members = [j for j, k in zip(report.judgments, bins) if k == b]
            if not members:
                continue
            label = f"{prefix}{bin_label(self.bin_edges, b)}"
            reports[label] = score(members, index, label, report.config)
        return reports

    def similarity_bins(self, questions: Sequence[Question]) -> Dict[str, EvalReport]:
        kd = [q for q in questions if q.category == KD]
        if not kd:
            raise UsageError("similarity_bins needs KD questions")
        similarity = {e_id: entity_similarity(self.kb, self._entity(e_id)) for e_id in {q.entity_id for q in kd}}
        report = self._evaluate(kd, self.spec, "all")
        return self._binned(report, kd, {q.id: similarity[q.entity_id] for q in kd})

    def rename(self, question: Question, new_name: str) -> Question:
        payload = dict(question.knowledge_payload)
        payload["name"] = new_name
        return replace(question, text=question.text.replace(question.entity_name, new_name),
                       entity_name=new_name, knowledge_payload=payload)

    def variant_name(self, question: Question, variant: str) -> str:
        parent_name = self.kb.entity_name(question.parent_id)
        rng = child_rng(self.seed, f"name:{variant}:{question.entity_id}")
        if variant == "similar":
            return similar_name(parent_name, rng)
        return random_name(parent_name, rng)

    def name_variant(self, questions: Sequence[Question]) -> Dict[str, EvalReport]:
        kd = [q for q in questions if q.category == KD]
        reports = {"original": self._evaluate(kd, self.spec, "original")}
        for variant in ("similar", "random"):
            names: Dict[str, str] = {}
            renamed = []
            for question in kd:
                if question.entity_id not in names:
                    names[question.entity_id] = self.variant_name(question, variant)
                renamed.append(self.rename(question, names[question.entity_id]))
            spec = self.spec.model_copy(update={"name_variant": variant})
            reports[variant] = self._evaluate(renamed, spec, variant)
        return reports

    def context(self, questions: Sequence[Question], injection: str) -> Dict[str, EvalReport]:
        category = KA if injection == "chain_entities" else KD
        selected = [q for q in questions if q.category == category]
        if not selected:
            raise UsageError(f"Context experiment '{injection}' needs {category} questions")
        with_context = self.spec.model_copy(update={"context_injection": injection})
        return {
            "none": self._evaluate(selected, self.spec.model_copy(update={"context_injection": "none"}), "none"),
            injection: self._evaluate(selected, with_context, injection),
        }

    def format_nl_vs_json(self, questions: Sequence[Question]) -> Dict[str, EvalReport]:
        return {
            "JSON": self._evaluate(questions, self.spec.model_copy(update={"knowledge_format": "structured"}),
                                   "JSON"),
            "NL": self._evaluate(questions,
                                 self.spec.model_copy(update={"knowledge_format": "natural_language"}), "NL"),
        }

    def _modified_block(self, question: Question, entity: ArtificialEntity, altered: str, mode: str,
                        rng: np.random.Generator) -> Optional[Tuple[dict, float]]:
        """Parent copy keeping the queried value, with one other attribute varied or dropped"""
        parent = self.kb.entity(entity.parent_id)
        queried = question.evidence[0]
        attributes = []
        for triplet in parent.attributes:
            if triplet.attribute == queried.attribute:
                attributes.append(queried.with_subject(parent.id))
            elif triplet.attribute == altered:
                if mode == "dropout":
                    continue
                try:
                    attributes.append(vary_attribute(triplet, kbm.siblings(self.kb, parent.id), rng))
                except VariationUnavailable:
                    return None
            else:
                attributes.append(triplet)
        similarity = kbm.property_similarity(parent.properties, tuple(attributes) + parent.relations)
        block = kbm.build_block(entity.name, entity.rank, attributes, parent.relations, self.kb.entity_name)
        return block, similarity

    def modification_ablation(self, questions: Sequence[Question]) -> Dict[str, EvalReport]:
        kd = [q for q in questions if q.category == KD and q.origin == VARIATION
              and isinstance(q.evidence[0], AttributeTriplet)]
        if not kd:
            raise UsageError("modification_ablation needs KD questions about varied attributes")
        reports: Dict[str, EvalReport] = {}
        for mode in ("variation", "dropout"):
            variants: List[Question] = []
            similarity: Dict[str, float] = {}
            for question in kd:
                entity = self._entity(question.entity_id)
                rng = child_rng(self.seed, f"ablation:{mode}:{question.id}")
                parent = self.kb.entity(entity.parent_id)
                for triplet in parent.attributes:
                    if triplet.attribute == question.evidence[0].attribute:
                        continue
                    built = self._modified_block(question, entity, triplet.attribute, mode, rng)
                    if built is None:
                        continue
                    block, sim = built
                    variant = replace(question, id=f"{question.id}#{mode}:{triplet.attribute}",
                                      knowledge_payload=block)
                    variants.append(variant)
                    similarity[variant.id] = sim
            if not variants:
                logger.warning("modification_ablation: no %s variants could be built", mode)
                continue
            report = self._evaluate(variants, self.spec, mode)
            reports.update(self._binned(report, variants, similarity, prefix=f"{mode} "))
        return reports


def run_experiment(benchmark: Sequence[Question], variant: str, endpoint: ModelEndpoint,
                   kb: KnowledgeBase, entities: Sequence[ArtificialEntity] = (),
                   spec: Optional[PromptSpec] = None,
                   exemplars: Optional[Dict[str, List[Exemplar]]] = None, seed: int = 0,
                   bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
                   max_concurrency: Optional[int] = None) -> Dict[str, EvalReport]:
    """Reports of one analysis variant, keyed by condition label"""
    if variant not in VARIANTS:
        raise UsageError(f"Unknown experiment variant '{variant}', expected one of: {', '.join(VARIANTS)}")
    runner = ExperimentRunner(kb, endpoint, spec, entities, exemplars, seed, bin_edges, max_concurrency)
    logger.info("Experiment %s on %d questions", variant, len(benchmark))
    if variant == "similarity_bins":
        return runner.similarity_bins(benchmark)
    if variant == "name_variant":
        return runner.name_variant(benchmark)
    if variant == "context_parent":
        return runner.context(benchmark, "parent_entity")
    if variant == "context_irrelevant":
        return runner.context(benchmark, "irrelevant_entity")
    if variant == "context_chain":
        return runner.context(benchmark, "chain_entities")
    if variant == "format_nl_vs_json":
        return runner.format_nl_vs_json(benchmark)
    return runner.modification_ablation(benchmark)
