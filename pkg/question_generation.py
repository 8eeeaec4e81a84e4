"""
Question Generation
Relation graph and chain sampling around an artificial entity, template
instantiation into one-hop and multi-hop questions, multiple-choice and
Boolean rendering, and the KU/KD/KA category split.
"""

import json
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

import knowledge_base as kbm
from answer_matching import normalize
from entity_synthesis import (CLASS_COMMON, EXTENSION, HEREDITY, VARIATION, ArtificialEntity,
                              ProvenanceTag, child_rng, knowledge_payload, triplet_from_document,
                              triplet_to_document)
from knowledge_base import AttributeTriplet, KnowledgeBase, RelationTriplet, Triplet
from pipeline_errors import ArtifactFormatError, InsufficientDistractors, UsageError
from question_templates import (BOOLEAN, FILL_IN_BLANK, MULTIPLE_CHOICE, QuestionTemplate,
                                TemplateStore, acquire_templates)

logger = logging.getLogger(__name__)

KU = "KU"
KD = "KD"
KA = "KA"
CATEGORIES = (KU, KD, KA)
FORMS = (FILL_IN_BLANK, MULTIPLE_CHOICE, BOOLEAN)

# evidence origins beyond the provenance tags of entity synthesis
DROPOUT = "dropout"
CHAIN = "chain"

YES = "Yes"
NO = "No"
CHOICE_COUNT = 4


class QuestionConfig(BaseModel):
    """Knobs of question generation"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    min_hops: int = Field(2, ge=1)
    max_hops: int = Field(3, ge=1)
    chain_limit: Optional[int] = Field(20, ge=1)
    kd_sample_rate: float = Field(1.0, ge=0.0, le=1.0)
    forms: Tuple[Literal["fill_in_blank", "multiple_choice", "boolean"], ...] = FORMS
    templates_per_signature: int = Field(5, ge=1)
    rng_seed: int = Field(0, ge=0, lt=2 ** 64)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _hop_range(self):
        if self.max_hops < self.min_hops:
            raise ValueError(f"max_hops must be >= min_hops, given: {self.min_hops}..{self.max_hops}")
        return self


def _norm(text: str) -> str:
    # two options equal here would get the same verdict from the answer matcher
    return normalize(text) or " ".join(str(text).casefold().split())


@dataclass(frozen=True)
class RelationChain:
    """Simple path of relation triplets starting at the artificial entity"""
    links: Tuple[RelationTriplet, ...]

    def __post_init__(self):
        if not self.links:
            raise ValueError("A relation chain needs at least one link")
        for prev, nxt in zip(self.links, self.links[1:]):
            if prev.object != nxt.subject:
                raise ValueError(f"Chain breaks between {prev.object} and {nxt.subject}")
        nodes = self.entity_ids
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"Chain revisits an entity: {nodes}")

    @property
    def root(self) -> str:
        return self.links[0].subject

    @property
    def tail(self) -> str:
        return self.links[-1].object

    @property
    def entity_ids(self) -> Tuple[str, ...]:
        return (self.links[0].subject,) + tuple(link.object for link in self.links)

    @property
    def relation_names(self) -> Tuple[str, ...]:
        return tuple(link.relation for link in self.links)

    def __len__(self):
        return len(self.links)


@dataclass(frozen=True)
class Question:
    id: str
    category: str
    form: str
    text: str
    gold_answers: Tuple[str, ...]
    evidence: Tuple[Triplet, ...]
    entity_name: str
    choices: Optional[Tuple[str, ...]] = None
    entity_id: str = ""
    parent_id: str = ""
    class_id: str = ""
    origin: str = ""
    knowledge_payload: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"Unknown question category: {self.category}")
        if self.form not in FORMS:
            raise ValueError(f"Unknown question form: {self.form}")
        if not self.gold_answers:
            raise ValueError(f"Question {self.id} has no gold answer")
        if self.category == KA and self.form != MULTIPLE_CHOICE:
            raise ValueError(f"KA question {self.id} must be multiple choice")
        if self.choices is not None:
            if len(self.choices) != CHOICE_COUNT or len({_norm(c) for c in self.choices}) != CHOICE_COUNT:
                raise ValueError(f"Question {self.id} needs {CHOICE_COUNT} distinct choices")
            gold = {_norm(g) for g in self.gold_answers}
            if sum(_norm(c) in gold for c in self.choices) != 1:
                raise ValueError(f"Question {self.id} must have exactly one correct choice")

    @property
    def chain(self) -> Optional[RelationChain]:
        if self.category != KA:
            return None
        return RelationChain(tuple(self.evidence))

    @property
    def correct_choice(self) -> Optional[str]:
        if self.choices is None:
            return None
        gold = {_norm(g) for g in self.gold_answers}
        return next(c for c in self.choices if _norm(c) in gold)


def build_relation_graph(kb: KnowledgeBase, entity: ArtificialEntity) -> nx.MultiDiGraph:
    """KB relations plus the artificial entity's relations; edge key = relation name"""
    graph = nx.MultiDiGraph()
    for entity_id, existing in kb.entities.items():
        graph.add_node(entity_id, name=existing.name, class_id=existing.class_id)
    for object_id, name in kb.dangling.items():
        graph.add_node(object_id, name=name, dangling=True)
    graph.add_node(entity.id, name=entity.name, class_id=entity.class_id, artificial=True)

    for existing in kb.entities.values():
        for relation in existing.relations:
            graph.add_edge(relation.subject, relation.object, key=relation.relation,
                           relation=relation.relation)
    for relation in sorted(entity.relations, key=lambda r: (r.relation, r.object)):
        graph.add_edge(relation.subject, relation.object, key=relation.relation,
                       relation=relation.relation)
    return graph


def _out_links(graph: nx.MultiDiGraph, node: str) -> List[Tuple[str, str]]:
    return sorted((key, target) for _, target, key in graph.out_edges(node, keys=True))


def sample_chains(graph: nx.MultiDiGraph, root: str, min_hops: int = 2, max_hops: int = 3,
                  limit: Optional[int] = 20, rng: Optional[np.random.Generator] = None
                  ) -> List[RelationChain]:
    """
    Breadth-first enumeration of simple relation paths from root

    Paths of min_hops..max_hops links are returned in BFS order. Above
    `limit`, a uniform subsample is kept (first `limit` without an rng).
    """
    if min_hops < 1 or max_hops < min_hops:
        raise UsageError(f"Invalid hop range: {min_hops}..{max_hops}")
    if root not in graph:
        return []

    found: List[RelationChain] = []
    queue = deque([(root, ())])
    while queue:
        node, path = queue.popleft()
        if len(path) >= min_hops:
            found.append(RelationChain(path))
        if len(path) == max_hops:
            continue
        visited = {root} | {link.object for link in path}
        for relation, target in _out_links(graph, node):
            if target not in visited:
                queue.append((target, path + (RelationTriplet(node, relation, target),)))

    if limit is not None and len(found) > limit:
        if rng is None:
            found = found[:limit]
        else:
            keep = sorted(int(i) for i in rng.choice(len(found), size=limit, replace=False))
            found = [found[i] for i in keep]
    return found


def follow_relations(graph: nx.MultiDiGraph, root: str, relation_names: Sequence[str]) -> Set[str]:
    """Every node reached from root by following the relation names in order"""
    frontier = {root}
    for relation in relation_names:
        frontier = {target for node in frontier
                    for _, target, key in graph.out_edges(node, keys=True) if key == relation}
    return frontier


def _signature_name(template: QuestionTemplate) -> Optional[str]:
    signature = template.signature
    if isinstance(signature, str):
        return signature
    return signature[0] if len(signature) == 1 else None


def _check_signature(template: QuestionTemplate, triplet: Triplet):
    name = _signature_name(template)
    if name is None or name.casefold() != triplet.name.casefold():
        raise UsageError(f"Template for {template.signature!r} does not fit property '{triplet.name}'")


def make_onehop_question(triplet: Triplet, template: QuestionTemplate, entity_name: str,
                         resolve_name: Optional[Callable[[str], str]] = None,
                         category: str = KU, question_id: str = "", **details) -> Question:
    """Fill-in (or multiple-choice draft) question about one attribute or relation triplet"""
    _check_signature(template, triplet)
    if template.form not in (FILL_IN_BLANK, MULTIPLE_CHOICE):
        raise UsageError(f"One-hop questions use fill-in templates, given form '{template.form}'")
    if isinstance(triplet, AttributeTriplet):
        gold = tuple(triplet.value.render())
    else:
        gold = (resolve_name(triplet.object) if resolve_name else triplet.object,)
    return Question(
        id=question_id,
        category=category,
        form=template.form,
        text=template.fill(entity_name),
        gold_answers=gold,
        evidence=(triplet,),
        entity_name=entity_name,
        **details,
    )


def make_multihop_question(chain: RelationChain, template: QuestionTemplate, entity_name: str,
                           tail_name: Optional[str] = None, question_id: str = "",
                           **details) -> Question:
    """KA question about the tail of a relation chain; choices are attached by make_choices"""
    signature = template.signature
    if isinstance(signature, str) or \
            tuple(s.casefold() for s in signature) != tuple(r.casefold() for r in chain.relation_names):
        raise UsageError(f"Template for {signature!r} does not fit chain {chain.relation_names!r}")
    details.setdefault("origin", CHAIN)
    return Question(
        id=question_id,
        category=KA,
        form=MULTIPLE_CHOICE,
        text=template.fill(entity_name),
        gold_answers=(tail_name or chain.tail,),
        evidence=chain.links,
        entity_name=entity_name,
        **details,
    )


def _node_name(graph: Optional[nx.MultiDiGraph], kb: KnowledgeBase, node: str) -> str:
    if graph is not None and node in graph and "name" in graph.nodes[node]:
        return graph.nodes[node]["name"]
    return kb.entity_name(node)


def _attribute_values(entities: Iterable, attribute: str) -> List[str]:
    values = []
    for entity in entities:
        for triplet in entity.attributes:
            if triplet.attribute.casefold() == attribute.casefold():
                values.extend(triplet.value.render())
    return values


def _object_names(kb: KnowledgeBase, relation: str) -> List[str]:
    return [kb.entity_name(t.object) for entity in kb.entities.values()
            for t in entity.relations if t.relation == relation]


def _sibling_names(kb: KnowledgeBase, entity_id: str) -> List[str]:
    if entity_id not in kb.entities:
        return []
    return [s.name for s in kbm.siblings(kb, entity_id)]


def _reachable_names(graph: nx.MultiDiGraph, kb: KnowledgeBase, root: str, max_hops: int) -> List[str]:
    if graph is None or root not in graph:
        return []
    reached = nx.single_source_shortest_path_length(graph, root, cutoff=max_hops)
    return [_node_name(graph, kb, node) for node in sorted(reached) if node != root]


def distractor_tiers(question: Question, kb: KnowledgeBase,
                     graph: Optional[nx.MultiDiGraph] = None,
                     max_hops: int = 3) -> Tuple[List[List[str]], Set[str]]:
    """
    Candidate distractor surfaces in preference order, and extra answers to exclude

    Attributes: same attribute on class members, then anywhere in the KB;
    values the entity itself holds for the attribute are excluded.
    Relations and chains: siblings of the answer entity, objects of the same
    relation, then entities reachable from the question root.
    """
    excluded: Set[str] = set()
    evidence = question.evidence[-1]
    if isinstance(evidence, AttributeTriplet):
        held = question.knowledge_payload.get("property", {}).get(evidence.attribute, [])
        excluded = {_norm(v) for v in held}
        members = []
        if question.class_id in kb.classes:
            members = [kb.entities[m] for m in kb.class_node(question.class_id).member_ids]
        tiers = [_attribute_values(members, evidence.attribute),
                 _attribute_values(kb.entities.values(), evidence.attribute)]
        return tiers, excluded

    root = question.evidence[0].subject
    relation_names = [t.relation for t in question.evidence]
    if graph is not None:
        excluded = {_norm(_node_name(graph, kb, n)) for n in follow_relations(graph, root, relation_names)}
    tiers = [_sibling_names(kb, evidence.object),
             _object_names(kb, evidence.relation),
             _reachable_names(graph, kb, root, max_hops)]
    excluded.add(_norm(question.entity_name))
    return tiers, excluded


def draw_distractors(tiers: Sequence[Sequence[str]], excluded: Iterable[str], count: int,
                     rng: np.random.Generator) -> List[str]:
    """Up to `count` distinct candidates, tier by tier, seeded order inside each tier"""
    seen = {_norm(e) for e in excluded}
    chosen: List[str] = []
    for tier in tiers:
        unique: Dict[str, str] = {}
        for candidate in tier:
            unique.setdefault(_norm(candidate), candidate)
        candidates = [unique[k] for k in sorted(unique) if k not in seen]
        for i in rng.permutation(len(candidates)):
            candidate = candidates[int(i)]
            if _norm(candidate) in seen:
                continue
            chosen.append(candidate)
            seen.add(_norm(candidate))
            if len(chosen) == count:
                return chosen
    return chosen


def make_choices(question: Question, kb: KnowledgeBase, rng: np.random.Generator,
                 graph: Optional[nx.MultiDiGraph] = None, max_hops: int = 3) -> Tuple[str, ...]:
    """One gold answer and three distractors in seeded order"""
    gold = question.gold_answers[int(rng.integers(len(question.gold_answers)))]
    tiers, excluded = distractor_tiers(question, kb, graph, max_hops)
    excluded |= {_norm(g) for g in question.gold_answers}
    distractors = draw_distractors(tiers, excluded, CHOICE_COUNT - 1, rng)
    if len(distractors) < CHOICE_COUNT - 1:
        raise InsufficientDistractors(
            f"{question.id or question.text}: only {len(distractors)} distractors available")
    options = [gold] + distractors
    return tuple(options[int(i)] for i in rng.permutation(CHOICE_COUNT))


def make_boolean(triplet: Triplet, templates: Sequence[QuestionTemplate], rng: np.random.Generator,
                 polarity: str, entity_name: str = "", distractor: Optional[str] = None,
                 category: str = KU, question_id: str = "", **details) -> Question:
    """
    Yes/No question about an attribute triplet

    positive asserts one of the true values (gold "Yes"); negative asserts
    `distractor` instead (gold "No").
    """
    if not isinstance(triplet, AttributeTriplet):
        raise UsageError(f"Boolean questions need an attribute triplet, given relation '{triplet.name}'")
    if not templates:
        raise UsageError(f"No Boolean template for '{triplet.attribute}'")
    template = templates[int(rng.integers(len(templates)))]
    _check_signature(template, triplet)
    if polarity == "positive":
        values = triplet.value.render()
        value, gold = values[int(rng.integers(len(values)))], YES
    elif polarity == "negative":
        if distractor is None:
            raise InsufficientDistractors(f"no distractor for negative '{triplet.attribute}' question")
        value, gold = distractor, NO
    else:
        raise UsageError(f"Unknown polarity: {polarity}")
    return Question(
        id=question_id,
        category=category,
        form=BOOLEAN,
        text=template.fill(entity_name or triplet.subject, value),
        gold_answers=(gold,),
        evidence=(triplet,),
        entity_name=entity_name or triplet.subject,
        **details,
    )


@dataclass
class CategoryPools:
    ku: List[Tuple[Triplet, ProvenanceTag]] = field(default_factory=list)
    kd: List[Tuple[Triplet, str]] = field(default_factory=list)
    ka: List[RelationChain] = field(default_factory=list)

    def sizes(self) -> Dict[str, int]:
        return {KU: len(self.ku), KD: len(self.kd), KA: len(self.ka)}


def assign_categories(entity: ArtificialEntity, chains: Sequence[RelationChain],
                      kd_sample_rate: float, rng: np.random.Generator) -> CategoryPools:
    """
    KD: sampled varied and dropped attributes; KU: inherited, class-common and
    extension triplets; KA: chains. Varied relations and unsampled KD
    attributes stay in the knowledge but get no question.
    """
    candidates = [(t, VARIATION) for t, _ in entity.by_origin(VARIATION) if isinstance(t, AttributeTriplet)]
    candidates += [(t, DROPOUT) for t in entity.dropped if isinstance(t, AttributeTriplet)]
    if kd_sample_rate < 1.0 and candidates:
        k = int(round(kd_sample_rate * len(candidates)))
        keep = sorted(int(i) for i in rng.choice(len(candidates), size=k, replace=False))
        candidates = [candidates[i] for i in keep]

    ku = [(t, tag) for t, tag in entity.properties if tag.origin in (CLASS_COMMON, HEREDITY, EXTENSION)]
    return CategoryPools(ku=ku, kd=candidates, ka=list(chains))


class _EntityQuestions:
    """Builds the questions of one artificial entity"""

    def __init__(self, kb: KnowledgeBase, entity: ArtificialEntity, config: QuestionConfig,
                 store: Optional[TemplateStore], rng: np.random.Generator, client=None):
        self.kb = kb
        self.entity = entity
        self.config = config
        self.store = store
        self.client = client
        self.rng = rng
        self.graph = build_relation_graph(kb, entity)
        self.payload = knowledge_payload(entity, kb)
        self.questions: List[Question] = []
        self.dropped = 0
        self._counters = {c: 0 for c in CATEGORIES}

    def _templates(self, signature, form) -> List[QuestionTemplate]:
        return acquire_templates(signature, form, self.config.templates_per_signature,
                                 store=self.store, client=self.client)

    def _pick(self, templates: Sequence[QuestionTemplate]) -> QuestionTemplate:
        return templates[int(self.rng.integers(len(templates)))]

    def _details(self, category: str, origin: str) -> dict:
        self._counters[category] += 1
        return {
            "category": category,
            "question_id": f"{self.entity.id}/{category}/{self._counters[category]:03d}",
            "entity_id": self.entity.id,
            "parent_id": self.entity.parent_id,
            "class_id": self.entity.class_id,
            "origin": origin,
            "knowledge_payload": self.payload,
        }

    @staticmethod
    def _signature(triplet: Triplet):
        return triplet.attribute if isinstance(triplet, AttributeTriplet) else (triplet.relation,)

    def _with_choices(self, question: Question) -> Optional[Question]:
        try:
            choices = make_choices(question, self.kb, self.rng, self.graph, self.config.max_hops)
        except InsufficientDistractors as e:
            logger.warning("Dropping question: %s", e)
            self.dropped += 1
            return None
        return replace(question, form=MULTIPLE_CHOICE, choices=choices)

    def _negative_value(self, triplet: AttributeTriplet, category: str) -> Optional[str]:
        draft = Question(id="", category=category, form=FILL_IN_BLANK, text="",
                         gold_answers=tuple(triplet.value.render()), evidence=(triplet,),
                         entity_name=self.entity.name, class_id=self.entity.class_id,
                         knowledge_payload=self.payload)
        tiers, excluded = distractor_tiers(draft, self.kb, self.graph, self.config.max_hops)
        excluded |= {v.casefold() for v in triplet.value.render()}
        found = draw_distractors(tiers, excluded, 1, self.rng)
        return found[0] if found else None

    def onehop(self, triplet: Triplet, category: str, origin: str):
        signature = self._signature(triplet)
        for form in self.config.forms:
            if form == FILL_IN_BLANK:
                template = self._pick(self._templates(signature, FILL_IN_BLANK))
                self.questions.append(make_onehop_question(
                    triplet, template, self.entity.name, self.kb.entity_name,
                    **self._details(category, origin)))
            elif form == MULTIPLE_CHOICE:
                template = self._pick(self._templates(signature, MULTIPLE_CHOICE))
                draft = make_onehop_question(triplet, template, self.entity.name, self.kb.entity_name,
                                             **self._details(category, origin))
                question = self._with_choices(draft)
                if question is not None:
                    self.questions.append(question)
            elif form == BOOLEAN and isinstance(triplet, AttributeTriplet):
                templates = self._templates(signature, BOOLEAN)
                self.questions.append(make_boolean(triplet, templates, self.rng, "positive",
                                                   self.entity.name, **self._details(category, origin)))
                distractor = self._negative_value(triplet, category)
                if distractor is None:
                    logger.debug("%s: no negative Boolean for '%s'", self.entity.id, triplet.attribute)
                    continue
                self.questions.append(make_boolean(triplet, templates, self.rng, "negative",
                                                   self.entity.name, distractor=distractor,
                                                   **self._details(category, origin)))

    def dropout(self, triplet: AttributeTriplet):
        """Asserts the parent's dropped value about the artificial entity; gold is No"""
        if BOOLEAN not in self.config.forms:
            return
        templates = self._templates(triplet.attribute, BOOLEAN)
        values = triplet.value.render()
        parent_value = values[int(self.rng.integers(len(values)))]
        self.questions.append(make_boolean(triplet, templates, self.rng, "negative", self.entity.name,
                                           distractor=parent_value, **self._details(KD, DROPOUT)))

    def multihop(self, chain: RelationChain):
        template = self._pick(self._templates(chain.relation_names, MULTIPLE_CHOICE))
        draft = make_multihop_question(chain, template, self.entity.name,
                                       tail_name=_node_name(self.graph, self.kb, chain.tail),
                                       **{k: v for k, v in self._details(KA, CHAIN).items()
                                          if k != "category"})
        question = self._with_choices(draft)
        if question is not None:
            self.questions.append(question)


def generate_questions(kb: KnowledgeBase, entity: ArtificialEntity, config: QuestionConfig,
                       store: Optional[TemplateStore] = None,
                       rng: Optional[np.random.Generator] = None, client=None) -> List[Question]:
    """All KU, KD and KA questions of one artificial entity, deterministic under rng"""
    rng = rng if rng is not None else child_rng(config.rng_seed, f"questions:{entity.id}")
    builder = _EntityQuestions(kb, entity, config, store, rng, client)
    chains = sample_chains(builder.graph, entity.id, config.min_hops, config.max_hops,
                           config.chain_limit, rng)
    pools = assign_categories(entity, chains, config.kd_sample_rate, rng)

    for triplet, tag in pools.ku:
        builder.onehop(triplet, KU, tag.origin)
    for triplet, origin in pools.kd:
        if origin == DROPOUT:
            builder.dropout(triplet)
        else:
            builder.onehop(triplet, KD, VARIATION)
    for chain in pools.ka:
        builder.multihop(chain)

    logger.debug("%s: pools %s, %d questions, %d dropped", entity.id, pools.sizes(),
                 len(builder.questions), builder.dropped)
    return builder.questions


def generate_benchmark(kb: KnowledgeBase, entities: Sequence[ArtificialEntity], config: QuestionConfig,
                       store: Optional[TemplateStore] = None, client=None) -> List[Question]:
    """Questions for every entity; each entity draws from its own derived generator"""
    def run(entity):
        return generate_questions(kb, entity, config, store,
                                  child_rng(config.rng_seed, f"questions:{entity.id}"), client)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        batches = list(pool.map(run, entities))
    questions = [q for batch in batches for q in batch]
    counts = {c: sum(q.category == c for q in questions) for c in CATEGORIES}
    logger.info("Generated %d questions (KU %d, KD %d, KA %d) for %d entities",
                len(questions), counts[KU], counts[KD], counts[KA], len(entities))
    return questions


def question_to_record(question: Question, kb: Optional[KnowledgeBase] = None) -> dict:
    record = {
        "id": question.id,
        "category": question.category,
        "form": question.form,
        "question": question.text,
        "answers": list(question.gold_answers),
        "evidence": [triplet_to_document(t, kb) for t in question.evidence],
        "knowledge": question.knowledge_payload,
        "entity_id": question.entity_id,
        "entity_name": question.entity_name,
        "parent_id": question.parent_id,
        "class_id": question.class_id,
        "origin": question.origin,
    }
    if question.choices is not None:
        record["choices"] = list(question.choices)
    return record


def question_from_record(record: dict) -> Question:
    choices = record.get("choices")
    return Question(
        id=record["id"],
        category=record["category"],
        form=record["form"],
        text=record["question"],
        gold_answers=tuple(record["answers"]),
        evidence=tuple(triplet_from_document(t) for t in record.get("evidence", [])),
        entity_name=record.get("entity_name", ""),
        choices=tuple(choices) if choices is not None else None,
        entity_id=record.get("entity_id", ""),
        parent_id=record.get("parent_id", ""),
        class_id=record.get("class_id", ""),
        origin=record.get("origin", ""),
        knowledge_payload=record.get("knowledge", {}),
    )


def write_benchmark(path: Union[str, Path], questions: Sequence[Question],
                    kb: Optional[KnowledgeBase] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for question in questions:
            if question.form == MULTIPLE_CHOICE and question.choices is None:
                raise UsageError(f"Multiple-choice question {question.id} has no choices")
            f.write(json.dumps(question_to_record(question, kb), sort_keys=True, ensure_ascii=False) + "\n")


def read_benchmark(path: Union[str, Path]) -> List[Question]:
    questions = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                questions.append(question_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ArtifactFormatError(f"malformed question record ({e})", path=str(path), line=number)
    return questions
