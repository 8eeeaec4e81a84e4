"""
Knowledge Base Model
In-memory ontology (taxonomy of classes, entities with attribute and relation
triplets), ingestion and validation of source documents, and the structural
queries used by entity synthesis: siblings, class commons and similarity.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from pipeline_errors import (KnowledgeBaseParseError, KnowledgeBaseValidationError,
                             NotFoundError, UndefinedInputError)

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Relative tolerance under which two numeric magnitudes are the same value
REL_TOL = 1e-9

# Ranks too coarse to describe a concrete organism
SCREENED_RANKS = frozenset({"kingdom", "phylum", "domain"})


@dataclass(frozen=True)
class AttributeValue:
    """Numeric magnitude with unit, or a non-empty set of categorical strings"""
    kind: str
    magnitude: Optional[float] = None
    unit: str = ""
    values: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind == NUMERIC:
            if self.magnitude is None or not math.isfinite(self.magnitude):
                raise ValueError(f"Numeric magnitude must be finite, given: {self.magnitude}")
        elif self.kind == CATEGORICAL:
            if not self.values:
                raise ValueError("Categorical value needs at least one entry")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"Categorical values must be distinct, given: {list(self.values)}")
        else:
            raise ValueError(f"Unknown attribute value kind: {self.kind}")

    @classmethod
    def numeric(cls, magnitude: float, unit: str = "") -> "AttributeValue":
        return cls(kind=NUMERIC, magnitude=float(magnitude), unit=unit or "")

    @classmethod
    def categorical(cls, values: Iterable[str]) -> "AttributeValue":
        return cls(kind=CATEGORICAL, values=tuple(values))

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def canonical_key(self) -> Tuple:
        """Ordering key: trimmed/case-folded unit, magnitude to 10 significant digits; compare with same_as"""
        if self.is_numeric:
            return (NUMERIC, f"{self.magnitude:.10g}", self.unit.strip().casefold())
        return (CATEGORICAL, tuple(sorted(v.strip().casefold() for v in self.values)))

    def same_as(self, other: "AttributeValue") -> bool:
        """Same unit and magnitudes within REL_TOL, or the same categorical set"""
        if self.kind != other.kind:
            return False
        if self.is_numeric:
            return self.unit.strip().casefold() == other.unit.strip().casefold() \
                and math.isclose(self.magnitude, other.magnitude, rel_tol=REL_TOL, abs_tol=0.0)
        return self.canonical_key() == other.canonical_key()

    def render(self) -> List[str]:
        """Surface strings, one per acceptable answer"""
        if self.is_numeric:
            return [f"{self.magnitude} {self.unit}".strip()]
        return list(self.values)

    def to_document(self) -> List:
        if self.is_numeric:
            return [{"value": self.magnitude, "unit": self.unit}]
        return list(self.values)

    @classmethod
    def from_document(cls, raw, where: str) -> "AttributeValue":
        if not isinstance(raw, list):
            raw = [raw]
        if not raw:
            raise KnowledgeBaseParseError(f"{where}: empty value list")
        if any(isinstance(item, dict) for item in raw):
            if len(raw) != 1:
                raise KnowledgeBaseParseError(f"{where}: a numeric value must be the only entry")
            item = raw[0]
            if "value" not in item or isinstance(item["value"], bool) \
                    or not isinstance(item["value"], (int, float)):
                raise KnowledgeBaseParseError(f"{where}: numeric value needs a number under 'value'")
            try:
                return cls.numeric(item["value"], str(item.get("unit", "")))
            except ValueError as e:
                raise KnowledgeBaseParseError(f"{where}: {e}")
        if not all(isinstance(item, str) for item in raw):
            raise KnowledgeBaseParseError(f"{where}: categorical values must be strings")
        try:
            return cls.categorical(raw)
        except ValueError as e:
            raise KnowledgeBaseParseError(f"{where}: {e}")


@dataclass(frozen=True)
class AttributeTriplet:
    subject: str
    attribute: str
    value: AttributeValue

    @property
    def name(self) -> str:
        return self.attribute

    def key(self) -> Tuple:
        return ("attribute", self.attribute, self.value.canonical_key())

    def same_as(self, other: "Triplet") -> bool:
        return isinstance(other, AttributeTriplet) and other.attribute == self.attribute \
            and self.value.same_as(other.value)

    def with_subject(self, subject: str) -> "AttributeTriplet":
        return replace(self, subject=subject)


@dataclass(frozen=True)
class RelationTriplet:
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        if not self.relation:
            raise ValueError("Relation name must be non-empty")
        if self.subject == self.object:
            raise ValueError(f"Relation '{self.relation}' cannot point {self.subject} at itself")

    @property
    def name(self) -> str:
        return self.relation

    def key(self) -> Tuple:
        return ("relation", self.relation, self.object)

    def same_as(self, other: "Triplet") -> bool:
        return isinstance(other, RelationTriplet) and other.key() == self.key()

    def with_subject(self, subject: str) -> "RelationTriplet":
        return replace(self, subject=subject)


Triplet = Union[AttributeTriplet, RelationTriplet]


def triplet_keys(triplets: Iterable[Triplet]) -> set:
    return {t.key() for t in triplets}


def contains_triplet(triplets: Iterable[Triplet], triplet: Triplet) -> bool:
    """Whether some triplet has the same name and value, subjects ignored"""
    return any(triplet.same_as(t) for t in triplets)


def distinct_triplets(triplets: Iterable[Triplet]) -> List[Triplet]:
    kept: List[Triplet] = []
    for triplet in triplets:
        if not contains_triplet(kept, triplet):
            kept.append(triplet)
    return kept


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    class_id: str
    rank: str
    attributes: Tuple[AttributeTriplet, ...] = ()
    relations: Tuple[RelationTriplet, ...] = ()

    def __post_init__(self):
        seen: List[Triplet] = []
        for triplet in self.attributes + self.relations:
            if triplet.subject != self.id:
                raise KnowledgeBaseValidationError(
                    f"Triplet subject {triplet.subject} does not match entity {self.id}")
            if contains_triplet(seen, triplet):
                raise KnowledgeBaseValidationError(
                    f"Entity {self.id} repeats property '{triplet.name}'")
            seen.append(triplet)

    @property
    def properties(self) -> Tuple[Triplet, ...]:
        return self.attributes + self.relations


@dataclass(frozen=True)
class ClassNode:
    id: str
    name: str
    rank: str
    parent_class: Optional[str] = None
    member_ids: Tuple[str, ...] = ()
    common_attributes: Tuple[AttributeTriplet, ...] = ()
    common_relations: Tuple[RelationTriplet, ...] = ()
    commons_declared: bool = False

    @property
    def common_properties(self) -> Tuple[Triplet, ...]:
        return self.common_attributes + self.common_relations


@dataclass(frozen=True)
class KnowledgeBase:
    classes: Mapping[str, ClassNode] = field(default_factory=dict)
    entities: Mapping[str, Entity] = field(default_factory=dict)
    name_index: Mapping[str, str] = field(default_factory=dict)
    dangling: Mapping[str, str] = field(default_factory=dict)

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise NotFoundError(f"Unknown entity id: {entity_id}")

    def class_node(self, class_id: str) -> ClassNode:
        try:
            return self.classes[class_id]
        except KeyError:
            raise NotFoundError(f"Unknown class id: {class_id}")

    def entity_name(self, entity_id: str) -> str:
        """Name of an entity or of a dangling relation object"""
        if entity_id in self.entities:
            return self.entities[entity_id].name
        return self.dangling.get(entity_id, entity_id)

    @property
    def dangling_count(self) -> int:
        return len(self.dangling)

    def unique_properties(self, entity_id: str) -> Tuple[Triplet, ...]:
        """Properties of an entity minus the commons of its class"""
        entity = self.entity(entity_id)
        commons = self.class_node(entity.class_id).common_properties
        return tuple(t for t in entity.properties if not contains_triplet(commons, t))


def _template(triplet: Triplet, class_id: str) -> Triplet:
    return triplet.with_subject(class_id)


def _parse_relations(raw, subject: str, where: str,
                     object_names: Dict[str, str]) -> Tuple[RelationTriplet, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise KnowledgeBaseParseError(f"{where}: 'relations' must be a list")
    relations = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "relation" not in item or "object_id" not in item:
            raise KnowledgeBaseParseError(f"{where}[{i}]: relation needs 'relation' and 'object_id'")
        object_id = str(item["object_id"])
        if item.get("object_name"):
            object_names.setdefault(object_id, str(item["object_name"]))
        try:
            relations.append(RelationTriplet(subject, str(item["relation"]), object_id))
        except ValueError as e:
            raise KnowledgeBaseValidationError(f"{where}[{i}]: {e}")
    return tuple(sorted(set(relations), key=lambda t: (t.relation, t.object)))


def _parse_property(raw, subject: str, where: str) -> Tuple[AttributeTriplet, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, dict):
        raise KnowledgeBaseParseError(f"{where}: 'property' must be an object")
    return tuple(
        AttributeTriplet(subject, str(name), AttributeValue.from_document(value, f"{where}.{name}"))
        for name, value in sorted(raw.items())
    )


def _intersect(members: Sequence[Entity], class_id: str) -> Tuple[Tuple[AttributeTriplet, ...],
                                                                   Tuple[RelationTriplet, ...]]:
    if not members:
        return (), ()
    first, others = members[0], members[1:]

    def shared(triplet: Triplet) -> bool:
        return all(contains_triplet(m.properties, triplet) for m in others)

    attributes = tuple(_template(t, class_id) for t in first.attributes if shared(t))
    relations = tuple(_template(t, class_id) for t in first.relations if shared(t))
    return attributes, relations


def _check_taxonomy(classes: Dict[str, dict]):
    for class_id in classes:
        seen = {class_id}
        parent = classes[class_id].get("parent_class")
        while parent is not None:
            if parent not in classes:
                raise KnowledgeBaseValidationError(
                    f"Class {class_id} has unknown parent class {parent}")
            if parent in seen:
                raise KnowledgeBaseValidationError(f"Cyclic taxonomy through class {parent}")
            seen.add(parent)
            parent = classes[parent].get("parent_class")


def ingest(document: Union[str, bytes, dict, None], source: str = "<document>") -> KnowledgeBase:
    """
    Build a KnowledgeBase from a source document

    Args:
        document: JSON text or an already-decoded {"classes": [...], "entities": [...]} object
        source: label used in error messages (usually the file path)

    Returns:
        Immutable KnowledgeBase with class commons resolved and dangling objects recorded
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    if document is None or (isinstance(document, str) and not document.strip()):
        document = {}
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise KnowledgeBaseParseError(e.msg, path=source, line=e.lineno)
    if not isinstance(document, dict):
        raise KnowledgeBaseParseError("top level must be an object", path=source)

    raw_classes = document.get("classes", []) or []
    raw_entities = document.get("entities", []) or []
    if not isinstance(raw_classes, list) or not isinstance(raw_entities, list):
        raise KnowledgeBaseParseError("'classes' and 'entities' must be lists", path=source)

    class_docs: Dict[str, dict] = {}
    for i, raw in enumerate(raw_classes):
        if not isinstance(raw, dict) or "id" not in raw:
            raise KnowledgeBaseParseError(f"classes[{i}]: class needs an 'id'", path=source)
        class_id = str(raw["id"])
        if class_id in class_docs:
            raise KnowledgeBaseValidationError(f"Duplicate class id: {class_id}")
        class_docs[class_id] = raw
    _check_taxonomy(class_docs)

    object_names: Dict[str, str] = {}
    entities: Dict[str, Entity] = {}
    for i, raw in enumerate(raw_entities):
        where = f"entities[{i}]"
        if not isinstance(raw, dict) or "id" not in raw or "class_id" not in raw:
            raise KnowledgeBaseParseError(f"{where}: entity needs 'id' and 'class_id'", path=source)
        entity_id = str(raw["id"])
        if entity_id in entities:
            raise KnowledgeBaseValidationError(f"Duplicate entity id: {entity_id}")
        class_id = str(raw["class_id"])
        if class_id not in class_docs:
            raise KnowledgeBaseValidationError(f"{where}: unknown class id {class_id}")
        try:
            entities[entity_id] = Entity(
                id=entity_id,
                name=str(raw.get("name", entity_id)),
                class_id=class_id,
                rank=str(raw.get("rank", "")),
                attributes=_parse_property(raw.get("property"), entity_id, f"{where}.property"),
                relations=_parse_relations(raw.get("relations"), entity_id,
                                           f"{where}.relations", object_names),
            )
        except KnowledgeBaseParseError as e:
            raise KnowledgeBaseParseError(str(e), path=source)

    classes: Dict[str, ClassNode] = {}
    for class_id, raw in class_docs.items():
        members = sorted((e for e in entities.values() if e.class_id == class_id), key=lambda e: e.id)
        declared = "common_property" in raw or "common_relations" in raw
        if declared:
            attributes = tuple(_template(t, class_id) for t in
                               _parse_property(raw.get("common_property"), class_id,
                                               f"classes.{class_id}.common_property"))
            relations = tuple(_template(t, class_id) for t in
                              _parse_relations(raw.get("common_relations"), class_id,
                                               f"classes.{class_id}.common_relations", object_names))
            for member in members:
                missing = [t for t in attributes + relations if not contains_triplet(member.properties, t)]
                if missing:
                    raise KnowledgeBaseValidationError(
                        f"Class {class_id} declares commons missing from member {member.id}")
        else:
            attributes, relations = _intersect(members, class_id)
        classes[class_id] = ClassNode(
            id=class_id,
            name=str(raw.get("name", class_id)),
            rank=str(raw.get("rank", "")),
            parent_class=raw.get("parent_class"),
            member_ids=tuple(m.id for m in members),
            common_attributes=attributes,
            common_relations=relations,
            commons_declared=declared,
        )

    dangling = {}
    for entity in entities.values():
        for relation in entity.relations:
            if relation.object not in entities:
                dangling[relation.object] = object_names.get(relation.object, relation.object)
    for class_node in classes.values():
        for relation in class_node.common_relations:
            if relation.object not in entities:
                dangling[relation.object] = object_names.get(relation.object, relation.object)
    if dangling:
        logger.warning("%s: %d dangling relation objects kept as name-only nodes",
                       source, len(dangling))

    name_index = {}
    for entity_id in sorted(entities):
        name_index.setdefault(entities[entity_id].name, entity_id)

    logger.info("%s: loaded %d classes, %d entities", source, len(classes), len(entities))
    return KnowledgeBase(
        classes=MappingProxyType(dict(sorted(classes.items()))),
        entities=MappingProxyType(dict(sorted(entities.items()))),
        name_index=MappingProxyType(name_index),
        dangling=MappingProxyType(dict(sorted(dangling.items()))),
    )


def load(path: Union[str, Path]) -> KnowledgeBase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise KnowledgeBaseParseError(str(e), path=str(path))
    return ingest(text, source=str(path))


def _relations_document(relations: Iterable[RelationTriplet], kb: KnowledgeBase) -> List[dict]:
    items = []
    for relation in relations:
        item = {"relation": relation.relation, "object_id": relation.object}
        if relation.object in kb.dangling and kb.dangling[relation.object] != relation.object:
            item["object_name"] = kb.dangling[relation.object]
        items.append(item)
    return items


def emit(kb: KnowledgeBase) -> dict:
    """Canonical document; ingest(emit(kb)) reproduces kb"""
    classes = []
    for class_node in kb.classes.values():
        classes.append({
            "id": class_node.id,
            "name": class_node.name,
            "rank": class_node.rank,
            "parent_class": class_node.parent_class,
            "common_property": {t.attribute: t.value.to_document() for t in class_node.common_attributes},
            "common_relations": _relations_document(class_node.common_relations, kb),
        })
    entities = []
    for entity in kb.entities.values():
        entities.append({
            "id": entity.id,
            "name": entity.name,
            "rank": entity.rank,
            "class_id": entity.class_id,
            "property": {t.attribute: t.value.to_document() for t in entity.attributes},
            "relations": _relations_document(entity.relations, kb),
        })
    return {"classes": classes, "entities": entities}


def dumps(kb: KnowledgeBase) -> str:
    return json.dumps(emit(kb), sort_keys=True, ensure_ascii=False, indent=2)


def siblings(kb: KnowledgeBase, entity_id: str) -> List[Entity]:
    """Other members of the entity's class, sorted by id"""
    entity = kb.entity(entity_id)
    members = kb.class_node(entity.class_id).member_ids
    return [kb.entities[m] for m in sorted(members) if m != entity_id]


def class_common_properties(kb: KnowledgeBase, class_id: str) -> Tuple[Tuple[AttributeTriplet, ...],
                                                                       Tuple[RelationTriplet, ...]]:
    class_node = kb.class_node(class_id)
    return class_node.common_attributes, class_node.common_relations


def eligible_parents(kb: KnowledgeBase, class_id: str, min_parent_properties: int = 3) -> List[str]:
    class_node = kb.class_node(class_id)
    return [m for m in class_node.member_ids
            if len(kb.unique_properties(m)) >= min_parent_properties]


def screen_classes(kb: KnowledgeBase, min_parent_properties: int = 3) -> List[str]:
    """Classes fit to host artificial entities, in id order"""
    eligible = []
    for class_id, class_node in kb.classes.items():
        if class_node.rank.strip().casefold() in SCREENED_RANKS:
            logger.debug("Screened class %s: rank %s", class_id, class_node.rank)
            continue
        if not eligible_parents(kb, class_id, min_parent_properties):
            logger.debug("Screened class %s: no member with %d unique properties",
                         class_id, min_parent_properties)
            continue
        eligible.append(class_id)
    return sorted(eligible)


def property_similarity(props_a: Iterable[Triplet], props_b: Iterable[Triplet]) -> float:
    """Overlap of two property sets by (name, value): |A & B| / |A | B|"""
    distinct_a = distinct_triplets(props_a)
    distinct_b = distinct_triplets(props_b)
    shared = sum(contains_triplet(distinct_b, t) for t in distinct_a)
    union = len(distinct_a) + len(distinct_b) - shared
    if not union:
        raise UndefinedInputError("Similarity of two empty property sets is undefined")
    return shared / union


def knowledge_block(kb: KnowledgeBase, entity_id: str) -> dict:
    """The {"name", "property", "rank"} block of an existing entity, relations as object names"""
    entity = kb.entity(entity_id)
    return build_block(entity.name, entity.rank, entity.attributes, entity.relations, kb.entity_name)


def build_block(name: str, rank: str, attributes: Iterable[AttributeTriplet],
                relations: Iterable[RelationTriplet], resolve_name) -> dict:
    prop: Dict[str, List[str]] = {}
    for triplet in attributes:
        prop.setdefault(triplet.attribute, []).extend(triplet.value.render())
    for triplet in relations:
        names = prop.setdefault(triplet.relation, [])
        object_name = resolve_name(triplet.object)
        if object_name not in names:
            names.append(object_name)
    return {"name": name, "property": {k: prop[k] for k in sorted(prop)}, "rank": rank}
