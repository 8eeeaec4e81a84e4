"""
Artificial Entity Synthesis
Builds new entities from an existing class member (the parent) through
heredity, variation, dropout and extension of its properties, then names
them by fusing subwords of related names.

The three parent splits are called heredity/variation/dropout here; some
write-ups call the same sets remain/change/delete.
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

import knowledge_base as kbm
from knowledge_base import (AttributeTriplet, AttributeValue, Entity, KnowledgeBase,
                            RelationTriplet, Triplet)
from name_synthesis import Segmenter, synthesize_name, vowel_segmenter
from pipeline_errors import (ArtifactFormatError, ConfigurationError, GenerationSkipped,
                             VariationUnavailable)

logger = logging.getLogger(__name__)

CLASS_COMMON = "class_common"
HEREDITY = "heredity"
VARIATION = "variation"
EXTENSION = "extension"
ORIGINS = (CLASS_COMMON, HEREDITY, VARIATION, EXTENSION)

# Redraws before a numeric variation that rounds back to the original gives up
MAX_NUMERIC_REDRAWS = 10


class SynthesisConfig(BaseModel):
    """Knobs of artificial entity generation"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    split_weights: Tuple[float, float, float] = (0.5, 0.3, 0.2)
    split_mode: Literal["independent", "fixed"] = "independent"
    extension_count: int = Field(2, ge=0)
    extension_fraction: Optional[float] = Field(None, ge=0.0, le=1.0)
    noise_scale: float = Field(0.1, gt=0.0)
    significant_digits: Optional[int] = Field(4, ge=1)
    min_parent_properties: int = Field(3, ge=0)
    rng_seed: int = Field(0, ge=0, lt=2 ** 64)
    entities_per_class: int = Field(1, ge=0)
    name_carry_tail: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("split_weights")
    @classmethod
    def _weights_sum_to_one(cls, weights):
        check_weights(weights)
        return weights


def check_weights(weights: Sequence[float]):
    if len(weights) != 3:
        raise ConfigurationError(f"Three split weights required, given: {list(weights)}")
    if any(w < 0 for w in weights):
        raise ConfigurationError(f"Split weights must be non-negative, given: {list(weights)}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigurationError(f"Split weights must sum to 1, given: {list(weights)}")


@dataclass(frozen=True)
class ProvenanceTag:
    origin: str
    original: Optional[Triplet] = None
    source_entity_id: Optional[str] = None

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"Unknown provenance origin: {self.origin}")
        if self.origin == VARIATION and self.original is None:
            raise ValueError("Variation provenance must carry the original triplet")


@dataclass(frozen=True)
class ArtificialEntity:
    id: str
    name: str
    parent_id: str
    class_id: str
    rank: str
    properties: Tuple[Tuple[Triplet, ProvenanceTag], ...] = ()
    dropped: Tuple[Triplet, ...] = ()

    @property
    def triplets(self) -> Tuple[Triplet, ...]:
        return tuple(t for t, _ in self.properties)

    @property
    def attributes(self) -> Tuple[AttributeTriplet, ...]:
        return tuple(t for t in self.triplets if isinstance(t, AttributeTriplet))

    @property
    def relations(self) -> Tuple[RelationTriplet, ...]:
        return tuple(t for t in self.triplets if isinstance(t, RelationTriplet))

    def by_origin(self, origin: str) -> List[Tuple[Triplet, ProvenanceTag]]:
        return [(t, tag) for t, tag in self.properties if tag.origin == origin]

    def provenance_of(self, triplet: Triplet) -> ProvenanceTag:
        for t, tag in self.properties:
            if t == triplet:
                return tag
        raise KeyError(triplet)


def _group_by_name(triplets: Sequence[Triplet]) -> Dict[str, List[Triplet]]:
    groups: Dict[str, List[Triplet]] = {}
    for triplet in triplets:
        groups.setdefault(triplet.name, []).append(triplet)
    return groups


def split_properties(triplets: Sequence[Triplet], weights: Sequence[float],
                     rng: np.random.Generator, mode: str = "independent"
                     ) -> Tuple[Tuple[Triplet, ...], Tuple[Triplet, ...], Tuple[Triplet, ...]]:
    """
    Partition parent unique properties into heredity, variation and dropout sets

    Triplets sharing a property name travel together so that no name ends up
    in two sets. "independent" draws one weighted choice per name; "fixed"
    shuffles the names and cuts at the weight proportions.
    """
    check_weights(weights)
    groups = _group_by_name(triplets)
    names = list(groups)
    buckets: Tuple[List[Triplet], List[Triplet], List[Triplet]] = ([], [], [])

    if mode == "independent":
        probabilities = np.asarray(weights, dtype=float)
        for name in names:
            buckets[int(rng.choice(3, p=probabilities))].extend(groups[name])
    elif mode == "fixed":
        order = [names[i] for i in rng.permutation(len(names))]
        exact = np.asarray(weights, dtype=float) * len(order)
        sizes = np.floor(exact).astype(int)
        for i in np.argsort(-(exact - sizes), kind="stable")[:len(order) - sizes.sum()]:
            sizes[i] += 1
        start = 0
        for bucket, size in zip(buckets, sizes):
            for name in order[start:start + size]:
                bucket.extend(groups[name])
            start += size
    else:
        raise ConfigurationError(f"Unknown split mode: {mode}")

    return tuple(buckets[0]), tuple(buckets[1]), tuple(buckets[2])


def vary_relation(triplet: RelationTriplet, kb: KnowledgeBase,
                  rng: np.random.Generator) -> RelationTriplet:
    """Swap the object for one of its siblings, keeping the relation name"""
    if triplet.object not in kb.entities:
        raise VariationUnavailable(f"object {triplet.object} is not a loaded entity")
    candidates = [s for s in kbm.siblings(kb, triplet.object) if s.id != triplet.subject]
    if not candidates:
        raise VariationUnavailable(f"object {triplet.object} has no siblings")
    chosen = candidates[int(rng.integers(len(candidates)))]
    return RelationTriplet(triplet.subject, triplet.relation, chosen.id)


def vary_attribute(triplet: AttributeTriplet, parent_siblings: Sequence[Entity],
                   rng: np.random.Generator, noise_scale: float = 0.1,
                   significant_digits: Optional[int] = None) -> AttributeTriplet:
    """
    Perturb an attribute value

    Numeric values get Gaussian noise with std noise_scale*|v|; other values
    are copied from a uniformly chosen parent sibling holding a different
    value for the same attribute.
    """
    value = triplet.value
    if value.is_numeric:
        if value.magnitude == 0:
            raise VariationUnavailable(f"'{triplet.attribute}' is zero, noise would be degenerate")
        std = noise_scale * abs(value.magnitude)
        for _ in range(MAX_NUMERIC_REDRAWS):
            varied = value.magnitude + rng.normal(0.0, std)
            if significant_digits:
                varied = float(f"{varied:.{significant_digits}g}")
            new_value = AttributeValue.numeric(varied, value.unit)
            if not new_value.same_as(value):
                return replace(triplet, value=new_value)
        raise VariationUnavailable(f"'{triplet.attribute}' rounds back to its original value")

    donors = []
    for sibling in parent_siblings:
        for candidate in sibling.attributes:
            if candidate.attribute == triplet.attribute \
                    and not candidate.value.same_as(value):
                donors.append(candidate.value)
                break
    if not donors:
        raise VariationUnavailable(f"no sibling holds another value for '{triplet.attribute}'")
    return replace(triplet, value=donors[int(rng.integers(len(donors)))])


def sample_extension(parent_siblings: Sequence[Entity], count: int, rng: np.random.Generator,
                     exclude: Iterable[str] = (), subject: str = "",
                     commons: Iterable[Triplet] = ()) -> List[Tuple[Triplet, str]]:
    """
    Sample sibling unique properties whose names are not excluded

    Draws min(count, pool size) distinct triplets without replacement and
    returns (triplet rewritten to `subject`, source sibling id) pairs. A
    property held by several siblings enters the pool once, credited to the
    first sibling by id.
    """
    if count <= 0:
        return []
    excluded = set(exclude)
    commons = tuple(commons)
    pool: List[Tuple[Triplet, str]] = []
    for sibling in sorted(parent_siblings, key=lambda e: e.id):
        for triplet in sibling.properties:
            if triplet.name in excluded or kbm.contains_triplet(commons, triplet):
                continue
            if isinstance(triplet, RelationTriplet) and triplet.object == subject:
                continue
            if not kbm.contains_triplet((t for t, _ in pool), triplet):
                pool.append((triplet, sibling.id))
    pool.sort(key=lambda item: repr(item[0].key()))

    picks = rng.permutation(len(pool))[:min(count, len(pool))]
    return [(pool[int(i)][0].with_subject(subject), pool[int(i)][1]) for i in picks]


def _extension_count(config: SynthesisConfig, parent_siblings: Sequence[Entity]) -> int:
    if config.extension_fraction is None:
        return config.extension_count
    pool = kbm.distinct_triplets(t for s in parent_siblings for t in s.properties)
    return int(round(config.extension_fraction * len(pool)))


def generate_entity(kb: KnowledgeBase, class_id: str, config: SynthesisConfig,
                    rng: np.random.Generator, entity_id: Optional[str] = None,
                    existing_names: Iterable[str] = (),
                    segmenter: Optional[Segmenter] = None) -> ArtificialEntity:
    """Construct one artificial entity from a uniformly chosen eligible member of the class"""
    eligible = kbm.eligible_parents(kb, class_id, config.min_parent_properties)
    if not eligible:
        raise GenerationSkipped(
            class_id, f"no member with {config.min_parent_properties} unique properties")
    parent = kb.entity(eligible[int(rng.integers(len(eligible)))])
    parent_siblings = kbm.siblings(kb, parent.id)
    new_id = entity_id or f"artificial:{class_id}:{parent.id}"

    commons = kb.class_node(class_id).common_properties
    uniques = kb.unique_properties(parent.id)
    heredity, variation, dropout = split_properties(
        uniques, config.split_weights, rng, config.split_mode)

    properties: List[Tuple[Triplet, ProvenanceTag]] = []
    properties += [(t.with_subject(new_id), ProvenanceTag(CLASS_COMMON)) for t in commons]
    properties += [(t.with_subject(new_id), ProvenanceTag(HEREDITY)) for t in heredity]
    used = [t for t, _ in properties]

    for name, group in _group_by_name(variation).items():
        try:
            varied = []
            for original in group:
                moved = original.with_subject(new_id)
                if isinstance(moved, RelationTriplet):
                    result = vary_relation(moved, kb, rng)
                else:
                    result = vary_attribute(moved, parent_siblings, rng,
                                            config.noise_scale, config.significant_digits)
                varied.append((result, ProvenanceTag(VARIATION, original=original)))
            varied_triplets = [t for t, _ in varied]
            if len(kbm.distinct_triplets(varied_triplets)) != len(varied_triplets) \
                    or any(kbm.contains_triplet(used, t) for t in varied_triplets):
                raise VariationUnavailable(f"variation of '{name}' collides with another property")
        except VariationUnavailable as e:
            logger.debug("%s: keeping '%s' as heredity (%s)", new_id, name, e)
            varied = [(t.with_subject(new_id), ProvenanceTag(HEREDITY)) for t in group]
        properties += varied
        used += [t for t, _ in varied]

    exclude = {t.name for t in commons} | {t.name for t in uniques}
    extension = sample_extension(parent_siblings, _extension_count(config, parent_siblings), rng,
                                 exclude=exclude, subject=new_id, commons=commons)
    properties += [(t, ProvenanceTag(EXTENSION, source_entity_id=source)) for t, source in extension]

    related = [parent.name] + [s.name for s in parent_siblings]
    name = synthesize_name(related, segmenter or vowel_segmenter, rng,
                           existing_names=list(kb.name_index) + list(existing_names),
                           carry_tail=config.name_carry_tail)

    logger.debug("%s (%s) from parent %s: %d heredity, %d variation, %d dropout, %d extension",
                 new_id, name, parent.id, len(heredity), len(variation), len(dropout), len(extension))
    return ArtificialEntity(
        id=new_id,
        name=name,
        parent_id=parent.id,
        class_id=class_id,
        rank=parent.rank,
        properties=tuple(properties),
        dropped=tuple(dropout),
    )


def child_rng(seed: int, label: str) -> np.random.Generator:
    """Independent generator derived from (seed, label), stable across processes"""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    spawn_key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(spawn_key,)))


@dataclass
class BatchResult:
    entities: List[ArtificialEntity] = field(default_factory=list)
    skipped: Dict[str, str] = field(default_factory=dict)
    per_class: Dict[str, int] = field(default_factory=dict)


def _skip_reason(kb: KnowledgeBase, class_id: str, min_parent_properties: int) -> Optional[str]:
    class_node = kb.class_node(class_id)
    if class_node.rank.strip().casefold() in kbm.SCREENED_RANKS:
        return f"rank '{class_node.rank}' is screened out"
    if not class_node.member_ids:
        return "class has no members"
    if not kbm.eligible_parents(kb, class_id, min_parent_properties):
        return f"no member with {min_parent_properties} unique properties"
    return None


def _generate_class(kb: KnowledgeBase, class_id: str, config: SynthesisConfig,
                    segmenter: Optional[Segmenter]) -> List[ArtificialEntity]:
    rng = child_rng(config.rng_seed, class_id)
    entities: List[ArtificialEntity] = []
    for n in range(config.entities_per_class):
        entities.append(generate_entity(kb, class_id, config, rng,
                                        entity_id=f"artificial:{class_id}:{n}",
                                        existing_names=[e.name for e in entities],
                                        segmenter=segmenter))
    return entities


def generate_batch(kb: KnowledgeBase, config: SynthesisConfig,
                   segmenter: Optional[Segmenter] = None) -> BatchResult:
    """Generate entities_per_class entities for every screened class, deterministic under seed"""
    result = BatchResult()
    eligible = kbm.screen_classes(kb, config.min_parent_properties)
    for class_id in kb.classes:
        if class_id not in eligible:
            reason = _skip_reason(kb, class_id, config.min_parent_properties)
            result.skipped[class_id] = reason or "screened out"
            logger.warning("Skipping class %s: %s", class_id, result.skipped[class_id])

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        batches = list(pool.map(lambda c: _generate_class(kb, c, config, segmenter), eligible))

    taken = {name.casefold() for name in kb.name_index}
    for class_id, entities in zip(eligible, batches):
        for entity in entities:
            name = entity.name
            suffix = 2
            while name.casefold() in taken:
                name = f"{entity.name} {suffix}"
                suffix += 1
            taken.add(name.casefold())
            result.entities.append(entity if name == entity.name else replace(entity, name=name))
        result.per_class[class_id] = len(entities)
        logger.info("Class %s: %d artificial entities", class_id, len(entities))
    return result


def triplet_to_document(triplet: Triplet, kb: Optional[KnowledgeBase] = None) -> dict:
    if isinstance(triplet, AttributeTriplet):
        return {"subject": triplet.subject, "attribute": triplet.attribute,
                "value": triplet.value.to_document()}
    document = {"subject": triplet.subject, "relation": triplet.relation, "object_id": triplet.object}
    if kb is not None:
        document["object_name"] = kb.entity_name(triplet.object)
    return document


def triplet_from_document(document: dict) -> Triplet:
    if "attribute" in document:
        return AttributeTriplet(document["subject"], document["attribute"],
                                AttributeValue.from_document(document["value"], document["attribute"]))
    return RelationTriplet(document["subject"], document["relation"], document["object_id"])


def knowledge_payload(entity: ArtificialEntity, kb: KnowledgeBase) -> dict:
    """{"name", "property", "rank"} block handed to the model as new knowledge"""
    return kbm.build_block(entity.name, entity.rank, entity.attributes, entity.relations,
                           kb.entity_name)


def entity_to_record(entity: ArtificialEntity, kb: KnowledgeBase) -> dict:
    provenance: Dict[str, list] = {origin: [] for origin in ORIGINS}
    for triplet, tag in entity.properties:
        item = {"triplet": triplet_to_document(triplet, kb)}
        if tag.original is not None:
            item["original"] = triplet_to_document(tag.original, kb)
        if tag.source_entity_id is not None:
            item["source_entity_id"] = tag.source_entity_id
        provenance[tag.origin].append(item)
    return {
        "id": entity.id,
        "name": entity.name,
        "parent_id": entity.parent_id,
        "class_id": entity.class_id,
        "rank": entity.rank,
        "property": {t.attribute: t.value.to_document() for t in entity.attributes},
        "relations": [{"relation": t.relation, "object_id": t.object,
                       "object_name": kb.entity_name(t.object)} for t in entity.relations],
        "provenance": provenance,
        "dropped": [triplet_to_document(t, kb) for t in entity.dropped],
    }


def entity_from_record(record: dict) -> ArtificialEntity:
    properties = []
    for origin in ORIGINS:
        for item in record.get("provenance", {}).get(origin, []):
            original = item.get("original")
            tag = ProvenanceTag(origin,
                                original=triplet_from_document(original) if original else None,
                                source_entity_id=item.get("source_entity_id"))
            properties.append((triplet_from_document(item["triplet"]), tag))
    return ArtificialEntity(
        id=record["id"],
        name=record["name"],
        parent_id=record["parent_id"],
        class_id=record["class_id"],
        rank=record.get("rank", ""),
        properties=tuple(properties),
        dropped=tuple(triplet_from_document(d) for d in record.get("dropped", [])),
    )


def write_entities(path: Union[str, Path], entities: Sequence[ArtificialEntity], kb: KnowledgeBase):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for entity in entities:
            f.write(json.dumps(entity_to_record(entity, kb), sort_keys=True, ensure_ascii=False) + "\n")


def read_entities(path: Union[str, Path]) -> List[ArtificialEntity]:
    entities = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                entities.append(entity_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ArtifactFormatError(f"malformed entity record ({e})", path=str(path), line=number)
    return entities


def write_provenance_sidecar(path: Union[str, Path], result: BatchResult, config: SynthesisConfig):
    """<entities>.provenance.json: per-class counts, skip reasons and the configuration echo"""
    sidecar = Path(path).with_suffix(".provenance.json")
    document = {
        "per_class": dict(sorted(result.per_class.items())),
        "skipped": dict(sorted(result.skipped.items())),
        "entity_count": len(result.entities),
        "config": config.model_dump(mode="json"),
    }
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")
    return sidecar
