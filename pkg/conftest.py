"""
Shared test fixtures: the bundled toy knowledge bases and a generated
50-entity knowledge base for the property-based suites.
"""

from pathlib import Path

import numpy as np
import pytest

import knowledge_base as kbm

FIXTURES = Path(__file__).parent / "fixtures"

NUMERIC_ATTRIBUTES = {"body mass": "kg", "life span": "years", "preferred water depth": "m"}
CATEGORICAL_ATTRIBUTES = {
    "diet": ["herbivore", "carnivore", "omnivore", "insectivore"],
    "habitat": ["terrestrial", "aquatic", "arboreal", "grassland"],
    "locomotion": ["quadruped", "biped", "swimming", "flying"],
    "conservation status": ["least concern", "vulnerable", "endangered"],
}
RELATIONS = ("eaten by", "prey on", "compete with")
SYLLABLES = ("ba", "lo", "mi", "ra", "tu", "ne", "sa", "ko", "vi", "de", "pho", "gri")


def random_kb_document(n_entities: int = 50, n_classes: int = 5, seed: int = 0) -> dict:
    """Knowledge base document with every member sharing 'cellularity' and random other properties"""
    rng = np.random.default_rng(seed)
    ids = [f"taxon{i:02d}" for i in range(n_entities)]
    entities = []
    for i, entity_id in enumerate(ids):
        prop = {"cellularity": ["multicellular"]}
        for name, unit in NUMERIC_ATTRIBUTES.items():
            if rng.random() < 0.8:
                prop[name] = [{"value": float(rng.integers(1, 500)), "unit": unit}]
        for name, values in CATEGORICAL_ATTRIBUTES.items():
            if rng.random() < 0.8:
                prop[name] = [values[int(rng.integers(len(values)))]]
        relations = []
        for relation in RELATIONS:
            target = ids[int(rng.integers(n_entities))]
            if rng.random() < 0.6 and target != entity_id:
                relations.append({"relation": relation, "object_id": target})
        name = "".join(SYLLABLES[int(k)] for k in rng.integers(len(SYLLABLES), size=3))
        entities.append({
            "id": entity_id,
            "name": name.capitalize(),
            "class_id": f"family{i % n_classes}",
            "rank": "species",
            "property": prop,
            "relations": relations,
        })
    classes = [{"id": f"family{c}", "name": f"Family {c}", "rank": "family"} for c in range(n_classes)]
    return {"classes": classes, "entities": entities}


@pytest.fixture
def toy_kb():
    return kbm.load(FIXTURES / "toy_kb.json")


@pytest.fixture
def alpaca_kb():
    return kbm.load(FIXTURES / "alpaca_kb.json")


@pytest.fixture
def fifty_kb():
    return kbm.ingest(random_kb_document(), source="fifty")
