"""
Benchmark Statistics
Summaries of entity and benchmark files: entity and property counts,
sibling counts, question counts per category and form, and the property
count distributions.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from rich.table import Table

from entity_synthesis import ORIGINS, ArtificialEntity, entity_from_record
from knowledge_base import KnowledgeBase
from pipeline_errors import ArtifactFormatError
from question_generation import CATEGORIES, FORMS, Question, question_from_record

logger = logging.getLogger(__name__)


def entity_frame(entities: Sequence[ArtificialEntity], kb: Optional[KnowledgeBase] = None) -> pd.DataFrame:
    rows = []
    for entity in entities:
        row = {
            "id": entity.id,
            "class_id": entity.class_id,
            "properties": len(entity.triplets),
            "attributes": len(entity.attributes),
            "relations": len(entity.relations),
            "dropped": len(entity.dropped),
        }
        if kb is not None and entity.class_id in kb.classes:
            # the parent's siblings: every class member except the parent
            row["siblings"] = len(kb.class_node(entity.class_id).member_ids) - 1
        for origin in ORIGINS:
            row[origin] = len(entity.by_origin(origin))
        rows.append(row)
    columns = ["id", "class_id", "properties", "attributes", "relations", "dropped", "siblings", *ORIGINS]
    return pd.DataFrame(rows, columns=columns)


def _mean(series: pd.Series) -> float:
    series = series.dropna()
    return round(float(series.mean()), 4) if len(series) else 0.0


def entity_stats(entities: Sequence[ArtificialEntity], kb: Optional[KnowledgeBase] = None) -> dict:
    frame = entity_frame(entities, kb)
    return {
        "entities": int(len(frame)),
        "classes": int(frame["class_id"].nunique()),
        "mean_properties": _mean(frame["properties"]),
        "mean_attributes": _mean(frame["attributes"]),
        "mean_relations": _mean(frame["relations"]),
        "mean_siblings": _mean(frame["siblings"]),
        "provenance": {origin: int(frame[origin].sum()) for origin in ORIGINS},
        "dropped": int(frame["dropped"].sum()),
        "attribute_histogram": {int(k): int(v) for k, v in
                                frame["attributes"].value_counts().sort_index().items()},
        "relation_histogram": {int(k): int(v) for k, v in
                               frame["relations"].value_counts().sort_index().items()},
    }


def benchmark_stats(questions: Sequence[Question]) -> dict:
    frame = pd.DataFrame([{"category": q.category, "form": q.form, "entity_id": q.entity_id}
                          for q in questions], columns=["category", "form", "entity_id"])
    if frame.empty:
        grid = pd.DataFrame(0, index=list(CATEGORIES), columns=list(FORMS))
    else:
        grid = pd.crosstab(frame["category"], frame["form"]).reindex(
            index=list(CATEGORIES), columns=list(FORMS), fill_value=0)
    return {
        "questions": int(len(frame)),
        "entities": int(frame["entity_id"].nunique()),
        "per_category": {c: int(grid.loc[c].sum()) for c in CATEGORIES},
        "per_form": {f: int(grid[f].sum()) for f in FORMS},
        "grid": {c: {f: int(grid.loc[c, f]) for f in FORMS} for c in CATEGORIES},
    }


def format_stats(stats: dict) -> Table:
    """Entity summary, or category x form question counts for a benchmark"""
    if "grid" in stats:
        table = Table(title=f"{stats['questions']} questions about {stats['entities']} entities")
        table.add_column("Category")
        for form in FORMS:
            table.add_column(form, justify="right")
        table.add_column("Total", justify="right")
        for category in CATEGORIES:
            row = stats["grid"][category]
            table.add_row(category, *[str(row[f]) for f in FORMS], str(stats["per_category"][category]))
        table.add_row("Total", *[str(stats["per_form"][f]) for f in FORMS], str(stats["questions"]))
        return table

    table = Table(title=f"{stats['entities']} artificial entities in {stats['classes']} classes")
    table.add_column("Statistic")
    table.add_column("Value", justify="right")
    for key in ("mean_properties", "mean_attributes", "mean_relations", "mean_siblings", "dropped"):
        table.add_row(key.replace("_", " "), str(stats[key]))
    for origin, count in stats["provenance"].items():
        table.add_row(f"{origin} triplets", str(count))
    return table


def plot_histograms(entities: Sequence[ArtificialEntity], path: Union[str, Path]) -> Path:
    """Attribute and relation count distributions as a standalone HTML figure"""
    import plotly.graph_objects as go
    from plotly.subplots import make_subplots

    frame = entity_frame(entities)
    fig = make_subplots(rows=1, cols=2, subplot_titles=("Attributes per entity", "Relations per entity"))
    fig.add_trace(go.Histogram(x=frame["attributes"], name="attributes"), row=1, col=1)
    fig.add_trace(go.Histogram(x=frame["relations"], name="relations"), row=1, col=2)
    fig.update_layout(showlegend=False, bargap=0.1)
    path = Path(path)
    fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info("Histogram written to %s", path)
    return path


def load_records(path: Union[str, Path]) -> List[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ArtifactFormatError(f"not a JSON record ({e.msg})", path=str(path), line=number)
    return records


def stats_for_file(path: Union[str, Path], kb: Optional[KnowledgeBase] = None) -> dict:
    """Entity statistics for an entity file, question counts for a benchmark file"""
    records = load_records(path)
    try:
        if records and "provenance" in records[0]:
            stats = entity_stats([entity_from_record(r) for r in records], kb)
            stats["kind"] = "entities"
        else:
            stats = benchmark_stats([question_from_record(r) for r in records])
            stats["kind"] = "benchmark"
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactFormatError(f"unrecognized record ({e})", path=str(path), line=1)
    return stats
