"""
Evaluation Harness
Runs benchmark questions through a model endpoint, judges the completions,
scores them per ability (KU/KD/KA), and filters questions down to knowledge
the model can actually recall.
"""

import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from rich.console import Console
from rich.table import Table

from answer_matching import CORRECT, DEFAULT_REFUSALS, MULTI, REFUSE, VERDICTS, WRONG, judge
from entity_synthesis import ArtificialEntity
from knowledge_base import AttributeTriplet, KnowledgeBase, Triplet
from model_endpoint import EndpointRequest, ModelEndpoint, dispatch
from pipeline_errors import ArtifactFormatError, NotFoundError, UndefinedInputError
from prompt_builder import Exemplar, PromptSpec, build_probe_prompt, build_prompt, injected_blocks
from question_generation import CATEGORIES, KA, Question
from question_templates import FILL_IN_BLANK, TemplateStore, acquire_templates

logger = logging.getLogger(__name__)

AVERAGE = "Avg"


@dataclass(frozen=True)
class Judgment:
    question_id: str
    raw_output: str
    verdict: str
    matched: Optional[str] = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"Unknown verdict: {self.verdict}")


@dataclass
class EvalReport:
    label: str
    scores: Dict[str, Optional[float]]
    counts: Dict[str, int]
    average: float
    verdicts: Dict[str, float]
    errors: Dict[str, float]
    judgments: List[Judgment] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "scores": self.scores,
            "counts": self.counts,
            "average": self.average,
            "verdicts": self.verdicts,
            "errors": self.errors,
            "config": self.config,
            "judgments": [asdict(j) for j in self.judgments],
        }


def _percent(part: int, whole: int) -> float:
    return round(100.0 * part / whole, 2) if whole else 0.0


def score(judgments: Sequence[Judgment], index: Mapping[str, Question], label: str = "",
          config: Optional[dict] = None) -> EvalReport:
    """
    Per-category percent correct, question-weighted average, verdict shares
    over all judgments and error-class shares over the incorrect ones
    """
    if not judgments:
        raise UndefinedInputError("Cannot score an empty judgment set")
    for judgment in judgments:
        if judgment.question_id not in index:
            raise NotFoundError(f"Judgment for unknown question id: {judgment.question_id}")

    ordered = sorted(judgments, key=lambda j: j.question_id)
    counts = {c: 0 for c in CATEGORIES}
    correct = {c: 0 for c in CATEGORIES}
    for judgment in ordered:
        category = index[judgment.question_id].category
        counts[category] += 1
        correct[category] += judgment.verdict == CORRECT

    scores = {c: (_percent(correct[c], counts[c]) if counts[c] else None) for c in CATEGORIES}
    verdict_counts = {v: sum(j.verdict == v for j in ordered) for v in VERDICTS}
    incorrect = len(ordered) - verdict_counts[CORRECT]
    return EvalReport(
        label=label,
        scores=scores,
        counts=counts,
        average=_percent(sum(correct.values()), len(ordered)),
        verdicts={v: _percent(n, len(ordered)) for v, n in verdict_counts.items()},
        errors={v: _percent(verdict_counts[v], incorrect) for v in (REFUSE, MULTI, WRONG)},
        judgments=ordered,
        config=dict(config or {}),
    )


def evaluate(questions: Sequence[Question], spec: PromptSpec, endpoint: ModelEndpoint,
             exemplars: Optional[Dict[str, List[Exemplar]]] = None,
             kb: Optional[KnowledgeBase] = None, seed: int = 0,
             max_concurrency: Optional[int] = None, refusals: Iterable[str] = DEFAULT_REFUSALS,
             store: Optional[TemplateStore] = None, label: Optional[str] = None) -> EvalReport:
    """Prompt, query and judge every question, then score"""
    refusals = tuple(refusals)
    requests_ = []
    for question in questions:
        extra = injected_blocks(question, spec, kb, seed) if kb is not None else []
        prompt = build_prompt(question, spec, exemplars, extra, store)
        requests_.append(EndpointRequest(question.id, prompt, question.gold_answers,
                                         question.choices, question.form))

    outputs = dispatch(endpoint, requests_, max_concurrency)
    judgments = []
    for question in questions:
        raw = outputs[question.id]
        verdict, matched = judge(raw, question.gold_answers, question.form, question.choices, refusals)
        judgments.append(Judgment(question.id, raw, verdict, matched))

    config = {"prompt": spec.model_dump(mode="json"), "endpoint": endpoint.label,
              "seed": seed, "questions": len(questions)}
    report = score(judgments, {q.id: q for q in questions}, label or spec.label, config)
    logger.info("%s [%s]: KU %s, KD %s, KA %s, Avg %.2f", endpoint.label, report.label,
                report.scores["KU"], report.scores["KD"], report.scores["KA"], report.average)
    return report


@dataclass(frozen=True)
class Probe:
    """Recall question about one fact of an existing entity"""
    id: str
    text: str
    gold_answers: Tuple[str, ...]


def probe_id(triplet: Triplet) -> str:
    if isinstance(triplet, AttributeTriplet):
        return f"probe|{triplet.subject}|{triplet.attribute}"
    return f"probe|{triplet.subject}|{triplet.relation}|{triplet.object}"


def make_probe(triplet: Triplet, kb: KnowledgeBase, store: Optional[TemplateStore] = None) -> Probe:
    signature = triplet.attribute if isinstance(triplet, AttributeTriplet) else (triplet.relation,)
    template = acquire_templates(signature, FILL_IN_BLANK, count=1, store=store)[0]
    if isinstance(triplet, AttributeTriplet):
        gold = tuple(triplet.value.render())
    else:
        gold = (kb.entity_name(triplet.object),)
    return Probe(probe_id(triplet), template.fill(kb.entity_name(triplet.subject)), gold)


@dataclass
class FilterResult:
    model: str
    retained: List[Question] = field(default_factory=list)
    dropped: Dict[str, str] = field(default_factory=dict)
    retained_entities: List[str] = field(default_factory=list)
    dropped_entities: Dict[str, str] = field(default_factory=dict)
    failed_probes: List[str] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "model": self.model,
            "retained": sorted(q.id for q in self.retained),
            "dropped": dict(sorted(self.dropped.items())),
            "entities": {"retained": sorted(self.retained_entities),
                         "dropped": dict(sorted(self.dropped_entities.items()))},
            "failed_probes": sorted(self.failed_probes),
        }


def _read_checkpoint(path: Optional[Path]) -> Dict[str, str]:
    """Answered probes; unparsable lines (a write cut short) are dropped from the file"""
    done: Dict[str, str] = {}
    if path is None or not path.exists():
        return done
    kept, repair = [], False
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                done[record["id"]] = record["output"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                logger.warning("%s:%d: skipping unreadable checkpoint record (%s)", path, number, e)
                repair = True
                continue
            if not line.endswith("\n"):
                line, repair = line + "\n", True
            kept.append(line)
    if repair:
        with open(path, "w", encoding="utf-8") as f:
            f.writelines(kept)
    logger.info("Resuming from checkpoint %s: %d probes already answered", path, len(done))
    return done


def filter_for_model(kb: KnowledgeBase, entities: Sequence[ArtificialEntity], questions: Sequence[Question],
                     endpoint: ModelEndpoint, exemplars: Optional[Dict[str, List[Exemplar]]] = None,
                     checkpoint: Optional[Union[str, Path]] = None,
                     max_concurrency: Optional[int] = None,
                     store: Optional[TemplateStore] = None) -> FilterResult:
    """
    Keep only questions whose supporting existing knowledge the model recalls

    An artificial entity survives when every property of its parent is
    recalled; a KA question additionally needs every chain link between
    existing entities recalled. Answered probes are appended to `checkpoint`
    as they arrive, so an interrupted run resumes where it stopped.
    """
    probes: Dict[str, Probe] = {}
    parent_probes: Dict[str, List[str]] = {}
    for entity in entities:
        if entity.parent_id in parent_probes:
            continue
        parent = kb.entity(entity.parent_id)
        parent_probes[parent.id] = []
        for triplet in parent.properties:
            probe = make_probe(triplet, kb, store)
            probes.setdefault(probe.id, probe)
            parent_probes[parent.id].append(probe.id)

    link_probes: Dict[str, List[str]] = {}
    for question in questions:
        if question.category != KA:
            continue
        link_probes[question.id] = []
        for link in question.evidence:
            if link.subject not in kb.entities:
                continue
            probe = make_probe(link, kb, store)
            probes.setdefault(probe.id, probe)
            link_probes[question.id].append(probe.id)

    checkpoint_path = Path(checkpoint) if checkpoint else None
    outputs = _read_checkpoint(checkpoint_path)
    todo = [EndpointRequest(p.id, build_probe_prompt(p.text, exemplars), p.gold_answers, None, FILL_IN_BLANK)
            for p_id, p in sorted(probes.items()) if p_id not in outputs]

    handle = open(checkpoint_path, "a", encoding="utf-8") if checkpoint_path else None
    try:
        def record(request: EndpointRequest, output: str):
            outputs[request.question_id] = output
            if handle is not None:
                handle.write(json.dumps({"id": request.question_id, "output": output},
                                        sort_keys=True, ensure_ascii=False) + "\n")
                handle.flush()

        dispatch(endpoint, todo, max_concurrency, on_result=record)
    finally:
        if handle is not None:
            handle.close()

    failed = {p_id for p_id, probe in probes.items()
              if judge(outputs[p_id], probe.gold_answers, FILL_IN_BLANK)[0] != CORRECT}

    result = FilterResult(model=endpoint.label, failed_probes=sorted(failed))
    kept_entities: Set[str] = set()
    for entity in entities:
        missed = [p for p in parent_probes[entity.parent_id] if p in failed]
        if missed:
            result.dropped_entities[entity.id] = f"parent {entity.parent_id} not recalled: {missed[0]}"
        else:
            kept_entities.add(entity.id)
    result.retained_entities = sorted(kept_entities)

    for question in questions:
        if question.entity_id not in kept_entities:
            result.dropped[question.id] = result.dropped_entities.get(
                question.entity_id, f"entity {question.entity_id} not in the filtered set")
            continue
        missed = [p for p in link_probes.get(question.id, []) if p in failed]
        if missed:
            result.dropped[question.id] = f"chain link not recalled: {missed[0]}"
            continue
        result.retained.append(question)

    logger.info("%s: kept %d of %d questions, %d of %d entities", endpoint.label, len(result.retained),
                len(questions), len(kept_entities), len(entities))
    return result


def write_manifest(path: Union[str, Path], result: FilterResult):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(result.manifest(), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def write_partial_manifest(path: Union[str, Path], model: str, checkpoint: Optional[Union[str, Path]],
                           error: BaseException):
    """Record of an interrupted filtering run; it has no 'retained' list, so evaluation refuses it"""
    answered = _read_checkpoint(Path(checkpoint)) if checkpoint else {}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"model": model, "complete": False, "error": str(error),
                   "checkpoint": str(checkpoint) if checkpoint else None,
                   "answered_probes": sorted(answered)}, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.warning("%s: filtering interrupted after %d probes, partial manifest at %s",
                   model, len(answered), path)


def read_manifest(path: Union[str, Path]) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise ArtifactFormatError(f"malformed manifest ({e.msg})", path=str(path), line=e.lineno)
    if "retained" not in manifest:
        raise ArtifactFormatError("manifest has no 'retained' list", path=str(path), line=1)
    return manifest


def intersect_manifests(manifests: Sequence[dict]) -> Set[str]:
    """Question ids retained for every model"""
    if not manifests:
        return set()
    kept = set(manifests[0]["retained"])
    for manifest in manifests[1:]:
        kept &= set(manifest["retained"])
    return kept


def apply_manifest(questions: Sequence[Question], retained_ids: Set[str]) -> List[Question]:
    return [q for q in questions if q.id in retained_ids]


def write_report(path: Union[str, Path], report: Union[EvalReport, Sequence[EvalReport]]):
    """JSON report plus the plain-text table next to it (.txt)"""
    reports = [report] if isinstance(report, EvalReport) else list(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = reports[0].to_dict() if len(reports) == 1 else {"reports": [r.to_dict() for r in reports]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    path.with_suffix(".txt").write_text(render_text(format_report_table(reports)), encoding="utf-8")


def _cell(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def format_report_table(reports: Sequence[EvalReport], title: str = "Accuracy (%)") -> Table:
    """KU / KD / KA / Avg rows, one column per report"""
    table = Table(title=title)
    table.add_column("Ability")
    for report in reports:
        table.add_column(report.label or report.config.get("endpoint", ""), justify="right")
    for category in CATEGORIES:
        table.add_row(category, *[_cell(r.scores[category]) for r in reports])
    table.add_row(AVERAGE, *[_cell(r.average) for r in reports], end_section=True)
    for verdict in (REFUSE, MULTI, WRONG):
        table.add_row(f"{verdict} (% of errors)", *[_cell(r.errors[verdict]) for r in reports])
    return table


def render_text(renderable, width: int = 100) -> str:
    console = Console(file=io.StringIO(), width=width, color_system=None, force_terminal=False)
    console.print(renderable)
    return console.file.getvalue()
