"""
Answer Matching
Extracts the final-answer span from a model completion and judges it against
the gold answers: correct, wrong, refuse or multi.
"""

import re
from typing import Iterable, List, Optional, Sequence, Tuple

CORRECT = "correct"
WRONG = "wrong"
REFUSE = "refuse"
MULTI = "multi"
VERDICTS = (CORRECT, WRONG, REFUSE, MULTI)

DEFAULT_REFUSALS = ("I don't know", "I am sorry")

CHOICE_LABELS = ("A", "B", "C", "D")

_MARKER = re.compile(r"(?:final\s+answer|answer)\s*:", re.IGNORECASE)
_TOKEN = re.compile(r"(?P<number>(?:(?<!\w)[-\u2212])?(?:\d+(?:\.\d*)?|\.\d+))|(?P<word>[^\W\d_]+)")
_LABEL = re.compile(r"(?<![A-Za-z0-9])([A-D])(?![A-Za-z0-9])")
_ARTICLES = frozenset({"a", "an", "the"})


def extract_span(raw: str) -> Tuple[str, bool]:
    """Text after the last answer marker up to the first blank line; (span, marker found)"""
    markers = list(_MARKER.finditer(raw))
    if not markers:
        return raw.strip(), False
    span = raw[markers[-1].end():].strip()
    span = re.split(r"\n\s*\n", span, maxsplit=1)[0]
    return span.strip().strip("[]\"'").strip(), True


def _tokens(text: str, drop_articles: bool = True) -> List[str]:
    tokens = []
    text = re.sub(r"(?<=\d),(?=\d{3}\b)", "", str(text))
    for match in _TOKEN.finditer(text.casefold()):
        if match.group("number"):
            value = float(match.group("number").replace("\u2212", "-")) + 0.0
            token = f"{value:.10g}"
        else:
            token = match.group("word")
            if drop_articles and token in _ARTICLES:
                continue
        tokens.append(token)
    return tokens


def normalize(text: str) -> str:
    """Case-folded tokens without punctuation or articles; 500.0cm -> '500 cm', .5 -> '0.5'"""
    return " ".join(_tokens(text))


def _contains(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    return any(list(haystack[i:i + len(needle)]) == list(needle)
               for i in range(len(haystack) - len(needle) + 1))


def is_refusal(raw: str, refusals: Iterable[str] = DEFAULT_REFUSALS) -> bool:
    tokens = _tokens(raw, drop_articles=False)
    return any(_contains(tokens, _tokens(phrase, drop_articles=False)) for phrase in refusals)


def _text_match(span: str, gold_answers: Sequence[str]) -> Optional[str]:
    span_tokens = _tokens(span)
    for gold in gold_answers:
        gold_tokens = _tokens(gold)
        if not gold_tokens:
            continue
        if span_tokens == gold_tokens or _contains(span_tokens, gold_tokens):
            return gold
    return None


def _boolean_match(span: str, gold_answers: Sequence[str]) -> Optional[str]:
    polarity = next((t for t in _tokens(span) if t in ("yes", "no")), None)
    if polarity is None:
        return None
    return next((g for g in gold_answers if normalize(g) == polarity), None)


def _choice_match(span: str, gold_answers: Sequence[str], choices: Sequence[str]
                  ) -> Tuple[Optional[str], bool]:
    """(matched gold or None, several options given)"""
    labels = sorted(set(_LABEL.findall(span)) & set(CHOICE_LABELS[:len(choices)]))
    if labels:
        picked = [choices[CHOICE_LABELS.index(label)] for label in labels]
    else:
        span_tokens = _tokens(span)
        picked = [c for c in choices if _tokens(c) and _contains(span_tokens, _tokens(c))]
    if len(picked) > 1:
        return None, True
    if not picked:
        return None, False
    gold = {normalize(g) for g in gold_answers}
    return (picked[0] if normalize(picked[0]) in gold else None), False


def judge(raw: str, gold_answers: Sequence[str], form: str,
          choices: Optional[Sequence[str]] = None,
          refusals: Iterable[str] = DEFAULT_REFUSALS) -> Tuple[str, Optional[str]]:
    """(verdict, matched answer or None)"""
    span, _ = extract_span(raw or "")
    matched = None
    if form == "multiple_choice" and choices:
        matched, several = _choice_match(span, gold_answers, choices)
        if several:
            return MULTI, None
    elif form == "boolean":
        matched = _boolean_match(span, gold_answers)
    else:
        matched = _text_match(span, gold_answers)

    if matched is not None:
        return CORRECT, matched
    if is_refusal(raw or "", refusals):
        return REFUSE, None
    return WRONG, None


def match_answer(raw: str, gold_answers: Sequence[str], form: str,
                 choices: Optional[Sequence[str]] = None,
                 refusals: Iterable[str] = DEFAULT_REFUSALS) -> str:
    return judge(raw, gold_answers, form, choices, refusals)[0]
