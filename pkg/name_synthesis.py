"""
Name Synthesis
Fuses subwords of related entity names into a new entity name, plus the
name variants (one-character substitution, random letters) used by the
name study.
"""

import logging
import re
import string
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

Segmenter = Callable[[str], List[str]]

VOWELS = frozenset("aeiouyáàâäéèêëíìîïóòôöúùûü")


def _is_vowel(char: str) -> bool:
    return char.lower() in VOWELS


def _split_word(word: str) -> List[str]:
    pieces = []
    start = 0
    for i in range(1, len(word)):
        current = word[start:i]
        prev_char, char = word[i - 1], word[i]
        next_char = word[i + 1] if i + 1 < len(word) else ""
        # V|CV
        if _is_vowel(prev_char) and not _is_vowel(char) and next_char and _is_vowel(next_char):
            boundary = True
        # VC|C, only when a vowel is still ahead
        elif (not _is_vowel(prev_char) and not _is_vowel(char)
              and any(_is_vowel(c) for c in current)
              and any(_is_vowel(c) for c in word[i:])):
            boundary = True
        else:
            boundary = False
        if boundary:
            pieces.append(current)
            start = i
    pieces.append(word[start:])
    return pieces


def vowel_segmenter(text: str) -> List[str]:
    """
    Greedy syllable-like split at vowel boundaries.
    Leading whitespace of a word stays on its first piece, so the pieces
    concatenate back to the input: "Alpaca" -> ["Al", "pa", "ca"].
    """
    pieces: List[str] = []
    for token in re.findall(r"\s*\S+", text):
        lead = len(token) - len(token.lstrip())
        parts = _split_word(token[lead:])
        parts[0] = token[:lead] + parts[0]
        pieces.extend(parts)
    tail = text[len("".join(pieces)):]
    if tail:
        if pieces:
            pieces[-1] += tail
        else:
            pieces = [tail]
    return pieces


def _normalize(name: str) -> str:
    name = " ".join(name.split())
    if not name:
        return name
    return name[0].upper() + name[1:].lower()


def _fuse(names: Sequence[str], segmenter: Segmenter, rng: np.random.Generator,
          carry_tail: bool) -> str:
    pool = [int(i) for i in rng.permutation(len(names))]
    target = 1 if len(names) < 2 else min(len(names), int(rng.integers(2, 4)))
    pieces: List[str] = []
    while pool and len(pieces) < target:
        segments = [s.strip() for s in segmenter(names[pool.pop(0)]) if s.strip()]
        position = len(pieces)
        if len(segments) <= position:
            continue
        if carry_tail and len(pieces) == target - 1:
            pieces.append("".join(segments[position:]))
        else:
            pieces.append(segments[position])
    fused = _normalize("".join(pieces))
    if not fused:
        fused = _normalize(next((s for s in segmenter(names[0]) if s.strip()), names[0]))
    return fused


def synthesize_name(related_names: Sequence[str], segmenter: Optional[Segmenter],
                    rng: np.random.Generator, existing_names: Iterable[str] = (),
                    max_attempts: int = 10, carry_tail: bool = False) -> str:
    """
    Build a new name from related names (parent first, then parent siblings)

    The i-th selected name contributes its i-th subword; names too short for
    their slot are skipped. A name colliding with an existing one is redrawn
    up to max_attempts times, then disambiguated with a numeric suffix.
    """
    related = [n for n in related_names if n and n.strip()]
    if not related:
        raise ValueError(f"At least one non-blank related name is required, given: {list(related_names)}")
    segmenter = segmenter or vowel_segmenter
    taken = {n.casefold() for n in existing_names}

    name = ""
    for _ in range(max_attempts):
        name = _fuse(related, segmenter, rng, carry_tail)
        if name.casefold() not in taken:
            return name
    suffix = 2
    while f"{name} {suffix}".casefold() in taken:
        suffix += 1
    logger.debug("Name %s collided %d times, using suffix %d", name, max_attempts, suffix)
    return f"{name} {suffix}"


def similar_name(name: str, rng: np.random.Generator) -> str:
    """Substitute exactly one letter of the name"""
    positions = [i for i, c in enumerate(name) if c.isalpha()]
    if not positions:
        raise ValueError(f"Name has no letters to substitute: {name!r}")
    i = positions[int(rng.integers(len(positions)))]
    original = name[i]
    choices = [c for c in string.ascii_lowercase if c != original.lower()]
    replacement = choices[int(rng.integers(len(choices)))]
    if original.isupper():
        replacement = replacement.upper()
    return name[:i] + replacement + name[i + 1:]


def random_name(name: str, rng: np.random.Generator) -> str:
    """Random letters with the length (and word breaks) of the given name"""
    letters = []
    for c in name:
        if c.isspace():
            letters.append(c)
        else:
            letters.append(string.ascii_lowercase[int(rng.integers(26))])
    result = "".join(letters)
    return result[:1].upper() + result[1:]
