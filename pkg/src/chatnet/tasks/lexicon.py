"""Small word lists used by the offline sentiment rewriter and judge."""

from __future__ import annotations

import re
from typing import Optional

# weakest to strongest; rank = position + 1
INTENSIFIERS = [
    "quite",
    "very",
    "really",
    "incredibly",
    "extremely",
    "excruciatingly",
    "soul-crushingly and utterly",
]

ANTONYMS = {
    "interesting": "dull",
    "satisfying": "unfulfilling",
    "delicious": "disgusting",
    "beautiful": "ugly",
    "friendly": "hostile",
    "comfortable": "uncomfortable",
    "exciting": "boring",
    "helpful": "useless",
    "pleasant": "unpleasant",
    "bright": "gloomy",
    "clean": "filthy",
    "fast": "slow",
    "generous": "stingy",
    "calm": "chaotic",
    "fresh": "stale",
    "warm": "cold",
    "reliable": "unreliable",
    "inspiring": "depressing",
    "cheerful": "miserable",
    "elegant": "clumsy",
    "affordable": "overpriced",
    "quiet": "noisy",
    "charming": "repulsive",
    "rewarding": "frustrating",
    "spacious": "cramped",
    "efficient": "wasteful",
    "wonderful": "terrible",
    "fun": "tedious",
    "hopeful": "hopeless",
    "polite": "rude",
}
ANTONYMS.update({v: k for k, v in list(ANTONYMS.items())})

_WORD_RE = re.compile(r"[A-Za-z-]+")


def intensity(sentence: str) -> int:
    """Rank of the strongest intensifier in ``sentence`` (0 when none)."""
    low = sentence.lower()
    best = 0
    for rank, word in enumerate(INTENSIFIERS, start=1):
        if re.search(rf"\b{re.escape(word)}\b", low):
            best = rank
    return best


def strip_intensifiers(sentence: str) -> str:
    out = sentence
    for word in sorted(INTENSIFIERS, key=len, reverse=True):
        out = re.sub(rf"\b{re.escape(word)}\s+", "", out, flags=re.IGNORECASE)
    return out


def reverse(sentence: str, level: int = 0) -> Optional[str]:
    """Swap the last sentiment word for its antonym, prefixed by an intensifier of ``level``."""
    base = strip_intensifiers(sentence.strip())
    words = list(_WORD_RE.finditer(base))
    for m in reversed(words):
        opposite = ANTONYMS.get(m.group(0).lower())
        if opposite is None:
            continue
        level = max(0, min(level, len(INTENSIFIERS)))
        repl = f"{INTENSIFIERS[level - 1]} {opposite}" if level else opposite
        return base[: m.start()] + repl + base[m.end():]
    return None


def with_level(sentence: str, level: int) -> str:
    """Re-intensify an already reversed sentence at ``level``."""
    base = strip_intensifiers(sentence.strip())
    words = list(_WORD_RE.finditer(base))
    for m in reversed(words):
        if m.group(0).lower() in ANTONYMS:
            level = max(0, min(level, len(INTENSIFIERS)))
            if not level:
                return base
            return base[: m.start()] + f"{INTENSIFIERS[level - 1]} " + base[m.start():]
    return base
