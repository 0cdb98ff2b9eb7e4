"""Symbolic coding of periodic rays by cyclic words over {1..r}.

A word ``(i_1, ..., i_n)`` is admissible when consecutive symbols differ
cyclically.  Oriented rays correspond to words up to rotation; a word whose
reversal is one of its own rotations codes a ray that is its own reverse.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .errors import AdmissibilityError, AlphabetError


class Orientation(str, enum.Enum):
    SELF_REVERSIBLE = "SelfReversible"
    CHIRAL = "Chiral"


def parse_word(text: str) -> tuple:
    """``"1,2,3"`` -> ``(1, 2, 3)``."""
    try:
        return tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok)
    except ValueError:
        raise AlphabetError(f"cannot parse word {text!r}") from None


def format_word(word: Sequence[int]) -> str:
    return ",".join(str(i) for i in word)


def is_admissible(word: Sequence[int], r: Optional[int] = None) -> bool:
    word = tuple(word)
    if r is not None and any(not 1 <= i <= r for i in word):
        raise AlphabetError(f"symbols of {word} must lie in 1..{r}")
    if len(word) < 2:
        return False
    return all(word[k] != word[(k + 1) % len(word)] for k in range(len(word)))


def rotations(word):
    return [word[k:] + word[:k] for k in range(len(word))]


def least_rotation(word: tuple) -> tuple:
    return min(rotations(tuple(word)))


def primitive_root(word: tuple) -> tuple:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word  # unreachable


@dataclass(frozen=True)
class CyclicClass:
    """Rotation class of an admissible word."""

    word: tuple  # canonical (least) rotation
    root: tuple  # canonical primitive root
    mu: int
    orientation: Orientation

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def primitive(self) -> bool:
        return self.mu == 1

    def reversed(self) -> "CyclicClass":
        return canonicalize(tuple(reversed(self.word)))

    def iterate(self, mu: int) -> "CyclicClass":
        return canonicalize(self.root * (self.mu * mu))

    def __str__(self):
        return format_word(self.word)


def canonicalize(word: Sequence[int], r: Optional[int] = None) -> CyclicClass:
    word = tuple(int(i) for i in word)
    if not is_admissible(word, r):
        raise AdmissibilityError(f"word {word} is not admissible")
    canon = least_rotation(word)
    root = primitive_root(canon)
    # the least rotation of w^k starts with the least rotation of w
    mu = len(canon) // len(root)
    rev = least_rotation(tuple(reversed(canon)))
    orientation = Orientation.SELF_REVERSIBLE if rev == canon else Orientation.CHIRAL
    return CyclicClass(canon, root, mu, orientation)


def enumerate_words(r: int, n_max: int, n_min: int = 2) -> Iterator[CyclicClass]:
    """Primitive canonical classes of length ``n_min..n_max``, each once.

    Ordered by length, then lexicographically.  Generated as Lyndon words
    (Duval's algorithm) filtered by cyclic admissibility: a primitive class
    has exactly one Lyndon representative, which is its least rotation.
    """
    if r < 3:
        raise ValueError("r >= 3 required")
    for n in range(max(2, n_min), n_max + 1):
        for w in _lyndon_words(r, n):
            if is_admissible(w):
                yield canonicalize(w)


def _lyndon_words(r: int, n: int) -> Iterator[tuple]:
    """Lyndon words of exact length ``n`` over ``1..r`` in lexicographic order."""
    w = [0]
    while w:
        if len(w) == n:
            yield tuple(i + 1 for i in w)
        # extend periodically to length n, then increment
        m = len(w)
        while len(w) < n:
            w.append(w[len(w) - m])
        while w and w[-1] == r - 1:
            w.pop()
        if w:
            w[-1] += 1


def count_sequences(r: int, n: int) -> int:
    """Number of admissible (cyclically proper) sequences of length n:
    closed walks of length n on the complete graph K_r."""
    return (r - 1) ** n + (r - 1) * (-1) ** n


def brute_force_sequences(r: int, n: int) -> Iterator[tuple]:
    for w in itertools.product(range(1, r + 1), repeat=n):
        if is_admissible(w):
            yield w
