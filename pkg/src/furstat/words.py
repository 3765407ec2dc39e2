"""Reduced words in a free group of finite rank, the canonical enumeration of
group elements, and finitely supported step distributions.

Letters are nonzero integers: ``+i`` is the i-th generator (1-based) and
``-i`` its inverse. Words print as ``"a b^-1 a"`` with ``"e"`` for the
identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import MalformedInputError

# "e" is reserved for the identity, so generator names skip it.
GENERATOR_NAMES = "abcdfghijklmnopqrstuvwxyz"
MAX_RANK = len(GENERATOR_NAMES)


def letter_name(x: int) -> str:
    name = GENERATOR_NAMES[abs(x) - 1]
    return name if x > 0 else name + "^-1"


def letter_key(x: int) -> tuple[int, int]:
    """Sort key giving the order +1 < -1 < +2 < -2 < ..."""
    return (abs(x), 0 if x > 0 else 1)


def alphabet(rank: int) -> list[int]:
    """All 2*rank letters in canonical order."""
    out = []
    for i in range(1, rank + 1):
        out.extend((i, -i))
    return out


def _check_rank(rank: int) -> None:
    if not isinstance(rank, int) or not 1 <= rank <= MAX_RANK:
        raise MalformedInputError(f"rank must be an integer in [1, {MAX_RANK}], got {rank!r}")


def _free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    stack: list[int] = []
    for x in letters:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


@dataclass(frozen=True, order=False)
class GroupWord:
    """A reduced word over a free generating set of size ``rank``.

    Construct through :func:`reduce` (or :meth:`parse`); the raw constructor
    trusts that ``letters`` is already reduced.
    """

    letters: tuple[int, ...]
    rank: int

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return multiply(self, other)

    def __invert__(self) -> "GroupWord":
        return inverse(self)

    def __str__(self) -> str:
        if not self.letters:
            return "e"
        return " ".join(letter_name(x) for x in self.letters)

    def __repr__(self) -> str:
        return f"GroupWord({str(self)!r}, rank={self.rank})"

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def sort_key(self) -> tuple:
        return (len(self.letters), tuple(letter_key(x) for x in self.letters))

    @classmethod
    def identity(cls, rank: int) -> "GroupWord":
        _check_rank(rank)
        return cls((), rank)

    @classmethod
    def generator(cls, index: int, rank: int, sign: int = 1) -> "GroupWord":
        return reduce([index if sign > 0 else -index], rank)

    @classmethod
    def parse(cls, text: str, rank: int) -> "GroupWord":
        """Parse ``"a b^-1 a"``; ``"e"`` or an empty string is the identity.

        Tokens may also be glued (``"ab^-1"``) since every generator name is a
        single character.
        """
        _check_rank(rank)
        s = text.replace(" ", "")
        if s in ("", "e", "1"):
            return cls((), rank)
        letters = []
        pos = 0
        while pos < len(s):
            ch = s[pos]
            idx = GENERATOR_NAMES.find(ch) + 1
            if idx == 0:
                raise MalformedInputError(f"bad generator {ch!r} in word {text!r}")
            pos += 1
            sign = 1
            if s.startswith("^-1", pos):
                sign = -1
                pos += 3
            elif s.startswith("^1", pos):
                pos += 2
            letters.append(sign * idx)
        return reduce(letters, rank)


def reduce(letters: Sequence[int], rank: int) -> GroupWord:
    """Return the reduced word equal to ``letters`` in the free group of ``rank``."""
    _check_rank(rank)
    for x in letters:
        if not isinstance(x, int) or x == 0 or abs(x) > rank:
            raise MalformedInputError(f"letter {x!r} out of range for rank {rank}")
    return GroupWord(_free_reduce(letters), rank)


def multiply(u: GroupWord, v: GroupWord) -> GroupWord:
    if u.rank != v.rank:
        raise MalformedInputError(f"rank mismatch: {u.rank} vs {v.rank}")
    return GroupWord(_free_reduce(u.letters + v.letters), u.rank)


def inverse(u: GroupWord) -> GroupWord:
    return GroupWord(tuple(-x for x in reversed(u.letters)), u.rank)


def iter_words(rank: int) -> Iterator[GroupWord]:
    """All reduced words in length-lexicographic order, identity first."""
    _check_rank(rank)
    letters = sorted(alphabet(rank), key=letter_key)
    layer: list[tuple[int, ...]] = [()]
    while True:
        for w in layer:
            yield GroupWord(w, rank)
        layer = [w + (x,) for w in layer for x in letters if not (w and w[-1] == -x)]


def enumerate_words(rank: int, count: int) -> list[GroupWord]:
    """The first ``count`` group elements of the fixed enumeration g_1, g_2, ..."""
    if count < 1:
        raise MalformedInputError("count must be positive")
    out = []
    for w in iter_words(rank):
        out.append(w)
        if len(out) == count:
            return out
    raise AssertionError("unreachable")


def words_up_to_length(rank: int, length: int) -> list[GroupWord]:
    out = []
    for w in iter_words(rank):
        if len(w) > length:
            return out
        out.append(w)
    raise AssertionError("unreachable")


PROB_TOL = 1e-12


@dataclass(frozen=True)
class StepDistribution:
    """Finitely supported probability measure on the free group."""

    entries: tuple[tuple[GroupWord, float], ...]
    rank: int

    def __post_init__(self):
        _check_rank(self.rank)
        seen = set()
        total = 0.0
        for w, p in self.entries:
            if w.rank != self.rank:
                raise MalformedInputError(f"word {w} has rank {w.rank}, expected {self.rank}")
            if not (0.0 < p <= 1.0) or not math.isfinite(p):
                raise MalformedInputError(f"probability of {w} must lie in (0, 1], got {p!r}")
            if w in seen:
                raise MalformedInputError(f"duplicate word {w} in step distribution")
            seen.add(w)
            total += p
        if not self.entries or abs(total - 1.0) > PROB_TOL:
            raise MalformedInputError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[GroupWord | str | Sequence[int], float]], rank: int):
        entries = []
        for w, p in pairs:
            if isinstance(w, str):
                w = GroupWord.parse(w, rank)
            elif not isinstance(w, GroupWord):
                w = reduce(list(w), rank)
            entries.append((w, float(p)))
        return cls(tuple(entries), rank)

    @classmethod
    def uniform(cls, rank: int) -> "StepDistribution":
        """Simple random walk: mass 1/(2r) on each generator and inverse."""
        _check_rank(rank)
        p = 1.0 / (2 * rank)
        return cls(tuple((GroupWord((x,), rank), p) for x in alphabet(rank)), rank)

    @classmethod
    def nearest_neighbor(cls, probs: dict[int, float], rank: int) -> "StepDistribution":
        """From a mapping letter -> probability (zero entries dropped)."""
        letters = sorted(probs, key=letter_key)
        return cls.from_pairs([((x,), probs[x]) for x in letters if probs[x] > 0], rank)

    @property
    def support(self) -> list[GroupWord]:
        return [w for w, _ in self.entries]

    def prob(self, w: GroupWord) -> float:
        for v, p in self.entries:
            if v == w:
                return p
        return 0.0

    def as_dict(self) -> dict[GroupWord, float]:
        return dict(self.entries)

    @property
    def is_nearest_neighbor(self) -> bool:
        return all(len(w) == 1 for w, _ in self.entries)

    def __str__(self) -> str:
        return ", ".join(f"{w}:{p:.17g}" for w, p in self.entries)
