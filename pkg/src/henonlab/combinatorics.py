"""Words over {0, ..., p-1}, the adding machine, and cylinder addresses.

Letters are stored least-significant first: the carry of ``successor`` runs
from ``letters[0]`` towards the end of the word.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator


@dataclass(frozen=True)
class Alphabet:
    p: int = 2

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {self.p!r}")

    @property
    def letters(self) -> range:
        return range(self.p)


@dataclass(frozen=True)
class Word:
    letters: tuple[int, ...]
    alphabet: Alphabet = Alphabet(2)

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(a) for a in self.letters))
        bad = [a for a in self.letters if not 0 <= a < self.alphabet.p]
        if bad:
            raise ValueError(f"letters {bad} outside alphabet of size {self.alphabet.p}")

    @classmethod
    def of(cls, *letters: int, p: int = 2) -> "Word":
        return cls(tuple(letters), Alphabet(p))

    @classmethod
    def zeros(cls, n: int, p: int = 2) -> "Word":
        return cls((0,) * n, Alphabet(p))

    @property
    def p(self) -> int:
        return self.alphabet.p

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, i):
        return self.letters[i]

    def __add__(self, other: "Word") -> "Word":
        if other.p != self.p:
            raise ValueError("cannot concatenate words over different alphabets")
        return Word(self.letters + other.letters, self.alphabet)

    def append(self, letter: int) -> "Word":
        return Word(self.letters + (letter,), self.alphabet)

    def prefix(self, n: int) -> "Word":
        return Word(self.letters[:n], self.alphabet)

    def __str__(self) -> str:
        return ".".join(str(a) for a in self.letters)

    @classmethod
    def parse(cls, text: str, p: int = 2) -> "Word":
        text = text.strip()
        if not text:
            return cls((), Alphabet(p))
        return cls(tuple(int(t) for t in text.split(".")), Alphabet(p))


def successor(w: Word, wrap: bool = False) -> Word:
    """Adding-machine successor ``1 + w``.

    A word made only of the top letter carries out of its last position and
    becomes ``0^L 1`` (length L + 1).  With ``wrap=True`` the carry is dropped
    instead, giving the odometer on words of fixed length.
    """
    top = w.p - 1
    letters = list(w.letters)
    for k, a in enumerate(letters):
        if a != top:
            letters[k] = a + 1
            return Word(tuple(letters), w.alphabet)
        letters[k] = 0
    if wrap:
        return Word(tuple(letters), w.alphabet)
    return Word(tuple(letters) + (1,), w.alphabet)


def word_index(w: Word) -> int:
    """Radix-p value with letters[0] least significant."""
    value = 0
    for a in reversed(w.letters):
        value = value * w.p + a
    return value


def word_from_index(index: int, length: int, p: int = 2) -> Word:
    letters = []
    for _ in range(length):
        index, a = divmod(index, p)
        letters.append(a)
    if index:
        raise ValueError("index does not fit in the requested length")
    return Word(tuple(letters), Alphabet(p))


def orbit(w0: Word, k: int, wrap: bool = False) -> list[Word]:
    """[w0, 1 + w0, ..., k + w0]."""
    if k < 0:
        raise ValueError("k must be non-negative")
    out = [w0]
    for _ in range(k):
        out.append(successor(out[-1], wrap=wrap))
    return out


def all_words(length: int, p: int = 2) -> Iterator[Word]:
    """Words of a fixed length in increasing index order."""
    for i in range(p ** length):
        yield word_from_index(i, length, p)


def sibling(w: Word, letter: int) -> Word:
    """w with its last letter replaced."""
    return Word(w.letters[:-1] + (letter,), w.alphabet)


def words_upto(depth: int, p: int = 2) -> Iterator[Word]:
    for n in range(1, depth + 1):
        for letters in product(range(p), repeat=n):
            yield Word(letters, Alphabet(p))
