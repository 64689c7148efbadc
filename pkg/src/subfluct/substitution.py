"""Substitutions on a finite alphabet and the word algebra around them.

Letters are stored as small integer indices into ``Substitution.letters``;
words are tuples (or integer numpy arrays) of such indices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Substitution",
    "SubstitutionSyntaxError",
    "SubstitutionError",
    "parse_substitution",
    "parse_substitution_file",
    "abelianization",
    "theta_matrix",
    "is_primitive",
    "find_seed",
    "fixed_point_prefix",
    "iter_fixed_point",
    "birkhoff_partial_sums",
    "iter_birkhoff_sums",
    "birkhoff_sum",
]

_LETTER_RE = re.compile(r"[a-zA-Z0-9]")


class SubstitutionError(ValueError):
    """Raised for substitutions that are well-formed but unusable."""


class SubstitutionSyntaxError(ValueError):
    """Parse failure, carrying the 0-based character offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Substitution:
    """A substitution rule set.

    Attributes
    ----------
    letters : tuple of str
        Display characters; the index of a letter is its id.
    rules : tuple of tuple of int
        ``rules[b]`` is the word θ(b) as letter indices.
    """

    letters: tuple[str, ...]
    rules: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.letters)
        if n == 0:
            raise SubstitutionError("empty alphabet")
        if len(set(self.letters)) != n:
            raise SubstitutionError("letter display characters must be distinct")
        if len(self.rules) != n:
            raise SubstitutionError("every letter needs exactly one rule")
        for b, word in enumerate(self.rules):
            if len(word) == 0:
                raise SubstitutionError(f"empty rule for letter {self.letters[b]!r}")
            if any(not 0 <= c < n for c in word):
                raise SubstitutionError(f"rule for {self.letters[b]!r} uses an unknown letter")

    @classmethod
    def from_mapping(cls, rules: Mapping[str, str]) -> "Substitution":
        """Build from ``{"a": "aab", ...}``; letter order follows first appearance."""
        text = ";".join(f"{k}={v}" for k, v in rules.items())
        return parse_substitution(text)

    @property
    def size(self) -> int:
        return len(self.letters)

    @cached_property
    def lengths(self) -> np.ndarray:
        """Rule lengths ``|θ(b)|`` as an int64 array."""
        return np.array([len(w) for w in self.rules], dtype=np.int64)

    def index(self, letter: str | int) -> int:
        if isinstance(letter, (int, np.integer)):
            if not 0 <= letter < self.size:
                raise KeyError(letter)
            return int(letter)
        return self.letters.index(letter)

    def word(self, text: str) -> tuple[int, ...]:
        """Convert a display string into a word of indices."""
        try:
            return tuple(self.letters.index(ch) for ch in text)
        except ValueError as exc:
            raise SubstitutionError(f"word {text!r} has letters outside the alphabet") from exc

    def show(self, word: Iterable[int]) -> str:
        return "".join(self.letters[int(c)] for c in word)

    def apply(self, word: Iterable[int]) -> tuple[int, ...]:
        """One application of θ to a word."""
        out: list[int] = []
        for c in word:
            out.extend(self.rules[c])
        return tuple(out)

    def power(self, word: Iterable[int], k: int) -> tuple[int, ...]:
        w = tuple(word)
        for _ in range(k):
            w = self.apply(w)
        return w

    def power_lengths(self, depth: int) -> list[list[int]]:
        """``table[i][b] = |θ^i(b)|`` for ``0 <= i <= depth`` as exact ints."""
        table = [[1] * self.size]
        for _ in range(depth):
            prev = table[-1]
            table.append([sum(prev[c] for c in w) for w in self.rules])
        return table

    def to_text(self) -> str:
        return ";".join(f"{a}={self.show(w)}" for a, w in zip(self.letters, self.rules))

    def __str__(self) -> str:
        return self.to_text()


def _tokenize_rules(text: str) -> Iterator[tuple[str, int]]:
    """Yield ``(rule_text, offset)`` chunks split on ``;`` or newlines."""
    start = 0
    for m in re.finditer(r"[;\n]", text):
        yield text[start:m.start()], start
        start = m.end()
    yield text[start:], start


def parse_substitution(text: str) -> Substitution:
    """Parse ``"a=aab;b=bba"`` (rules may also be newline separated).

    Whitespace around tokens is ignored. Blank rules (e.g. a trailing ``;``)
    are skipped. The alphabet is ordered by first appearance anywhere in the
    text, heads and bodies alike.

    Raises
    ------
    SubstitutionSyntaxError
        With the character offset of the offending token.
    """
    heads: list[tuple[str, int]] = []
    bodies: list[tuple[str, list[int]]] = []
    order: list[str] = []

    def note(ch: str):
        if ch not in order:
            order.append(ch)

    for chunk, offset in _tokenize_rules(text):
        if not chunk.strip():
            continue
        if chunk.count("=") != 1:
            if "=" in chunk:
                pos = offset + chunk.index("=", chunk.index("=") + 1)
            else:
                pos = offset + len(chunk) - len(chunk.lstrip())
            raise SubstitutionSyntaxError("each rule must have the form letter=word", pos)
        lhs, rhs = chunk.split("=")
        lhs_stripped = lhs.strip()
        lhs_pos = offset + len(lhs) - len(lhs.lstrip())
        if len(lhs_stripped) != 1 or not _LETTER_RE.fullmatch(lhs_stripped):
            raise SubstitutionSyntaxError(f"rule head must be a single letter, got {lhs_stripped!r}", lhs_pos)
        rhs_start = offset + len(lhs) + 1
        body = []
        for i, ch in enumerate(rhs):
            if ch.isspace():
                continue
            if not _LETTER_RE.fullmatch(ch):
                raise SubstitutionSyntaxError(f"invalid letter {ch!r}", rhs_start + i)
            body.append((ch, rhs_start + i))
        if not body:
            raise SubstitutionSyntaxError(f"empty rule word for {lhs_stripped!r}", rhs_start)
        if any(h == lhs_stripped for h, _ in heads):
            raise SubstitutionSyntaxError(f"duplicate rule for {lhs_stripped!r}", lhs_pos)
        note(lhs_stripped)
        for ch, _ in body:
            note(ch)
        heads.append((lhs_stripped, lhs_pos))
        # positions are kept for the unknown-letter check below
        bodies.append(("".join(ch for ch, _ in body), [p for _, p in body]))

    if not heads:
        raise SubstitutionSyntaxError("no rules given", 0)
    defined = {h for h, _ in heads}
    for body, positions in bodies:
        for ch, pos in zip(body, positions):
            if ch not in defined:
                raise SubstitutionSyntaxError(f"letter {ch!r} has no rule", pos)

    letters = tuple(order)
    rule_of = {h: body for (h, _), (body, _) in zip(heads, bodies)}
    rules = tuple(tuple(letters.index(ch) for ch in rule_of[a]) for a in letters)
    return Substitution(letters, rules)


def parse_substitution_file(path: str | Path) -> Substitution:
    """Read one rule per line (``#`` starts a comment)."""
    lines = []
    for line in Path(path).read_text().splitlines():
        lines.append(line.split("#", 1)[0])
    return parse_substitution("\n".join(lines))


def abelianization(word: Iterable[int], size: int) -> tuple[int, ...]:
    """Letter counts of ``word`` over an alphabet of ``size`` letters."""
    counts = [0] * size
    for c in word:
        counts[c] += 1
    return tuple(counts)


def theta_matrix(s: Substitution) -> np.ndarray:
    """``M[a, b]`` = number of occurrences of ``a`` in ``θ(b)`` (int64 array)."""
    M = np.zeros((s.size, s.size), dtype=np.int64)
    for b, word in enumerate(s.rules):
        for a in word:
            M[a, b] += 1
    return M


def is_primitive(M: np.ndarray) -> tuple[bool, int | None]:
    """Primitivity test on the positivity pattern of ``M``.

    Returns ``(True, k)`` with the least ``k`` such that ``M**k > 0``
    entrywise, or ``(False, None)``. The search stops at the Wielandt bound
    ``(n-1)**2 + 1``, which is below ``(n-1)*n + 1``.
    """
    P = np.asarray(M) > 0
    n = P.shape[0]
    bound = (n - 1) * n + 1
    Q = P.copy()
    for k in range(1, bound + 1):
        if Q.all():
            return True, k
        Q = (Q.astype(np.int64) @ P.astype(np.int64)) > 0
    return False, None


def find_seed(s: Substitution, max_k: int | None = None) -> tuple[int, int]:
    """Least ``k`` (then first letter ``a``) with θ^k(a) starting with ``a``.

    The image must also have length greater than one so the iteration
    grows into a one-sided fixed point. The first-letter map is a function
    on ``n`` letters, so every letter reaches a cycle within ``n`` steps and
    ``max_k = 2n`` is plenty.
    """
    n = s.size
    if max_k is None:
        max_k = 2 * n
    first = [w[0] for w in s.rules]
    head = list(range(n))
    table = s.power_lengths(max_k)
    for k in range(1, max_k + 1):
        head = [first[h] for h in head]
        for a in range(n):
            if head[a] == a and table[k][a] > 1:
                return a, k
    raise SubstitutionError("substitution has no growing seed letter")


def expand_prefix(s: Substitution, word: Sequence[int], level: int, N: int) -> np.ndarray:
    """First ``N`` letters of ``θ^level(word)`` (fewer if the image is shorter)."""
    lengths = s.lengths
    flat = np.concatenate([np.asarray(w, dtype=np.int64) for w in s.rules])
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    w = np.asarray(word, dtype=np.int64)[:N]
    for _ in range(level):
        w = w[:N]
        ln = lengths[w]
        offs = np.repeat(starts[w] - np.concatenate([[0], np.cumsum(ln)[:-1]]), ln)
        w = flat[offs + np.arange(int(ln.sum()))]
    return w[:N]


def fixed_point_prefix(s: Substitution, a: int, k: int, N: int) -> np.ndarray:
    """First ``N`` letters of the fixed point ``lim θ^{km}(a)``.

    The expansion is done level by level with numpy, truncating to ``N``
    letters after each application of θ so nothing longer than the request
    (times the longest rule) is ever materialized.
    """
    if N < 1:
        return np.zeros(0, dtype=np.int64)
    lengths = s.lengths
    max_len = int(lengths.max())
    flat = np.concatenate([np.asarray(w, dtype=np.int64) for w in s.rules])
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    w = np.array([a], dtype=np.int64)
    while True:
        for _ in range(k):
            # rules are nonempty, so N letters of the image need at most N of w
            w = w[:N]
            ln = lengths[w]
            offs = np.repeat(starts[w] - np.concatenate([[0], np.cumsum(ln)[:-1]]), ln)
            w = flat[offs + np.arange(int(ln.sum()))]
        if len(w) >= N:
            return w[:N]
        if max_len == 1:
            raise SubstitutionError("fixed point does not grow")


def _expand(s: Substitution, letter: int, level: int) -> Iterator[int]:
    if level == 0:
        yield letter
        return
    for c in s.rules[letter]:
        yield from _expand(s, c, level - 1)


def iter_fixed_point(s: Substitution, a: int, k: int) -> Iterator[int]:
    """Lazy stream of the fixed point letters.

    Uses ``θ^{k(D+1)}(a) = θ^{kD}(a) θ^{kD}(w)`` where ``θ^k(a) = a w``, so
    each new block is generated depth-first with memory proportional to the
    current depth.
    """
    image = s.power((a,), k)
    if image[0] != a or len(image) < 2:
        raise SubstitutionError("seed must start its own image and grow")
    yield a
    level = 0
    while True:
        for c in image[1:]:
            yield from _expand(s, c, level)
        level += k


def birkhoff_partial_sums(f: Sequence, word: Sequence[int]) -> np.ndarray:
    """Partial sums ``S_f(w_{<=n})`` for ``n = 1..|w|``.

    Exact (object dtype) when every value of ``f`` is rational, otherwise
    a float or complex cumulative sum.
    """
    w = np.asarray(word, dtype=np.int64)
    if all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in f):
        if all(Fraction(v).denominator == 1 for v in f):
            vals = np.array([int(v) for v in f], dtype=np.int64)
            return np.cumsum(vals[w])
        vals = np.array([Fraction(v) for v in f], dtype=object)
        return np.cumsum(vals[w])
    vals = np.asarray(f)
    return np.cumsum(vals[w])


def iter_birkhoff_sums(f: Sequence, letters: Iterable[int]) -> Iterator:
    """Streaming version of :func:`birkhoff_partial_sums`."""
    acc = 0
    for c in letters:
        acc = acc + f[c]
        yield acc


def birkhoff_sum(f: Sequence, word: Iterable[int]):
    """``S_f(w)`` as a single value (exact for rational ``f``)."""
    acc = 0
    for c in word:
        acc = acc + f[c]
    return acc
