"""Digit paths coding positions in θ^p(a).

A state ``(a, j)`` with ``1 <= j <= |θ(a)|`` marks the ``j``-th letter of
θ(a). A depth-``p`` path is stored least significant digit first,
``((v_1, k_1), ..., (v_p, k_p))``, and is consistent when
``v_i = θ(v_{i+1})_{k_{i+1}}``. Position ``n`` of ``θ^p(a)`` corresponds to
the path with ``v_p = a`` and

    θ^p(a)_{<n} = θ^{p-1}(θ(v_p)_{<k_p}) ... θ(θ(v_2)_{<k_2}) θ(v_1)_{<k_1}.

All word lengths are exact Python integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import islice
from typing import Iterator, Sequence

import numpy as np

from . import _exact as ex
from .substitution import Substitution, theta_matrix

__all__ = [
    "State",
    "PathWord",
    "ReversedPath",
    "SsimMatrix",
    "PathError",
    "build_state_space",
    "state_index",
    "ssim_one",
    "ssim_power",
    "encode",
    "decode",
    "iter_paths",
    "encode_reversed",
    "depth_for",
    "adic_successor",
    "successor_by_conjugation",
    "adic_successor_literal",
    "renormalized_birkhoff",
    "prefix_sums_table",
    "format_path",
    "parse_path",
]

State = tuple  # (letter index, 1-based position)


class PathError(ValueError):
    pass


@dataclass(frozen=True)
class PathWord:
    """A finite path, least significant digit first."""

    digits: tuple[State, ...]

    @property
    def depth(self) -> int:
        return len(self.digits)

    @property
    def top(self) -> int:
        """Letter of the most significant digit (``v_p``)."""
        return self.digits[-1][0]

    def __iter__(self):
        return iter(self.digits)

    def __len__(self):
        return len(self.digits)

    def __getitem__(self, i):
        return self.digits[i]

    def reversed(self) -> "ReversedPath":
        return ReversedPath(tuple(reversed(self.digits)), pad=None)


@dataclass(frozen=True)
class ReversedPath:
    """Most significant digit first, followed by an infinite padding state.

    ``pad`` is the letter ``a`` of the padding ``(a, 1)(a, 1)...``; it is
    only materialized on indexing.
    """

    digits: tuple[State, ...]
    pad: int | None

    def __getitem__(self, i: int) -> State:
        if i < 0:
            raise IndexError("reversed paths are infinite; negative indices unsupported")
        if i < len(self.digits):
            return self.digits[i]
        if self.pad is None:
            raise IndexError(i)
        return (self.pad, 1)

    def __iter__(self) -> Iterator[State]:
        yield from self.digits
        if self.pad is not None:
            while True:
                yield (self.pad, 1)

    def prefix(self, n: int) -> tuple[State, ...]:
        return tuple(islice(iter(self), n))


def build_state_space(s: Substitution) -> list[State]:
    """States ``(a, j)``: letters in alphabet order, positions ascending."""
    return [(a, j) for a in range(s.size) for j in range(1, len(s.rules[a]) + 1)]


def state_index(s: Substitution) -> dict[State, int]:
    return {x: i for i, x in enumerate(build_state_space(s))}


@dataclass(frozen=True)
class SsimMatrix:
    """Path-counting matrix at depth ``p``.

    ``entries[x][y]`` is the number of consistent paths ``x = x_1, ...,
    x_{p+1} = y``; ``star_row[y]`` is the column sum.
    """

    depth: int
    states: tuple[State, ...]
    entries: tuple[tuple[int, ...], ...]

    @property
    def star_row(self) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.entries))

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=object)


def ssim_one(s: Substitution) -> list[list[int]]:
    """``m1[(a,j)][(b,k)] = 1`` exactly when ``a = θ(b)_k``."""
    X = build_state_space(s)
    return [[1 if a == s.rules[b][k - 1] else 0 for (b, k) in X] for (a, _j) in X]


def ssim_power(s: Substitution, p: int) -> SsimMatrix:
    """Exact big-integer ``m^{(p)} = m^{(p-1)} m^{(1)}`` with ``m^{(0)} = I``."""
    if p < 0:
        raise ValueError("depth must be non-negative")
    return _ssim_power_cached(s, p)


@lru_cache(maxsize=256)
def _ssim_power_cached(s: Substitution, p: int) -> SsimMatrix:
    X = tuple(build_state_space(s))
    n = len(X)
    if p == 0:
        ent = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    else:
        prev = _ssim_power_cached(s, p - 1).entries
        ent = ex.matmul(prev, ssim_one(s))
    return SsimMatrix(p, X, tuple(tuple(r) for r in ent))


@lru_cache(maxsize=64)
def _prefix_lengths(s: Substitution, depth: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """``table[i][b][k-1] = |θ^i(θ(b)_{<k})|`` for ``0 <= i <= depth``."""
    L = s.power_lengths(depth)
    table = []
    for i in range(depth + 1):
        rows = []
        for b, word in enumerate(s.rules):
            acc, row = 0, []
            for c in word:
                row.append(acc)
                acc += L[i][c]
            rows.append(tuple(row))
        table.append(tuple(rows))
    return tuple(table)


def depth_for(s: Substitution, a: int, N: int) -> int:
    """Least ``p`` with ``N <= |θ^p(a)|`` (so ``|θ^{p-1}(a)| < N`` when ``p >= 1``)."""
    if N < 1:
        raise PathError("N must be positive")
    p, length, word_counts = 0, 1, [0] * s.size
    word_counts[a] = 1
    while length < N:
        new = [0] * s.size
        for b, cnt in enumerate(word_counts):
            if cnt:
                for c in s.rules[b]:
                    new[c] += cnt
        if sum(new) == length:
            raise PathError(f"|θ^p(a)| never reaches {N}")
        word_counts, length, p = new, sum(new), p + 1
    return p


def encode(s: Substitution, a: int, p: int, n: int) -> PathWord:
    """Digits of position ``n`` (1-based) in ``θ^p(a)``, greedy from the top."""
    L = s.power_lengths(p)
    total = L[p][a]
    if not 1 <= n <= total:
        raise PathError(f"n={n} out of range [1, {total}] for depth {p}")
    r = n - 1
    v = a
    digits = []
    for i in range(p, 0, -1):
        for k, c in enumerate(s.rules[v], start=1):
            chunk = L[i - 1][c]
            if r < chunk:
                digits.append((v, k))
                v = c
                break
            r -= chunk
    return PathWord(tuple(reversed(digits)))


def _check_consistent(s: Substitution, path: Sequence[State]):
    for i, (v, k) in enumerate(path):
        if not 1 <= k <= len(s.rules[v]):
            raise PathError(f"digit {i + 1} has position {k} outside 1..{len(s.rules[v])}")
        if i + 1 < len(path):
            w, kk = path[i + 1]
            if 1 <= kk <= len(s.rules[w]) and s.rules[w][kk - 1] != v:
                raise PathError(f"inconsistent digits at level {i + 1}")


def decode(s: Substitution, path: Sequence[State], a: int | None = None) -> int:
    """``n = 1 + Σ_i |θ^{i-1}(θ(v_i)_{<k_i})|``.

    Raises
    ------
    PathError
        If the path is inconsistent or its top letter differs from ``a``.
    """
    path = tuple(path)
    _check_consistent(s, path)
    if a is not None and path and path[-1][0] != a:
        raise PathError("top digit does not carry the requested letter")
    P = _prefix_lengths(s, max(len(path) - 1, 0))
    n = 1
    for i, (v, k) in enumerate(path):
        n += P[i][v][k - 1]
    return n


def iter_paths(s: Substitution, a: int, p: int) -> Iterator[tuple[State, ...]]:
    """All depth-``p`` paths with top letter ``a``, in increasing position order."""
    if p == 0:
        yield ()
        return
    for k, c in enumerate(s.rules[a], start=1):
        for lower in iter_paths(s, c, p - 1):
            yield lower + ((a, k),)


def encode_reversed(s: Substitution, a: int, N: int) -> ReversedPath:
    """Reversed coding of ``N`` at the least sufficient depth, padded by ``(a, 1)``."""
    p = depth_for(s, a, N)
    if p == 0:
        return ReversedPath((), a)
    return ReversedPath(tuple(reversed(encode(s, a, p, N).digits)), a)


def adic_successor(s: Substitution, path: Sequence[State]) -> PathWord:
    """Carry-rule successor at fixed depth.

    The least significant digit that can be incremented (``k_l < |θ(v_l)|``)
    is incremented and every lower digit is reset to the first letter of
    the image above it.

    Raises
    ------
    PathError
        For the maximal path, which has no successor at this depth.
    """
    path = list(path)
    for l, (v, k) in enumerate(path):
        if k < len(s.rules[v]):
            new = list(path)
            new[l] = (v, k + 1)
            b = s.rules[v][k]
            for i in range(l - 1, -1, -1):
                new[i] = (b, 1)
                b = s.rules[b][0]
            return PathWord(tuple(new))
    raise PathError("maximal path has no successor")


def successor_by_conjugation(s: Substitution, path: Sequence[State]) -> PathWord:
    """``encode(decode(path) + 1)`` at the same depth."""
    path = tuple(path)
    a = path[-1][0]
    n = decode(s, path)
    if n == s.power_lengths(len(path))[len(path)][a]:
        raise PathError("maximal path has no successor")
    return encode(s, a, len(path), n + 1)


def adic_successor_literal(s: Substitution, path: Sequence[State]) -> PathWord | None:
    """Successor rule read with the index bound ``k_l < |θ(v_{l+1})|``.

    Kept only as a diagnostic; returns ``None`` when that reading produces
    something that is not a valid consistent path.
    """
    path = list(path)
    p = len(path)
    for l in range(p - 1):
        v, k = path[l]
        if k < len(s.rules[path[l + 1][0]]):
            new = list(path)
            if not k + 1 <= len(s.rules[v]):
                return None
            new[l] = (v, k + 1)
            b = s.rules[v][k]
            for i in range(l - 1, -1, -1):
                new[i] = (b, 1)
                b = s.rules[b][0]
            try:
                _check_consistent(s, new)
            except PathError:
                return None
            return PathWord(tuple(new))
    return None


def prefix_sums_table(s: Substitution, f: Sequence) -> dict[State, object]:
    """``f̌((b, k)) = S_f(θ(b)_{<k})`` for every state."""
    out = {}
    for b, word in enumerate(s.rules):
        acc = 0
        for k, c in enumerate(word, start=1):
            out[(b, k)] = acc
            acc = acc + f[c]
    return out


def _eigen_residual(s: Substitution, f: Sequence, lambda_f) -> float:
    M = theta_matrix(s)
    n = s.size
    fM = [sum(f[a] * int(M[a, b]) for a in range(n)) for b in range(n)]
    scale = max(1.0, max(abs(complex(x)) for x in f))
    return max(abs(complex(fM[b] - lambda_f * f[b])) for b in range(n)) / scale


def renormalized_birkhoff(s: Substitution, f: Sequence, lambda_f, path: Sequence[State], check: bool = True):
    """``Σ_i λ_f^{i-1} S_f(θ(v_i)_{<k_i})``, which equals ``S_f(u_{<n})``.

    Exact when ``f`` and ``λ_f`` are rational.

    Raises
    ------
    ValueError
        If ``check`` and ``f`` is not a left eigenvector for ``λ_f``
        (relative residual above 1e-9, or nonzero in the exact regime).
    """
    if check:
        resid = _eigen_residual(s, f, lambda_f)
        exact = ex.all_rational(list(f) + [lambda_f])
        if (exact and resid != 0) or resid > 1e-9:
            raise ValueError(f"f is not a left eigenvector for λ_f (residual {resid:.3e})")
    fcheck = prefix_sums_table(s, f)
    total = 0
    power = 1
    for x in path:
        total = total + power * fcheck[tuple(x)]
        power = power * lambda_f
    return total


def format_path(s: Substitution, path: Sequence[State]) -> str:
    """``"(a,1)(b,3)"`` with display letters."""
    return "".join(f"({s.letters[v]},{k})" for v, k in path)


def parse_path(s: Substitution, text: str) -> PathWord:
    import re

    digits = []
    for m in re.finditer(r"\(\s*([a-zA-Z0-9])\s*,\s*(\d+)\s*\)", text):
        digits.append((s.index(m.group(1)), int(m.group(2))))
    if not digits and text.strip():
        raise PathError(f"cannot parse path {text!r}")
    return PathWord(tuple(digits))
