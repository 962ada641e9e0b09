"""Symbolic address space for level-varying contraction systems.

Addresses are finite words over a tree whose branching count may change from
level to level. Per-level probability vectors induce cylinder masses, and a
cut set is a prefix-free family of finite words whose cylinders cover every
infinite address.

All types here are immutable after construction and all operations are pure,
so they are safe to share across worker threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import BranchBudgetError, DepthCapError, InvalidWordError

__all__ = [
    "PROB_SUM_TOL",
    "COVER_TOL",
    "DEFAULT_MAX_DEPTH",
    "LevelSchedule",
    "BranchingProfile",
    "Word",
    "EMPTY_WORD",
    "common_prefix",
    "BernoulliMeasure",
    "cylinder_mass",
    "CutSet",
    "scale_cut_set",
    "scale_cut_set_masses",
    "is_prefix_free",
]

PROB_SUM_TOL = 1e-12
COVER_TOL = 1e-10

# With contraction ratios capped at 0.99 this depth reaches scales near
# 0.99**64; anything finer should fail loudly rather than spin.
DEFAULT_MAX_DEPTH = 64


def _read_only_vector(entry) -> np.ndarray:
    arr = np.array(entry, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("level entry must be a nonempty 1-D vector")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LevelSchedule:
    """Per-level data: an explicit head followed by a cycling tail.

    Level ``k`` (1-based) resolves to ``head[k-1]`` while ``k <= len(head)``
    and then repeats the tail pattern forever. By default the tail is the
    head itself, so a single-entry schedule describes a stationary system.
    """

    head: tuple
    tail: tuple

    @classmethod
    def build(cls, head, tail=None, coerce: Callable = _read_only_vector) -> "LevelSchedule":
        head_t = tuple(coerce(e) for e in head)
        if not head_t:
            raise ValueError("schedule needs at least one level entry")
        tail_t = head_t if tail is None else tuple(coerce(e) for e in tail)
        if not tail_t:
            raise ValueError("tail pattern must be nonempty when given")
        return cls(head=head_t, tail=tail_t)

    def at(self, k: int) -> np.ndarray:
        """Entry for 1-based level ``k``."""
        if k < 1:
            raise ValueError(f"levels are 1-based, got {k}")
        if k <= len(self.head):
            return self.head[k - 1]
        return self.tail[(k - len(self.head) - 1) % len(self.tail)]

    def distinct_entries(self) -> Iterator[np.ndarray]:
        yield from self.head
        yield from self.tail

    @property
    def stationary(self) -> bool:
        first = self.head[0]
        return all(
            e.shape == first.shape and np.array_equal(e, first)
            for e in self.distinct_entries()
        )


@dataclass(frozen=True)
class BranchingProfile:
    """Branching counts ``n_k >= 2`` per level, with an enumeration depth cap."""

    head: tuple[int, ...]
    tail: tuple[int, ...]
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if not self.head or not self.tail:
            raise ValueError("branching profile needs head and tail entries")
        for n in (*self.head, *self.tail):
            if int(n) != n or n < 2:
                raise ValueError(f"branching counts must be integers >= 2, got {n}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], tail: Sequence[int] | None = None,
                   max_depth: int = DEFAULT_MAX_DEPTH) -> "BranchingProfile":
        head = tuple(int(n) for n in sizes)
        tail_t = head if tail is None else tuple(int(n) for n in tail)
        return cls(head=head, tail=tail_t, max_depth=max_depth)

    def size(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"levels are 1-based, got {k}")
        if k <= len(self.head):
            return self.head[k - 1]
        return self.tail[(k - len(self.head) - 1) % len(self.tail)]

    @property
    def stationary(self) -> bool:
        first = self.head[0]
        return all(n == first for n in (*self.head, *self.tail))

    def matches(self, other: "BranchingProfile", depth: int | None = None) -> bool:
        """Same branching counts level by level up to ``depth``."""
        depth = depth or max(self.max_depth, other.max_depth)
        return all(self.size(k) == other.size(k) for k in range(1, depth + 1))

    def validate_letters(self, letters: Sequence[int]) -> None:
        for j, letter in enumerate(letters, start=1):
            n = self.size(j)
            if int(letter) != letter or not 1 <= letter <= n:
                raise InvalidWordError(
                    f"letter {letter} at level {j} outside 1..{n}"
                )


@dataclass(frozen=True, slots=True)
class Word:
    """A finite address: letters are 1-based, one per level."""

    letters: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, i):
        return self.letters[i]

    @property
    def parent(self) -> "Word":
        if not self.letters:
            raise InvalidWordError("the empty word has no parent")
        return Word(self.letters[:-1])

    def extended(self, letter: int) -> "Word":
        return Word(self.letters + (int(letter),))

    def is_prefix_of(self, other: "Word") -> bool:
        return self.letters == other.letters[: len(self.letters)]


EMPTY_WORD = Word(())


def common_prefix(u: Word, v: Word) -> Word:
    """Longest word that is a prefix of both ``u`` and ``v``."""
    out = []
    for a, b in zip(u.letters, v.letters):
        if a != b:
            break
        out.append(a)
    return Word(tuple(out))


def is_prefix_free(words: Sequence[Word]) -> bool:
    """True when no word in the family is a prefix of another."""
    seen = sorted(w.letters for w in words)
    for a, b in zip(seen, seen[1:]):
        if b[: len(a)] == a:
            return False
    return True


class BernoulliMeasure:
    """Product measure on infinite addresses from per-level probability vectors.

    The mass of the cylinder of ``u = u_1...u_k`` is the product of the
    letter probabilities ``p_{1,u_1} * ... * p_{k,u_k}``. Vectors must sum to
    one and carry strictly positive entries; zero-mass branches would make
    q < 1 moment sums and entropy sums undefined downstream, so they are
    rejected here rather than special-cased later.
    """

    def __init__(self, vectors, tail=None):
        schedule = LevelSchedule.build(vectors, tail)
        for vec in schedule.distinct_entries():
            if np.any(vec <= 0.0):
                raise ValueError("probability vectors must be strictly positive")
            if abs(float(vec.sum()) - 1.0) > PROB_SUM_TOL:
                raise ValueError(
                    f"probability vector sums to {vec.sum()!r}, not 1 within {PROB_SUM_TOL}"
                )
        self._schedule = schedule
        self._logs = LevelSchedule(
            head=tuple(_frozen(np.log(v)) for v in schedule.head),
            tail=tuple(_frozen(np.log(v)) for v in schedule.tail),
        )

    @property
    def schedule(self) -> LevelSchedule:
        return self._schedule

    @property
    def stationary(self) -> bool:
        return self._schedule.stationary

    def probs(self, k: int) -> np.ndarray:
        return self._schedule.at(k)

    def log_probs(self, k: int) -> np.ndarray:
        return self._logs.at(k)

    def profile(self, max_depth: int = DEFAULT_MAX_DEPTH) -> BranchingProfile:
        return BranchingProfile(
            head=tuple(len(v) for v in self._schedule.head),
            tail=tuple(len(v) for v in self._schedule.tail),
            max_depth=max_depth,
        )

    def __repr__(self):
        return f"BernoulliMeasure(levels={len(self._schedule.head)}, stationary={self.stationary})"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def cylinder_mass(measure: BernoulliMeasure, word: Word) -> float:
    """Mass of the cylinder of ``word``; the empty word has mass 1."""
    measure.profile().validate_letters(word.letters)
    mass = 1.0
    for k, letter in enumerate(word.letters, start=1):
        mass *= float(measure.probs(k)[letter - 1])
    return mass


@dataclass(frozen=True)
class CutSet:
    """Prefix-free covering family of words, with its generating scale."""

    words: tuple[Word, ...]
    r: float
    s: float | None = None

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)


def scale_cut_set(ratios: LevelSchedule, r: float, s: float | None = None,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> CutSet:
    """Words where the cumulative contraction ratio first drops to <= r.

    A word ``u`` belongs to the cut set exactly when ``c_u <= r < c_parent``,
    with ``c_u`` the product of per-letter ratios along ``u``. Ties
    ``c_u == r`` include the word. Every member then satisfies
    ``c_min * r < c_u <= r`` where ``c_min`` is the smallest ratio in play.
    For similarity tables the membership does not depend on the moment
    exponent; ``s`` is recorded on the result for bookkeeping only.

    Raises ``DepthCapError`` (carrying the offending branch) if a branch
    stays above ``r`` beyond ``max_depth`` levels.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    out: list[Word] = []
    stack: list[tuple[tuple[int, ...], float]] = [((), 1.0)]
    while stack:
        letters, c = stack.pop()
        level = len(letters) + 1
        if level > max_depth:
            raise DepthCapError(
                f"cut-set expansion exceeded max_depth={max_depth} at branch {letters}",
                word=Word(letters),
                depth=max_depth,
            )
        vec = ratios.at(level)
        # reversed push keeps the DFS output in lexicographic order
        for j in range(len(vec), 0, -1):
            child_c = c * float(vec[j - 1])
            child = letters + (j,)
            if child_c <= r:
                out.append(Word(child))
            else:
                stack.append((child, child_c))
    out.sort(key=lambda w: w.letters)
    return CutSet(words=tuple(out), r=float(r), s=s)


def scale_cut_set_masses(ratios: LevelSchedule, measure: BernoulliMeasure,
                         r: float, max_depth: int = DEFAULT_MAX_DEPTH,
                         budget: int = 4_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cut-set enumeration returning ``(log c_u, log p_u)`` arrays.

    Same membership rule as :func:`scale_cut_set` but words are never
    materialized, which keeps moment-sum evaluation cheap for fine scales.
    The word order is level-major and deterministic.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    log_r = np.log(r)
    done_c: list[np.ndarray] = []
    done_p: list[np.ndarray] = []
    front_c = np.zeros(1)
    front_p = np.zeros(1)
    total = 0
    for level in range(1, max_depth + 1):
        lc = np.log(ratios.at(level))
        lp = measure.log_probs(level)
        if len(lc) != len(lp):
            raise ValueError(
                f"ratio/probability vectors disagree at level {level}: "
                f"{len(lc)} vs {len(lp)} entries"
            )
        child_c = (front_c[:, None] + lc[None, :]).ravel()
        child_p = (front_p[:, None] + lp[None, :]).ravel()
        hit = child_c <= log_r
        done_c.append(child_c[hit])
        done_p.append(child_p[hit])
        total += int(hit.sum())
        front_c = child_c[~hit]
        front_p = child_p[~hit]
        if total + front_c.size > budget:
            raise BranchBudgetError(
                f"cut set at r={r} exceeds the word budget of {budget}"
            )
        if front_c.size == 0:
            return np.concatenate(done_c), np.concatenate(done_p)
    raise DepthCapError(
        f"cut-set expansion exceeded max_depth={max_depth} at r={r}",
        depth=max_depth,
    )
