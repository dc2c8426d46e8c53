"""Finite oriented graphs, admissible words, one-sided sequences, cylinder metric.

The combinatorial layer: everything downstream (box compositions, parameter
selection, emergence statistics) addresses dynamics through admissible words
over a finite transition graph whose arrows carry a kind tag — ``hyperbolic``
for the expanding/contracting generators, ``fold`` for the quadratic folds.
"""

from __future__ import annotations

import json
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

HYPERBOLIC = "hyperbolic"
FOLD = "fold"

Arrow = namedtuple("Arrow", "label origin target kind")

CylinderDistance = namedtuple("CylinderDistance", "value is_lower_bound")


class SymbolicError(ValueError):
    pass


class TransitionGraph:
    """A finite oriented graph with labelled, kind-tagged arrows."""

    def __init__(self, vertices: Iterable[str], arrows: Iterable[Arrow]):
        self.vertices = frozenset(vertices)
        self._arrows = {}
        for a in arrows:
            a = Arrow(*a)
            if a.origin not in self.vertices or a.target not in self.vertices:
                raise SymbolicError(
                    f"arrow {a.label}: endpoint not a vertex ({a.origin}->{a.target})"
                )
            if a.kind not in (HYPERBOLIC, FOLD):
                raise SymbolicError(f"arrow {a.label}: unknown kind {a.kind!r}")
            if a.label in self._arrows:
                raise SymbolicError(f"duplicate arrow label {a.label}")
            self._arrows[a.label] = a

    def arrow(self, label: str) -> Arrow:
        try:
            return self._arrows[label]
        except KeyError:
            raise SymbolicError(f"unknown arrow label {label!r}") from None

    @property
    def arrows(self):
        return dict(self._arrows)

    def hyperbolic_labels(self):
        return [l for l, a in self._arrows.items() if a.kind == HYPERBOLIC]

    def fold_labels(self):
        return [l for l, a in self._arrows.items() if a.kind == FOLD]

    def out_arrows(self, vertex: str, kind: Optional[str] = HYPERBOLIC):
        return [
            a
            for a in self._arrows.values()
            if a.origin == vertex and (kind is None or a.kind == kind)
        ]

    def positive_entropy(self) -> bool:
        """True if the hyperbolic subgraph is strongly connected and has two
        distinct equal-length paths with the same endpoints."""
        hyp = [a for a in self._arrows.values() if a.kind == HYPERBOLIC]
        verts = {a.origin for a in hyp} | {a.target for a in hyp}
        if not verts:
            return False
        # strong connectivity via double BFS
        def reachable(start, flip=False):
            seen = {start}
            frontier = [start]
            while frontier:
                v = frontier.pop()
                for a in hyp:
                    o, t = (a.target, a.origin) if flip else (a.origin, a.target)
                    if o == v and t not in seen:
                        seen.add(t)
                        frontier.append(t)
            return seen

        v0 = next(iter(verts))
        if reachable(v0) < verts or reachable(v0, flip=True) < verts:
            return False
        # two parallel arrows give two distinct length-1 paths; otherwise look
        # for two distinct length-2 paths with same endpoints
        pairs = {}
        for a in hyp:
            key = (a.origin, a.target)
            if key in pairs:
                return True
            pairs[key] = a
        two_step = {}
        for a in hyp:
            for b in hyp:
                if a.target == b.origin:
                    key = (a.origin, b.target)
                    if key in two_step and two_step[key] != (a.label, b.label):
                        return True
                    two_step.setdefault(key, (a.label, b.label))
        return False

    # -- serialization -----------------------------------------------------
    def to_json(self) -> str:
        data = {
            "vertices": sorted(self.vertices),
            "arrows": [
                {"label": a.label, "o": a.origin, "t": a.target, "kind": a.kind}
                for a in self._arrows.values()
            ],
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TransitionGraph":
        data = json.loads(text)
        arrows = [
            Arrow(d["label"], d["o"], d["t"], d["kind"]) for d in data["arrows"]
        ]
        return cls(data["vertices"], arrows)

    def __eq__(self, other):
        return (
            isinstance(other, TransitionGraph)
            and self.vertices == other.vertices
            and self._arrows == other._arrows
        )

    def __hash__(self):
        return hash((self.vertices, tuple(sorted(self._arrows))))


class Word:
    """An admissible finite word of arrow labels. Immutable."""

    __slots__ = ("graph", "letters")

    def __init__(self, graph: TransitionGraph, letters: Iterable[str]):
        self.graph = graph
        self.letters = tuple(letters)
        _check_admissible(self.letters, graph)

    @property
    def origin(self):
        if not self.letters:
            return None
        return self.graph.arrow(self.letters[0]).origin

    @property
    def target(self):
        if not self.letters:
            return None
        return self.graph.arrow(self.letters[-1]).target

    def is_empty(self) -> bool:
        return not self.letters

    def prefix(self, m: int) -> "Word":
        return Word(self.graph, self.letters[:m])

    def suffix(self, m: int) -> "Word":
        return Word(self.graph, self.letters[len(self.letters) - m :])

    def kinds(self):
        return [self.graph.arrow(l).kind for l in self.letters]

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __eq__(self, other):
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def __repr__(self):
        return f"Word({'·'.join(self.letters) or 'ε'})"


def _check_admissible(letters, graph):
    prev = None
    for l in letters:
        a = graph.arrow(l)
        if prev is not None and prev.target != a.origin:
            raise SymbolicError(
                f"non-admissible pair {prev.label}·{a.label}: "
                f"{prev.target} != {a.origin}"
            )
        prev = a


def validate_word(word: Word, graph: TransitionGraph) -> bool:
    """True iff all consecutive letter pairs are composable in `graph`."""
    try:
        _check_admissible(word.letters, graph)
    except SymbolicError as e:
        if "unknown arrow" in str(e):
            raise
        return False
    return True


def concat(c: Word, c2: Word) -> Word:
    """Concatenation; endpoints must match unless either word is empty."""
    if c.is_empty():
        return c2
    if c2.is_empty():
        return c
    if c.target != c2.origin:
        raise SymbolicError(
            f"cannot concatenate: target {c.target} != origin {c2.origin}"
        )
    return Word(c.graph, c.letters + c2.letters)


RIGHT = "right"
LEFT = "left"


@dataclass(frozen=True)
class OneSidedSequence:
    """An eventually periodic one-sided admissible sequence.

    For a right sequence, letters are ``prefix`` then ``period`` repeated:
    s₁s₂… = prefix + period + period + …

    For a left sequence (…u₃u₂u₁ read toward its end), ``prefix`` holds the
    *last* letters in natural order and ``period`` repeats leftward before
    them: … + period + period + prefix.  ``letter(1)`` is the last letter.
    """

    graph: TransitionGraph
    direction: str
    prefix: Tuple[str, ...]
    period: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.direction not in (RIGHT, LEFT):
            raise SymbolicError(f"bad direction {self.direction!r}")
        if not self.prefix and not self.period:
            raise SymbolicError("sequence needs a prefix or a period")
        # admissibility of a long enough truncation covers all joints
        depth = 2 * (len(self.prefix) + len(self.period)) + 2
        _check_admissible(self._letters(depth), self.graph)

    def _letters(self, m: int) -> Tuple[str, ...]:
        """First m letters in dynamical order (right) / last m letters (left),
        both returned in natural left-to-right order."""
        if self.direction == RIGHT:
            out = list(self.prefix[:m])
            while len(out) < m:
                if not self.period:
                    raise SymbolicError("finite sequence exhausted")
                out.extend(self.period)
            return tuple(out[:m])
        # left: build from the end backwards
        out = list(self.prefix[-m:]) if m <= len(self.prefix) else list(self.prefix)
        while len(out) < m:
            if not self.period:
                raise SymbolicError("finite sequence exhausted")
            out = list(self.period) + out
        return tuple(out[-m:])

    def letter(self, i: int) -> str:
        """1-based: position i from the start (right) or from the end (left)."""
        if i < 1:
            raise SymbolicError("letter index is 1-based")
        if self.direction == RIGHT:
            return self._letters(i)[-1]
        return self._letters(i)[0]

    def truncate(self, m: int) -> Word:
        return Word(self.graph, self._letters(m))

    def shift(self) -> "OneSidedSequence":
        """Drop the first letter (right sequences only)."""
        if self.direction != RIGHT:
            raise SymbolicError("shift acts on right sequences")
        if self.prefix:
            return OneSidedSequence(self.graph, RIGHT, self.prefix[1:], self.period)
        if len(self.period) <= 1:
            return self
        rotated = self.period[1:] + self.period[:1]
        return OneSidedSequence(self.graph, RIGHT, (), rotated)


def truncate(seq: OneSidedSequence, m: int) -> Word:
    """First m letters (right sequence) / last m letters (left sequence)."""
    if m < 1:
        raise SymbolicError("truncation length must be >= 1")
    return seq.truncate(m)


def shift(seq: OneSidedSequence) -> OneSidedSequence:
    return seq.shift()


def cylinder_distance(
    s: OneSidedSequence, s2: OneSidedSequence, horizon: int
) -> CylinderDistance:
    """2^{-i*} with i* the first differing (1-based) index, compared up to
    `horizon`; (0, lower-bound flag) when equal throughout."""
    for i in range(1, horizon + 1):
        if s.letter(i) != s2.letter(i):
            return CylinderDistance(2.0 ** (-i), False)
    return CylinderDistance(0.0, True)


def word_cylinder_distance(a: Tuple[str, ...], b: Tuple[str, ...]) -> float:
    """Cylinder distance between two finite truncations (see stats module)."""
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return 2.0 ** (-(i + 1))
    if len(a) == len(b):
        return 0.0
    return 2.0 ** (-(n + 1))
