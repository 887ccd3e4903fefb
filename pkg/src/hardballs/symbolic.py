"""Symbolic collision sequences, collision graphs and essential edges.

Balls are indexed from 0 in the Python API. The text literal used in config
files, ``"(1,2);(1,3);(2,3)"``, is 1-based.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPair, NotConnected

_PAIR = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


@dataclass(frozen=True)
class SymbolicSequence:
    entries: tuple[tuple[int, int], ...]
    times: tuple[float, ...] | None = None

    def __post_init__(self):
        entries = tuple((min(i, j), max(i, j)) for i, j in self.entries)
        object.__setattr__(self, "entries", entries)
        for i, j in entries:
            if i < 0 or i == j:
                raise InvalidPair(f"invalid pair {(i, j)}")
        if self.times is not None:
            times = tuple(float(t) for t in self.times)
            if len(times) != len(entries):
                raise ValueError("times and entries differ in length")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("collision times must be strictly increasing")
            object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def prefix(self, m: int) -> "SymbolicSequence":
        return SymbolicSequence(self.entries[:m], None if self.times is None else self.times[:m])

    def validate(self, N: int) -> None:
        for i, j in self.entries:
            if j >= N:
                raise InvalidPair(f"pair {(i, j)} out of range for N={N}")

    def to_literal(self) -> str:
        return ";".join(f"({i + 1},{j + 1})" for i, j in self.entries)

    @classmethod
    def parse(cls, literal: str) -> "SymbolicSequence":
        """Parse ``"(1,2);(1,3)"`` (1-based); the empty string is the empty sequence."""
        text = literal.strip()
        if not text:
            return cls(())
        entries = []
        for chunk in text.split(";"):
            m = _PAIR.fullmatch(chunk.strip())
            if m is None:
                raise InvalidPair(f"cannot parse pair {chunk!r}")
            i, j = int(m.group(1)), int(m.group(2))
            if i < 1 or j < 1:
                raise InvalidPair(f"pairs are 1-based, got {chunk!r}")
            entries.append((i - 1, j - 1))
        return cls(tuple(entries))

    @classmethod
    def from_segment(cls, segment) -> "SymbolicSequence":
        return cls(segment.pairs, segment.times)


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


@dataclass(frozen=True)
class CollisionGraph:
    N: int
    edges: tuple[tuple[int, int], ...]

    def components(self) -> list[set[int]]:
        dsu = _DisjointSet(self.N)
        for i, j in self.edges:
            dsu.union(i, j)
        groups: dict[int, set[int]] = {}
        for v in range(self.N):
            groups.setdefault(dsu.find(v), set()).add(v)
        return sorted(groups.values(), key=min)

    @property
    def n_components(self) -> int:
        return len(self.components())

    @property
    def connected(self) -> bool:
        return self.n_components == 1


@dataclass(frozen=True)
class EssentialEdgeSet:
    indices: tuple[int, ...]
    component_profile: tuple[int, ...]  # entry k: components after the first k edges

    def __contains__(self, k):
        return k in self.indices


def _as_sequence(seq) -> SymbolicSequence:
    return seq if isinstance(seq, SymbolicSequence) else SymbolicSequence(tuple(seq))


def collision_graph(N: int, seq, prefix_len: int | None = None) -> CollisionGraph:
    seq = _as_sequence(seq)
    seq.validate(N)
    if prefix_len is None:
        prefix_len = len(seq)
    if not 0 <= prefix_len <= len(seq):
        raise ValueError(f"prefix_len {prefix_len} outside [0, {len(seq)}]")
    return CollisionGraph(N, seq.entries[:prefix_len])


def component_profile(N: int, seq) -> tuple[int, ...]:
    seq = _as_sequence(seq)
    seq.validate(N)
    dsu = _DisjointSet(N)
    profile = [N]
    for i, j in seq.entries:
        dsu.union(i, j)
        profile.append(dsu.components)
    return tuple(profile)


def essential_indices(N: int, seq) -> EssentialEdgeSet:
    """0-based indices of the edges that merge two components of the growing graph."""
    profile = component_profile(N, seq)
    if profile[-1] != 1:
        raise NotConnected(profile[-1])
    indices = tuple(k for k in range(len(profile) - 1) if profile[k + 1] < profile[k])
    return EssentialEdgeSet(indices, profile)


def random_connected_sequence(N: int, length: int, rng: np.random.Generator) -> SymbolicSequence:
    """Random sequence whose graph is connected, for combinatorial tests."""
    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    while True:
        picks = rng.integers(len(pairs), size=length)
        seq = SymbolicSequence(tuple(pairs[k] for k in picks))
        if component_profile(N, seq)[-1] == 1:
            return seq
