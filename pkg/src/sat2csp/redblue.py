"""Red/blue graphs, walk counting, red-filled walks, transitivity checks and dense-subgraph extraction.

Adjacency is stored as one Python-int bitset per vertex for each colour, which
keeps neighbourhood intersections cheap even for graphs with 10^4 vertices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._bits import bool_row_to_mask, elements_of, mask_to_bool


class RedBlueGraph:
    __slots__ = ("num_vertices", "blue", "red")

    def __init__(self, num_vertices: int, blue: Sequence[int], red: Sequence[int]):
        if len(blue) != num_vertices or len(red) != num_vertices:
            raise ValueError("need one blue and one red bitset per vertex")
        for v in range(num_vertices):
            if (blue[v] >> v) & 1 or (red[v] >> v) & 1:
                raise ValueError(f"self-loop at vertex {v}")
            if blue[v] & red[v]:
                raise ValueError(f"vertex {v} has an edge that is both red and blue")
            if (blue[v] | red[v]) >> num_vertices:
                raise ValueError(f"vertex {v} has a neighbour out of range")
        self.num_vertices = num_vertices
        self.blue = tuple(blue)
        self.red = tuple(red)

    @classmethod
    def from_edges(cls, num_vertices: int, blue_edges: Iterable[tuple[int, int]],
                   red_edges: Iterable[tuple[int, int]] = ()) -> "RedBlueGraph":
        blue = [0] * num_vertices
        red = [0] * num_vertices
        for adj, edges in ((blue, blue_edges), (red, red_edges)):
            for u, v in edges:
                if u == v:
                    raise ValueError(f"self-loop at vertex {u}")
                adj[u] |= 1 << v
                adj[v] |= 1 << u
        return cls(num_vertices, blue, red)

    @classmethod
    def from_matrices(cls, blue: np.ndarray, red: np.ndarray) -> "RedBlueGraph":
        """From symmetric boolean adjacency matrices with empty diagonals."""
        blue = np.asarray(blue, dtype=bool)
        red = np.asarray(red, dtype=bool)
        return cls(blue.shape[0], [bool_row_to_mask(r) for r in blue], [bool_row_to_mask(r) for r in red])

    def validate(self) -> None:
        """Full symmetry check (quadratic; meant for tests)."""
        for v in range(self.num_vertices):
            for adj in (self.blue, self.red):
                for w in elements_of(adj[v]):
                    if not (adj[w] >> v) & 1:
                        raise ValueError(f"edge ({v}, {w}) is not symmetric")

    def blue_edges(self) -> Iterator[tuple[int, int]]:
        for u in range(self.num_vertices):
            for v in elements_of(self.blue[u] >> (u + 1)):
                yield u, u + 1 + v

    def red_edges(self) -> Iterator[tuple[int, int]]:
        for u in range(self.num_vertices):
            for v in elements_of(self.red[u] >> (u + 1)):
                yield u, u + 1 + v

    def num_blue_edges(self) -> int:
        return sum(b.bit_count() for b in self.blue) // 2

    def num_red_edges(self) -> int:
        return sum(r.bit_count() for r in self.red) // 2

    def blue_degree(self, v: int) -> int:
        return self.blue[v].bit_count()

    def is_blue(self, u: int, v: int) -> bool:
        return bool((self.blue[u] >> v) & 1)

    def is_red(self, u: int, v: int) -> bool:
        return bool((self.red[u] >> v) & 1)

    def induced(self, vertices: Sequence[int]) -> "RedBlueGraph":
        """Subgraph on ``vertices``; new vertex i is old vertex vertices[i]."""
        idx = np.asarray(vertices, dtype=np.int64)
        k = self.num_vertices
        blue, red = [], []
        for v in vertices:
            blue.append(bool_row_to_mask(mask_to_bool(self.blue[v], k)[idx]))
            red.append(bool_row_to_mask(mask_to_bool(self.red[v], k)[idx]))
        return RedBlueGraph(len(vertices), blue, red)

    def to_json(self) -> dict:
        return {"format": "redblue", "version": 1, "num_vertices": self.num_vertices,
                "blue": [list(e) for e in self.blue_edges()], "red": [list(e) for e in self.red_edges()]}

    @classmethod
    def from_json(cls, data) -> "RedBlueGraph":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("format") != "redblue":
            raise ValueError("not a redblue document")
        return cls.from_edges(data["num_vertices"], map(tuple, data["blue"]), map(tuple, data["red"]))


def count_blue_walks(graph: RedBlueGraph, ell: int) -> int:
    """Number of (ell+1)-tuples whose consecutive entries are blue-adjacent."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    neighbours = [elements_of(b) for b in graph.blue]
    counts = [1] * graph.num_vertices
    for _ in range(ell):
        counts = [sum(counts[w] for w in nbrs) for nbrs in neighbours]
    return sum(counts)


def _red_filled(graph: RedBlueGraph, ell: int, start: int, end: int | None) -> Iterator[tuple[int, ...]]:
    # A vertex placed at position p must be blue to position p-1 and red to
    # positions 0..p-2; `red_req` is the AND of red rows of positions 0..p-2.
    full = (1 << graph.num_vertices) - 1
    blue, red = graph.blue, graph.red
    path = [start]

    def rec(red_req: int):
        pos = len(path)
        cand = blue[path[-1]] & red_req
        if end is not None:
            if pos == ell:
                cand &= 1 << end
            elif pos == ell - 1:
                cand &= blue[end]
            else:
                cand &= red[end]
        if pos == ell:
            for w in elements_of(cand):
                yield tuple(path) + (w,)
            return
        nxt_req = red_req & red[path[-1]]
        for w in elements_of(cand):
            path.append(w)
            yield from rec(nxt_req)
            path.pop()

    if end is not None and ell >= 2 and not (red[start] >> end) & 1:
        return
    yield from rec(full)


def enumerate_red_filled(graph: RedBlueGraph, ell: int, u: int, v: int) -> list[tuple[int, ...]]:
    if ell < 2:
        raise ValueError("ell must be at least 2")
    return list(_red_filled(graph, ell, u, v))


def count_red_filled(graph: RedBlueGraph, ell: int, u: int, v: int) -> int:
    if ell < 2:
        raise ValueError("ell must be at least 2")
    if not graph.is_red(u, v):
        return 0
    blue, red = graph.blue, graph.red
    full = (1 << graph.num_vertices) - 1

    def walk(last: int, red_req: int, pos: int) -> int:
        if pos == ell:
            return 1 if last == v else 0
        cand = blue[last] & red_req
        if pos == ell - 1:
            cand &= 1 << v
            return cand.bit_count()
        cand &= blue[v] if pos == ell - 2 else red[v]
        nxt_req = red_req & red[last]
        return sum(walk(w, nxt_req, pos + 1) for w in elements_of(cand))

    return walk(u, full, 0)


@dataclass
class WalkCensus:
    ell: int
    total_blue_walks: int
    red_filled_count: int
    per_pair: dict[tuple[int, int], int] = field(default_factory=dict)


def walk_census(graph: RedBlueGraph, ell: int) -> WalkCensus:
    if ell < 2:
        raise ValueError("ell must be at least 2")
    per_pair: dict[tuple[int, int], int] = {}
    total = 0
    for s in range(graph.num_vertices):
        for walk in _red_filled(graph, ell, s, None):
            key = (walk[0], walk[-1])
            per_pair[key] = per_pair.get(key, 0) + 1
            total += 1
    return WalkCensus(ell, count_blue_walks(graph, ell), total, per_pair)


def check_transitivity(graph: RedBlueGraph, q: int, ell: int) -> tuple[bool, tuple[int, int] | None, int]:
    """Whether every red pair has at most q red-filled ell-walks, plus the worst pair and its count."""
    if ell < 2:
        raise ValueError("ell must be at least 2")
    worst, worst_count = None, -1
    for u, v in graph.red_edges():
        c = count_red_filled(graph, ell, u, v)
        if c > worst_count:
            worst, worst_count = (u, v), c
    if worst is None:
        return True, None, 0
    return worst_count <= q, worst, worst_count


class DenseSubgraphError(RuntimeError):
    def __init__(self, reason: str, message: str, best_density: Fraction | None = None):
        super().__init__(message)
        self.reason = reason
        self.best_density = best_density


@dataclass
class DenseResult:
    U1: tuple[int, ...]
    U2: tuple[int, ...]
    density: Fraction
    threshold: Fraction
    pair: tuple[int, int]
    survivors: int
    meets_threshold: bool = True


def dense_threshold(q0: int, ell0: int, k: int, d0: int) -> Fraction:
    return (1 - Fraction(q0 * k, d0**ell0)) / math.comb(ell0, 2)


def prune_low_degree(graph: RedBlueGraph, d0: int) -> int:
    """Repeatedly delete vertices of blue degree < d0; returns the survivor bitset."""
    alive = (1 << graph.num_vertices) - 1
    deg = [b.bit_count() for b in graph.blue]
    stack = [v for v in range(graph.num_vertices) if deg[v] < d0]
    while stack:
        v = stack.pop()
        if not (alive >> v) & 1:
            continue
        alive &= ~(1 << v)
        for w in elements_of(graph.blue[v] & alive):
            deg[w] -= 1
            if deg[w] == d0 - 1:
                stack.append(w)
    return alive


def nonred_pairs(graph: RedBlueGraph, left: int, right: int) -> int:
    """Number of pairs (x, y) in left x right with no red edge between them (x = y counts)."""
    size = right.bit_count()
    return sum(size - (graph.red[x] & right).bit_count() for x in elements_of(left))


def find_dense_subgraphs(graph: RedBlueGraph, q0: int, ell0: int, d0: int, *,
                         best_effort: bool = False) -> DenseResult:
    """Neighbourhood pair whose product has a large non-red fraction.

    Low-degree vertices are pruned first (strictly below d0), then ordered
    pairs (u, v) of survivors are scanned in ascending order (only u = v when
    ell0 = 2) and the first pair whose surviving blue neighbourhoods have
    non-red fraction >= (1 - q0 k / d0^ell0) / C(ell0, 2) is returned.  With
    ``best_effort`` the densest pair is returned instead of raising.
    """
    if ell0 < 2:
        raise ValueError("ell0 must be at least 2")
    if d0 < 1:
        raise ValueError("d0 must be at least 1")
    k = graph.num_vertices
    if graph.num_blue_edges() < 2 * k * d0 and not best_effort:
        raise ValueError(f"need at least {2 * k * d0} blue edges, graph has {graph.num_blue_edges()}")
    threshold = dense_threshold(q0, ell0, k, d0)
    alive = prune_low_degree(graph, d0)
    if not alive and best_effort:
        alive = sum(1 << v for v in range(k) if graph.blue[v])
    if not alive:
        raise DenseSubgraphError("emptied", "pruning low-degree vertices left no vertices")
    survivors = elements_of(alive)
    nbhd = {v: graph.blue[v] & alive for v in survivors}
    best: tuple[Fraction, tuple[int, int]] | None = None
    for u in survivors:
        seconds = [u] if ell0 == 2 else survivors
        for v in seconds:
            left, right = nbhd[u], nbhd[v]
            total = left.bit_count() * right.bit_count()
            if total == 0:
                continue
            density = Fraction(nonred_pairs(graph, left, right), total)
            if density >= threshold:
                return DenseResult(tuple(elements_of(left)), tuple(elements_of(right)), density,
                                   threshold, (u, v), len(survivors))
            if best is None or density > best[0]:
                best = (density, (u, v))
    if best_effort and best is not None:
        u, v = best[1]
        return DenseResult(tuple(elements_of(nbhd[u])), tuple(elements_of(nbhd[v])), best[0],
                           threshold, (u, v), len(survivors), meets_threshold=False)
    raise DenseSubgraphError("no-pair", f"no neighbourhood pair reaches density {threshold}",
                             best[0] if best else None)
