"""2-CSP instances on a complete constraint graph, labelings and exact optimisation.

Labels are opaque identifiers; everything internal works on label indices.
Each edge constraint is either an explicit boolean matrix or an "equal keys"
relation, where label a of u and label b of v are compatible iff their keys
match.  The keyed form stores the consistency constraints produced by the SAT
reduction in linear rather than quadratic space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from ._bits import CapExceeded

Labeling = tuple[int, ...]
DEFAULT_OPT_CAP = 10**7


class PairConstraint:
    """Allowed label pairs as a dense boolean matrix indexed [label of u, label of v]."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=bool)
        if self.matrix.ndim != 2:
            raise ValueError("constraint matrix must be 2-dimensional")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def allows(self, a: int, b: int) -> bool:
        return bool(self.matrix[a, b])

    def row(self, a: int) -> np.ndarray:
        return self.matrix[a]

    def dense(self) -> np.ndarray:
        return self.matrix

    def transpose(self) -> "PairConstraint":
        return PairConstraint(self.matrix.T)

    def count(self) -> int:
        return int(self.matrix.sum())

    def to_json(self) -> dict:
        a, b = np.nonzero(self.matrix)
        return {"kind": "pairs", "shape": list(self.shape), "allowed": [[int(x), int(y)] for x, y in zip(a, b)]}


class KeyConstraint:
    """Label a of u and label b of v are compatible iff left_keys[a] == right_keys[b]."""

    def __init__(self, left_keys, right_keys):
        self.left_keys = np.asarray(left_keys, dtype=np.int64)
        self.right_keys = np.asarray(right_keys, dtype=np.int64)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.left_keys), len(self.right_keys))

    def allows(self, a: int, b: int) -> bool:
        return bool(self.left_keys[a] == self.right_keys[b])

    def row(self, a: int) -> np.ndarray:
        return self.right_keys == self.left_keys[a]

    def dense(self) -> np.ndarray:
        return np.equal.outer(self.left_keys, self.right_keys)

    def transpose(self) -> "KeyConstraint":
        return KeyConstraint(self.right_keys, self.left_keys)

    def count(self) -> int:
        left = dict(zip(*np.unique(self.left_keys, return_counts=True)))
        right = dict(zip(*np.unique(self.right_keys, return_counts=True)))
        return int(sum(c * right.get(key, 0) for key, c in left.items()))

    def to_json(self) -> dict:
        return {"kind": "equal-keys", "left_keys": self.left_keys.tolist(),
                "right_keys": self.right_keys.tolist()}


def _constraint_from_json(data: dict):
    if data["kind"] == "pairs":
        mat = np.zeros(tuple(data["shape"]), dtype=bool)
        for a, b in data["allowed"]:
            mat[a, b] = True
        return PairConstraint(mat)
    if data["kind"] == "equal-keys":
        return KeyConstraint(data["left_keys"], data["right_keys"])
    raise ValueError(f"unknown constraint kind {data['kind']!r}")


def _hashable(x):
    if isinstance(x, list):
        return tuple(_hashable(v) for v in x)
    return x


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


@dataclass(frozen=True, eq=False)
class Csp2Instance:
    alphabets: tuple[tuple[Hashable, ...], ...]
    constraints: Mapping[tuple[int, int], object]

    def __post_init__(self):
        alphabets = tuple(tuple(a) for a in self.alphabets)
        object.__setattr__(self, "alphabets", alphabets)
        k = len(alphabets)
        cons = dict(self.constraints)
        for u in range(k):
            for v in range(u + 1, k):
                if (u, v) not in cons:
                    raise ValueError(f"missing constraint for pair ({u}, {v})")
                if cons[(u, v)].shape != (len(alphabets[u]), len(alphabets[v])):
                    raise ValueError(f"constraint ({u}, {v}) has the wrong shape")
        extra = [p for p in cons if not (0 <= p[0] < p[1] < k)]
        if extra:
            raise ValueError(f"constraints on invalid pairs {extra}")
        object.__setattr__(self, "constraints", cons)

    @classmethod
    def from_pairs(cls, alphabets: Sequence[Sequence[Hashable]],
                   allowed: Mapping[tuple[int, int], Iterable[tuple[int, int]]]) -> "Csp2Instance":
        """Build from explicit allowed label-index pairs; absent pairs get an empty relation."""
        k = len(alphabets)
        cons = {}
        for u in range(k):
            for v in range(u + 1, k):
                mat = np.zeros((len(alphabets[u]), len(alphabets[v])), dtype=bool)
                for a, b in allowed.get((u, v), ()):
                    mat[a, b] = True
                for b, a in allowed.get((v, u), ()):
                    mat[a, b] = True
                cons[(u, v)] = PairConstraint(mat)
        return cls(tuple(tuple(a) for a in alphabets), cons)

    @property
    def num_vertices(self) -> int:
        return len(self.alphabets)

    @property
    def num_edges(self) -> int:
        return math.comb(self.num_vertices, 2)

    @property
    def unsat_trivial(self) -> bool:
        return any(len(a) == 0 for a in self.alphabets)

    def constraint(self, u: int, v: int):
        if u < v:
            return self.constraints[(u, v)]
        return self.constraints[(v, u)].transpose()

    def allows(self, u: int, a: int, v: int, b: int) -> bool:
        if u < v:
            return self.constraints[(u, v)].allows(a, b)
        return self.constraints[(v, u)].allows(b, a)

    def product_size(self) -> int:
        return math.prod(len(a) for a in self.alphabets)

    def to_json(self) -> dict:
        k = self.num_vertices
        return {
            "format": "csp2",
            "version": 1,
            "num_vertices": k,
            "alphabets": [[_jsonable(x) for x in a] for a in self.alphabets],
            "constraints": [dict(u=u, v=v, **self.constraints[(u, v)].to_json())
                            for u in range(k) for v in range(u + 1, k)],
        }

    @classmethod
    def from_json(cls, data) -> "Csp2Instance":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("format") != "csp2":
            raise ValueError("not a csp2 document")
        alphabets = tuple(tuple(_hashable(x) for x in a) for a in data["alphabets"])
        cons = {(c["u"], c["v"]): _constraint_from_json(c) for c in data["constraints"]}
        return cls(alphabets, cons)


def validate_labeling(instance: Csp2Instance, labeling: Sequence[int]) -> Labeling:
    if len(labeling) != instance.num_vertices:
        raise ValueError(f"labeling has {len(labeling)} entries for {instance.num_vertices} vertices")
    for v, a in enumerate(labeling):
        if not 0 <= a < len(instance.alphabets[v]):
            raise ValueError(f"label index {a} invalid for vertex {v}")
    return tuple(int(a) for a in labeling)


def satisfied_edges(instance: Csp2Instance, labeling: Sequence[int]) -> int:
    labeling = validate_labeling(instance, labeling)
    k = instance.num_vertices
    return sum(1 for u in range(k) for v in range(u + 1, k)
               if instance.constraints[(u, v)].allows(labeling[u], labeling[v]))


def labeling_value(instance: Csp2Instance, labeling: Sequence[int]) -> Fraction:
    """Fraction of the C(k,2) edges satisfied; 1 when there are no edges."""
    if instance.num_edges == 0:
        validate_labeling(instance, labeling)
        return Fraction(1)
    return Fraction(satisfied_edges(instance, labeling), instance.num_edges)


def labeling_to_json(instance: Csp2Instance, labeling: Sequence[int]) -> dict:
    labeling = validate_labeling(instance, labeling)
    return {"format": "labeling", "version": 1, "indices": list(labeling)}


def labeling_from_json(instance: Csp2Instance, data) -> Labeling:
    if isinstance(data, str):
        data = json.loads(data)
    if data.get("format") != "labeling":
        raise ValueError("not a labeling document")
    return validate_labeling(instance, data["indices"])


def _perfect_labeling(instance: Csp2Instance) -> Labeling | None:
    """Lexicographically first labeling satisfying every edge, by forward checking."""
    k = instance.num_vertices
    live = [np.ones(len(a), dtype=bool) for a in instance.alphabets]
    chosen: list[int] = []

    def rec(i: int, live: list[np.ndarray]) -> bool:
        if i == k:
            return True
        for a in np.flatnonzero(live[i]).tolist():
            nxt = live[:i + 1]
            ok = True
            for u in range(i + 1, k):
                mask = live[u] & instance.constraints[(i, u)].row(a)
                if not mask.any():
                    ok = False
                    break
                nxt.append(mask)
            if not ok:
                continue
            chosen.append(a)
            if rec(i + 1, nxt):
                return True
            chosen.pop()
        return False

    return tuple(chosen) if rec(0, live) else None


def csp_opt_bruteforce(instance: Csp2Instance, cap: int | None = DEFAULT_OPT_CAP) -> tuple[Fraction, Labeling]:
    """Exact optimum with the lexicographically smallest optimal labeling.

    A satisfiable instance is settled by a forward-checking search in
    lexicographic order.  Otherwise a branch and bound over the same order
    prunes any branch whose optimistic bound cannot beat the incumbent, which
    returns exactly what full enumeration would.
    """
    if instance.unsat_trivial:
        raise ValueError("instance has an empty alphabet; no labeling exists")
    size = instance.product_size()
    if cap is not None and size > cap:
        raise CapExceeded(f"labeling space of size {size} exceeds the cap of {cap}")
    k = instance.num_vertices
    if k <= 1:
        return Fraction(1), (0,) * k
    perfect = _perfect_labeling(instance)
    edges = instance.num_edges
    if perfect is not None:
        return Fraction(1), perfect

    best = [-1, None]
    chosen: list[int] = []

    def rec(i: int, sat: int, gains: list[np.ndarray]):
        # gains[u - i][b] = assigned vertices compatible with label b at u
        if i == k:
            if sat > best[0]:
                best[0], best[1] = sat, tuple(chosen)
            return
        rest = k - i
        optimistic = sat + sum(int(g.max()) for g in gains) + math.comb(rest, 2)
        if optimistic <= best[0]:
            return
        order = range(len(instance.alphabets[i]))
        for a in order:
            gained = int(gains[0][a])
            nxt = [gains[u - i] + instance.constraints[(i, u)].row(a) for u in range(i + 1, k)]
            bound = sat + gained + sum(int(g.max()) for g in nxt) + math.comb(rest - 1, 2)
            if bound <= best[0]:
                continue
            chosen.append(a)
            rec(i + 1, sat + gained, nxt)
            chosen.pop()

    rec(0, 0, [np.zeros(len(a), dtype=np.int64) for a in instance.alphabets])
    return Fraction(best[0], edges), best[1]


def greedy_star_labeling(instance: Csp2Instance) -> Labeling:
    """Fix the centre's label, then give every other vertex a label compatible with it if one exists.

    On a complete graph every vertex has maximum degree, so vertex 0 is the
    centre.  Among centre labels the one satisfying the most edges overall wins.
    """
    k = instance.num_vertices
    if instance.unsat_trivial:
        raise ValueError("instance has an empty alphabet; no labeling exists")
    if k == 0:
        return ()
    best_val, best = -1, None
    for a in range(len(instance.alphabets[0])):
        labeling = [a]
        for u in range(1, k):
            row = instance.constraints[(0, u)].row(a)
            hits = np.flatnonzero(row)
            labeling.append(int(hits[0]) if len(hits) else 0)
        val = satisfied_edges(instance, labeling)
        if val > best_val:
            best_val, best = val, tuple(labeling)
    return best
