"""Families of local bit functions, their consistency graphs and the constructive agreement decoder.

A local function is stored as two bitmasks over the universe: its support and
its values (bits outside the support are zero).  Pairwise disagreement counts
are computed one row at a time with packed uint64 words, so a family with tens
of thousands of members never needs a k-by-k matrix in memory.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._bits import (CapExceeded, as_fraction, bool_row_to_mask, elements_of, mask_to_bool,
                    masks_to_words, popcount_rows)
from .params import ReductionParams, meets_agreement_threshold
from .redblue import (DenseResult, DenseSubgraphError, RedBlueGraph, find_dense_subgraphs, nonred_pairs)
from .setsys import SetSystem, check_all_subcollections_uniform, check_disperser


@dataclass(frozen=True, eq=False)
class FunctionFamily:
    supports: SetSystem
    values: tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) != self.supports.k:
            raise ValueError("need one value mask per support set")
        for i, (v, s) in enumerate(zip(values, self.supports.masks)):
            if v & ~s:
                raise ValueError(f"function {i} has values outside its support")

    def __eq__(self, other):
        if not isinstance(other, FunctionFamily):
            return NotImplemented
        return self.supports == other.supports and self.values == other.values

    __hash__ = None

    @classmethod
    def from_assignments(cls, universe_size: int, functions: Sequence[Mapping[int, int]]) -> "FunctionFamily":
        supports = SetSystem(universe_size, tuple(frozenset(f) for f in functions))
        values = tuple(sum(1 << x for x, b in f.items() if b) for f in functions)
        return cls(supports, values)

    @classmethod
    def restrictions(cls, supports: SetSystem, global_bits: Sequence[int]) -> "FunctionFamily":
        g = sum(1 << x for x, b in enumerate(global_bits) if b)
        return cls(supports, tuple(g & s for s in supports.masks))

    @property
    def n(self) -> int:
        return self.supports.universe_size

    @property
    def k(self) -> int:
        return self.supports.k

    def function(self, i: int) -> dict[int, int]:
        v = self.values[i]
        return {x: (v >> x) & 1 for x in sorted(self.supports.sets[i])}

    def subfamily(self, indices: Sequence[int]) -> "FunctionFamily":
        return FunctionFamily(self.supports.subsystem(indices), tuple(self.values[i] for i in indices))

    @cached_property
    def _words(self) -> tuple[np.ndarray, np.ndarray]:
        return masks_to_words(self.supports.masks, self.n), masks_to_words(self.values, self.n)

    def disagreement_row(self, i: int) -> np.ndarray:
        """disa(f_i, f_j) for every j."""
        sup, val = self._words
        return popcount_rows((val[i] ^ val) & sup[i] & sup)

    def disagreement_with(self, global_mask: int, indices: Sequence[int] | None = None) -> np.ndarray:
        """disa(g, f_j) for a total function g given as a bitmask."""
        sup, val = self._words
        if indices is not None:
            idx = np.asarray(indices, dtype=np.int64)
            sup, val = sup[idx], val[idx]
        g = masks_to_words([global_mask], self.n)[0]
        return popcount_rows((val ^ g) & sup)

    def to_json(self) -> dict:
        return {
            "format": "function-family", "version": 1, "universe_size": self.n,
            "supports": [sorted(s) for s in self.supports.sets],
            "values": [[(v >> x) & 1 for x in sorted(s)] for v, s in zip(self.values, self.supports.sets)],
        }

    @classmethod
    def from_json(cls, data) -> "FunctionFamily":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("format") != "function-family":
            raise ValueError("not a function-family document")
        funcs = [dict(zip(s, bits)) for s, bits in zip(data["supports"], data["values"])]
        return cls.from_assignments(data["universe_size"], funcs)


def disagreement(family: FunctionFamily, i: int, j: int) -> int:
    s = family.supports.masks
    return ((family.values[i] ^ family.values[j]) & s[i] & s[j]).bit_count()


def consistency_bound(zeta, n: int) -> int:
    """Largest integer disagreement that is still at most zeta * n."""
    return math.floor(as_fraction(zeta) * n)


def agreement_count(family: FunctionFamily, zeta) -> int:
    """Ordered pairs (diagonal included) with disagreement at most zeta * n."""
    bound = consistency_bound(zeta, family.n)
    return sum(int((family.disagreement_row(i) <= bound).sum()) for i in range(family.k))


def agreement_probability(family: FunctionFamily, zeta) -> Fraction:
    return Fraction(agreement_count(family, zeta), family.k**2)


def build_consistency_graph(family: FunctionFamily, zeta, zeta_prime) -> RedBlueGraph:
    """Blue: disagreement <= zeta n.  Red: disagreement > zeta' n.  Neither in between."""
    zeta, zeta_prime = as_fraction(zeta), as_fraction(zeta_prime)
    if not 0 <= zeta <= zeta_prime:
        raise ValueError("need 0 <= zeta <= zeta_prime")
    blue_bound = consistency_bound(zeta, family.n)
    red_bound = consistency_bound(zeta_prime, family.n)
    blue, red = [], []
    for i in range(family.k):
        row = family.disagreement_row(i)
        b = row <= blue_bound
        b[i] = False
        blue.append(bool_row_to_mask(b))
        red.append(bool_row_to_mask(row > red_bound))
    return RedBlueGraph(family.k, blue, red)


def majority_decode(family: FunctionFamily, sub: Sequence[int]) -> tuple[int, ...]:
    """Element-wise strict majority over the covering functions in ``sub``; ties and uncovered give 0."""
    sub = list(sub)
    if not sub:
        raise ValueError("majority decoding needs a nonempty subcollection")
    n = family.n
    sup = np.array([mask_to_bool(family.supports.masks[i], n) for i in sub])
    val = np.array([mask_to_bool(family.values[i], n) for i in sub])
    ones = (sup & val).sum(axis=0)
    zeros = (sup & ~val).sum(axis=0)
    return tuple(int(b) for b in (ones > zeros))


def uncovered_elements(family: FunctionFamily, sub: Iterable[int]) -> list[int]:
    covered = 0
    for i in sub:
        covered |= family.supports.masks[i]
    return [x for x in range(family.n) if not (covered >> x) & 1]


def bits_to_mask(bits: Sequence[int]) -> int:
    return sum(1 << x for x, b in enumerate(bits) if b)


def mean_disagreement(family: FunctionFamily, global_bits: Sequence[int], sub: Sequence[int]) -> Fraction:
    """E over S in sub of disa(g, f_S), exactly."""
    sub = list(sub)
    dis = family.disagreement_with(bits_to_mask(global_bits), sub)
    return Fraction(int(dis.sum()), len(sub))


@dataclass
class DecodeResult:
    status: str
    within_theorem: bool
    subcollection: tuple[int, ...] = ()
    global_function: tuple[int, ...] | None = None
    mean_disagreement: Fraction | None = None
    agr_measured: Fraction | None = None
    uncovered: int = 0
    failed_stage: str | None = None
    thresholds: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)
    markov_subcollection: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        return _jsonify({
            "format": "decode-result", "version": 1,
            "status": self.status, "within_theorem": self.within_theorem,
            "failed_stage": self.failed_stage,
            "subcollection": list(self.subcollection),
            "global_function": None if self.global_function is None else list(self.global_function),
            "mean_disagreement": self.mean_disagreement, "agr_measured": self.agr_measured,
            "uncovered": self.uncovered, "markov_subcollection_size": len(self.markov_subcollection),
            "thresholds": self.thresholds, "stages": self.stages,
        })


def _jsonify(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _pick_subsets(graph: RedBlueGraph, U1: Sequence[int], U2: Sequence[int], d: int, target: Fraction,
                  seed: int, retry_cap: int, exhaustive_limit: int):
    """Size-d subsets of U1 and U2 whose product has non-red fraction >= target.

    Returns (A, B, fraction, tries, method); A and B are None if nothing was found,
    in which case the fraction is the best one seen.
    """
    rng = np.random.default_rng(seed)
    best = (Fraction(-1), None, None)
    arr1, arr2 = np.asarray(U1), np.asarray(U2)
    for attempt in range(1, retry_cap + 1):
        A = sorted(rng.choice(arr1, d, replace=False).tolist())
        B = sorted(rng.choice(arr2, d, replace=False).tolist())
        frac = Fraction(nonred_pairs(graph, sum(1 << a for a in A), sum(1 << b for b in B)), d * d)
        if frac >= target:
            return A, B, frac, attempt, "random"
        if frac > best[0]:
            best = (frac, A, B)
        if len(U1) == d and len(U2) == d:
            break
    if len(U1) <= exhaustive_limit and len(U2) <= exhaustive_limit:
        for A in combinations(U1, d):
            ma = sum(1 << a for a in A)
            for B in combinations(U2, d):
                frac = Fraction(nonred_pairs(graph, ma, sum(1 << b for b in B)), d * d)
                if frac >= target:
                    return list(A), list(B), frac, retry_cap, "exhaustive"
    return None, None, best[0], retry_cap, "failed" if best[1] is None else "best"


def agreement_decode(family: FunctionFamily, params: ReductionParams, *, seed: int = 0,
                     verify: bool = False, best_effort: bool = False, retry_cap: int = 1000,
                     exhaustive_limit: int = 20) -> DecodeResult:
    """Constructive agreement decoding.

    Stages: consistency graph G(F, 0, zeta); dense neighbourhood pair for
    q0 = (r ell)^(2(ell-1)), ell0 = ell, d0 = floor((delta k - 1)/4); size-d
    subsets with non-red fraction >= 1/ell^2; generalized graph with
    zeta' = mu + 2 zeta / gamma on their union; a second dense search with
    ell0 = 2, q0 = h; majority decoding on the result.

    Below the agreement threshold the decoder declines unless ``best_effort``
    is set, in which case stage guarantees are relaxed (densest pair instead of
    a qualifying one, degrees clamped to 1) and ``within_theorem`` is False.
    """
    k, n = family.k, family.n
    r, ell, h = params.r, params.ell, params.h
    zeta, gamma, mu = (as_fraction(params.zeta), as_fraction(params.gamma), as_fraction(params.mu))
    zeta_prime = mu + 2 * zeta / gamma
    stages: dict = {}
    thresholds: dict = {}

    if verify:
        stages["verify"] = {
            "disperser": check_disperser(family.supports, r, ell, zeta),
            "uniform": h <= k and check_all_subcollections_uniform(family.supports, h, gamma, mu),
        }

    graph = build_consistency_graph(family, 0, zeta)
    delta = Fraction(2 * graph.num_blue_edges() + k, k * k)
    above = meets_agreement_threshold(delta, k, r, ell)
    thresholds["agreement"] = {
        "formula": "delta >= (10 + 64*(r*ell)^2*k^(1/ell))/k",
        "substituted": f"{delta} >= (10 + 64*({r}*{ell})^2*{k}^(1/{ell}))/{k}",
        "bound": (10 + 64 * (r * ell) ** 2 * k ** (1 / ell)) / k,
        "measured": delta, "holds": above,
    }
    result = DecodeResult(status="ok", within_theorem=above, agr_measured=delta,
                          thresholds=thresholds, stages=stages)
    if not above and not best_effort:
        result.status = "below-threshold"
        return result
    relaxed = not above

    def fail(stage: str, **info) -> DecodeResult:
        stages[stage] = info
        result.status = "stage-failed"
        result.failed_stage = stage
        return result

    d = math.floor((delta * k - 1) / 4)
    if d < 1:
        if not relaxed:
            return fail("degree", d=d, required=1)
        d = 1
    q0 = (r * ell) ** (2 * (ell - 1))
    try:
        first = find_dense_subgraphs(graph, q0, ell, d, best_effort=relaxed)
    except (DenseSubgraphError, ValueError) as exc:
        if not relaxed:
            return fail("dense-1", reason=str(exc), q0=q0, ell0=ell, d0=d)
        everyone = tuple(range(k))
        first = DenseResult(everyone, everyone, Fraction(0), Fraction(0), (0, 0), k, meets_threshold=False)
    stages["dense-1"] = {"q0": q0, "ell0": ell, "d0": d, "pair": first.pair, "U1": len(first.U1),
                         "U2": len(first.U2), "density": first.density, "threshold": first.threshold,
                         "meets_threshold": first.meets_threshold, "survivors": first.survivors}

    size = min(d, len(first.U1), len(first.U2))
    if size < d and not relaxed:
        return fail("subsets", reason="neighbourhood smaller than d", d=d)
    target = Fraction(1, ell * ell)
    A, B, frac, tries, method = _pick_subsets(graph, first.U1, first.U2, size, target, seed,
                                              retry_cap, exhaustive_limit)
    if A is None:
        if not relaxed:
            return fail("subsets", best_fraction=frac, required=target, tries=tries)
        A, B = list(first.U1[:size]), list(first.U2[:size])
        frac = Fraction(nonred_pairs(graph, sum(1 << a for a in A), sum(1 << b for b in B)), size * size)
        method = "prefix"
    stages["subsets"] = {"d": size, "fraction": frac, "required": target, "tries": tries, "method": method}

    union = sorted(set(A) | set(B))
    sub = family.subfamily(union)
    graph2 = build_consistency_graph(sub, zeta, zeta_prime)
    d2 = graph2.num_blue_edges() // (2 * len(union))
    if d2 < 1:
        if not relaxed:
            return fail("degree-2", d_prime=d2, required=1)
        d2 = 1
    try:
        second = find_dense_subgraphs(graph2, h, 2, d2, best_effort=relaxed)
    except (DenseSubgraphError, ValueError) as exc:
        if not relaxed:
            return fail("dense-2", reason=str(exc), q0=h, d0=d2)
        # nothing dense to extract: keep the whole union
        everyone = tuple(range(len(union)))
        second = DenseResult(everyone, everyone, Fraction(0), Fraction(0), (0, 0), len(union),
                             meets_threshold=False)
    chosen = tuple(union[i] for i in second.U1)
    stages["dense-2"] = {"q0": h, "ell0": 2, "d0": d2, "vertices": len(union),
                         "blue_edges": graph2.num_blue_edges(), "pair": second.pair,
                         "density": second.density, "threshold": second.threshold,
                         "meets_threshold": second.meets_threshold, "size": len(chosen)}

    g = majority_decode(family, chosen)
    dis = family.disagreement_with(bits_to_mask(g), chosen)
    mean = Fraction(int(dis.sum()), len(chosen))
    result.subcollection = chosen
    result.global_function = g
    result.mean_disagreement = mean
    result.uncovered = len(uncovered_elements(family, chosen))

    inner = Fraction(65536 * h * ell**6) / (delta * k) + mu + 2 * zeta / gamma
    size_bound = delta * k / (128 * ell * ell)
    thresholds["size"] = {"formula": "|U'| >= delta*k/(128*ell^2)",
                          "substituted": f"{len(chosen)} >= ({delta})*{k}/(128*{ell}^2)",
                          "bound": size_bound, "measured": len(chosen), "holds": len(chosen) >= size_bound}
    thresholds["disagreement"] = {
        "formula": "mean^2 <= n^2*(65536*h*ell^6/(delta*k) + mu + 2*zeta/gamma)",
        "substituted": f"({mean})^2 <= {n}^2*(65536*{h}*{ell}^6/(({delta})*{k}) + {mu} + 2*({zeta})/({gamma}))",
        "bound_squared": n * n * inner, "measured": mean, "holds": mean * mean <= n * n * inner,
    }
    # Markov: at least half of U' is within twice the mean
    markov = tuple(i for i, x in zip(chosen, dis.tolist()) if x <= 2 * mean)
    beta_sq = 4 * inner
    thresholds["markov"] = {
        "formula": "|S''| >= delta*k/(256*ell^2) and disa^2 <= beta^2*n^2 with beta = 2*sqrt(...)",
        "size": len(markov), "size_bound": delta * k / (256 * ell * ell),
        "size_holds": len(markov) >= delta * k / (256 * ell * ell),
        "each_holds": all(int(x) ** 2 <= beta_sq * n * n for i, x in zip(chosen, dis.tolist())
                          if x <= 2 * mean),
    }
    result.markov_subcollection = markov
    return result


def _walk_interiors(graph: RedBlueGraph, u: int, v: int, p: int, cap: int, counter: list[int]) -> set[int]:
    """Interior vertex sets (as bitmasks) of blue p-walks from u to v."""
    out: set[int] = set()
    path: list[int] = []

    def rec(last: int, depth: int):
        if depth == p - 1:
            if graph.is_blue(last, v):
                counter[0] += 1
                if counter[0] > cap:
                    raise CapExceeded(f"more than {cap} walks enumerated")
                out.add(sum(1 << w for w in path))
            return
        for w in elements_of(graph.blue[last]):
            path.append(w)
            rec(w, depth + 1)
            path.pop()

    rec(u, 0)
    return out


def _has_disjoint(sets: list[int], r: int) -> tuple[int, ...] | None:
    sets = sorted(sets, key=lambda s: (s.bit_count(), s))
    chosen: list[int] = []

    def rec(start: int, used: int) -> bool:
        if len(chosen) == r:
            return True
        for i in range(start, len(sets)):
            if not sets[i] & used:
                chosen.append(sets[i])
                if rec(i + 1, used | sets[i]):
                    return True
                chosen.pop()
        return False

    return tuple(chosen) if rec(0, 0) else None


def check_claim_disjoint_walks(family: FunctionFamily, zeta, r: int, ell: int,
                               cap: int = 1_000_000) -> dict:
    """For every red pair of G(F, zeta) and 2 <= p <= ell, look for r blue p-walks with disjoint interiors."""
    graph = build_consistency_graph(family, 0, zeta)
    counter = [0]
    violations = []
    pairs = 0
    for u, v in graph.red_edges():
        pairs += 1
        for p in range(2, ell + 1):
            interiors = _walk_interiors(graph, u, v, p, cap, counter)
            witness = _has_disjoint(list(interiors), r)
            if witness is not None:
                violations.append({"pair": (u, v), "p": p,
                                   "interiors": [elements_of(s) for s in witness]})
    return {"red_pairs": pairs, "walks_enumerated": counter[0], "violations": violations,
            "holds": not violations}


def block_planted_family(n: int, k: int, delta, seed: int,
                         supports: SetSystem | None = None) -> FunctionFamily:
    """Split k functions into 1/delta equal groups; group j restricts its own random global function."""
    delta = as_fraction(delta)
    groups = 1 / delta
    if groups.denominator != 1 or k % groups.numerator:
        raise ValueError("1/delta must be an integer dividing k")
    groups = groups.numerator
    rng = np.random.default_rng(seed)
    globals_ = rng.integers(0, 2, size=(groups, n))
    if supports is None:
        supports = SetSystem(n, tuple(frozenset(range(n)) for _ in range(k)))
    per = k // groups
    values = []
    for i, s in enumerate(supports.masks):
        g = bool_row_to_mask(globals_[i // per].astype(bool))
        values.append(g & s)
    return FunctionFamily(supports, tuple(values))


def max_consistent_locals(family: FunctionFamily, beta) -> tuple[int, int]:
    """Exhaustive over all 2^n global functions: the most locals any one is beta-consistent with.

    Returns (count, global function as a bitmask); the smallest mask wins ties.
    """
    n = family.n
    if n > 22:
        raise CapExceeded("exhaustive global search is limited to n <= 22")
    bound = consistency_bound(beta, n)
    everything = np.arange(1 << n, dtype=np.uint64)
    counts = np.zeros(1 << n, dtype=np.int64)
    for s, v in zip(family.supports.masks, family.values):
        dis = np.bitwise_count((everything ^ np.uint64(v)) & np.uint64(s))
        counts += dis <= bound
    best = int(np.argmax(counts))
    return int(counts[best]), best
