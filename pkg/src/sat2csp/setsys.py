"""Subset collections over a universe [m] and verifiers for their combinatorial properties.

The three properties of interest are set sizes, the intersection-disperser
property and uniformity.  Verifiers enumerate exhaustively, but they group
identical sets by content first: both properties depend only on the multiset of
set contents, so a system with many duplicate sets is checked as fast as its
distinct sets allow.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from itertools import combinations, combinations_with_replacement
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._bits import CapExceeded, as_fraction, elements_of, mask_to_bool

DEFAULT_CAP = 2_000_000


@dataclass(frozen=True)
class SetSystem:
    universe_size: int
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        sets = tuple(frozenset(int(e) for e in s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        if not sets:
            raise ValueError("a set system needs at least one set")
        for i, s in enumerate(sets):
            if s and (min(s) < 0 or max(s) >= self.universe_size):
                raise ValueError(f"set {i} has an element outside [0, {self.universe_size})")

    @classmethod
    def from_masks(cls, universe_size: int, masks: Iterable[int]) -> "SetSystem":
        return cls(universe_size, tuple(frozenset(elements_of(mk)) for mk in masks))

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "SetSystem":
        rows = np.asarray(rows, dtype=bool)
        return cls(rows.shape[1], tuple(frozenset(np.flatnonzero(r).tolist()) for r in rows))

    @property
    def k(self) -> int:
        return len(self.sets)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << e for e in s) for s in self.sets)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]

    def membership(self) -> np.ndarray:
        out = np.zeros((self.k, self.universe_size), dtype=bool)
        for i, s in enumerate(self.sets):
            if s:
                out[i, list(s)] = True
        return out

    def subsystem(self, indices: Iterable[int]) -> "SetSystem":
        return SetSystem(self.universe_size, tuple(self.sets[i] for i in indices))

    def has_duplicates(self) -> bool:
        return len(set(self.sets)) < self.k

    def to_json(self) -> dict:
        return {
            "format": "setsystem",
            "version": 1,
            "universe_size": self.universe_size,
            "sets": [sorted(s) for s in self.sets],
        }

    @classmethod
    def from_json(cls, data) -> "SetSystem":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("format") != "setsystem":
            raise ValueError("not a setsystem document")
        return cls(data["universe_size"], tuple(frozenset(s) for s in data["sets"]))


def sample_random(m: int, k: int, alpha, seed: int) -> SetSystem:
    """k independent subsets of [m], each element kept with probability alpha."""
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    return SetSystem.from_rows(rng.random((k, m)) < alpha)


def check_sizes(system: SetSystem, alpha) -> bool:
    limit = 2 * as_fraction(alpha) * system.universe_size
    return all(len(s) <= limit for s in system.sets)


def _good_elements(counts: np.ndarray, total: int, gamma: Fraction) -> np.ndarray:
    # count/total >= gamma, cross-multiplied to stay in integers
    return counts * gamma.denominator >= gamma.numerator * total


def check_uniform(system: SetSystem, gamma, mu) -> bool:
    gamma, mu = as_fraction(gamma), as_fraction(mu)
    counts = system.membership().sum(axis=0, dtype=np.int64)
    good = int(_good_elements(counts, system.k, gamma).sum())
    return good >= (1 - mu) * system.universe_size


@dataclass(frozen=True)
class _Contents:
    masks: tuple[int, ...]
    multiplicity: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]


def _content_classes(system: SetSystem) -> _Contents:
    order: dict[int, int] = {}
    members: list[list[int]] = []
    for i, mk in enumerate(system.masks):
        c = order.setdefault(mk, len(order))
        if c == len(members):
            members.append([])
        members[c].append(i)
    return _Contents(tuple(order), tuple(len(m) for m in members), tuple(tuple(m) for m in members))


def _count_bounded_vectors(mult: Sequence[int], h: int) -> int:
    # coefficient of x^h in prod (1 + x + ... + x^mult_i)
    poly = [1] + [0] * h
    for cap in mult:
        cap = min(cap, h)
        nxt = [0] * (h + 1)
        for deg, coef in enumerate(poly):
            if coef:
                for extra in range(min(cap, h - deg) + 1):
                    nxt[deg + extra] += coef
        poly = nxt
    return poly[h]


def _bounded_vectors(mult: Sequence[int], h: int) -> Iterator[tuple[int, ...]]:
    t = len(mult)
    suffix = [0] * (t + 1)
    for i in range(t - 1, -1, -1):
        suffix[i] = suffix[i + 1] + min(mult[i], h)
    vec = [0] * t

    def rec(i: int, left: int):
        if left == 0:
            yield tuple(vec)
            return
        if i == t or suffix[i] < left:
            return
        for c in range(min(mult[i], left), -1, -1):
            vec[i] = c
            yield from rec(i + 1, left - c)
        vec[i] = 0

    yield from rec(0, h)


def find_uniformity_violation(system: SetSystem, h: int, gamma, mu,
                              cap: int = DEFAULT_CAP) -> tuple[int, ...] | None:
    """Return the indices of a size-h subcollection that is not (gamma, mu)-uniform, or None."""
    if not 1 <= h <= system.k:
        raise ValueError(f"subcollection size {h} must lie in 1..{system.k}")
    gamma, mu = as_fraction(gamma), as_fraction(mu)
    contents = _content_classes(system)
    total = _count_bounded_vectors(contents.multiplicity, h)
    if total > cap:
        raise CapExceeded(f"{total} distinct subcollections exceed the cap of {cap}")
    member = np.array([mask_to_bool(mk, system.universe_size) for mk in contents.masks], dtype=np.int64)
    need = (1 - mu) * system.universe_size
    batch: list[tuple[int, ...]] = []

    def flush() -> tuple[int, ...] | None:
        vecs = np.array(batch, dtype=np.int64)
        freq = vecs @ member
        good = _good_elements(freq, h, gamma).sum(axis=1)
        for row, g in zip(batch, good.tolist()):
            if g < need:
                return row
        return None

    for vec in _bounded_vectors(contents.multiplicity, h):
        batch.append(vec)
        if len(batch) == 4096:
            bad = flush()
            if bad is not None:
                return _expand_counts(contents, bad)
            batch = []
    if batch:
        bad = flush()
        if bad is not None:
            return _expand_counts(contents, bad)
    return None


def _expand_counts(contents: _Contents, counts: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for c, n in enumerate(counts):
        out.extend(contents.members[c][:n])
    return tuple(sorted(out))


def check_all_subcollections_uniform(system: SetSystem, h: int, gamma, mu,
                                     cap: int = DEFAULT_CAP) -> bool:
    return find_uniformity_violation(system, h, gamma, mu, cap) is None


def find_disperser_violation(system: SetSystem, r: int, ell: int, eta,
                             cap: int = DEFAULT_CAP) -> tuple[tuple[int, ...], ...] | None:
    """Search for r disjoint nonempty subcollections of size <= ell whose
    union of intersections covers fewer than (1 - eta) m elements.

    Returns one such family as tuples of set indices, or None.  Empty
    subcollections are skipped: their intersection is the whole universe, so
    any family containing one passes anyway.
    """
    if r < 1 or ell < 1:
        raise ValueError("r and ell must be positive")
    eta = as_fraction(eta)
    need = (1 - eta) * system.universe_size
    contents = _content_classes(system)
    t = len(contents.masks)
    full = (1 << system.universe_size) - 1
    subs: list[tuple[tuple[int, ...], int]] = []
    for size in range(1, min(ell, t) + 1):
        for combo in combinations(range(t), size):
            inter = full
            for c in combo:
                inter &= contents.masks[c]
            subs.append((combo, inter))
    families = math.comb(len(subs) + r - 1, r)
    if families > cap:
        raise CapExceeded(f"up to {families} subcollection families exceed the cap of {cap}")
    usage = [0] * t
    chosen: list[int] = []
    mult = contents.multiplicity

    def dfs(start: int, union: int) -> bool:
        if chosen and union.bit_count() >= need:
            return False  # adding more subcollections only grows the union
        if len(chosen) == r:
            return True
        for idx in range(start, len(subs)):
            combo, inter = subs[idx]
            if any(usage[c] >= mult[c] for c in combo):
                continue
            for c in combo:
                usage[c] += 1
            chosen.append(idx)
            if dfs(idx, union | inter):
                return True
            chosen.pop()
            for c in combo:
                usage[c] -= 1
        return False

    if not dfs(0, 0):
        return None
    next_copy = [0] * t
    family = []
    for idx in chosen:
        picked = []
        for c in subs[idx][0]:
            picked.append(contents.members[c][next_copy[c]])
            next_copy[c] += 1
        family.append(tuple(sorted(picked)))
    return tuple(family)


def check_disperser(system: SetSystem, r: int, ell: int, eta, cap: int = DEFAULT_CAP) -> bool:
    return find_disperser_violation(system, r, ell, eta, cap) is None


def union_of_intersections(system: SetSystem, family: Iterable[Iterable[int]]) -> frozenset[int]:
    full = (1 << system.universe_size) - 1
    union = 0
    for sub in family:
        inter = full
        for i in sub:
            inter &= system.masks[i]
        union |= inter
    return frozenset(elements_of(union))


def lemma_r(alpha, eta, ell: int) -> int:
    return math.ceil(math.log(2 / float(eta)) / float(alpha) ** ell)


def lemma_h(alpha, mu) -> int:
    return math.ceil(8 * math.log(2 / float(mu)) / float(alpha))


def well_behaved_m0(k: int, alpha, mu, eta, ell: int) -> float:
    """Minimum universe size at which the well-behaved construction is guaranteed."""
    a, u, e = float(alpha), float(mu), float(eta)
    if min(a, u, e) <= 0:
        return math.inf
    lk = math.log2(k) if k > 1 else 0.0
    return 1000 * (lk * math.log2(1 / u) / (a * u * u)
                   + ell * math.log2(1 / e) * lk / (a ** ell * e)
                   + 1 / a + 1)


@dataclass
class WellBehavedCert:
    alpha: Fraction
    r: int
    ell: int
    eta: Fraction
    h: int
    gamma: Fraction
    mu: Fraction
    m0: int | None = None
    m0_formula: float | None = None
    m0_override: bool = False
    duplicates: bool = False
    blocks: list[int] = field(default_factory=list)
    checked: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = as_fraction(self.alpha)
        self.eta = as_fraction(self.eta)
        self.gamma = as_fraction(self.gamma)
        self.mu = as_fraction(self.mu)

    @classmethod
    def from_lemma(cls, alpha, mu, eta, ell: int) -> "WellBehavedCert":
        """Targets with r, h and gamma = alpha/2 derived from alpha, mu, eta and ell."""
        alpha = as_fraction(alpha)
        return cls(alpha=alpha, r=lemma_r(alpha, eta, ell), ell=ell, eta=as_fraction(eta),
                   h=lemma_h(alpha, mu), gamma=alpha / 2, mu=as_fraction(mu))

    def to_json(self) -> dict:
        return {
            "format": "wellbehaved-cert",
            "version": 1,
            "alpha": str(self.alpha), "r": self.r, "ell": self.ell, "eta": str(self.eta),
            "h": self.h, "gamma": str(self.gamma), "mu": str(self.mu),
            "m0": self.m0, "m0_formula": self.m0_formula, "m0_override": self.m0_override,
            "duplicates": self.duplicates, "blocks": list(self.blocks),
            "checked": dict(self.checked),
        }

    @classmethod
    def from_json(cls, data) -> "WellBehavedCert":
        if isinstance(data, str):
            data = json.loads(data)
        fields = {k: data[k] for k in ("alpha", "r", "ell", "eta", "h", "gamma", "mu")}
        cert = cls(**{k: (Fraction(v) if isinstance(v, str) else v) for k, v in fields.items()})
        cert.m0 = data.get("m0")
        cert.m0_formula = data.get("m0_formula")
        cert.m0_override = bool(data.get("m0_override", False))
        cert.duplicates = bool(data.get("duplicates", False))
        cert.blocks = list(data.get("blocks", []))
        cert.checked = dict(data.get("checked", {}))
        return cert


def certify(system: SetSystem, targets: WellBehavedCert, cap: int = DEFAULT_CAP) -> WellBehavedCert:
    """Run all three verifiers and return a copy of ``targets`` with the results recorded."""
    checked = {
        "sizes": check_sizes(system, targets.alpha),
        "disperser": check_disperser(system, targets.r, targets.ell, targets.eta, cap),
    }
    if targets.h <= system.k:
        checked["uniform"] = check_all_subcollections_uniform(system, targets.h, targets.gamma,
                                                              targets.mu, cap)
    else:
        # no subcollection of that size exists
        checked["uniform"] = True
        checked["uniform_vacuous"] = True
    return replace(targets, checked=checked, duplicates=system.has_duplicates(),
                   blocks=list(targets.blocks))


def _passes(system: SetSystem, targets: WellBehavedCert, cap: int) -> bool:
    return all(v for key, v in certify(system, targets, cap).checked.items() if key != "uniform_vacuous")


def block_sizes(m: int, m0: int) -> list[int]:
    """Split m into floor(m/m0) balanced blocks, each of size in [m0, 2 m0]."""
    if m0 < 1:
        raise ValueError("m0 must be positive")
    if m < m0:
        raise ValueError(f"m = {m} is smaller than m0 = {m0}")
    count = m // m0
    base, extra = divmod(m, count)
    return [base + 1] * extra + [base] * (count - extra)


class BlockSearchError(RuntimeError):
    def __init__(self, block: int, size: int, message: str):
        super().__init__(f"block {block} (size {size}): {message}")
        self.block = block
        self.size = size


def search_block(size: int, k: int, targets: WellBehavedCert, *, seed: int = 0,
                 exhaustive: bool = False, max_tries: int = 500,
                 cap: int = DEFAULT_CAP) -> SetSystem | None:
    """Find k subsets of [size] meeting all targets block-locally, or None."""
    if exhaustive:
        limit = 2 * targets.alpha * size
        cands = [mk for mk in range(1 << size) if mk.bit_count() <= limit]
        cands.sort(key=lambda mk: (-mk.bit_count(), mk))
        for tries, combo in enumerate(combinations_with_replacement(cands, k)):
            if tries >= cap:
                return None
            system = SetSystem.from_masks(size, combo)
            if _passes(system, targets, cap):
                return system
        return None
    for attempt in range(max_tries):
        rng = np.random.default_rng([seed, size, attempt])
        system = SetSystem.from_rows(rng.random((k, size)) < float(targets.alpha))
        if _passes(system, targets, cap):
            return system
    return None


def construct_deterministic(m: int, k: int, targets: WellBehavedCert, *, m0: int | None = None,
                            unsafe_m0: bool = False, seed: int = 0, exhaustive: bool = False,
                            max_tries: int = 500,
                            cap: int = DEFAULT_CAP) -> tuple[SetSystem, WellBehavedCert]:
    """Block-partition construction of a well-behaved system.

    The universe is cut into blocks of size in [m0, 2 m0]; each block gets its
    own k-set collection passing all verifiers, and set i of the result is the
    union of set i over all blocks.  Blocks of equal size share one search.
    """
    formula_m0 = well_behaved_m0(k, targets.alpha, targets.mu, targets.eta, targets.ell)
    if m0 is None:
        m0 = math.ceil(formula_m0)
    elif m0 < formula_m0 and not unsafe_m0:
        raise ValueError(f"m0 = {m0} is below the guaranteed value {formula_m0:.4g}; pass unsafe_m0=True")
    sizes = block_sizes(m, m0)
    found: dict[int, SetSystem] = {}
    for block, size in enumerate(sizes):
        if size in found:
            continue
        system = search_block(size, k, targets, seed=seed, exhaustive=exhaustive,
                              max_tries=max_tries, cap=cap)
        if system is None:
            raise BlockSearchError(block, size, "no collection passed all verifiers")
        found[size] = system
    masks = [0] * k
    offset = 0
    for size in sizes:
        for i, mk in enumerate(found[size].masks):
            masks[i] |= mk << offset
        offset += size
    result = SetSystem.from_masks(m, masks)
    cert = certify(result, targets, cap)
    cert.m0 = m0
    cert.m0_formula = formula_m0
    cert.m0_override = m0 < formula_m0
    cert.blocks = sizes
    return result, cert
