"""Seeded generators for planted formulas, function families, red/blue graphs and small CSPs."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .agree import FunctionFamily
from .csp import Csp2Instance, PairConstraint
from .formula import Assignment, CnfFormula
from .redblue import RedBlueGraph
from .setsys import SetSystem


class InfeasibleError(ValueError):
    pass


def _occurrence_slots(num_vars: int, num_clauses: int, Delta: int, rng) -> list[int]:
    # every variable once, the rest spread over variables with spare capacity
    slots = list(range(num_vars))
    spare = np.full(num_vars, Delta - 1)
    for _ in range(3 * num_clauses - num_vars):
        open_vars = np.flatnonzero(spare > 0)
        v = int(rng.choice(open_vars, p=spare[open_vars] / spare[open_vars].sum()))
        spare[v] -= 1
        slots.append(v)
    rng.shuffle(slots)
    return slots


def _split_distinct(slots: list[int], rng, max_swaps: int = 10_000) -> list[list[int]] | None:
    triples = [slots[i:i + 3] for i in range(0, len(slots), 3)]
    for _ in range(max_swaps):
        bad = next((t for t in triples if len(set(t)) < 3), None)
        if bad is None:
            return triples
        pos = next(p for p in range(3) if bad.count(bad[p]) > 1)
        other = triples[int(rng.integers(len(triples)))]
        q = int(rng.integers(3))
        bad[pos], other[q] = other[q], bad[pos]
    return None


def gen_planted(num_vars: int, num_clauses: int, Delta: int, seed: int) -> tuple[CnfFormula, Assignment]:
    """Random 3-CNF satisfied by a random planted assignment, each variable used between 1 and Delta times."""
    if Delta < 1:
        raise ValueError("Delta must be at least 1")
    if num_vars < 3:
        raise InfeasibleError("need at least 3 variables for 3-literal clauses")
    if Delta * num_vars < 3 * num_clauses:
        raise InfeasibleError(f"Delta * num_vars = {Delta * num_vars} < 3 * num_clauses = {3 * num_clauses}")
    if num_vars > 3 * num_clauses:
        raise InfeasibleError(f"{num_vars} variables cannot all appear in {num_clauses} clauses")
    rng = np.random.default_rng([seed, num_vars, num_clauses, Delta])
    planted = tuple(int(b) for b in rng.integers(0, 2, num_vars))
    for _ in range(100):
        triples = _split_distinct(_occurrence_slots(num_vars, num_clauses, Delta, rng), rng)
        if triples is not None:
            break
    else:
        raise InfeasibleError("could not place variables into clauses with distinct variables")
    clauses = []
    for vars_ in triples:
        signs = [bool(s) for s in rng.integers(0, 2, 3)]
        if not any(signs[j] == bool(planted[v]) for j, v in enumerate(vars_)):
            j = int(rng.integers(3))
            signs[j] = bool(planted[vars_[j]])
        clauses.append(tuple(sorted(zip(vars_, signs))))
    return CnfFormula(num_vars, tuple(clauses)), planted


def planted_agreement_family(n: int, k: int, seed: int, *, exact_fraction=Fraction(19, 20),
                             holes: int = 4) -> tuple[FunctionFamily, tuple[int, ...]]:
    """Family around a planted global function, with near-full supports.

    Each support is [n] or [n] minus one of ``holes`` fixed elements, so any
    intersection of supports misses at most ``holes`` elements.  A member is an
    exact restriction of the planted function with probability
    ``exact_fraction``; the rest are split between one-to-three-bit
    perturbations and uniformly random functions.
    """
    rng = np.random.default_rng([seed, n, k])
    full = (1 << n) - 1
    missing = sorted(rng.choice(n, holes, replace=False).tolist()) if holes else []
    pool = [full] + [full & ~(1 << e) for e in missing]
    planted = tuple(int(b) for b in rng.integers(0, 2, n))
    g = sum(1 << x for x, b in enumerate(planted) if b)
    exact = float(exact_fraction)
    supports, values = [], []
    for _ in range(k):
        s = pool[int(rng.integers(len(pool)))]
        u = rng.random()
        if u < exact:
            v = g
        elif u < exact + (1 - exact) / 2:
            flips = 0
            for x in rng.integers(0, n, int(rng.integers(1, 4))):
                flips |= 1 << int(x)
            v = g ^ flips
        else:
            v = sum(1 << x for x, b in enumerate(rng.integers(0, 2, n)) if b)
        supports.append(s)
        values.append(v & s)
    return FunctionFamily(SetSystem.from_masks(n, supports), tuple(values)), planted


def noisy_family(n: int, k: int, seed: int, *, centers: int = 2, min_support: int | None = None,
                 flip_prob: float = 0.05) -> FunctionFamily:
    """Random supports of size at least ``min_support``; values are noisy copies of a few random centres."""
    rng = np.random.default_rng([seed, n, k, centers])
    min_support = n // 2 if min_support is None else min_support
    global_bits = rng.integers(0, 2, (centers, n))
    supports, values = [], []
    for _ in range(k):
        size = int(rng.integers(min_support, n + 1))
        s = sum(1 << int(x) for x in rng.choice(n, size, replace=False))
        bits = global_bits[int(rng.integers(centers))] ^ (rng.random(n) < flip_prob)
        supports.append(s)
        values.append(sum(1 << x for x, b in enumerate(bits) if b) & s)
    return FunctionFamily(SetSystem.from_masks(n, supports), tuple(values))


def missing_block_family(blocks: int, block_size: int, multiplicity: int, seed: int, *,
                         flip_prob: float = 0.5) -> FunctionFamily:
    """Supports are [n] minus one block; each block is missed by ``multiplicity`` supports.

    Values restrict a random global function, except that with probability
    ``flip_prob`` a member flips one random block.  Two members then clash only
    on a single block, and a blue path between them must run through a member
    missing that block, so red-filled 2-walks exist but stay few.  Any
    multiplicity + 1 supports cover the universe.
    """
    if blocks < 1 or block_size < 1 or multiplicity < 1:
        raise ValueError("blocks, block_size and multiplicity must be positive")
    rng = np.random.default_rng([seed, blocks, block_size, multiplicity])
    n = blocks * block_size
    full = (1 << n) - 1
    block_masks = [((1 << block_size) - 1) << (b * block_size) for b in range(blocks)]
    g = sum(1 << x for x, b in enumerate(rng.integers(0, 2, n)) if b)
    supports, values = [], []
    for miss in range(blocks):
        for _ in range(multiplicity):
            v = g
            if rng.random() < flip_prob:
                v ^= block_masks[int(rng.integers(blocks))]
            s = full & ~block_masks[miss]
            supports.append(s)
            values.append(v & s)
    return FunctionFamily(SetSystem.from_masks(n, supports), tuple(values))


def clustered_graph(k: int, clusters: int, seed: int, *, blue_keep: float = 0.9,
                    cross_blue: float = 0.02, red_prob: float = 0.9) -> RedBlueGraph:
    """Blue within clusters, mostly red across, with a few stray blue cross edges."""
    rng = np.random.default_rng([seed, k, clusters])
    label = rng.integers(0, clusters, k)
    blue = np.zeros((k, k), dtype=bool)
    red = np.zeros((k, k), dtype=bool)
    for u in range(k):
        for v in range(u + 1, k):
            x = rng.random()
            if label[u] == label[v]:
                blue[u, v] = x < blue_keep
            elif x < cross_blue:
                blue[u, v] = True
            elif x < cross_blue + red_prob:
                red[u, v] = True
    blue |= blue.T
    red |= red.T
    return RedBlueGraph.from_matrices(blue, red)


def random_csp(num_vertices: int, alphabet_sizes: Sequence[int], seed: int, density: float = 0.5) -> Csp2Instance:
    rng = np.random.default_rng([seed, num_vertices, *alphabet_sizes])
    alphabets = tuple(tuple(range(s)) for s in alphabet_sizes)
    cons = {}
    for u in range(num_vertices):
        for v in range(u + 1, num_vertices):
            cons[(u, v)] = PairConstraint(rng.random((alphabet_sizes[u], alphabet_sizes[v])) < density)
    return Csp2Instance(alphabets, cons)
