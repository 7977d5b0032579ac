"""Slow, independent reference implementations used to cross-check the package.

Nothing here imports the package's algorithms: only plain data (clauses,
sets as frozensets, adjacency as Python sets) crosses the boundary.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations, product


# formula ---------------------------------------------------------------------

def clause_true(clause, bits) -> bool:
    return any(bits[v] == int(pos) for v, pos in clause)


def value_of(clauses, bits) -> Fraction:
    if not clauses:
        return Fraction(1)
    return Fraction(sum(clause_true(c, bits) for c in clauses), len(clauses))


def max_sat_reverse(clauses, num_vars):
    """Walks assignments from all-ones down to all-zeros; the last best seen is the lex-smallest."""
    best, witness = Fraction(-1), None
    for code in range((1 << num_vars) - 1, -1, -1):
        bits = [(code >> (num_vars - 1 - i)) & 1 for i in range(num_vars)]
        v = value_of(clauses, bits)
        if v >= best:
            best, witness = v, tuple(bits)
    return best, witness


# set systems -----------------------------------------------------------------

def uniform_oracle(sets, m, gamma, mu) -> bool:
    k = len(sets)
    good = sum(1 for u in range(m) if Fraction(sum(u in s for s in sets), k) >= gamma)
    return good >= (1 - Fraction(mu)) * m


def all_subcollections_uniform_oracle(sets, m, h, gamma, mu) -> bool:
    # second combination generator: index tuples built by recursion, not itertools
    k = len(sets)

    def rec(start, chosen):
        if len(chosen) == h:
            yield chosen
            return
        for i in range(start, k - (h - len(chosen)) + 1):
            yield from rec(i + 1, chosen + [i])

    return all(uniform_oracle([sets[i] for i in idx], m, gamma, mu) for idx in rec(0, []))


def disperser_oracle(sets, m, r, ell, eta) -> bool:
    """Every label vector in {0..r}^k whose classes 1..r have sizes 1..ell is a family to check."""
    k = len(sets)
    need = (1 - Fraction(eta)) * m
    for labels in product(range(r + 1), repeat=k):
        classes = [[i for i in range(k) if labels[i] == c] for c in range(1, r + 1)]
        if any(not 1 <= len(c) <= ell for c in classes):
            continue
        union = set()
        for c in classes:
            inter = set(range(m))
            for i in c:
                inter &= sets[i]
            union |= inter
        if len(union) < need:
            return False
    return True


# csp -------------------------------------------------------------------------

def csp_opt_reverse_vertices(alphabet_sizes, allowed):
    """``allowed[(u, v)]`` is a set of (a, b) for u < v.  Enumerates with the last vertex outermost."""
    k = len(alphabet_sizes)
    edges = k * (k - 1) // 2
    best, witness = Fraction(-1), None
    for rev in product(*[range(s) for s in reversed(alphabet_sizes)]):
        lab = tuple(reversed(rev))
        sat = sum((lab[u], lab[v]) in allowed[(u, v)] for u in range(k) for v in range(u + 1, k))
        val = Fraction(sat, edges) if edges else Fraction(1)
        if val > best or (val == best and lab < witness):
            best, witness = val, lab
    return best, witness


# red/blue graphs -------------------------------------------------------------

def blue_walks_naive(k, blue, ell) -> int:
    return sum(all(frozenset((w[i], w[i + 1])) in blue for i in range(ell))
               for w in product(range(k), repeat=ell + 1))


def red_filled_naive(k, blue, red, ell, u, v) -> list[tuple[int, ...]]:
    out = []
    for mid in product(range(k), repeat=ell - 1):
        w = (u, *mid, v)
        if not all(frozenset((w[i], w[i + 1])) in blue for i in range(ell)):
            continue
        if all(frozenset((w[i], w[j])) in red for i in range(ell + 1) for j in range(i + 2, ell + 1)):
            out.append(w)
    return out


def nonred_fraction(red, left, right) -> Fraction:
    cnt = sum(1 for x in left for y in right if frozenset((x, y)) not in red)
    return Fraction(cnt, len(left) * len(right))


# function families -----------------------------------------------------------

def disa(f, g) -> int:
    return sum(1 for x in f if x in g and f[x] != g[x])


def agreement_oracle(funcs, n, zeta) -> Fraction:
    k = len(funcs)
    return Fraction(sum(disa(f, g) <= Fraction(zeta) * n for f in funcs for g in funcs), k * k)


def majority_oracle(funcs, n):
    out = []
    for x in range(n):
        votes = [f[x] for f in funcs if x in f]
        out.append(1 if votes.count(1) > votes.count(0) else 0)
    return tuple(out)


# directed Steiner network ----------------------------------------------------

def _reachable(arcs, s):
    seen, stack = {s}, [s]
    while stack:
        u = stack.pop()
        for t, h in arcs:
            if t == u and h not in seen:
                seen.add(h)
                stack.append(h)
    return seen


def dsn_opt_oracle(arcs, demands):
    """Subsets of positive arcs by increasing size; returns the minimum cost or None if infeasible."""
    free = [(t, h) for t, h, w in arcs if w == 0]
    paid = [(t, h, w) for t, h, w in arcs if w > 0]
    best = None
    for size in range(len(paid) + 1):
        for subset in combinations(paid, size):
            cost = sum((w for _, _, w in subset), Fraction(0))
            if best is not None and cost >= best:
                continue
            chosen = free + [(t, h) for t, h, _ in subset]
            if all(t in _reachable(chosen, s) for s, t in demands):
                best = cost
    return best


def isqrt_ceil(x: int) -> int:
    return math.isqrt(x - 1) + 1 if x > 0 else 0
