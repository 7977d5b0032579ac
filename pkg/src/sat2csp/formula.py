"""3-CNF formulas, assignments, clause satisfaction and an exhaustive MAX-SAT oracle.

A literal is a pair ``(var, positive)`` with a 0-based variable index.  DIMACS
text and the JSON form use the usual signed 1-based integers instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from ._bits import CapExceeded

Literal = tuple[int, bool]
Clause = tuple[Literal, ...]
Assignment = tuple[int, ...]

MAX_WIDTH = 3
DEFAULT_MAXSAT_CAP = 24


class DimacsError(ValueError):
    """Base class for DIMACS parse errors; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DimacsHeaderError(DimacsError):
    pass


class ClauseWidthError(DimacsError):
    pass


class LiteralRangeError(DimacsError):
    pass


class RepeatedVariableError(DimacsError):
    pass


def _literal(lit) -> Literal:
    if isinstance(lit, tuple):
        var, positive = lit
        return int(var), bool(positive)
    lit = int(lit)
    if lit == 0:
        raise ValueError("0 is not a literal")
    return abs(lit) - 1, lit > 0


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[Clause, ...]
    occurrence_bound: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        clauses = tuple(tuple(_literal(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        counts = [0] * self.num_vars
        for idx, clause in enumerate(clauses):
            if not 1 <= len(clause) <= MAX_WIDTH:
                raise ValueError(f"clause {idx} has {len(clause)} literals")
            seen = set()
            for var, _ in clause:
                if not 0 <= var < self.num_vars:
                    raise ValueError(f"clause {idx}: variable {var} out of range")
                if var in seen:
                    raise ValueError(f"clause {idx}: variable {var} repeated")
                seen.add(var)
                counts[var] += 1
        if any(c == 0 for c in counts):
            raise ValueError("every variable must appear in some clause; use from_clauses to compact")
        object.__setattr__(self, "occurrence_bound", max(counts, default=0))

    @classmethod
    def from_clauses(cls, clauses: Iterable[Iterable], num_vars: int | None = None) -> "CnfFormula":
        """Build a formula, dropping unused variables and renumbering the rest in order."""
        parsed = [tuple(_literal(l) for l in c) for c in clauses]
        used = sorted({v for c in parsed for v, _ in c})
        if num_vars is not None and used and used[-1] >= num_vars:
            raise ValueError(f"variable {used[-1]} out of range for {num_vars} variables")
        index = {v: i for i, v in enumerate(used)}
        compact = tuple(tuple((index[v], s) for v, s in c) for c in parsed)
        return cls(len(used), compact)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def clause_satisfied(self, idx: int, bits: Union[Sequence[int], Mapping[int, int]]) -> bool:
        """True if some literal of clause ``idx`` is true under a (possibly partial) assignment."""
        partial = isinstance(bits, Mapping)
        for var, positive in self.clauses[idx]:
            if partial and var not in bits:
                continue
            if bool(bits[var]) == positive:
                return True
        return False

    def occurrences(self) -> list[int]:
        counts = [0] * self.num_vars
        for clause in self.clauses:
            for var, _ in clause:
                counts[var] += 1
        return counts


def clause_vars(formula: CnfFormula, clause_indices: Iterable[int]) -> frozenset[int]:
    out: set[int] = set()
    for idx in clause_indices:
        if not 0 <= idx < formula.num_clauses:
            raise IndexError(f"clause index {idx} out of range")
        out.update(v for v, _ in formula.clauses[idx])
    return frozenset(out)


def _check_assignment(formula: CnfFormula, bits: Sequence[int]) -> None:
    if len(bits) != formula.num_vars:
        raise ValueError(f"assignment has {len(bits)} bits, formula has {formula.num_vars} variables")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("assignment bits must be 0 or 1")


def eval_fraction(formula: CnfFormula, bits: Sequence[int]) -> Fraction:
    _check_assignment(formula, bits)
    if not formula.clauses:
        return Fraction(1)
    sat = sum(1 for i in range(formula.num_clauses) if formula.clause_satisfied(i, bits))
    return Fraction(sat, formula.num_clauses)


def max_sat_bruteforce(formula: CnfFormula, cap: int = DEFAULT_MAXSAT_CAP,
                       chunk_bits: int = 16) -> tuple[Fraction, Assignment]:
    """Exact MAX-SAT by enumeration.

    Assignments are enumerated as integers whose most significant bit is
    variable 0, so integer order is lexicographic order of bit vectors and the
    first maximum found is the lexicographically smallest witness.
    """
    n = formula.num_vars
    if n > cap:
        raise CapExceeded(f"{n} variables exceeds the brute-force cap of {cap}")
    m = formula.num_clauses
    if m == 0:
        return Fraction(1), (0,) * n
    best_count, best_int = -1, 0
    step = 1 << min(n, chunk_bits)
    for start in range(0, 1 << n, step):
        ints = np.arange(start, start + step, dtype=np.int64)
        sat = np.zeros(step, dtype=np.int32)
        for clause in formula.clauses:
            hit = np.zeros(step, dtype=bool)
            for var, positive in clause:
                bit = (ints >> (n - 1 - var)) & 1
                hit |= bit == int(positive)
            sat += hit
        pos = int(np.argmax(sat))
        if sat[pos] > best_count:
            best_count, best_int = int(sat[pos]), start + pos
            if best_count == m:
                break
    bits = tuple((best_int >> (n - 1 - v)) & 1 for v in range(n))
    return Fraction(best_count, m), bits


def parse_dimacs(text: Union[str, bytes]) -> CnfFormula:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    declared_vars = declared_clauses = None
    clauses: list[list[Literal]] = []
    current: list[Literal] = []
    current_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line == "%":
            continue
        if line.startswith("p"):
            parts = line.split()
            if declared_vars is not None:
                raise DimacsHeaderError(lineno, "duplicate header")
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsHeaderError(lineno, f"malformed header {line!r}")
            try:
                declared_vars, declared_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsHeaderError(lineno, f"malformed header {line!r}") from None
            if declared_vars < 0 or declared_clauses < 0:
                raise DimacsHeaderError(lineno, "negative counts in header")
            continue
        if declared_vars is None:
            raise DimacsHeaderError(lineno, "clause before header")
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise LiteralRangeError(lineno, f"not an integer literal: {token!r}") from None
            if not current:
                current_line = lineno
            if lit == 0:
                clauses.append(_finish_clause(current, current_line))
                current = []
                continue
            if abs(lit) > declared_vars:
                raise LiteralRangeError(lineno, f"literal {lit} outside 1..{declared_vars}")
            current.append(_literal(lit))
    if declared_vars is None:
        raise DimacsHeaderError(1, "missing header")
    if current:
        clauses.append(_finish_clause(current, current_line))
    return CnfFormula.from_clauses(clauses, declared_vars)


def _finish_clause(lits: list[Literal], line: int) -> list[Literal]:
    out: list[Literal] = []
    for lit in lits:
        if lit in out:
            continue
        if (lit[0], not lit[1]) in out:
            raise RepeatedVariableError(line, f"variable {lit[0] + 1} appears with both signs")
        out.append(lit)
    if not 1 <= len(out) <= MAX_WIDTH:
        raise ClauseWidthError(line, f"clause has {len(out)} literals, expected 1..{MAX_WIDTH}")
    return out


def _signed(lit: Literal) -> int:
    var, positive = lit
    return var + 1 if positive else -(var + 1)


def to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    for clause in formula.clauses:
        lines.append(" ".join(str(_signed(l)) for l in clause) + " 0")
    return "\n".join(lines) + "\n"


def formula_to_json(formula: CnfFormula) -> dict:
    return {
        "format": "cnf",
        "version": 1,
        "num_vars": formula.num_vars,
        "clauses": [[_signed(l) for l in c] for c in formula.clauses],
    }


def formula_from_json(data: Union[dict, str]) -> CnfFormula:
    if isinstance(data, str):
        data = json.loads(data)
    if data.get("format") != "cnf":
        raise ValueError("not a cnf document")
    return CnfFormula.from_clauses(data["clauses"], data["num_vars"])
