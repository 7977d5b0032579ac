"""The 3-SAT to 2-CSP reduction and decoding of labelings back into assignments.

Vertex i of the CSP is the clause subset T_i; its labels are the partial
assignments to var(T_i) satisfying every clause of T_i, listed in lexicographic
order over the sorted variables.  Two labels are compatible iff they agree on
the shared variables.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from ._bits import CapExceeded, as_fraction
from .agree import FunctionFamily, agreement_decode, agreement_probability, bits_to_mask
from .csp import Csp2Instance, KeyConstraint, validate_labeling
from .formula import CnfFormula, clause_vars, eval_fraction, formula_from_json, formula_to_json
from .params import (ReductionParams, instantiate_params_eth, instantiate_params_gap_eth,
                     meets_soundness_threshold, soundness_threshold)
from .setsys import (SetSystem, check_all_subcollections_uniform, check_uniform,
                     find_disperser_violation, find_uniformity_violation)

__all__ = [
    "ReductionArtifact", "ReductionParams", "build_2csp", "check_set_translation",
    "decode_assignment", "instantiate_params_eth", "instantiate_params_gap_eth", "variable_sets",
]

DEFAULT_VAR_CAP = 20

Label = tuple[tuple[int, int], ...]


def _satisfying_rows(formula: CnfFormula, clauses: Sequence[int], variables: Sequence[int]) -> np.ndarray:
    """All bit rows over ``variables`` (lexicographic) that satisfy every clause."""
    v = len(variables)
    ints = np.arange(1 << v, dtype=np.int64)
    rows = ((ints[:, None] >> np.arange(v - 1, -1, -1, dtype=np.int64)) & 1).astype(np.uint8)
    col = {x: j for j, x in enumerate(variables)}
    keep = np.ones(1 << v, dtype=bool)
    for c in clauses:
        hit = np.zeros(1 << v, dtype=bool)
        for var, positive in formula.clauses[c]:
            hit |= rows[:, col[var]] == int(positive)
        keep &= hit
    return rows[keep]


def _keys(rows: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    key = np.zeros(len(rows), dtype=np.int64)
    for j in cols:
        key = (key << 1) | rows[:, j]
    return key


@dataclass(eq=False)
class ReductionArtifact:
    formula: CnfFormula
    clause_sets: SetSystem
    var_sets: SetSystem
    instance: Csp2Instance
    params: ReductionParams | None = None
    variables: tuple[tuple[int, ...], ...] = ()
    label_bits: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @cached_property
    def _label_index(self) -> list[dict[Label, int]]:
        return [{lab: i for i, lab in enumerate(alpha)} for alpha in self.instance.alphabets]

    def restriction_labeling(self, assignment: Sequence[int]):
        """Labeling that gives every vertex the restriction of ``assignment``; raises if some restriction is not a label."""
        out = []
        for i, vars_i in enumerate(self.variables):
            label = tuple((x, int(assignment[x])) for x in vars_i)
            idx = self._label_index[i].get(label)
            if idx is None:
                raise ValueError(f"restriction to vertex {i} violates one of its clauses")
            out.append(idx)
        return tuple(out)

    def label_of(self, vertex: int, index: int) -> Label:
        return self.instance.alphabets[vertex][index]

    def labels_as_family(self, labeling: Sequence[int]) -> FunctionFamily:
        labeling = validate_labeling(self.instance, labeling)
        values = []
        for i, a in enumerate(labeling):
            values.append(sum(1 << x for x, b in self.label_of(i, a) if b))
        return FunctionFamily(self.var_sets, tuple(values))

    def to_json(self) -> dict:
        return {
            "format": "reduction-artifact", "version": 1,
            "formula": formula_to_json(self.formula),
            "clause_sets": self.clause_sets.to_json(),
            "params": None if self.params is None else self.params.to_json(),
        }

    @classmethod
    def from_json(cls, data, cap: int = DEFAULT_VAR_CAP) -> "ReductionArtifact":
        """Rebuilds the instance from the formula and clause sets (the reduction is deterministic)."""
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("format") != "reduction-artifact":
            raise ValueError("not a reduction-artifact document")
        params = None if data.get("params") is None else ReductionParams.from_json(data["params"])
        return build_2csp(formula_from_json(data["formula"]), SetSystem.from_json(data["clause_sets"]),
                          cap=cap, params=params)


def build_2csp(formula: CnfFormula, clause_sets: SetSystem, cap: int = DEFAULT_VAR_CAP,
               params: ReductionParams | None = None) -> ReductionArtifact:
    if clause_sets.universe_size != formula.num_clauses:
        raise ValueError("clause_sets must live over the formula's clauses")
    variables, rows = [], []
    alphabets = []
    for i, T in enumerate(clause_sets.sets):
        vars_i = tuple(sorted(clause_vars(formula, T)))
        if len(vars_i) > cap:
            raise CapExceeded(f"vertex {i} has {len(vars_i)} variables, cap is {cap}")
        bits = _satisfying_rows(formula, sorted(T), vars_i)
        variables.append(vars_i)
        rows.append(bits)
        alphabets.append(tuple(tuple(zip(vars_i, map(int, row))) for row in bits))
    cons = {}
    k = clause_sets.k
    for u in range(k):
        pos_u = {x: j for j, x in enumerate(variables[u])}
        for v in range(u + 1, k):
            shared = [x for x in variables[v] if x in pos_u]
            pos_v = {x: j for j, x in enumerate(variables[v])}
            cons[(u, v)] = KeyConstraint(_keys(rows[u], [pos_u[x] for x in shared]),
                                         _keys(rows[v], [pos_v[x] for x in shared]))
    instance = Csp2Instance(tuple(alphabets), cons)
    var_sets = variable_sets(formula, clause_sets)
    return ReductionArtifact(formula, clause_sets, var_sets, instance, params,
                             tuple(variables), tuple(rows))


def variable_level_params(params: ReductionParams, Delta: int) -> ReductionParams:
    """Parameters for the variable-subset family: zeta and mu scaled by 3 Delta."""
    return ReductionParams(
        alpha=params.alpha, gamma=params.gamma, mu=3 * Delta * as_fraction(params.mu),
        zeta=3 * Delta * as_fraction(params.zeta), ell=params.ell, r=params.r, h=params.h,
        k=params.k, eps=params.eps, Delta=Delta, c=params.c, mode=params.mode + "/variables",
    )


def decode_assignment(artifact: ReductionArtifact, labeling: Sequence[int], *,
                      params: ReductionParams | None = None, best_effort: bool = False,
                      seed: int = 0, verify: bool = False) -> tuple[tuple[int, ...] | None, dict]:
    """Turn a labeling into a global assignment, with a report of every measured quantity.

    The agreement decoder runs on the variable-subset family with zeta and mu
    scaled by 3 Delta.  From its subcollection the h members closest to the
    decoded function form T*, whose mean disagreement gives nu and the lower
    bound 1 - mu - 3 nu Delta / gamma on the fraction of satisfied clauses.
    """
    params = params or artifact.params
    if params is None:
        raise ValueError("decoding needs reduction parameters")
    formula = artifact.formula
    Delta = formula.occurrence_bound
    family = artifact.labels_as_family(labeling)
    k, n = family.k, family.n
    mu, gamma = as_fraction(params.mu), as_fraction(params.gamma)
    delta = agreement_probability(family, 0)
    above = meets_soundness_threshold(delta, k, params.r, params.ell, params.h, mu)
    report: dict = {
        "agr": delta, "k": k, "n": n, "Delta": Delta,
        "soundness_threshold": {
            "formula": "agr >= (10 + 64*(r*ell)^2*k^(1/ell) + 65536*h*ell^2/mu)/k",
            "bound": soundness_threshold(k, params.r, params.ell, params.h, mu),
            "measured": delta, "holds": above,
        },
    }
    if not above and not best_effort:
        report["status"] = "below-threshold"
        return None, report
    var_params = variable_level_params(params, Delta)
    result = agreement_decode(family, var_params, seed=seed, verify=verify, best_effort=not above)
    report["decoder"] = result.to_json()
    report["within_theorem"] = above and result.within_theorem
    if not result.ok:
        report["status"] = result.status
        return None, report
    g = result.global_function
    chosen = list(result.subcollection)
    dis = family.disagreement_with(bits_to_mask(g), chosen).tolist()
    ranked = sorted(zip(dis, chosen))[: params.h]
    t_star = tuple(sorted(i for _, i in ranked))
    nu = Fraction(sum(x for x, _ in ranked), len(ranked) * n)
    bound = 1 - mu - 3 * nu * Delta / gamma
    value = eval_fraction(formula, g)
    uniform = check_uniform(artifact.clause_sets.subsystem(t_star), gamma, mu)
    report.update({
        "status": "ok",
        "subcollection_size": len(chosen),
        "t_star": list(t_star),
        "t_star_full_size": len(t_star) == params.h,
        "t_star_uniform": uniform,
        "nu": nu,
        "uncovered_variables": result.uncovered,
        "decoding_bound": {
            "formula": "val(g) >= 1 - mu - 3*nu*Delta/gamma",
            "substituted": f"{value} >= 1 - {mu} - 3*({nu})*{Delta}/({gamma})",
            "bound": bound, "measured": value, "holds": value >= bound,
        },
    })
    return g, report


def variable_sets(formula: CnfFormula, clause_sets: SetSystem) -> SetSystem:
    """The collection var(T_i) over the formula's variables."""
    return SetSystem(formula.num_vars, tuple(clause_vars(formula, T) for T in clause_sets.sets))


def check_set_translation(artifact, r: int, ell: int, eta, h: int, gamma, mu,
                          cap: int = 2_000_000) -> dict:
    """Check that uniformity and dispersion of the clause subsets carry over to the variable subsets.

    Clause-level (gamma, mu)-uniformity (whole collection and every size-h
    subcollection) should give (gamma, 3 Delta mu) at the variable level, and
    an (r, ell, eta)-disperser should give an (r, ell, 3 Delta eta)-disperser.
    ``artifact`` is a ReductionArtifact or a (formula, clause_sets) pair; the
    pair form skips alphabet enumeration, which large clause subsets make
    infeasible.
    """
    if isinstance(artifact, ReductionArtifact):
        formula, clauses, variables = artifact.formula, artifact.clause_sets, artifact.var_sets
    else:
        formula, clauses = artifact
        variables = variable_sets(formula, clauses)
    Delta = formula.occurrence_bound
    eta, gamma, mu = as_fraction(eta), as_fraction(gamma), as_fraction(mu)
    out: dict = {"Delta": Delta, "counterexamples": []}

    premise = check_uniform(clauses, gamma, mu)
    conclusion = check_uniform(variables, gamma, 3 * Delta * mu)
    out["uniform"] = {"premise": premise, "conclusion": conclusion, "holds": conclusion or not premise}
    if premise and not conclusion:
        out["counterexamples"].append({"property": "uniform", "subcollection": list(range(clauses.k))})

    if h <= clauses.k:
        bad = find_uniformity_violation(clauses, h, gamma, mu, cap)
        premise = bad is None
        bad_var = find_uniformity_violation(variables, h, gamma, 3 * Delta * mu, cap)
        conclusion = bad_var is None
        out["uniform_subcollections"] = {"premise": premise, "conclusion": conclusion,
                                         "holds": conclusion or not premise}
        if premise and not conclusion:
            out["counterexamples"].append({"property": "uniform_subcollections",
                                           "subcollection": list(bad_var)})

    bad = find_disperser_violation(clauses, r, ell, eta, cap)
    bad_var = find_disperser_violation(variables, r, ell, 3 * Delta * eta, cap)
    premise, conclusion = bad is None, bad_var is None
    out["disperser"] = {"premise": premise, "conclusion": conclusion, "holds": conclusion or not premise}
    if premise and not conclusion:
        out["counterexamples"].append({"property": "disperser", "family": [list(s) for s in bad_var]})
    out["holds"] = not out["counterexamples"]
    return out
