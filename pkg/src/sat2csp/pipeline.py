"""Staged pipeline (gen, sets, reduce, label, decode, verify, dsn) and the multi-seed lemma verifier.

Reports are plain dicts of JSON-safe values: rationals are written as
strings and nothing time-dependent is recorded, so a report is reproducible
from its configuration.  Every compared bound is stored with its formula and
the substituted values.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from ._bits import as_fraction
from .agree import (_jsonify, agreement_probability, build_consistency_graph, check_claim_disjoint_walks,
                    majority_decode, mean_disagreement)
from .csp import csp_opt_bruteforce, labeling_from_json, labeling_value
from .dsn import build_dsn, check_solution, dsn_opt_bruteforce
from .formula import CnfFormula, eval_fraction, formula_from_json, max_sat_bruteforce, parse_dimacs
from .params import ReductionParams
from .redblue import check_transitivity, dense_threshold, find_dense_subgraphs, nonred_pairs
from .reduction import build_2csp, check_set_translation, decode_assignment
from .setsys import (SetSystem, check_all_subcollections_uniform, check_disperser, check_sizes,
                     check_uniform, sample_random)
from .synth import clustered_graph, gen_planted, missing_block_family, noisy_family, random_csp

STAGES = ("gen", "sets", "reduce", "label", "decode", "verify", "dsn")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


@dataclass
class PipelineConfig:
    cnf: str | None = None
    sets: str | None = None
    labeling: str = "planted"
    num_vars: int = 12
    num_clauses: int = 12
    Delta: int = 3
    k: int = 4
    alpha: str = "1/2"
    params: dict = field(default_factory=dict)
    stages: tuple[str, ...] = STAGES
    var_cap: int = 20
    csp_cap: int = 1_000_000
    dsn_cap: int = 24
    setsys_cap: int = 200_000
    seed: int = 0
    best_effort: bool = True
    out: str | None = None
    report_format: str = "json"

    def __post_init__(self):
        for name in ("var_cap", "csp_cap", "dsn_cap", "setsys_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages: {sorted(unknown)}")
        if self.report_format not in ("json", "csv"):
            raise ValueError("report_format must be json or csv")


def _check(name: str, formula: str, substituted: str, measured, bound, holds: bool, enforced: bool = True) -> dict:
    return {"name": name, "formula": formula, "substituted": substituted, "measured": measured,
            "bound": bound, "holds": bool(holds), "enforced": enforced}


def default_params(cfg: PipelineConfig, k: int) -> ReductionParams:
    alpha = as_fraction(cfg.alpha)
    values = {"alpha": alpha, "gamma": alpha / 2, "mu": Fraction(1, 4), "zeta": Fraction(1, 16),
              "ell": 2, "r": 1, "h": min(2, k), "k": k}
    for key, v in cfg.params.items():
        values[key] = int(v) if key in ("ell", "r", "h", "k") else as_fraction(v)
    return ReductionParams(**values, mode="pipeline")


def _load_formula(path: str) -> CnfFormula:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return formula_from_json(text)
    return parse_dimacs(text)


def run_pipeline(cfg: PipelineConfig) -> tuple[int, dict]:
    """Run the configured stages; returns (exit code, report) and writes the report if ``cfg.out`` is set.

    Exit codes: 0 every enforced check holds, 1 some enforced check fails,
    2 a stage raised (the report's ``error.stage`` names it).
    """
    report: dict = {"format": "pipeline-report", "version": 1, "seed": cfg.seed,
                    "config": asdict(cfg), "stages": {}, "checks": []}
    state: dict = {}
    stage = "gen"
    try:
        for stage in STAGES:
            if stage in cfg.stages or stage in ("gen", "sets", "reduce"):
                info = _STAGE_FUNCS[stage](cfg, state, report["checks"])
                if info is not None:
                    report["stages"][stage] = info
    except Exception as exc:  # tagged and reported, never swallowed silently
        report["status"] = "error"
        report["error"] = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
        code = 2
    else:
        failed = [c["name"] for c in report["checks"] if c["enforced"] and not c["holds"]]
        report["violations"] = failed
        report["status"] = "violation" if failed else "pass"
        code = 1 if failed else 0
    report = _jsonify(report)
    if cfg.out:
        Path(cfg.out).write_text(render_report(report, cfg.report_format))
    return code, report


def render_report(report: dict, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["seed", "name", "formula", "substituted", "measured", "bound", "holds", "enforced"])
    for c in report.get("checks", []):
        writer.writerow([report.get("seed"), c["name"], c["formula"], c["substituted"],
                         c["measured"], c["bound"], c["holds"], c["enforced"]])
    return buf.getvalue()


def _stage_gen(cfg, state, checks):
    if cfg.cnf:
        if not Path(cfg.cnf).is_file():
            raise FileNotFoundError(f"no such input file: {cfg.cnf}")
        formula = _load_formula(cfg.cnf)
        planted = None
    else:
        formula, planted = gen_planted(cfg.num_vars, cfg.num_clauses, cfg.Delta, cfg.seed)
        value = eval_fraction(formula, planted)
        checks.append(_check("gen.planted_satisfies", "val(planted) = 1", f"{value} = 1", value, 1, value == 1))
        checks.append(_check("gen.occurrence_bound", "max occurrences <= Delta",
                             f"{formula.occurrence_bound} <= {cfg.Delta}", formula.occurrence_bound,
                             cfg.Delta, formula.occurrence_bound <= cfg.Delta))
    state["formula"], state["planted"] = formula, planted
    return {"num_vars": formula.num_vars, "num_clauses": formula.num_clauses,
            "Delta": formula.occurrence_bound, "planted": None if planted is None else list(planted),
            "source": cfg.cnf or "generated"}


def _stage_sets(cfg, state, checks):
    formula = state["formula"]
    if cfg.sets:
        if not Path(cfg.sets).is_file():
            raise FileNotFoundError(f"no such input file: {cfg.sets}")
        sets = SetSystem.from_json(Path(cfg.sets).read_text())
    else:
        sets = sample_random(formula.num_clauses, cfg.k, as_fraction(cfg.alpha), cfg.seed)
    state["sets"] = sets
    params = default_params(cfg, sets.k)
    state["params"] = params
    return {"k": sets.k, "sizes": sets.sizes(), "sets": [sorted(s) for s in sets.sets],
            "sizes_ok": check_sizes(sets, params.alpha),
            "uniform": check_uniform(sets, params.gamma, params.mu),
            "params": params.to_json()}


def _stage_reduce(cfg, state, checks):
    artifact = build_2csp(state["formula"], state["sets"], cap=cfg.var_cap, params=state["params"])
    state["artifact"] = artifact
    inst = artifact.instance
    info = {"alphabet_sizes": [len(a) for a in inst.alphabets], "product_size": inst.product_size()}
    if inst.product_size() <= cfg.csp_cap or state["planted"] is not None:
        value, labeling = csp_opt_bruteforce(inst, cap=None)
        info["csp_opt"] = value
        state["optimal"] = labeling
        if state["planted"] is not None or max_sat_bruteforce(state["formula"])[0] == 1:
            checks.append(_check("reduce.completeness", "val(Phi) = 1 => val(Gamma) = 1",
                                 f"val(Gamma) = {value}", value, 1, value == 1))
    return info


def _stage_label(cfg, state, checks):
    artifact = state["artifact"]
    mode = cfg.labeling
    if mode == "planted":
        if state["planted"] is None:
            raise ValueError("labeling 'planted' needs a generated formula")
        labeling = artifact.restriction_labeling(state["planted"])
    elif mode == "optimal":
        labeling = state.get("optimal") or csp_opt_bruteforce(artifact.instance, cap=cfg.csp_cap)[1]
    else:
        labeling = labeling_from_json(artifact.instance, Path(mode).read_text())
    state["labeling"] = labeling
    return {"mode": mode, "labeling": list(labeling), "value": labeling_value(artifact.instance, labeling)}


def _stage_decode(cfg, state, checks):
    if "labeling" not in state:
        raise ValueError("decode needs the label stage")
    g, report = decode_assignment(state["artifact"], state["labeling"], best_effort=cfg.best_effort,
                                  seed=cfg.seed)
    state["decoded"] = g
    bound = report.get("decoding_bound")
    if bound is not None:
        # the decoding lemma only speaks about a uniform T*
        checks.append(_check("decode.decoding_bound", bound["formula"], bound["substituted"],
                             bound["measured"], bound["bound"], bound["holds"],
                             enforced=bool(report["t_star_uniform"])))
    return report


def _stage_verify(cfg, state, checks):
    artifact, params = state["artifact"], state["params"]
    out = check_set_translation(artifact, params.r, params.ell, params.zeta, params.h, params.gamma,
                                params.mu, cap=cfg.setsys_cap)
    for name in ("uniform", "uniform_subcollections", "disperser"):
        if name in out:
            part = out[name]
            checks.append(_check(f"verify.translation.{name}", "premise at clause level => conclusion with 3*Delta",
                                 f"premise={part['premise']}, conclusion={part['conclusion']}",
                                 part["conclusion"], part["premise"], part["holds"]))
    if state.get("labeling") is not None:
        fam = artifact.labels_as_family(state["labeling"])
        zp = params.zeta_prime
        kappa = 1 - agreement_probability(fam, zp)
        g = majority_decode(fam, range(fam.k))
        mean = mean_disagreement(fam, g, range(fam.k))
        n = fam.n
        checks.append(_check("verify.majority_decoding", "mean^2 <= n^2*(kappa + zeta')",
                             f"({mean})^2 <= {n}^2*({kappa} + {zp})", mean, n * n * (kappa + zp),
                             mean * mean <= n * n * (kappa + zp)))
    return out


def _stage_dsn(cfg, state, checks):
    inst = state["artifact"].instance
    dsn = build_dsn(inst)
    positive = sum(1 for _, _, w in dsn.arcs if w > 0)
    info = {"vertices": dsn.num_vertices, "arcs": len(dsn.arcs), "demands": dsn.num_demands,
            "weighted_arcs": positive}
    if positive > cfg.dsn_cap or inst.num_vertices < 2:
        info["solved"] = False
        return info
    sol = dsn_opt_bruteforce(dsn, cap=cfg.dsn_cap)
    val = csp_opt_bruteforce(inst, cap=None)[0]
    info.update({"solved": True, "feasible": sol.feasible, "dsn_opt": sol.cost, "csp_opt": val})
    if sol.feasible:
        checks.append(_check("dsn.solution_valid", "chosen arcs meet every demand", "", True, True,
                             check_solution(dsn, sol)))
    if val == 1:
        checks.append(_check("dsn.completeness", "val = 1 => dsn_opt = 1", f"dsn_opt = {sol.cost}",
                             sol.cost, 1, sol.cost == 1))
    if sol.feasible and val > 0:
        prod = sol.cost**2 * val
        checks.append(_check("dsn.soundness_construction", "dsn_opt^2 * val >= 1/2",
                             f"{sol.cost}^2 * {val} >= 1/2", prod, Fraction(1, 2), prod >= Fraction(1, 2)))
        checks.append(_check("dsn.soundness_stated", "dsn_opt^2 * val >= 2", f"{sol.cost}^2 * {val} >= 2",
                             prod, 2, prod >= 2, enforced=False))
    return info


_STAGE_FUNCS: dict[str, Callable] = {
    "gen": _stage_gen, "sets": _stage_sets, "reduce": _stage_reduce, "label": _stage_label,
    "decode": _stage_decode, "verify": _stage_verify, "dsn": _stage_dsn,
}


# ---------------------------------------------------------------------------
# lemma verification over many seeds

def _lemma_transitivity(seed: int) -> dict:
    rng = np.random.default_rng([seed, 1])
    r, ell = int(rng.integers(1, 4)), int(rng.integers(2, 4))
    if seed % 2:
        zeta = Fraction(1, 6)
        fam = noisy_family(12, 8, seed, centers=2, min_support=10, flip_prob=0.15)
    else:
        zeta = Fraction(1, 24)
        fam = missing_block_family(6, 2, max(1, r - 1), seed)
    if not check_disperser(fam.supports, r, ell, zeta):
        return {"applicable": False}
    q = (r * ell) ** (2 * (ell - 1))
    ok, pair, count = check_transitivity(build_consistency_graph(fam, 0, zeta), q, ell)
    return {"applicable": True, "holds": ok, "r": r, "ell": ell, "q": q, "worst_pair": pair, "count": count}


def _lemma_transitivity_2(seed: int) -> dict:
    rng = np.random.default_rng([seed, 2])
    r = int(rng.integers(2, 4))
    if seed % 2:
        gamma, mu, zeta = Fraction(1, 2), Fraction(1, 4), Fraction(1, 12)
        fam = noisy_family(12, 8, seed + 10_000, centers=3, min_support=8, flip_prob=0.1)
    else:
        gamma, mu, zeta = Fraction(1, r), Fraction(1, 48), Fraction(1, 96)
        fam = missing_block_family(6, 2, r - 1, seed)
    if not check_all_subcollections_uniform(fam.supports, r, gamma, mu):
        return {"applicable": False}
    graph = build_consistency_graph(fam, zeta, mu + 2 * zeta / gamma)
    ok, pair, count = check_transitivity(graph, r - 1, 2)
    return {"applicable": True, "holds": ok, "r": r, "worst_pair": pair, "count": count}


def _lemma_dense(seed: int) -> dict:
    rng = np.random.default_rng([seed, 3])
    k = int(rng.integers(12, 31))
    graph = clustered_graph(k, int(rng.integers(2, 5)), seed)
    ell0 = int(rng.integers(2, 4))
    _, _, q0 = check_transitivity(graph, 0, ell0)
    d0 = graph.num_blue_edges() // (2 * k)
    if d0 < 1:
        return {"applicable": False}
    res = find_dense_subgraphs(graph, q0, ell0, d0)
    left, right = sum(1 << u for u in res.U1), sum(1 << u for u in res.U2)
    count = nonred_pairs(graph, left, right)
    thr = dense_threshold(q0, ell0, k, d0)
    holds = (len(res.U1) >= d0 and len(res.U2) >= d0
             and count >= thr * len(res.U1) * len(res.U2) and (ell0 > 2 or res.U1 == res.U2))
    return {"applicable": True, "holds": holds, "q0": q0, "ell0": ell0, "d0": d0, "density": res.density}


def _lemma_majority(seed: int) -> dict:
    rng = np.random.default_rng([seed, 4])
    n, k = int(rng.integers(4, 65)), int(rng.integers(2, 13))
    fam = noisy_family(n, k, seed, centers=int(rng.integers(1, 4)), min_support=1,
                       flip_prob=float(rng.random() * 0.3))
    zp = Fraction(int(rng.integers(0, 9)), 16)
    kappa = 1 - agreement_probability(fam, zp)
    g = majority_decode(fam, range(k))
    mean = mean_disagreement(fam, g, range(k))
    return {"applicable": True, "holds": mean * mean <= n * n * (kappa + zp), "mean": mean,
            "bound_squared": n * n * (kappa + zp)}


def _lemma_disjoint_walks(seed: int) -> dict:
    rng = np.random.default_rng([seed, 5])
    r, ell = int(rng.integers(1, 3)), int(rng.integers(2, 4))
    if seed % 2:
        zeta = Fraction(1, 6)
        fam = noisy_family(10, 7, seed + 20_000, centers=2, min_support=8, flip_prob=0.15)
    else:
        zeta = Fraction(1, 24)
        fam = missing_block_family(6, 2, max(1, r - 1), seed)
    if not check_disperser(fam.supports, r, ell, zeta):
        return {"applicable": False}
    out = check_claim_disjoint_walks(fam, zeta, r, ell)
    return {"applicable": True, "holds": out["holds"], "red_pairs": out["red_pairs"]}


def _lemma_completeness_and_decoding(seed: int) -> dict:
    cfg = PipelineConfig(num_vars=9, num_clauses=9, Delta=3, k=3, seed=seed,
                         stages=("gen", "sets", "reduce", "label", "decode"))
    code, report = run_pipeline(cfg)
    return {"applicable": True, "holds": code == 0, "violations": report.get("violations"),
            "error": report.get("error")}


def _lemma_set_translation(seed: int) -> dict:
    formula, _ = gen_planted(9, 9, 3, seed)
    sets = sample_random(9, 4, Fraction(1, 2), seed)
    out = check_set_translation(build_2csp(formula, sets), 1, 2, Fraction(1, 4), 2, Fraction(1, 4), Fraction(1, 4))
    return {"applicable": True, "holds": out["holds"], "counterexamples": out["counterexamples"]}


def _lemma_dsn(seed: int) -> dict:
    rng = np.random.default_rng([seed, 6])
    k = int(rng.integers(2, 4))
    inst = random_csp(k, [int(rng.integers(1, 3)) for _ in range(k)], seed, float(rng.random()))
    sol = dsn_opt_bruteforce(build_dsn(inst))
    val = csp_opt_bruteforce(inst)[0]
    holds = (val < 1 or sol.cost == 1) and (not sol.feasible or val == 0 or sol.cost**2 * val >= Fraction(1, 2))
    return {"applicable": True, "holds": holds, "val": val, "dsn_opt": sol.cost}


LEMMAS: dict[str, Callable[[int], dict]] = {
    "transitivity": _lemma_transitivity,
    "transitivity_2": _lemma_transitivity_2,
    "disjoint_walks": _lemma_disjoint_walks,
    "dense_subgraph": _lemma_dense,
    "majority_decoding": _lemma_majority,
    "set_translation": _lemma_set_translation,
    "completeness_and_decoding": _lemma_completeness_and_decoding,
    "dsn_construction": _lemma_dsn,
}


def verify_lemmas(seeds, lemmas=None) -> tuple[int, dict]:
    """Run each lemma check on every seed; exit code 1 if any applicable instance fails."""
    names = list(LEMMAS) if lemmas is None else list(lemmas)
    out: dict = {"format": "lemma-report", "version": 1, "seeds": list(seeds), "lemmas": {}}
    bad = False
    for name in names:
        checked = skipped = 0
        failures = []
        for seed in seeds:
            res = LEMMAS[name](seed)
            if not res["applicable"]:
                skipped += 1
                continue
            checked += 1
            if not res["holds"]:
                failures.append({"seed": seed, **res})
        bad |= bool(failures)
        out["lemmas"][name] = {"checked": checked, "skipped": skipped, "failures": failures}
    out["status"] = "violation" if bad else "pass"
    return (1 if bad else 0), _jsonify(out)
