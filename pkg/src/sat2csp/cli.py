"""Command-line entry point.  Exit codes: 0 pass, 1 property violation, 2 usage or input error."""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from ._bits import CapExceeded, as_fraction
from .agree import FunctionFamily, _jsonify, agreement_decode, build_consistency_graph
from .csp import Csp2Instance, csp_opt_bruteforce, labeling_from_json, labeling_to_json
from .dsn import DsnInstance, build_dsn, dsn_opt_bruteforce
from .formula import formula_from_json, formula_to_json, parse_dimacs, to_dimacs
from .params import ReductionParams
from .pipeline import LEMMAS, PipelineConfig, render_report, run_pipeline, verify_lemmas
from .redblue import (DenseSubgraphError, RedBlueGraph, check_transitivity, count_blue_walks,
                      count_red_filled, find_dense_subgraphs, walk_census)
from .reduction import ReductionArtifact, build_2csp, decode_assignment
from .setsys import (BlockSearchError, SetSystem, WellBehavedCert, certify, construct_deterministic,
                     sample_random)
from .synth import gen_planted


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text()


def _read_json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _emit(data, out: str | None) -> None:
    text = data if isinstance(data, str) else json.dumps(_jsonify(data), sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_formula(path: str):
    text = _read(path)
    return formula_from_json(text) if text.lstrip().startswith("{") else parse_dimacs(text)


def _load_params(path: str | None) -> ReductionParams | None:
    return None if path is None else ReductionParams.from_json(_read_json(path))


def cmd_gen(a) -> int:
    formula, planted = gen_planted(a.num_vars, a.num_clauses, a.Delta, a.seed)
    if a.out and a.out.endswith(".json"):
        _emit(formula_to_json(formula), a.out)
    else:
        _emit(to_dimacs(formula), a.out)
    if a.planted_out:
        _emit({"format": "assignment", "version": 1, "seed": a.seed, "bits": list(planted)}, a.planted_out)
    return 0


def cmd_sets(a) -> int:
    if a.check:
        system = SetSystem.from_json(_read_json(a.check))
        alpha = as_fraction(a.alpha)
        gamma = alpha / 2 if a.gamma is None else as_fraction(a.gamma)
        targets = WellBehavedCert(alpha=alpha, r=a.r, ell=a.ell, eta=as_fraction(a.eta), h=a.h,
                                  gamma=gamma, mu=as_fraction(a.mu))
        cert = certify(system, targets, cap=a.cap)
        _emit(cert.to_json(), a.out)
        return 0 if all(cert.checked.values()) else 1
    if a.deterministic:
        targets = WellBehavedCert.from_lemma(as_fraction(a.alpha), as_fraction(a.mu), as_fraction(a.eta), a.ell)
        system, cert = construct_deterministic(a.m, a.k, targets, m0=a.m0, unsafe_m0=a.unsafe_m0,
                                               seed=a.seed, exhaustive=a.exhaustive, cap=a.cap)
        if a.cert_out:
            _emit(cert.to_json(), a.cert_out)
    else:
        system = sample_random(a.m, a.k, as_fraction(a.alpha), a.seed)
    _emit(system.to_json(), a.out)
    return 0


def cmd_reduce(a) -> int:
    formula = _load_formula(a.cnf)
    sets = SetSystem.from_json(_read_json(a.sets))
    artifact = build_2csp(formula, sets, cap=a.var_cap, params=_load_params(a.params))
    _emit(artifact.to_json(), a.out)
    if a.csp_out:
        _emit(artifact.instance.to_json(), a.csp_out)
    return 0


def cmd_solve(a) -> int:
    data = _read_json(a.instance)
    if data.get("format") == "reduction-artifact":
        instance = ReductionArtifact.from_json(data).instance
    else:
        instance = Csp2Instance.from_json(data)
    value, labeling = csp_opt_bruteforce(instance, cap=a.cap)
    _emit({**labeling_to_json(instance, labeling), "value": str(value)}, a.out)
    return 0


def cmd_decode(a) -> int:
    artifact = ReductionArtifact.from_json(_read_json(a.artifact))
    labeling = labeling_from_json(artifact.instance, _read(a.labeling))
    params = _load_params(a.params) or artifact.params
    if params is None:
        raise UsageError("no reduction parameters: pass --params or reduce with --params")
    g, report = decode_assignment(artifact, labeling, params=params,
                                  best_effort=a.best_effort, seed=a.seed)
    report["seed"] = a.seed
    report["assignment"] = None if g is None else list(g)
    _emit(report, a.out)
    if g is None:
        return 1 if report.get("status") not in ("below-threshold",) else 0
    bound = report["decoding_bound"]
    return 1 if report["t_star_uniform"] and not bound["holds"] else 0


def cmd_verify_lemmas(a) -> int:
    seeds = range(a.start, a.start + a.seeds)
    code, report = verify_lemmas(seeds, a.lemma or None)
    _emit(report, a.out)
    return code


def cmd_report(a) -> int:
    cfg_data = _read_json(a.config) if a.config else {}
    overrides = {k: v for k, v in {
        "cnf": a.cnf, "sets": a.sets, "seed": a.seed, "out": a.out, "report_format": a.format,
        "num_vars": a.num_vars, "num_clauses": a.num_clauses, "Delta": a.Delta, "k": a.k,
        "labeling": a.labeling,
    }.items() if v is not None}
    cfg_data.update(overrides)
    if "stages" in cfg_data:
        cfg_data["stages"] = tuple(cfg_data["stages"])
    try:
        cfg = PipelineConfig(**cfg_data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad pipeline configuration: {exc}") from exc
    code, report = run_pipeline(cfg)
    if not cfg.out:
        sys.stdout.write(render_report(report, cfg.report_format))
    if code == 2:
        err = report["error"]
        print(f"error in stage {err['stage']}: {err['message']}", file=sys.stderr)
    return code


def cmd_dsn_reduce(a) -> int:
    data = _read_json(a.csp)
    instance = (ReductionArtifact.from_json(data).instance if data.get("format") == "reduction-artifact"
                else Csp2Instance.from_json(data))
    _emit(build_dsn(instance).to_json(), a.out)
    return 0


def cmd_dsn_solve(a) -> int:
    sol = dsn_opt_bruteforce(DsnInstance.from_json(_read_json(a.dsn)), cap=a.cap)
    _emit(sol.to_json(), a.out)
    return 0


def _graph(path: str) -> RedBlueGraph:
    return RedBlueGraph.from_json(_read_json(path))


def cmd_walks(a) -> int:
    graph = _graph(a.graph)
    if a.pair:
        u, v = a.pair
        _emit({"ell": a.ell, "pair": [u, v], "red_filled": count_red_filled(graph, a.ell, u, v)}, a.out)
        return 0
    census = walk_census(graph, a.ell)
    _emit({"ell": a.ell, "blue_walks": count_blue_walks(graph, a.ell), "red_filled": census.red_filled_count,
           "per_pair": [[u, v, c] for (u, v), c in sorted(census.per_pair.items())]}, a.out)
    return 0


def cmd_transitivity(a) -> int:
    ok, pair, count = check_transitivity(_graph(a.graph), a.q, a.ell)
    _emit({"q": a.q, "ell": a.ell, "holds": ok, "worst_pair": pair, "worst_count": count}, a.out)
    return 0 if ok else 1


def cmd_dense(a) -> int:
    graph = _graph(a.graph)
    try:
        res = find_dense_subgraphs(graph, a.q0, a.ell0, a.d0, best_effort=a.best_effort)
    except DenseSubgraphError as exc:
        _emit({"status": "failed", "reason": exc.reason, "message": str(exc), "best_density": exc.best_density},
              a.out)
        return 1
    _emit({"status": "ok", "U1": res.U1, "U2": res.U2, "density": res.density, "threshold": res.threshold,
           "pair": res.pair, "survivors": res.survivors, "meets_threshold": res.meets_threshold}, a.out)
    return 0 if res.meets_threshold else 1


def cmd_agree_decode(a) -> int:
    family = FunctionFamily.from_json(_read_json(a.family))
    params = _load_params(a.params)
    if params is None:
        raise UsageError("agree decode needs --params")
    res = agreement_decode(family, params, seed=a.seed, verify=a.verify, best_effort=a.best_effort)
    _emit({**res.to_json(), "seed": a.seed}, a.out)
    if not res.ok:
        return 0 if res.status == "below-threshold" else 1
    holds = all(res.thresholds[name]["holds"] for name in ("size", "disagreement"))
    return 0 if holds or not res.within_theorem else 1


def cmd_agree_graph(a) -> int:
    family = FunctionFamily.from_json(_read_json(a.family))
    zeta_prime = a.zeta if a.zeta_prime is None else a.zeta_prime
    _emit(build_consistency_graph(family, Fraction(a.zeta), Fraction(zeta_prime)).to_json(), a.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sat2csp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="random 3-CNF with a planted satisfying assignment")
    s.add_argument("--num-vars", type=int, required=True)
    s.add_argument("--num-clauses", type=int, required=True)
    s.add_argument("--Delta", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="DIMACS, or canonical JSON if the name ends in .json")
    s.add_argument("--planted-out")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("sets", help="sample, construct or certify clause-subset systems")
    s.add_argument("--m", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--alpha", default="1/2")
    s.add_argument("--gamma", help="defaults to alpha/2")
    s.add_argument("--mu", default="1/4")
    s.add_argument("--eta", default="1/4")
    s.add_argument("--ell", type=int, default=2)
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--h", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--deterministic", action="store_true", help="block construction with a certificate")
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--m0", type=int)
    s.add_argument("--unsafe-m0", action="store_true")
    s.add_argument("--cap", type=int, default=2_000_000)
    s.add_argument("--check", metavar="SETS_JSON", help="certify an existing system instead")
    s.add_argument("--out")
    s.add_argument("--cert-out")
    s.set_defaults(func=cmd_sets)

    s = sub.add_parser("reduce", help="build the 2-CSP from a formula and clause subsets")
    s.add_argument("--cnf", required=True)
    s.add_argument("--sets", required=True)
    s.add_argument("--params")
    s.add_argument("--var-cap", type=int, default=20)
    s.add_argument("--out")
    s.add_argument("--csp-out")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("solve", help="exact optimum of a 2-CSP or reduction artifact")
    s.add_argument("--instance", required=True)
    s.add_argument("--cap", type=int, default=10_000_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("decode", help="decode a labeling of a reduction artifact into an assignment")
    s.add_argument("--artifact", required=True)
    s.add_argument("--labeling", required=True)
    s.add_argument("--params")
    s.add_argument("--best-effort", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("verify-lemmas", help="check every lemma inequality over a range of seeds")
    s.add_argument("--seeds", type=int, default=50)
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--lemma", action="append", choices=sorted(LEMMAS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_lemmas)

    s = sub.add_parser("report", help="run the staged pipeline and write a report")
    s.add_argument("--config", help="JSON object with PipelineConfig fields")
    s.add_argument("--cnf")
    s.add_argument("--sets")
    s.add_argument("--labeling")
    s.add_argument("--num-vars", type=int)
    s.add_argument("--num-clauses", type=int)
    s.add_argument("--Delta", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--format", choices=("json", "csv"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)

    dsn = sub.add_parser("dsn", help="directed Steiner network reduction and solver")
    dsub = dsn.add_subparsers(dest="dsn_command", required=True)
    s = dsub.add_parser("reduce")
    s.add_argument("--csp", required=True, help="2-CSP instance or reduction artifact JSON")
    s.add_argument("--out")
    s.set_defaults(func=cmd_dsn_reduce)
    s = dsub.add_parser("solve")
    s.add_argument("--dsn", required=True)
    s.add_argument("--cap", type=int, default=24)
    s.add_argument("--out")
    s.set_defaults(func=cmd_dsn_solve)

    for name, func, help_ in (("walks", cmd_walks, "blue and red-filled walk counts"),
                              ("transitivity", cmd_transitivity, "red/blue transitivity check"),
                              ("dense", cmd_dense, "dense neighbourhood pair")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--graph", required=True)
        s.add_argument("--out")
        s.set_defaults(func=func)
        if name == "walks":
            s.add_argument("--ell", type=int, required=True)
            s.add_argument("--pair", type=int, nargs=2)
        elif name == "transitivity":
            s.add_argument("--q", type=int, required=True)
            s.add_argument("--ell", type=int, required=True)
        else:
            s.add_argument("--q0", type=int, required=True)
            s.add_argument("--ell0", type=int, required=True)
            s.add_argument("--d0", type=int, required=True)
            s.add_argument("--best-effort", action="store_true")

    agree = sub.add_parser("agree", help="agreement decoding on function families")
    asub = agree.add_subparsers(dest="agree_command", required=True)
    s = asub.add_parser("decode")
    s.add_argument("--family", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--verify", action="store_true")
    s.add_argument("--best-effort", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_agree_decode)
    s = asub.add_parser("graph")
    s.add_argument("--family", required=True)
    s.add_argument("--zeta", required=True)
    s.add_argument("--zeta-prime")
    s.add_argument("--out")
    s.set_defaults(func=cmd_agree_graph)
    s = asub.add_parser("verify-lemmas")
    s.add_argument("--seeds", type=int, default=50)
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--lemma", action="append", choices=sorted(LEMMAS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_lemmas)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, CapExceeded, BlockSearchError, OSError) as exc:
        print(f"sat2csp {args.command}: {exc}", file=sys.stderr)
        return 2
