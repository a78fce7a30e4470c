"""Command-line entry point: ``esr-bell <command> ...``.

Exit codes: 0 success/feasible, 2 infeasible, 3 solver stall, 64 usage error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import microstates as ms
from . import montecarlo as mc
from .esr_core import bchsh_combination, max_uniform_eta, quantum_expectations
from .microstates import PAIRS, PARTIES, SETTING_INDICES, Ensemble, EnsembleError
from .qtheory import Direction, product_state, singlet_state
from .records import RunRecord, dumps, tidy, write_json
from .simplex import SolverStall
from .synthesis import (CANONICAL_DEGREES, FeasibilityProblem, build_lp, search_eta_threshold,
                        solve_feasibility, verify_solution)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_STALL = 3
EXIT_USAGE = 64

FLAG_TOL = 1e-6
STATES = {"singlet": singlet_state, "product": product_state}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _angles(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle list {text!r}")
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("expected four finite angles in degrees: a,a',b,b'")
    return vals


def _probability(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"{x} is outside [0, 1]")
    return x


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _seed(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= n < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return n


def _settings(degrees) -> tuple[Direction, ...]:
    return tuple(Direction.from_degrees(d) for d in degrees)


def _load_ensemble(path: str) -> Ensemble:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        return Ensemble.from_json(text)
    except (EnsembleError, ValueError) as exc:
        raise UsageError(f"{path} is not a valid ensemble: {exc}") from exc


def _emit(doc: dict, fmt: str, text_lines=None) -> None:
    if fmt == "json" or text_lines is None:
        print(dumps(doc))
    else:
        print("\n".join(text_lines))


# --- bound -----------------------------------------------------------------

def bound_report(degrees, state_name: str = "singlet") -> dict:
    state = STATES[state_name]()
    e = quantum_expectations(state, _settings(degrees))
    return {"angles_deg": list(degrees), "state": state_name,
            "expectations": {"ab": e[0], "ab'": e[1], "a'b": e[2], "a'b'": e[3]},
            "chsh": bchsh_combination(*e), "max_uniform_eta": max_uniform_eta(e)}


def cmd_bound(args) -> tuple[int, dict]:
    doc = bound_report(args.angles, args.state)
    ex = doc["expectations"]
    _emit(doc, args.format, [
        "E(a,b)={ab:.9f}  E(a,b')={ab':.9f}  E(a',b)={a'b:.9f}  E(a',b')={a'b':.9f}".format(**ex),
        f"CHSH combination: {doc['chsh']:.9f}",
        f"max uniform detection probability: {doc['max_uniform_eta']:.9f}",
    ])
    return EXIT_OK, doc


# --- synthesize / threshold ------------------------------------------------

def synthesize(degrees, eta: float, state_name: str = "singlet", tol: float = 1e-9):
    problem = FeasibilityProblem.uniform(STATES[state_name](), _settings(degrees), eta)
    system = build_lp(problem, tol)
    return problem, system, solve_feasibility(system, tol)


def cmd_synthesize(args) -> tuple[int, dict]:
    problem, system, result = synthesize(args.angles, args.eta, args.state, args.tol)
    if result.feasible:
        rep = verify_solution(result, problem).to_dict()
        if args.out:
            write_json(args.out, result.ensemble.to_dict())
        doc = rep | {"support": len(result.ensemble)}
        code = EXIT_OK
    else:
        doc = {"status": "infeasible", "eta": args.eta,
               "raw_constraints": system.n_raw,
               "certificate": result.certificate.tolist(),
               "certificate_rows": [list(lbl) for lbl in system.labels],
               "certificate_check": {
                   "max_yTA": float((result.certificate @ system.A_raw).max()),
                   "yTb": float(result.certificate @ system.b_raw)}}
        if args.out:
            write_json(args.out, doc)
        code = EXIT_INFEASIBLE
    shown = {k: v for k, v in doc.items() if k not in ("certificate", "certificate_rows")}
    if result.feasible:
        lines = [f"feasible at eta={args.eta}: {shown['support']} microstates, "
                 f"residual {shown['residual']:.2e}",
                 f"standard BCHSH (microscopic):   {shown['bchsh_micro']:.9f}",
                 f"modified BCHSH (all prepared):  {shown['bchsh_modified']:.9f}",
                 f"CHSH (detected subensemble):    {_fmt(shown['chsh_conditional'])}"]
    else:
        chk = shown["certificate_check"]
        lines = [f"infeasible at eta={args.eta}: Farkas certificate with "
                 f"max y^T A = {chk['max_yTA']:.3e}, y^T b = {chk['yTb']:.6f}"]
    _emit(doc, args.format, lines)
    return code, shown


def cmd_threshold(args) -> tuple[int, dict]:
    search = search_eta_threshold(STATES[args.state](), _settings(args.angles), tol=args.tol)
    doc = {"eta_star": search.eta, "feasible_at": search.lower,
           "infeasible_at": search.upper if search.upper < 1.0 else None,
           "lp_solves": search.solves, "necessary_bound": search.necessary_bound,
           "history": [{"eta": e, "feasible": ok} for e, ok in search.history]}
    _emit(doc, args.format, [
        f"eta* in ({search.lower:.9f}, {search.upper:.9f}] after {search.solves} LP solves",
        f"necessary bound from the modified inequality: {search.necessary_bound:.9f}",
    ])
    return EXIT_OK, {k: v for k, v in doc.items() if k != "history"}


# --- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> tuple[int, dict]:
    ens = _load_ensemble(args.ensemble)
    config = mc.RunConfig(seed=args.seed, trials_per_pair=args.trials, ensemble=ens,
                          instrument_k=args.k)
    tally = mc.run(config, workers=args.workers)
    doc = mc.report(config, tally)
    if args.out:
        Path(args.out).write_text(tally.to_csv() if args.format == "csv" else dumps(doc) + "\n",
                                  encoding="utf-8")
    if args.format == "csv":
        sys.stdout.write(tally.to_csv())
    else:
        print(dumps(doc))
    return EXIT_OK, doc["bchsh"]


# --- verify / demo -------------------------------------------------------------

def verify_report(ens: Ensemble) -> dict:
    gaps = []
    for party in PARTIES:
        for s in SETTING_INDICES:
            for o in (1, -1):
                try:
                    g = ms.fair_sampling_gap(ens, party, s, o)
                    gaps.append({"party": party, "setting": s, "outcome": o,
                                 "micro_prob": g.micro_prob,
                                 "detected_conditional": g.detected_conditional,
                                 "gap": g.gap})
                except EnsembleError:
                    gaps.append({"party": party, "setting": s, "outcome": o,
                                 "micro_prob": None, "detected_conditional": None,
                                 "gap": None})
    return {"standard_bchsh_micro": ms.standard_bchsh_micro(ens),
            "modified_bchsh": ms.modified_bchsh(ens),
            "chsh_conditional": ms.conditional_chsh(ens),
            "fair_sampling": gaps}


def cmd_verify(args) -> tuple[int, dict]:
    doc = verify_report(_load_ensemble(args.ensemble))
    lines = [f"standard BCHSH (microscopic):   {doc['standard_bchsh_micro']:.9f}",
             f"modified BCHSH (all prepared):  {doc['modified_bchsh']:.9f}",
             f"CHSH (detected subensemble):    {_fmt(doc['chsh_conditional'])}",
             "party setting outcome  p(f)         p(F)         gap"]
    for g in doc["fair_sampling"]:
        lines.append(f"{g['party']:>5} {g['setting']:>7} {g['outcome']:>+7d}  "
                     f"{_fmt(g['micro_prob'])}  {_fmt(g['detected_conditional'])}  {_fmt(g['gap'])}")
    _emit(doc, args.format, lines)
    return EXIT_OK, {k: v for k, v in doc.items() if k != "fair_sampling"}


def _fmt(x) -> str:
    return "undefined" if x is None else f"{x: .9f}"


def demo_unfair_report(ens: Ensemble, flag_tol: float = FLAG_TOL) -> dict:
    slots = []
    for party in PARTIES:
        for s in SETTING_INDICES:
            micro = ms.micro_expectation(ens, party, s)
            det = ms.detected_expectation(ens, party, s)
            slots.append({"party": party, "setting": s, "micro_expectation": micro,
                          "detected_expectation": det,
                          "flag": det is not None and abs(micro - det) > flag_tol})
    corrs = []
    for i_a, i_b in PAIRS:
        micro = ms.micro_corr(ens, i_a, i_b)
        cond = ms.detected_conditional_corr(ens, i_a, i_b)
        corrs.append({"pair": [i_a, i_b], "micro_corr": micro, "conditional_corr": cond,
                      "flag": cond is not None and abs(micro - cond) > flag_tol})
    rep = verify_report(ens)
    for g in rep["fair_sampling"]:
        g["flag"] = g["gap"] is not None and abs(g["gap"]) > flag_tol
    flagged = [g for g in rep["fair_sampling"] if g["flag"]]
    return rep | {"expectations": slots, "correlations": corrs,
                  "flagged_slots": len(flagged),
                  "fair_sample": not flagged and not any(c["flag"] for c in corrs)}


def cmd_demo_unfair(args) -> tuple[int, dict]:
    problem, _, result = synthesize(args.angles, args.eta, args.state, args.tol)
    if not result.feasible:
        doc = {"status": "infeasible", "eta": args.eta}
        _emit(doc, args.format, [f"infeasible at eta={args.eta}: no local model to inspect"])
        return EXIT_INFEASIBLE, doc
    doc = demo_unfair_report(result.ensemble) | {"eta": args.eta}
    lines = [f"eta = {args.eta}",
             "slot     <A_micro>     <A>_detected  flag"]
    for s in doc["expectations"]:
        lines.append(f"{s['party']}{s['setting']}     {s['micro_expectation']: .9f}  "
                     f"{_fmt(s['detected_expectation'])}  {'*' if s['flag'] else ''}")
    lines.append("pair     micro corr    conditional   flag")
    for c in doc["correlations"]:
        lines.append(f"{c['pair']}  {c['micro_corr']: .9f}  {_fmt(c['conditional_corr'])}  "
                     f"{'*' if c['flag'] else ''}")
    lines.append("party setting outcome  p(f)          p(F)          flag")
    for g in doc["fair_sampling"]:
        lines.append(f"{g['party']:>5} {g['setting']:>7} {g['outcome']:>+7d}  "
                     f"{_fmt(g['micro_prob'])}  {_fmt(g['detected_conditional'])}  "
                     f"{'*' if g['flag'] else ''}")
    lines.append(f"micro BCHSH {doc['standard_bchsh_micro']:.9f}, modified BCHSH "
                 f"{doc['modified_bchsh']:.9f}, detected CHSH {_fmt(doc['chsh_conditional'])}")
    lines.append("fair sample" if doc["fair_sample"] else
                 f"not a fair sample: {doc['flagged_slots']} flagged slot(s)")
    _emit(doc, args.format, lines)
    return EXIT_OK, {k: doc[k] for k in ("eta", "standard_bchsh_micro", "modified_bchsh",
                                         "chsh_conditional", "flagged_slots", "fair_sample")}


# --- parser ----------------------------------------------------------------------

def _text_or_json(parser) -> None:
    parser.add_argument("--format", choices=("text", "json"), default="text")


def _tol(parser, default: float) -> None:
    parser.add_argument("--tol", type=float, default=default)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--record", metavar="PATH", help="write a JSON run record here")

    lp = argparse.ArgumentParser(add_help=False)
    lp.add_argument("--angles", type=_angles, default=CANONICAL_DEGREES,
                    help="a,a',b,b' in degrees (default 0,90,45,135)")
    lp.add_argument("--state", choices=sorted(STATES), default="singlet")

    p = _Parser(prog="esr-bell", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("bound", parents=[common, lp], help="quantum CHSH and eta bound")
    _text_or_json(s)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("synthesize", parents=[common, lp], help="solve the feasibility LP")
    _text_or_json(s)
    s.add_argument("--eta", type=_probability, required=True)
    s.add_argument("--out", metavar="PATH")
    _tol(s, 1e-9)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("threshold", parents=[common, lp], help="bisect the largest feasible eta")
    _text_or_json(s)
    _tol(s, 1e-6)
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo on an ensemble file")
    s.add_argument("ensemble")
    s.add_argument("--trials", type=_positive_int, default=100_000)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--k", type=_probability, default=1.0, help="instrument efficiency")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--out", metavar="PATH")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", parents=[common], help="exact three-level evaluation")
    _text_or_json(s)
    s.add_argument("ensemble")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("demo-unfair", parents=[common, lp], help="unfair-sampling demonstration")
    _text_or_json(s)
    s.add_argument("--eta", type=_probability, default=0.8)
    _tol(s, 1e-9)
    s.set_defaults(func=cmd_demo_unfair)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, summary = args.func(args)
    except UsageError as exc:
        print(f"esr-bell: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverStall as exc:
        print(f"esr-bell: solver stall: {exc}", file=sys.stderr)
        return EXIT_STALL
    if args.record:
        params = {k: v for k, v in vars(args).items() if k not in ("func", "record", "command")}
        artifacts = [v for k, v in params.items() if k in ("out", "ensemble") and v]
        RunRecord(args.command, tidy(params), tidy(summary), artifacts).save(args.record)
    return code


if __name__ == "__main__":
    sys.exit(main())
