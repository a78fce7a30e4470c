"""Sweep the uniform detection probability for the singlet at fixed settings.

For each eta prints the LP verdict, the modified-inequality left side with
quantum conditional values, and (when feasible) the exact three-level
statistics of the synthesized ensemble.  Writes a JSON table with --out.
"""
import argparse

import numpy as np

from esr_bell.esr_core import modified_bchsh_lhs, quantum_expectations
from esr_bell.qtheory import Direction, singlet_state
from esr_bell.records import write_json
from esr_bell.synthesis import FeasibilityProblem, search_eta_threshold, solve_problem, verify_solution


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--angles", default="0,90,45,135")
    ap.add_argument("--step", type=float, default=0.02)
    ap.add_argument("--out")
    args = ap.parse_args()

    settings = tuple(Direction.from_degrees(float(x)) for x in args.angles.split(","))
    state = singlet_state()
    es = quantum_expectations(state, settings)
    rows = []
    print(f"{'eta':>6} {'lhs':>8} {'status':>10} {'micro':>8} {'modified':>9} {'cond':>8}")
    for eta in np.arange(args.step, 1 + 1e-9, args.step):
        eta = round(float(eta), 6)
        p = FeasibilityProblem.uniform(state, settings, eta)
        res = solve_problem(p)
        row = {"eta": eta, "modified_lhs": modified_bchsh_lhs([eta] * 4, es), "status": res.status}
        if res.feasible:
            row.update(verify_solution(res, p).to_dict())
            print(f"{eta:6.3f} {row['modified_lhs']:8.4f} {res.status:>10} {row['bchsh_micro']:8.4f} "
                  f"{row['bchsh_modified']:9.4f} {row['chsh_conditional']:8.4f}")
        else:
            print(f"{eta:6.3f} {row['modified_lhs']:8.4f} {res.status:>10}")
        rows.append(row)

    search = search_eta_threshold(state, settings)
    print(f"LP threshold eta* in ({search.lower:.7f}, {search.upper:.7f}]; "
          f"necessary bound {search.necessary_bound:.7f}")
    if args.out:
        write_json(args.out, {"angles_deg": args.angles, "rows": rows,
                              "eta_star": search.eta, "necessary_bound": search.necessary_bound})


if __name__ == "__main__":
    main()
