"""LP threshold versus the modified-inequality bound over random setting quadruples."""
import argparse
import math

import numpy as np

from esr_bell.esr_core import max_uniform_eta, quantum_expectations
from esr_bell.qtheory import singlet_state
from esr_bell.records import write_json
from esr_bell.synthesis import search_eta_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    state = singlet_state()
    rows = []
    for angles in rng.uniform(0, 2 * math.pi, (args.samples, 4)):
        bound = max_uniform_eta(quantum_expectations(state, angles))
        eta = search_eta_threshold(state, angles, tol=1e-4).eta
        rows.append({"angles_deg": np.degrees(angles).round(3).tolist(),
                     "eta_star": eta, "necessary_bound": bound})
        print(f"{np.degrees(angles).round(1)}  eta*={eta:.4f}  bound={bound:.4f}"
              f"{'  VIOLATION' if eta > bound + 1e-4 else ''}")
    if args.out:
        write_json(args.out, rows)


if __name__ == "__main__":
    main()
