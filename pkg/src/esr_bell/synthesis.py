"""Local deterministic models for detection-level quantum statistics.

The unknowns are weights on the 256 canonical microstates.  For each of
the four setting pairs and each of the nine events in {-1, 0, +1}^2 the
weighted event probability must equal the detection-level target built
from the quantum joint distribution; weights also sum to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import microstates as ms
from .esr_core import ESRJointSpec, joint_total_probabilities, max_uniform_eta, quantum_expectations
from .microstates import PAIRS, Ensemble, all_microstates
from .qtheory import AngleLike, BipartiteKet, Direction, as_direction
from .simplex import SolverStall, farkas_holds, independent_rows, phase_one

DEFAULT_TOL = 1e-9
CANONICAL_DEGREES = (0.0, 90.0, 45.0, 135.0)
OUTCOME_AXIS = (-1, 0, 1)

__all__ = [
    "CANONICAL_DEGREES", "ConstraintSystem", "FeasibilityProblem", "LPResult",
    "SolverStall", "ThresholdSearch", "VerificationReport", "build_lp",
    "canonical_settings", "eta_max_bisection", "search_eta_threshold",
    "solve_feasibility", "solve_problem", "target_table", "verify_solution",
]


def canonical_settings() -> tuple[Direction, ...]:
    return tuple(Direction.from_degrees(d) for d in CANONICAL_DEGREES)


@dataclass(frozen=True)
class FeasibilityProblem:
    state: BipartiteKet
    settings: tuple[Direction, Direction, Direction, Direction]
    eta_a: float
    eta_b: float

    def __post_init__(self):
        self.state.check_normalized()
        s = tuple(as_direction(x) for x in self.settings)
        if len(s) != 4:
            raise ValueError("need four settings (a, a', b, b')")
        object.__setattr__(self, "settings", s)
        for eta in (self.eta_a, self.eta_b):
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"detection probability {eta!r} outside [0, 1]")

    @classmethod
    def uniform(cls, state: BipartiteKet, settings: Sequence[AngleLike],
                eta: float) -> "FeasibilityProblem":
        return cls(state, tuple(settings), eta, eta)

    def pair_directions(self, i_a: int, i_b: int) -> tuple[Direction, Direction]:
        return self.settings[i_a - 1], self.settings[2 + i_b - 1]


def target_table(p: FeasibilityProblem) -> np.ndarray:
    """(4, 3, 3) detection-level event probabilities, PAIRS order."""
    out = np.zeros((4, 3, 3))
    for k, (i_a, i_b) in enumerate(PAIRS):
        da, db = p.pair_directions(i_a, i_b)
        spec = ESRJointSpec.from_state(p.state, da, db, p.eta_a, p.eta_b)
        for (oa, ob), prob in joint_total_probabilities(spec).items():
            out[k, oa + 1, ob + 1] = prob
    return out


@dataclass
class ConstraintSystem:
    problem: FeasibilityProblem
    A_raw: np.ndarray
    b_raw: np.ndarray
    labels: list[tuple]
    kept: np.ndarray

    @property
    def n_raw(self) -> int:
        return self.A_raw.shape[0]

    @property
    def A(self) -> np.ndarray:
        return self.A_raw[self.kept]

    @property
    def b(self) -> np.ndarray:
        return self.b_raw[self.kept]


def _event_matrix() -> tuple[np.ndarray, list[tuple]]:
    macro = np.array([m.macro_values() for m in all_microstates()])
    rows, labels = [], []
    for k, (i_a, i_b) in enumerate(PAIRS):
        ca, cb = ms.slot_index("A", i_a), ms.slot_index("B", i_b)
        for oa in OUTCOME_AXIS:
            for ob in OUTCOME_AXIS:
                rows.append(((macro[:, ca] == oa) & (macro[:, cb] == ob)).astype(float))
                labels.append((k, oa, ob))
    rows.append(np.ones(len(macro)))
    labels.append(("norm",))
    return np.array(rows), labels


def _consistent_rows(A: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Independent rows, plus any dependent row whose right-hand side is not
    implied by the kept ones (those must stay so infeasibility is seen)."""
    keep = list(independent_rows(A))
    base_A, base_b = A[keep], b[keep]
    extra = []
    for i in range(len(A)):
        if i in keep:
            continue
        coef, *_ = np.linalg.lstsq(base_A.T, A[i], rcond=None)
        if abs(coef @ base_b - b[i]) > tol:
            extra.append(i)
    return np.array(sorted(keep + extra), dtype=int)


def build_lp(p: FeasibilityProblem, tol: float = DEFAULT_TOL) -> ConstraintSystem:
    A, labels = _event_matrix()
    b = np.append(target_table(p).reshape(-1), 1.0)
    return ConstraintSystem(p, A, b, labels, _consistent_rows(A, b, tol))


@dataclass
class LPResult:
    status: str
    ensemble: Ensemble | None = None
    weights: np.ndarray | None = None
    residual: float = math.nan
    certificate: np.ndarray | None = None
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def certificate_holds(self, system: ConstraintSystem, tol: float = DEFAULT_TOL) -> bool:
        if self.certificate is None:
            return False
        return farkas_holds(system.A_raw, system.b_raw, self.certificate, tol)


def solve_feasibility(system: ConstraintSystem, tol: float = DEFAULT_TOL) -> LPResult:
    """Decide feasibility; raises :class:`SolverStall` if undecidable.

    The certificate, when infeasible, is indexed by the raw constraint rows
    (zero on rows dropped as redundant).
    """
    A, b = system.A, system.b
    scale = float(np.linalg.norm(b))
    res = phase_one(A, b / scale, tol=tol)
    if not res.feasible:
        y = np.zeros(system.n_raw)
        y[system.kept] = res.certificate
        if not farkas_holds(system.A_raw, system.b_raw, y, tol):
            raise SolverStall("certificate does not verify against the raw system")
        return LPResult("infeasible", certificate=y, iterations=res.iterations)

    w = res.x * scale
    residual = float(np.abs(system.A_raw @ w - system.b_raw).max())
    if residual > tol:
        raise SolverStall(f"feasible basis but residual {residual:.3e} exceeds {tol:.1e}")
    ens = Ensemble.from_weights(w, system.problem.settings)
    return LPResult("feasible", ensemble=ens, weights=w, residual=residual,
                    iterations=res.iterations)


def solve_problem(p: FeasibilityProblem, tol: float = DEFAULT_TOL) -> LPResult:
    return solve_feasibility(build_lp(p, tol), tol)


@dataclass
class ThresholdSearch:
    lower: float
    upper: float
    solves: int
    history: list[tuple[float, bool]] = field(default_factory=list)
    necessary_bound: float = 1.0

    @property
    def eta(self) -> float:
        return self.upper


def search_eta_threshold(state: BipartiteKet, settings: Sequence[AngleLike],
                         tol: float = 1e-6, lp_tol: float = DEFAULT_TOL) -> ThresholdSearch:
    """Bisect the uniform detection probability on [0, 1].

    eta = 0 is always feasible (every object undetected), so the endpoints
    are not solved; ``upper`` stays at 1 if every probe is feasible.
    """
    lo, hi = 0.0, 1.0
    history = []
    n_iter = max(1, math.ceil(math.log2(1.0 / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        ok = solve_problem(FeasibilityProblem.uniform(state, settings, mid), lp_tol).feasible
        history.append((mid, ok))
        if ok:
            lo = mid
        else:
            hi = mid
    if all(ok for _, ok in history):
        hi = 1.0
    bound = max_uniform_eta(quantum_expectations(state, settings))
    return ThresholdSearch(lo, hi, len(history), history, bound)


def eta_max_bisection(state: BipartiteKet, settings: Sequence[AngleLike],
                      tol: float = 1e-6) -> float:
    return search_eta_threshold(state, settings, tol).eta


@dataclass
class VerificationReport:
    max_deviation: float
    tol: float
    modified_bchsh: float
    standard_bchsh_micro: float
    conditional_chsh: float | None
    eta: float

    @property
    def ok(self) -> bool:
        return self.max_deviation <= self.tol

    def to_dict(self) -> dict:
        return {
            "status": "feasible",
            "eta": self.eta,
            "residual": self.max_deviation,
            "bchsh_micro": self.standard_bchsh_micro,
            "bchsh_modified": self.modified_bchsh,
            "chsh_conditional": self.conditional_chsh,
        }


def verify_solution(result: LPResult, p: FeasibilityProblem,
                    tol: float = 1e-8) -> VerificationReport:
    """Recompute every event probability from the ensemble itself and
    compare with the targets."""
    if not result.feasible or result.ensemble is None:
        raise ValueError("only feasible results can be verified")
    e = result.ensemble
    dev = float(np.abs(ms.event_probabilities(e) - target_table(p)).max())
    dev = max(dev, abs(math.fsum(e.weights) - 1.0))
    eta = p.eta_a if p.eta_a == p.eta_b else math.sqrt(p.eta_a * p.eta_b)
    return VerificationReport(
        max_deviation=dev, tol=tol,
        modified_bchsh=ms.modified_bchsh(e),
        standard_bchsh_micro=ms.standard_bchsh_micro(e),
        conditional_chsh=ms.conditional_chsh(e),
        eta=eta,
    )
