"""Detection-level probability calculus for generalized observables.

A generalized observable extends a dichotomic quantum observable by a
no-registration outcome fixed to 0.  Quantum rules give probabilities
conditional on detection; multiplying by the detection probability gives
the absolute (total) probability over every prepared object.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import qtheory
from .qtheory import AngleLike, BipartiteKet, Direction, as_direction

PROB_TOL = 1e-12
NO_REGISTRATION = 0
OUTCOMES = (-1, 1)
OUTCOMES_WITH_ZERO = (-1, 0, 1)


class ESRError(ValueError):
    pass


def _check_prob(x: float, name: str = "probability") -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise ESRError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def _check_unit(x: float, name: str) -> float:
    x = float(x)
    if not (-1.0 <= x <= 1.0) or math.isnan(x):
        raise ESRError(f"{name} must lie in [-1, 1], got {x!r}")
    return x


@dataclass(frozen=True)
class GeneralizedObservable:
    label: str
    setting: Direction
    eta: float = 1.0
    outcomes: tuple[int, ...] = OUTCOMES
    a0: int = NO_REGISTRATION

    def __post_init__(self):
        object.__setattr__(self, "setting", as_direction(self.setting))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        _check_prob(self.eta, "eta")
        if self.a0 != NO_REGISTRATION:
            raise ESRError("the no-registration outcome is fixed to 0")
        if self.a0 in self.outcomes:
            raise ESRError("registered outcomes must be nonzero")

    @property
    def values(self) -> tuple[int, ...]:
        """All possible values, no-registration outcome first."""
        return (self.a0,) + self.outcomes


@dataclass(frozen=True)
class MacroProperty:
    """A property (observable, value set); value sets are finite subsets of
    the observable's outcomes plus the no-registration outcome."""

    observable: GeneralizedObservable
    value_set: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        vs = frozenset(self.value_set)
        extra = vs - set(self.observable.values)
        if extra:
            raise ESRError(f"values {sorted(extra)} are not outcomes of {self.observable.label}")
        object.__setattr__(self, "value_set", vs)

    @property
    def contains_no_registration(self) -> bool:
        return self.observable.a0 in self.value_set

    def complement(self) -> "MacroProperty":
        return MacroProperty(self.observable,
                             frozenset(self.observable.values) - self.value_set)

    def total_probability(self, cond_probs: Mapping[int, float]) -> float:
        """Absolute probability of this property given conditional outcome
        probabilities over the registered outcomes."""
        eta = self.observable.eta
        p_registered = sum(cond_probs.get(v, 0.0) for v in self.value_set
                           if v != self.observable.a0)
        if self.contains_no_registration:
            return complement_total_probability(eta, p_registered)
        return total_probability(eta, p_registered)


def total_probability(eta: float, p_cond: float) -> float:
    return _check_prob(eta, "eta") * _check_prob(p_cond, "p_cond")


def complement_total_probability(eta: float, p_cond_F: float) -> float:
    """Total probability of G = F plus the no-registration outcome, given the
    detection-conditional probability of F: 1 - eta * (1 - p_cond_F)."""
    eta = _check_prob(eta, "eta")
    p = _check_prob(p_cond_F, "p_cond_F")
    return 1.0 - eta * (1.0 - p)


def no_registration_probability(eta: float) -> float:
    return 1.0 - _check_prob(eta, "eta")


def generalized_expectation(obs: GeneralizedObservable,
                            cond_probs: Mapping[int, float]) -> float:
    total = sum(cond_probs.get(o, 0.0) for o in obs.outcomes)
    if abs(total - 1.0) > 1e-9:
        raise ESRError(f"conditional probabilities sum to {total}, not 1")
    cond_mean = sum(o * cond_probs.get(o, 0.0) for o in obs.outcomes)
    return obs.a0 * (1.0 - obs.eta) + obs.eta * cond_mean


@dataclass(frozen=True)
class ESRJointSpec:
    eta_a: float
    eta_b: float
    quantum_joint: Mapping[tuple[int, int], float]
    marginal_a: Mapping[int, float]
    marginal_b: Mapping[int, float]

    def __post_init__(self):
        _check_prob(self.eta_a, "eta_a")
        _check_prob(self.eta_b, "eta_b")
        joint = {(oa, ob): float(self.quantum_joint.get((oa, ob), 0.0))
                 for oa in OUTCOMES for ob in OUTCOMES}
        if any(p < -PROB_TOL for p in joint.values()):
            raise ESRError("negative joint probability")
        if abs(sum(joint.values()) - 1.0) > PROB_TOL:
            raise ESRError(f"quantum joint sums to {sum(joint.values())}")
        for o in OUTCOMES:
            ma = joint[(o, -1)] + joint[(o, 1)]
            mb = joint[(-1, o)] + joint[(1, o)]
            if (abs(ma - self.marginal_a.get(o, 0.0)) > PROB_TOL
                    or abs(mb - self.marginal_b.get(o, 0.0)) > PROB_TOL):
                raise ESRError("marginals inconsistent with joint")
        object.__setattr__(self, "quantum_joint", joint)

    @classmethod
    def from_joint(cls, eta_a: float, eta_b: float,
                   joint: Mapping[tuple[int, int], float]) -> "ESRJointSpec":
        ma = {o: joint.get((o, -1), 0.0) + joint.get((o, 1), 0.0) for o in OUTCOMES}
        mb = {o: joint.get((-1, o), 0.0) + joint.get((1, o), 0.0) for o in OUTCOMES}
        return cls(eta_a, eta_b, dict(joint), ma, mb)

    @classmethod
    def from_state(cls, state: BipartiteKet, dir_a: AngleLike, dir_b: AngleLike,
                   eta_a: float, eta_b: float) -> "ESRJointSpec":
        return cls.from_joint(eta_a, eta_b,
                              qtheory.joint_distribution(state, dir_a, dir_b))


def joint_total_probabilities(spec: ESRJointSpec) -> dict[tuple[int, int], float]:
    """Absolute probabilities on the 3x3 grid {-1, 0, +1}^2, with 0 the
    no-registration outcome and detection independent across parties."""
    ea, eb = spec.eta_a, spec.eta_b
    out = {}
    for oa in OUTCOMES_WITH_ZERO:
        for ob in OUTCOMES_WITH_ZERO:
            if oa and ob:
                p = ea * eb * spec.quantum_joint[(oa, ob)]
            elif oa:
                p = ea * (1.0 - eb) * spec.marginal_a[oa]
            elif ob:
                p = (1.0 - ea) * eb * spec.marginal_b[ob]
            else:
                p = (1.0 - ea) * (1.0 - eb)
            out[(oa, ob)] = p
    return out


def generalized_correlation(eta_a: float, eta_b: float, cond_exp: float) -> float:
    return (_check_prob(eta_a, "eta_a") * _check_prob(eta_b, "eta_b")
            * _check_unit(cond_exp, "cond_exp"))


def bchsh_combination(e_ab: float, e_ab2: float, e_a2b: float, e_a2b2: float) -> float:
    return abs(e_ab - e_ab2) + abs(e_a2b + e_a2b2)


def modified_bchsh_lhs(etas: Sequence[float], cond_exps: Sequence[float]) -> float:
    """Left side of the modified inequality with quantum conditional values.

    ``etas`` = (A at a, A at a', B at b, B at b'); ``cond_exps`` = E(a,b),
    E(a,b'), E(a',b), E(a',b').
    """
    if len(etas) != 4 or len(cond_exps) != 4:
        raise ESRError("need four detection probabilities and four expectations")
    ea, ea2, eb, eb2 = (_check_prob(x, "eta") for x in etas)
    e1, e2, e3, e4 = (_check_unit(x, "cond_exp") for x in cond_exps)
    return ea * abs(eb * e1 - eb2 * e2) + ea2 * abs(eb * e3 + eb2 * e4)


def max_uniform_eta(cond_exps: Sequence[float]) -> float:
    """Largest common detection probability compatible with the modified
    inequality: eta^2 * combination <= 2."""
    e1, e2, e3, e4 = (_check_unit(x, "cond_exp") for x in cond_exps)
    comb = bchsh_combination(e1, e2, e3, e4)
    if comb <= 0.0:
        return 1.0
    return min(1.0, math.sqrt(2.0 / comb))


def quantum_expectations(state: BipartiteKet, settings: Sequence[AngleLike]) -> tuple[float, ...]:
    """E(a,b), E(a,b'), E(a',b), E(a',b') for settings (a, a', b, b')."""
    a, a2, b, b2 = settings
    e = qtheory.conditional_expectation
    return (e(state, a, b), e(state, a, b2), e(state, a2, b), e(state, a2, b2))
