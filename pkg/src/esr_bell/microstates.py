"""Deterministic microstates, ensembles over them, and exact evaluators.

A microstate fixes, for each of the four experiment slots (A at a, A at a',
B at b, B at b'), a +/-1 value for the microscopic property and a detection
bit.  The macroscopic value read by an idealized measurement is the +/-1
value when the bit is 1 and the no-registration outcome 0 otherwise.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .qtheory import AngleLike, Direction, as_direction

WEIGHT_TOL = 1e-10
PARTIES = ("A", "B")
SETTING_INDICES = (1, 2)
# (iA, iB) order used for the four setting pairs everywhere
PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


class EnsembleError(ValueError):
    pass


def slot_index(party: str, setting: int) -> int:
    if party not in PARTIES or setting not in SETTING_INDICES:
        raise EnsembleError(f"invalid slot ({party!r}, {setting!r})")
    return 2 * PARTIES.index(party) + (setting - 1)


@dataclass(frozen=True)
class Microstate:
    """``assignments`` and ``detection`` are ordered (A1, A2, B1, B2)."""

    assignments: tuple[int, int, int, int]
    detection: tuple[int, int, int, int]

    def __post_init__(self):
        a = tuple(int(x) for x in self.assignments)
        d = tuple(int(x) for x in self.detection)
        if len(a) != 4 or len(d) != 4:
            raise EnsembleError("a microstate needs all four slots populated")
        if any(x not in (-1, 1) for x in a):
            raise EnsembleError(f"assignments must be +/-1, got {a}")
        if any(x not in (0, 1) for x in d):
            raise EnsembleError(f"detection bits must be 0/1, got {d}")
        object.__setattr__(self, "assignments", a)
        object.__setattr__(self, "detection", d)

    def micro_value(self, party: str, setting: int) -> int:
        return self.assignments[slot_index(party, setting)]

    def macro_value(self, party: str, setting: int) -> int:
        i = slot_index(party, setting)
        return self.assignments[i] if self.detection[i] else 0

    def macro_values(self) -> tuple[int, ...]:
        return tuple(v * d for v, d in zip(self.assignments, self.detection))


def macro_value(m: Microstate, party: str, setting: int) -> int:
    return m.macro_value(party, setting)


def micro_value(m: Microstate, party: str, setting: int) -> int:
    return m.micro_value(party, setting)


def all_microstates() -> list[Microstate]:
    """The 256 microstates in canonical order: assignment pattern major,
    detection pattern minor, both enumerated with -1 before +1 / 0 before 1."""
    return [Microstate(a, d)
            for a in itertools.product((-1, 1), repeat=4)
            for d in itertools.product((0, 1), repeat=4)]


def _as_settings(settings: Sequence[AngleLike]) -> tuple[Direction, ...]:
    s = tuple(as_direction(x) for x in settings)
    if len(s) != 4:
        raise EnsembleError("an ensemble needs four settings (a, a', b, b')")
    return s


@dataclass(frozen=True)
class Ensemble:
    entries: tuple[tuple[Microstate, float], ...]
    settings: tuple[Direction, Direction, Direction, Direction]

    def __post_init__(self):
        entries = tuple((m, float(w)) for m, w in self.entries)
        if not entries:
            raise EnsembleError("empty ensemble")
        for m, w in entries:
            if not isinstance(m, Microstate):
                raise EnsembleError(f"not a microstate: {m!r}")
            if w < 0 or math.isnan(w):
                raise EnsembleError(f"negative weight {w}")
        total = math.fsum(w for _, w in entries)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise EnsembleError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "settings", _as_settings(self.settings))

    @classmethod
    def normalized(cls, entries: Iterable[tuple[Microstate, float]],
                   settings: Sequence[AngleLike]) -> "Ensemble":
        """Build an ensemble, rescaling the weights to sum to one."""
        entries = [(m, float(w)) for m, w in entries]
        total = math.fsum(w for _, w in entries)
        if total <= 0:
            raise EnsembleError("total weight must be positive")
        return cls(tuple((m, w / total) for m, w in entries), settings)

    @classmethod
    def from_weights(cls, weights: Sequence[float], settings: Sequence[AngleLike],
                     cutoff: float = 0.0) -> "Ensemble":
        """Ensemble over :func:`all_microstates` keeping weights > cutoff."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (256,):
            raise EnsembleError("expected one weight per canonical microstate")
        states = all_microstates()
        kept = [(states[i], w) for i, w in enumerate(weights) if w > cutoff]
        return cls.normalized(kept, settings)

    def renormalize(self) -> "Ensemble":
        return Ensemble.normalized(self.entries, self.settings)

    def __len__(self):
        return len(self.entries)

    # vectorized views -----------------------------------------------------
    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries])

    @cached_property
    def assignments(self) -> np.ndarray:
        return np.array([m.assignments for m, _ in self.entries], dtype=np.int64)

    @cached_property
    def detection(self) -> np.ndarray:
        return np.array([m.detection for m, _ in self.entries], dtype=np.int64)

    @cached_property
    def macro(self) -> np.ndarray:
        return self.assignments * self.detection

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "settings": [d.theta for d in self.settings],
            "entries": [{"assignments": list(m.assignments),
                         "detection": list(m.detection),
                         "weight": w} for m, w in self.entries],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Ensemble":
        try:
            settings = [float(x) for x in doc["settings"]]
            entries = [(Microstate(tuple(e["assignments"]), tuple(e["detection"])),
                        float(e["weight"])) for e in doc["entries"]]
        except (KeyError, TypeError) as exc:
            raise EnsembleError(f"malformed ensemble document: {exc}") from exc
        return cls(tuple(entries), settings)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), allow_nan=False, **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Ensemble":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise EnsembleError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _pair_columns(i_a: int, i_b: int) -> tuple[int, int]:
    return slot_index("A", i_a), slot_index("B", i_b)


def generalized_corr(e: Ensemble, i_a: int, i_b: int) -> float:
    ca, cb = _pair_columns(i_a, i_b)
    return float(np.dot(e.weights, e.macro[:, ca] * e.macro[:, cb]))


def micro_corr(e: Ensemble, i_a: int, i_b: int) -> float:
    ca, cb = _pair_columns(i_a, i_b)
    return float(np.dot(e.weights, e.assignments[:, ca] * e.assignments[:, cb]))


def detected_conditional_corr(e: Ensemble, i_a: int, i_b: int) -> float | None:
    """Mean outcome product over objects detected on both sides, or None if
    no weight is jointly detected."""
    ca, cb = _pair_columns(i_a, i_b)
    both = e.detection[:, ca] * e.detection[:, cb]
    w = float(np.dot(e.weights, both))
    if w <= 0:
        return None
    return float(np.dot(e.weights, e.macro[:, ca] * e.macro[:, cb])) / w


def joint_detection_weight(e: Ensemble, i_a: int, i_b: int) -> float:
    ca, cb = _pair_columns(i_a, i_b)
    return float(np.dot(e.weights, e.detection[:, ca] * e.detection[:, cb]))


def _combination(corr) -> float:
    return abs(corr(1, 1) - corr(1, 2)) + abs(corr(2, 1) + corr(2, 2))


def modified_bchsh(e: Ensemble) -> float:
    return _combination(lambda i, j: generalized_corr(e, i, j))


def standard_bchsh_micro(e: Ensemble) -> float:
    return _combination(lambda i, j: micro_corr(e, i, j))


def conditional_chsh(e: Ensemble) -> float | None:
    """CHSH combination of the detected-subensemble correlations."""
    corrs = {p: detected_conditional_corr(e, *p) for p in PAIRS}
    if any(v is None for v in corrs.values()):
        return None
    return _combination(lambda i, j: corrs[(i, j)])


def micro_expectation(e: Ensemble, party: str, setting: int) -> float:
    return float(np.dot(e.weights, e.assignments[:, slot_index(party, setting)]))


def detected_expectation(e: Ensemble, party: str, setting: int) -> float | None:
    """Mean registered value among detected objects (the conditional mean)."""
    c = slot_index(party, setting)
    w = float(np.dot(e.weights, e.detection[:, c]))
    if w <= 0:
        return None
    return float(np.dot(e.weights, e.macro[:, c])) / w


def detection_probability(e: Ensemble, party: str, setting: int) -> float:
    return float(np.dot(e.weights, e.detection[:, slot_index(party, setting)]))


@dataclass(frozen=True)
class SamplingDiagnostic:
    micro_prob: float
    detected_conditional: float

    @property
    def gap(self) -> float:
        return self.micro_prob - self.detected_conditional


def fair_sampling_gap(e: Ensemble, party: str, setting: int,
                      outcome: int) -> SamplingDiagnostic:
    if outcome not in (-1, 1):
        raise EnsembleError(f"outcome must be +/-1, got {outcome!r}")
    c = slot_index(party, setting)
    has = (e.assignments[:, c] == outcome).astype(float)
    det = e.detection[:, c].astype(float)
    det_w = float(np.dot(e.weights, det))
    if det_w <= 0:
        raise EnsembleError(f"slot ({party}, {setting}) is never detected")
    micro = float(np.dot(e.weights, has))
    cond = float(np.dot(e.weights, has * det)) / det_w
    return SamplingDiagnostic(micro_prob=micro, detected_conditional=cond)


def event_probabilities(e: Ensemble) -> np.ndarray:
    """Exact (4, 3, 3) array: pair (in PAIRS order) x oA x oB, with outcome
    axes ordered (-1, 0, +1)."""
    out = np.zeros((4, 3, 3))
    for k, (i_a, i_b) in enumerate(PAIRS):
        ca, cb = _pair_columns(i_a, i_b)
        np.add.at(out[k], (e.macro[:, ca] + 1, e.macro[:, cb] + 1), e.weights)
    return out
