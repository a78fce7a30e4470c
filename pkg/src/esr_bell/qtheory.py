"""Exact two-qubit quantum engine for planar spin measurements.

Basis ordering is (up-up, up-down, down-up, down-down), with "up" the +1
eigenvector of sigma_z.  A measurement direction is a single angle in the
z-x plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

NORM_TOL = 1e-12
TWO_PI = 2.0 * math.pi

_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


class QuantumError(ValueError):
    pass


@dataclass(frozen=True)
class Direction:
    """Measurement axis at angle ``theta`` (radians) from the z axis."""

    theta: float

    def __post_init__(self):
        t = math.fmod(float(self.theta), TWO_PI)
        if t < 0:
            t += TWO_PI
        # fmod of a value just below a multiple of 2pi can round up to 2pi
        if t >= TWO_PI:
            t = 0.0
        object.__setattr__(self, "theta", t)

    @classmethod
    def from_degrees(cls, deg: float) -> "Direction":
        return cls(math.radians(deg))

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)


AngleLike = Union[Direction, float, int]


def as_direction(d: AngleLike) -> Direction:
    return d if isinstance(d, Direction) else Direction(float(d))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BipartiteKet:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape != (4,):
            raise QuantumError(f"expected 4 amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> "BipartiteKet":
        amps = np.asarray(amplitudes, dtype=complex)
        n = np.linalg.norm(amps)
        if n == 0:
            raise QuantumError("zero vector cannot be normalized")
        return cls(amps / n)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        if not self.is_normalized(tol):
            raise QuantumError(f"state is not unit-norm (norm={self.norm!r})")

    def __eq__(self, other):
        if not isinstance(other, BipartiteKet):
            return NotImplemented
        return bool(np.array_equal(self.amplitudes, other.amplitudes))

    def __hash__(self):
        return hash(self.amplitudes.tobytes())


@dataclass(frozen=True, eq=False)
class SpinProjector:
    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.shape != (2, 2):
            raise QuantumError(f"projector must be 2x2, got {m.shape}")
        object.__setattr__(self, "entries", m)

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        p = self.entries
        return (
            np.allclose(p @ p, p, atol=tol, rtol=0)
            and np.allclose(p, p.conj().T, atol=tol, rtol=0)
            and abs(np.trace(p) - 1) <= tol
        )


def singlet_state() -> BipartiteKet:
    s = 1.0 / math.sqrt(2.0)
    return BipartiteKet(np.array([0.0, s, -s, 0.0], dtype=complex))


def product_state(up_a: bool = True, up_b: bool = True) -> BipartiteKet:
    """Computational-basis product state, e.g. up-up for the defaults."""
    idx = (0 if up_a else 2) + (0 if up_b else 1)
    amps = np.zeros(4, dtype=complex)
    amps[idx] = 1.0
    return BipartiteKet(amps)


def _check_outcome(outcome) -> int:
    if outcome not in (-1, 1) or isinstance(outcome, bool):
        raise QuantumError(f"outcome must be -1 or +1, got {outcome!r}")
    return int(outcome)


def spin_projector(direction: AngleLike, outcome: int) -> SpinProjector:
    o = _check_outcome(outcome)
    t = as_direction(direction).theta
    obs = math.cos(t) * _SIGMA_Z + math.sin(t) * _SIGMA_X
    return SpinProjector(0.5 * (_I2 + o * obs))


def _local_op(proj_a: np.ndarray | None, proj_b: np.ndarray | None) -> np.ndarray:
    pa = _I2 if proj_a is None else proj_a
    pb = _I2 if proj_b is None else proj_b
    return np.kron(pa, pb)


def joint_probability(state: BipartiteKet, dir_a: AngleLike, out_a: int,
                      dir_b: AngleLike, out_b: int) -> float:
    state.check_normalized()
    op = _local_op(spin_projector(dir_a, out_a).entries,
                   spin_projector(dir_b, out_b).entries)
    psi = state.amplitudes
    p = float(np.real(np.vdot(psi, op @ psi)))
    # projector sandwiches are >= 0 up to rounding
    return min(1.0, max(0.0, p))


def joint_distribution(state: BipartiteKet, dir_a: AngleLike,
                       dir_b: AngleLike) -> dict[tuple[int, int], float]:
    return {(oa, ob): joint_probability(state, dir_a, oa, dir_b, ob)
            for oa in (-1, 1) for ob in (-1, 1)}


def marginal_probability(state: BipartiteKet, party: str, direction: AngleLike,
                         outcome: int) -> float:
    state.check_normalized()
    proj = spin_projector(direction, outcome).entries
    if party == "A":
        op = _local_op(proj, None)
    elif party == "B":
        op = _local_op(None, proj)
    else:
        raise QuantumError(f"party must be 'A' or 'B', got {party!r}")
    psi = state.amplitudes
    return min(1.0, max(0.0, float(np.real(np.vdot(psi, op @ psi)))))


def conditional_expectation(state: BipartiteKet, dir_a: AngleLike,
                            dir_b: AngleLike) -> float:
    dist = joint_distribution(state, dir_a, dir_b)
    return sum(oa * ob * p for (oa, ob), p in dist.items())


def chsh_value(state: BipartiteKet, a: AngleLike, a2: AngleLike, b: AngleLike,
               b2: AngleLike) -> float:
    e = conditional_expectation
    return (abs(e(state, a, b) - e(state, a, b2))
            + abs(e(state, a2, b) + e(state, a2, b2)))


def collapse(state: BipartiteKet, dir_a: AngleLike, out_a: int) -> BipartiteKet:
    """Post-measurement state after party A registers ``out_a``."""
    state.check_normalized()
    op = _local_op(spin_projector(dir_a, out_a).entries, None)
    v = op @ state.amplitudes
    n = np.linalg.norm(v)
    if n ** 2 <= NORM_TOL:
        raise QuantumError(f"outcome {out_a} has zero probability; cannot collapse")
    return BipartiteKet(v / n)
