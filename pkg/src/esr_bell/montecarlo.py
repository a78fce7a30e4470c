"""Seeded Monte Carlo of idealized measurements on prepared objects.

Trials for each setting pair are split into fixed-size chunks.  Chunk
``c`` of pair ``k`` draws from its own PCG64 stream seeded by
``SeedSequence(seed, spawn_key=(k, c))``, so a tally does not depend on how
chunks are distributed over workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .microstates import PAIRS, Ensemble, Microstate, slot_index

CHUNK_SIZE = 1 << 16
OUTCOME_AXIS = (-1, 0, 1)


@dataclass(frozen=True)
class RunConfig:
    seed: int
    trials_per_pair: int
    ensemble: Ensemble
    instrument_k: float = 1.0

    def __post_init__(self):
        if self.trials_per_pair < 1:
            raise ValueError("trials_per_pair must be >= 1")
        if not 0.0 <= self.instrument_k <= 1.0:
            raise ValueError("instrument_k must lie in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class Tally:
    """counts[k, oA+1, oB+1] for pair k in PAIRS order."""

    counts: np.ndarray
    trials_per_pair: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(4, 3, 3)
        sums = self.counts.sum(axis=(1, 2))
        if np.any(sums != self.trials_per_pair):
            raise ValueError(f"pair counts {sums.tolist()} != {self.trials_per_pair}")

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.counts + other.counts,
                     self.trials_per_pair + other.trials_per_pair)

    def __eq__(self, other):
        if not isinstance(other, Tally):
            return NotImplemented
        return (self.trials_per_pair == other.trials_per_pair
                and np.array_equal(self.counts, other.counts))

    def to_dict(self) -> dict:
        return {"trials_per_pair": self.trials_per_pair,
                "pairs": [list(p) for p in PAIRS],
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Tally":
        return cls(np.array(doc["counts"]), int(doc["trials_per_pair"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "oA", "oB", "count"])
        for k in range(4):
            for ia, oa in enumerate(OUTCOME_AXIS):
                for ib, ob in enumerate(OUTCOME_AXIS):
                    w.writerow([k, oa, ob, int(self.counts[k, ia, ib])])
        return buf.getvalue()


def sample_microstate(e: Ensemble, rng: np.random.Generator) -> Microstate:
    return e.entries[int(rng.choice(len(e), p=e.weights))][0]


def _detect(bit: int, value: int, k: float, rng: np.random.Generator | None) -> int:
    if not bit:
        return 0
    if k >= 1.0:
        return value
    return value if rng.random() < k else 0


def measure_pair(m: Microstate, pair: int, instrument_k: float = 1.0,
                 rng: np.random.Generator | None = None) -> tuple[int, int]:
    """Outcomes (oA, oB) for setting pair index ``pair`` (0..3)."""
    i_a, i_b = PAIRS[pair]
    ca, cb = slot_index("A", i_a), slot_index("B", i_b)
    if instrument_k < 1.0 and rng is None:
        raise ValueError("an rng is needed when instrument_k < 1")
    oa = _detect(m.detection[ca], m.assignments[ca], instrument_k, rng)
    ob = _detect(m.detection[cb], m.assignments[cb], instrument_k, rng)
    return oa, ob


def _chunk_counts(e: Ensemble, seed: int, pair: int, chunk: int, n: int,
                  k: float) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(pair, chunk))))
    cdf = np.cumsum(e.weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    np.minimum(idx, len(cdf) - 1, out=idx)
    i_a, i_b = PAIRS[pair]
    ca, cb = slot_index("A", i_a), slot_index("B", i_b)
    oa = e.macro[idx, ca]
    ob = e.macro[idx, cb]
    if k < 1.0:
        clicks = rng.random((n, 2)) < k
        oa = oa * clicks[:, 0]
        ob = ob * clicks[:, 1]
    flat = np.bincount((oa + 1) * 3 + (ob + 1), minlength=9)
    return flat.reshape(3, 3)


def run(config: RunConfig, workers: int = 1) -> Tally:
    e = config.ensemble
    n = config.trials_per_pair
    jobs = []
    for pair in range(4):
        for chunk, start in enumerate(range(0, n, CHUNK_SIZE)):
            jobs.append((pair, chunk, min(CHUNK_SIZE, n - start)))

    def work(job):
        pair, chunk, size = job
        return pair, _chunk_counts(e, config.seed, pair, chunk, size, config.instrument_k)

    counts = np.zeros((4, 3, 3), dtype=np.int64)
    if workers <= 1:
        results = map(work, jobs)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    for pair, c in results:
        counts[pair] += c
    return Tally(counts, n)


def _se_binomial(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else math.nan


@dataclass
class PairEstimate:
    p_total: np.ndarray                 # 3x3, outcome axes (-1, 0, +1)
    p_total_se: np.ndarray
    p_detect_a: float
    p_detect_a_se: float
    p_detect_b: float
    p_detect_b_se: float
    cond_corr: float | None             # detected-conditional correlation
    cond_corr_se: float | None
    gen_corr: float                     # generalized correlation, all trials
    gen_corr_se: float
    n_trials: int
    n_both_detected: int
    p_cond: np.ndarray | None = None    # 2x2 over (+/-1)^2 among both-detected

    def to_dict(self) -> dict:
        return {
            "p_cond": None if self.p_cond is None else self.p_cond.tolist(),
            "p_total": self.p_total.tolist(),
            "p_total_se": self.p_total_se.tolist(),
            "p_detect_a": self.p_detect_a, "p_detect_a_se": self.p_detect_a_se,
            "p_detect_b": self.p_detect_b, "p_detect_b_se": self.p_detect_b_se,
            "cond_corr": self.cond_corr, "cond_corr_se": self.cond_corr_se,
            "gen_corr": self.gen_corr, "gen_corr_se": self.gen_corr_se,
            "n_trials": self.n_trials, "n_both_detected": self.n_both_detected,
        }


@dataclass
class Estimates:
    pairs: list[PairEstimate] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"pairs": [p.to_dict() for p in self.pairs]}


def _estimate_pair(c: np.ndarray, n: int) -> PairEstimate:
    c = c.astype(float)
    p_t = c / n
    p_t_se = np.sqrt(p_t * (1 - p_t) / n)
    det_a = (c[0].sum() + c[2].sum()) / n
    det_b = (c[:, 0].sum() + c[:, 2].sum()) / n
    prod = np.outer(OUTCOME_AXIS, OUTCOME_AXIS)
    n_both = int(c[0, 0] + c[0, 2] + c[2, 0] + c[2, 2])
    s = float((prod * c).sum())
    p_cond = None
    if n_both > 0:
        p_cond = c[np.ix_([0, 2], [0, 2])] / n_both
        cond = s / n_both
        cond_se = math.sqrt(max(1.0 - cond * cond, 0.0) / n_both)
    else:
        cond = cond_se = None
    gen = s / n
    # products take values in {-1, 0, 1}: E[x^2] is the both-detected fraction
    gen_se = math.sqrt(max(n_both / n - gen * gen, 0.0) / n)
    return PairEstimate(p_t, p_t_se, det_a, _se_binomial(det_a, n), det_b,
                        _se_binomial(det_b, n), cond, cond_se, gen, gen_se, n, n_both,
                        p_cond)


def estimate(t: Tally) -> Estimates:
    return Estimates([_estimate_pair(t.counts[k], t.trials_per_pair) for k in range(4)])


def _combo(vals, errs):
    if any(v is None for v in vals):
        return None, None
    v = abs(vals[0] - vals[1]) + abs(vals[2] + vals[3])
    return v, math.sqrt(sum(e * e for e in errs))


def bchsh_statistics(est: Estimates) -> dict:
    """Detected-subensemble CHSH (conditional correlations) and modified
    BCHSH (generalized correlations over all trials), with standard errors."""
    if len(est.pairs) != 4:
        raise ValueError("need estimates for all four setting pairs")
    cond, cond_se = _combo([p.cond_corr for p in est.pairs],
                           [p.cond_corr_se for p in est.pairs])
    gen, gen_se = _combo([p.gen_corr for p in est.pairs],
                         [p.gen_corr_se for p in est.pairs])
    return {"chsh_conditional": cond, "chsh_conditional_se": cond_se,
            "bchsh_modified": gen, "bchsh_modified_se": gen_se}


def report(config: RunConfig, tally: Tally) -> dict:
    est = estimate(tally)
    return {"seed": config.seed, "trials_per_pair": config.trials_per_pair,
            "instrument_k": config.instrument_k, "tally": tally.to_dict(),
            "estimates": est.to_dict(), "bchsh": bchsh_statistics(est)}


def dumps(doc: dict) -> str:
    return json.dumps(doc, allow_nan=False, indent=2)
