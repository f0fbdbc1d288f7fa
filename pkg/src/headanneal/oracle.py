"""Synthetic ground-truth objectives over pruning states, plus exhaustive
search, for desk-scale verification of the whole pipeline without a model.

An objective maps a state to (bias, perplexity) as baseline + linear
per-head terms + sparse pairwise interaction terms (+ optional Gaussian
observation noise). Pairwise terms exist precisely so that strategies built
on single-head effects can be made to misjudge head combinations.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import HeadEffectTable
from .errors import ConfigurationError, DimensionError, ParseError
from .manifest import atomic_writer
from .masks import HeadMask, WeightBounds, random_state
from .records import SampleRecord

OBJECTIVE_FORMAT = "headanneal-objective/1"

BIAS_CLAMP = (0.0, 1.2)


@dataclass
class SyntheticObjective:
    """Ground-truth (bias, ppl) as linear + pairwise pseudo-Boolean forms."""

    n: int
    baseline_bias: float
    baseline_ppl: float
    linear_bias: np.ndarray
    linear_ppl: np.ndarray
    pairs_bias: list[tuple[int, int, float]] = field(default_factory=list)
    pairs_ppl: list[tuple[int, int, float]] = field(default_factory=list)
    noise_sigma: float = 0.0
    ppl_floor: float = 1e-6

    def __post_init__(self):
        self.linear_bias = np.asarray(self.linear_bias, dtype=np.float64)
        self.linear_ppl = np.asarray(self.linear_ppl, dtype=np.float64)
        if self.linear_bias.size != self.n or self.linear_ppl.size != self.n:
            raise DimensionError("linear coefficient length must equal n")
        self.pairs_bias = [(int(i), int(j), float(c)) for i, j, c in self.pairs_bias]
        self.pairs_ppl = [(int(i), int(j), float(c)) for i, j, c in self.pairs_ppl]
        for i, j, _ in self.pairs_bias + self.pairs_ppl:
            if not (0 <= i < self.n and 0 <= j < self.n and i != j):
                raise ConfigurationError(f"bad pair ({i}, {j}) for n={self.n}")
        # dense upper-triangular matrices make index-set evaluation one gather
        self._qb = np.zeros((self.n, self.n))
        for i, j, c in self.pairs_bias:
            self._qb[min(i, j), max(i, j)] += c
        self._qp = np.zeros((self.n, self.n))
        for i, j, c in self.pairs_ppl:
            self._qp[min(i, j), max(i, j)] += c

    def raw_values(self, idx: np.ndarray) -> tuple[float, float]:
        """Noise-free (bias, ppl) for the state with set bits idx."""
        if len(idx):
            sub = np.ix_(idx, idx)
            bias = self.baseline_bias + self.linear_bias[idx].sum() + self._qb[sub].sum()
            ppl = self.baseline_ppl + self.linear_ppl[idx].sum() + self._qp[sub].sum()
        else:
            bias, ppl = self.baseline_bias, self.baseline_ppl
        bias = min(max(float(bias), BIAS_CLAMP[0]), BIAS_CLAMP[1])
        ppl = max(float(ppl), self.ppl_floor)
        return bias, ppl


def evaluate(obj: SyntheticObjective, s: HeadMask, rng_seed=None) -> tuple[float, float]:
    """Observed (bias, ppl) of a state; noisy when obj.noise_sigma > 0."""
    if s.n != obj.n:
        raise DimensionError(f"mask width {s.n} != objective width {obj.n}")
    bias, ppl = obj.raw_values(s.indices())
    if obj.noise_sigma > 0.0:
        rng = np.random.default_rng(rng_seed)
        bias += float(rng.normal(0.0, obj.noise_sigma))
        ppl += float(rng.normal(0.0, obj.noise_sigma))
        bias = min(max(bias, BIAS_CLAMP[0]), BIAS_CLAMP[1])
        ppl = max(ppl, obj.ppl_floor)
    return bias, ppl


def weighted_cost(bias: float, ppl: float, epsilon: float) -> float:
    return epsilon * bias + (1.0 - epsilon) * ppl


@dataclass
class ExhaustiveResult:
    optimal_mask: HeadMask
    optimal_cost: float
    optimal_bias: float
    optimal_ppl: float
    states_enumerated: int
    pareto: list[tuple[float, float, HeadMask]]  # nondominated (bias, ppl) points


STATE_LIMIT = 10_000_000


def count_states(n: int, bounds: WeightBounds) -> int:
    return sum(math.comb(n, k) for k in range(bounds.n_l, bounds.n_u + 1))


def exhaustive_search(
    obj: SyntheticObjective, bounds: WeightBounds, epsilon: float
) -> ExhaustiveResult:
    """Enumerate every feasible state; exact optimum and Pareto frontier.

    Evaluation is noise-free: this is the ground truth the search
    approximates, not an observation of it.
    """
    bounds.validate_for(obj.n)
    total = count_states(obj.n, bounds)
    if total > STATE_LIMIT:
        raise ConfigurationError(
            f"refusing exhaustive search over {total} states (limit {STATE_LIMIT})"
        )
    best_cost = math.inf
    best_idx: tuple[int, ...] = ()
    best_vals = (math.nan, math.nan)
    points: dict[tuple[float, float], tuple[int, ...]] = {}
    count = 0
    for k in range(bounds.n_l, bounds.n_u + 1):
        for combo in itertools.combinations(range(obj.n), k):
            idx = np.asarray(combo, dtype=np.int64)
            bias, ppl = obj.raw_values(idx)
            cost = weighted_cost(bias, ppl, epsilon)
            if cost < best_cost:
                best_cost, best_idx, best_vals = cost, combo, (bias, ppl)
            points.setdefault((bias, ppl), combo)
            count += 1
    pareto = [
        (b, p, HeadMask.from_indices(obj.n, ix))
        for (b, p), ix in points.items()
        if not any(
            (qb <= b and qp <= p and (qb < b or qp < p)) for qb, qp in points
        )
    ]
    pareto.sort(key=lambda t: (t[0], t[1]))
    return ExhaustiveResult(
        optimal_mask=HeadMask.from_indices(obj.n, best_idx),
        optimal_cost=best_cost,
        optimal_bias=best_vals[0],
        optimal_ppl=best_vals[1],
        states_enumerated=count,
        pareto=pareto,
    )


def generate_corpus(
    obj: SyntheticObjective, bounds: WeightBounds, count: int, rng_seed
) -> list[SampleRecord]:
    """Sample `count` states uniformly within bounds and observe both metrics."""
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(rng_seed)
    out: list[SampleRecord] = []
    for _ in range(count):
        mask = random_state(obj.n, bounds, rng)
        bias, ppl = evaluate(obj, mask, rng)
        out.append(SampleRecord(mask, bias, ppl))
    return out


def head_effects(obj: SyntheticObjective) -> HeadEffectTable:
    """Single-head ablation effects: baseline value minus value with only
    that head pruned, per metric."""
    b0, p0 = obj.raw_values(np.empty(0, dtype=np.int64))
    z_bias = np.empty(obj.n)
    z_ppl = np.empty(obj.n)
    for h in range(obj.n):
        b, p = obj.raw_values(np.array([h], dtype=np.int64))
        z_bias[h] = b0 - b
        z_ppl[h] = p0 - p
    return HeadEffectTable(z_bias, z_ppl)


# ---------------------------------------------------------------------------
# objective generators
# ---------------------------------------------------------------------------


def make_random_objective(
    n: int,
    rng_seed,
    pair_count: int | None = None,
    noise_sigma: float = 0.0,
) -> SyntheticObjective:
    """Generic desk-scale objective; both metrics land in roughly [0.1, 1.1].

    Pruning tends to lower bias and raise perplexity, with enough sign
    variety and pairwise structure that the optimum is not a greedy pick.
    """
    rng = np.random.default_rng(rng_seed)
    if pair_count is None:
        pair_count = max(2, n // 3)
    lin_bias = -rng.uniform(0.005, 0.08, size=n)
    lin_bias[rng.random(n) < 0.25] *= -0.6  # a few heads worsen bias
    lin_ppl = rng.uniform(0.005, 0.06, size=n)
    lin_ppl[rng.random(n) < 0.2] *= -0.4  # a few heads are utility-free
    pairs_bias = []
    pairs_ppl = []
    for _ in range(pair_count):
        i, j = rng.choice(n, size=2, replace=False)
        pairs_bias.append((int(i), int(j), float(rng.uniform(-0.08, 0.08))))
        i, j = rng.choice(n, size=2, replace=False)
        pairs_ppl.append((int(i), int(j), float(rng.uniform(-0.05, 0.05))))
    return SyntheticObjective(
        n=n,
        baseline_bias=0.7,
        baseline_ppl=0.35,
        linear_bias=lin_bias,
        linear_ppl=lin_ppl,
        pairs_bias=pairs_bias,
        pairs_ppl=pairs_ppl,
        noise_sigma=noise_sigma,
    )


def make_monotone_objective(n: int, rng_seed, noise_sigma: float = 0.0) -> SyntheticObjective:
    """Clean trade-off: every pruned head lowers bias and raises perplexity.

    No pairwise terms, so weighting bias more always favors pruning more.
    """
    rng = np.random.default_rng(rng_seed)
    lin_bias = -rng.uniform(0.01, 0.06, size=n)
    lin_ppl = rng.uniform(0.01, 0.06, size=n)
    return SyntheticObjective(
        n=n,
        baseline_bias=0.8,
        baseline_ppl=0.25,
        linear_bias=lin_bias,
        linear_ppl=lin_ppl,
        noise_sigma=noise_sigma,
    )


def make_deceptive_objective(n: int, rng_seed, noise_sigma: float = 0.0) -> SyntheticObjective:
    """Objective where single-head effects mislead greedy selection.

    Two trap heads look best in isolation but cancel each other when pruned
    together; two sleeper pairs look unremarkable alone but interact
    strongly. A search over combinations finds the sleepers; a rank of
    single-head effects prunes the traps.
    """
    if n < 8:
        raise ConfigurationError("deceptive objective needs n >= 8")
    rng = np.random.default_rng(rng_seed)
    lin_bias = -rng.uniform(0.005, 0.03, size=n)
    lin_ppl = rng.uniform(0.01, 0.03, size=n)
    heads = rng.permutation(n)
    trap_a, trap_b = int(heads[0]), int(heads[1])
    sleepers = [(int(heads[2]), int(heads[3])), (int(heads[4]), int(heads[5]))]
    lin_bias[trap_a] = lin_bias[trap_b] = -0.12  # best-looking solo effects
    pairs_bias = [(trap_a, trap_b, 0.3)]  # ... that cancel jointly
    for i, j in sleepers:
        lin_bias[i] = lin_bias[j] = -0.015
        pairs_bias.append((i, j, -0.18))  # jointly strong
    return SyntheticObjective(
        n=n,
        baseline_bias=0.75,
        baseline_ppl=0.35,
        linear_bias=lin_bias,
        linear_ppl=lin_ppl,
        pairs_bias=pairs_bias,
        pairs_ppl=[],
        noise_sigma=noise_sigma,
    )


OBJECTIVE_KINDS = {
    "random": make_random_objective,
    "monotone": make_monotone_objective,
    "deceptive": make_deceptive_objective,
}


# ---------------------------------------------------------------------------
# objective spec files
# ---------------------------------------------------------------------------


def save_objective(obj: SyntheticObjective, path) -> None:
    payload = {
        "format": OBJECTIVE_FORMAT,
        "n": obj.n,
        "baseline_bias": obj.baseline_bias,
        "baseline_ppl": obj.baseline_ppl,
        "linear_bias": obj.linear_bias.tolist(),
        "linear_ppl": obj.linear_ppl.tolist(),
        "pairs_bias": [list(t) for t in obj.pairs_bias],
        "pairs_ppl": [list(t) for t in obj.pairs_ppl],
        "noise_sigma": obj.noise_sigma,
        "ppl_floor": obj.ppl_floor,
    }
    with atomic_writer(path) as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_objective(path) -> SyntheticObjective:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: bad JSON: {exc}") from exc
    if payload.get("format") != OBJECTIVE_FORMAT:
        raise ParseError(f"{path}: not an objective file (format field missing/unknown)")
    return SyntheticObjective(
        n=int(payload["n"]),
        baseline_bias=float(payload["baseline_bias"]),
        baseline_ppl=float(payload["baseline_ppl"]),
        linear_bias=payload["linear_bias"],
        linear_ppl=payload["linear_ppl"],
        pairs_bias=[tuple(t) for t in payload.get("pairs_bias", [])],
        pairs_ppl=[tuple(t) for t in payload.get("pairs_ppl", [])],
        noise_sigma=float(payload.get("noise_sigma", 0.0)),
        ppl_floor=float(payload.get("ppl_floor", 1e-6)),
    )
