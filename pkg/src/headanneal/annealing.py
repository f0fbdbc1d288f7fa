"""Simulated annealing over pruning states against a surrogate-backed cost.

One chain repeatedly proposes a bounded neighbor of the current state,
scores it as eps*bias_hat + (1-eps)*ppl_hat, always accepts downhill moves,
accepts uphill moves with probability exp(-dE/T), and cools on the
logarithmic schedule T_i = T0 / ln(2 + i) (natural log). T0 defaults to the
acceptance-ratio fixed point: pick T so that a sampled set of uphill
transitions would be accepted at a target rate chi0.

The global best is tracked over every proposed candidate, accepted or not,
seeded with the all-zero (nothing pruned) state and the initial state. The
trace stores flip positions per iteration rather than whole states; the
state sequence is reconstructable exactly, and a chain replayed with the
same seed, config, and cost reproduces the identical accept/reject
sequence on the same backend.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, ValidationError
from .kernels import make_pair_kernel
from .manifest import atomic_writer
from .masks import HeadMask, WeightBounds, _propose_flips, neighbor_mode, random_state
from .oracle import BIAS_CLAMP, SyntheticObjective
from .surrogate import PREDICT_CLIP, SurrogateRegressor

DEFAULT_T0_TARGET = 0.8
DEFAULT_T0_SAMPLES = 100

_INITIAL_TRACE_CAP = 1 << 16  # time-limited runs grow the trace buffers on demand


def temperature(t0: float, i: float) -> float:
    """Logarithmic cooling: T_i = T0 / ln(2 + i)."""
    if i < 0:
        raise ValidationError(f"iteration index must be >= 0, got {i}")
    return t0 / math.log(2.0 + i)


def accept(delta_e: float, t: float, rng_draw: float) -> bool:
    """Downhill always; uphill iff rng_draw < exp(-delta_e / t)."""
    if delta_e <= 0.0:
        return True
    return rng_draw < math.exp(-delta_e / t)


def t0_from_transitions(
    e_before: np.ndarray,
    e_after: np.ndarray,
    target_ratio: float,
    tol: float = 1e-3,
    max_iter: int = 100,
    p: float = 1.0,
) -> float:
    """Fixed-point initial temperature from sampled uphill transitions.

    Solves chi(T) = target for chi(T) = sum(exp(-e_after/T)) /
    sum(exp(-e_before/T)) by iterating T <- T * (ln chi(T) / ln target)^(1/p).
    """
    if not (0.0 < target_ratio < 1.0):
        raise ConfigurationError(f"target ratio must be in (0, 1), got {target_ratio}")
    e_before = np.asarray(e_before, dtype=np.float64)
    e_after = np.asarray(e_after, dtype=np.float64)
    if e_before.size == 0 or e_before.shape != e_after.shape:
        raise ValidationError("need matching non-empty transition energy arrays")
    if np.any(e_after <= e_before):
        raise ValidationError("transitions must be strictly uphill")
    shift = float(e_before.min())  # common shift cancels in the ratio
    eb = e_before - shift
    ea = e_after - shift
    t = float((ea - eb).mean())
    for _ in range(max_iter):
        num = np.exp(-ea / t).sum()
        den = np.exp(-eb / t).sum()
        chi = num / den
        if chi <= 0.0:  # underflow: temperature far too low
            t *= 2.0
            continue
        if abs(chi - target_ratio) <= tol:
            break
        t = t * (math.log(chi) / math.log(target_ratio)) ** (1.0 / p)
    return t


def estimate_t0(
    cost,
    s0: HeadMask,
    bounds: WeightBounds,
    target_ratio: float = DEFAULT_T0_TARGET,
    sample_size: int = DEFAULT_T0_SAMPLES,
    rng_seed=0,
    max_steps: int | None = None,
) -> float:
    """Sample uphill transitions by random walk around s0, then fixed-point.

    Falls back to T0 = 1.0 with a warning when the landscape shows no
    uphill move within the step budget.
    """
    rng = np.random.default_rng(rng_seed)
    if max_steps is None:
        max_steps = 50 * sample_size
    bits = s0.bits.copy()
    idx = s0.indices()
    hw = int(idx.size)
    current = cost.of_indices(idx)
    before: list[float] = []
    after: list[float] = []
    for _ in range(max_steps):
        a, b = _propose_flips(bits, hw, bounds, rng)
        if b >= 0:
            prop_idx = np.concatenate([idx[idx != a], np.array([b], dtype=np.int64)])
            prop_hw = hw
        elif bits[a]:
            prop_idx = idx[idx != a]
            prop_hw = hw - 1
        else:
            prop_idx = np.concatenate([idx, np.array([a], dtype=np.int64)])
            prop_hw = hw + 1
        proposed = cost.of_indices(prop_idx)
        if proposed > current:
            before.append(current)
            after.append(proposed)
        # walk regardless of direction to diversify the sample
        bits[a] ^= 1
        if b >= 0:
            bits[b] ^= 1
        idx, hw, current = prop_idx, prop_hw, proposed
        if len(before) >= sample_size:
            break
    if not before:
        warnings.warn(
            "no uphill transitions found around the start state "
            "(flat landscape); using T0 = 1.0",
            stacklevel=2,
        )
        return 1.0
    return t0_from_transitions(np.array(before), np.array(after), target_ratio)


# ---------------------------------------------------------------------------
# cost adapters
# ---------------------------------------------------------------------------


class SurrogatePairCost:
    """Fused eps-weighted cost over a trained regressor pair."""

    def __init__(self, theta_bias, theta_ppl, epsilon, backend="auto"):
        if theta_bias.n != theta_ppl.n:
            raise DimensionError(
                f"regressor widths differ: {theta_bias.n} vs {theta_ppl.n}"
            )
        if not (0.0 <= epsilon <= 1.0):
            raise ConfigurationError(f"epsilon must be in [0, 1], got {epsilon}")
        self.theta_bias = theta_bias
        self.theta_ppl = theta_ppl
        self.epsilon = float(epsilon)
        self.n = theta_bias.n
        self._kernel = make_pair_kernel(
            theta_bias.as_net_arrays(),
            theta_ppl.as_net_arrays(),
            epsilon,
            PREDICT_CLIP[0],
            PREDICT_CLIP[1],
            backend=backend,
        )
        self.backend = type(self._kernel).__name__

    def of_indices(self, idx: np.ndarray) -> float:
        return self._kernel.cost_of_indices(idx)

    def of_mask(self, s: HeadMask) -> float:
        return self.of_indices(s.indices())

    def predictions(self, s: HeadMask) -> tuple[float, float]:
        """Clipped scaled (bias, ppl) predictions; runs both nets."""
        yb, yp = self._kernel.predictions_of_indices(s.indices())
        return float(yb), float(yp)


class ObjectiveCost:
    """eps-weighted cost straight from a synthetic objective (noise-free).

    Evaluates with scalar arithmetic: at desk scale the states are tiny and
    the chain calls this hundreds of thousands of times.
    """

    def __init__(self, objective: SyntheticObjective, epsilon: float):
        if not (0.0 <= epsilon <= 1.0):
            raise ConfigurationError(f"epsilon must be in [0, 1], got {epsilon}")
        self.objective = objective
        self.epsilon = float(epsilon)
        self.n = objective.n
        self._lin_b = objective.linear_bias.tolist()
        self._lin_p = objective.linear_ppl.tolist()
        self._qb = {}
        for i, j, c in objective.pairs_bias:
            key = (min(i, j), max(i, j))
            self._qb[key] = self._qb.get(key, 0.0) + c
        self._qp = {}
        for i, j, c in objective.pairs_ppl:
            key = (min(i, j), max(i, j))
            self._qp[key] = self._qp.get(key, 0.0) + c

    def of_indices(self, idx) -> float:
        obj = self.objective
        heads = sorted(int(h) for h in idx)
        bias = obj.baseline_bias
        ppl = obj.baseline_ppl
        for h in heads:
            bias += self._lin_b[h]
            ppl += self._lin_p[h]
        if self._qb or self._qp:
            for a_pos in range(len(heads)):
                for b_pos in range(a_pos + 1, len(heads)):
                    key = (heads[a_pos], heads[b_pos])
                    bias += self._qb.get(key, 0.0)
                    ppl += self._qp.get(key, 0.0)
        if bias < BIAS_CLAMP[0]:
            bias = BIAS_CLAMP[0]
        elif bias > BIAS_CLAMP[1]:
            bias = BIAS_CLAMP[1]
        if ppl < obj.ppl_floor:
            ppl = obj.ppl_floor
        return self.epsilon * bias + (1.0 - self.epsilon) * ppl

    def of_mask(self, s: HeadMask) -> float:
        return self.of_indices(s.indices())


# ---------------------------------------------------------------------------
# configuration, trace, run record
# ---------------------------------------------------------------------------


@dataclass
class AnnealConfig:
    epsilon: float
    bounds: WeightBounds
    iterations: int | None = None
    time_limit_s: float | None = None
    t0: float | None = None  # fixed initial temperature; None = estimate
    t0_target_ratio: float = DEFAULT_T0_TARGET
    t0_sample_size: int = DEFAULT_T0_SAMPLES
    seed: int = 0
    record_trace: bool = True
    backend: str = "auto"

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigurationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.iterations is None and self.time_limit_s is None:
            raise ConfigurationError("set iterations and/or time_limit_s")
        if self.iterations is not None and self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise ConfigurationError("time_limit_s must be positive")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "n_l": self.bounds.n_l,
            "n_u": self.bounds.n_u,
            "iterations": self.iterations,
            "time_limit_s": self.time_limit_s,
            "t0": self.t0,
            "t0_target_ratio": self.t0_target_ratio,
            "t0_sample_size": self.t0_sample_size,
            "seed": self.seed,
            "record_trace": self.record_trace,
            "backend": self.backend,
        }


@dataclass
class Trace:
    """Per-iteration arrays; flips encode the proposed state deltas."""

    temperature: np.ndarray
    flip_a: np.ndarray
    flip_b: np.ndarray  # -1 for single-bit moves
    delta_e: np.ndarray
    accepted: np.ndarray
    cost: np.ndarray  # current cost after the accept/reject decision

    def __len__(self) -> int:
        return self.temperature.size

    def proposed_costs(self) -> np.ndarray:
        """Candidate cost at each iteration, accepted or not."""
        return self.cost + np.where(self.accepted, 0.0, self.delta_e)

    def iter_states(self, initial_bits: np.ndarray):
        """Yield (proposed_bits, accepted) in iteration order."""
        current = np.asarray(initial_bits, dtype=np.uint8).copy()
        for k in range(len(self)):
            proposed = current.copy()
            proposed[self.flip_a[k]] ^= 1
            if self.flip_b[k] >= 0:
                proposed[self.flip_b[k]] ^= 1
            yield proposed, bool(self.accepted[k])
            if self.accepted[k]:
                current = proposed


@dataclass
class AnnealRun:
    best_mask: HeadMask
    best_cost: float
    initial_mask: HeadMask
    initial_cost: float
    zero_cost: float
    t0: float
    iterations: int
    elapsed_s: float
    states_per_second: float
    neighbor_mode: str
    config: AnnealConfig
    trace: Trace | None = None
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# the chain
# ---------------------------------------------------------------------------


def anneal(cost, config: AnnealConfig) -> AnnealRun:
    """Run one annealing chain against any cost with .n and .of_indices."""
    n = cost.n
    bounds = config.bounds
    bounds.validate_for(n)
    ss = np.random.SeedSequence(config.seed)
    rng_init, rng_t0, rng_chain = (np.random.default_rng(s) for s in ss.spawn(3))

    s0 = random_state(n, bounds, rng_init)
    c0 = cost.of_mask(s0)
    t0 = config.t0
    if t0 is None:
        t0 = estimate_t0(
            cost, s0, bounds, config.t0_target_ratio, config.t0_sample_size, rng_t0
        )
    if t0 <= 0:
        raise ConfigurationError(f"initial temperature must be positive, got {t0}")

    # incumbent: the all-zero (unpruned) state, then the start state
    zero_cost = cost.of_indices(np.empty(0, dtype=np.int64))
    best_cost = zero_cost
    best_idx = np.empty(0, dtype=np.int64)
    if c0 <= best_cost:
        best_cost, best_idx = c0, s0.indices()

    cap = config.iterations if config.iterations is not None else _INITIAL_TRACE_CAP
    record = config.record_trace
    if record:
        tr_temp = np.empty(cap)
        tr_a = np.empty(cap, dtype=np.int64)
        tr_b = np.empty(cap, dtype=np.int64)
        tr_de = np.empty(cap)
        tr_acc = np.empty(cap, dtype=bool)
        tr_cost = np.empty(cap)

    bits = s0.bits.copy()
    idx = s0.indices()
    hw = int(idx.size)
    current = c0
    log_fn = math.log
    exp_fn = math.exp

    start = time.perf_counter()
    i = 0
    while True:
        if config.iterations is not None and i >= config.iterations:
            break
        if config.time_limit_s is not None and time.perf_counter() - start > config.time_limit_s:
            break
        if record and i >= cap:
            cap *= 2
            tr_temp = np.resize(tr_temp, cap)
            tr_a = np.resize(tr_a, cap)
            tr_b = np.resize(tr_b, cap)
            tr_de = np.resize(tr_de, cap)
            tr_acc = np.resize(tr_acc, cap)
            tr_cost = np.resize(tr_cost, cap)

        t = t0 / log_fn(2.0 + i)
        a, b = _propose_flips(bits, hw, bounds, rng_chain)
        if b >= 0:
            prop_idx = np.concatenate([idx[idx != a], np.array([b], dtype=np.int64)])
            prop_hw = hw
        elif bits[a]:
            prop_idx = idx[idx != a]
            prop_hw = hw - 1
        else:
            prop_idx = np.concatenate([idx, np.array([a], dtype=np.int64)])
            prop_hw = hw + 1
        cost_i = cost.of_indices(prop_idx)
        delta_e = cost_i - current
        if delta_e <= 0.0:
            ok = True
        else:
            ok = rng_chain.random() < exp_fn(-delta_e / t)
        if ok:
            bits[a] ^= 1
            if b >= 0:
                bits[b] ^= 1
            idx, hw, current = prop_idx, prop_hw, cost_i
        if cost_i <= best_cost:
            best_cost = cost_i
            best_idx = prop_idx
        if record:
            tr_temp[i] = t
            tr_a[i] = a
            tr_b[i] = b
            tr_de[i] = delta_e
            tr_acc[i] = ok
            tr_cost[i] = current
        i += 1

    elapsed = time.perf_counter() - start
    trace = None
    if record:
        trace = Trace(
            temperature=tr_temp[:i].copy(),
            flip_a=tr_a[:i].copy(),
            flip_b=tr_b[:i].copy(),
            delta_e=tr_de[:i].copy(),
            accepted=tr_acc[:i].copy(),
            cost=tr_cost[:i].copy(),
        )
    return AnnealRun(
        best_mask=HeadMask.from_indices(n, best_idx),
        best_cost=float(best_cost),
        initial_mask=s0,
        initial_cost=float(c0),
        zero_cost=float(zero_cost),
        t0=float(t0),
        iterations=i,
        elapsed_s=elapsed,
        states_per_second=i / elapsed if elapsed > 0 else float("inf"),
        neighbor_mode=neighbor_mode(bounds),
        config=config,
        trace=trace,
    )


def cost(s: HeadMask, theta_bias: SurrogateRegressor, theta_ppl: SurrogateRegressor,
         epsilon: float) -> float:
    """eps * theta_bias(s) + (1 - eps) * theta_ppl(s), clipped predictions."""
    return SurrogatePairCost(theta_bias, theta_ppl, epsilon).of_mask(s)


def run(config: AnnealConfig, theta_bias: SurrogateRegressor,
        theta_ppl: SurrogateRegressor) -> AnnealRun:
    """Anneal against the surrogate pair under the given configuration."""
    pair = SurrogatePairCost(theta_bias, theta_ppl, config.epsilon, config.backend)
    result = anneal(pair, config)
    yb, yp = pair.predictions(result.best_mask)
    result.extras["pred_bias_scaled"] = yb
    result.extras["pred_ppl_scaled"] = yp
    if theta_bias.scaling is not None:
        result.extras["pred_bias"] = yb * theta_bias.scaling.bias_max
    if theta_ppl.scaling is not None:
        result.extras["pred_ppl"] = yp * theta_ppl.scaling.ppl_max
    result.extras["kernel_backend"] = pair.backend
    return result


def export_trace_jsonl(result: AnnealRun, path) -> None:
    """Summary line followed by one record per iteration (flip deltas)."""
    with atomic_writer(path) as fh:
        summary = {
            "type": "summary",
            "best_mask": result.best_mask.to_text(),
            "best_cost": result.best_cost,
            "initial_mask": result.initial_mask.to_text(),
            "initial_cost": result.initial_cost,
            "zero_cost": result.zero_cost,
            "t0": result.t0,
            "iterations": result.iterations,
            "states_per_second": result.states_per_second,
            "neighbor_mode": result.neighbor_mode,
            "config": result.config.to_dict(),
            **{k: v for k, v in result.extras.items() if isinstance(v, (int, float, str))},
        }
        fh.write(json.dumps(summary) + "\n")
        tr = result.trace
        if tr is None:
            return
        for k in range(len(tr)):
            flips = [int(tr.flip_a[k])]
            if tr.flip_b[k] >= 0:
                flips.append(int(tr.flip_b[k]))
            fh.write(
                json.dumps(
                    {
                        "i": k,
                        "T": float(tr.temperature[k]),
                        "flips": flips,
                        "delta_e": float(tr.delta_e[k]),
                        "accepted": bool(tr.accepted[k]),
                        "cost": float(tr.cost[k]),
                    }
                )
                + "\n"
            )
