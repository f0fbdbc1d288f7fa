"""Comparison pruning strategies: effect-ranked selection with a protected
set, generic score-ranked selection, and random pruning.

The per-head effect numbers (z_bias, z_ppl) are supplied as data: each is
the change of the metric when that single head is ablated, measured as
baseline minus ablated value. Computing them requires one model evaluation
per head and happens outside this module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, ParseError
from .manifest import atomic_writer
from .masks import HeadMask


@dataclass
class HeadEffectTable:
    """Dense per-head single-ablation effects, one row per head index."""

    z_bias: np.ndarray
    z_ppl: np.ndarray

    def __post_init__(self):
        self.z_bias = np.asarray(self.z_bias, dtype=np.float64)
        self.z_ppl = np.asarray(self.z_ppl, dtype=np.float64)
        if self.z_bias.shape != self.z_ppl.shape or self.z_bias.ndim != 1:
            raise DataError("effect columns must be 1-d and equally long")

    @property
    def n(self) -> int:
        return self.z_bias.size


@dataclass(frozen=True)
class FaspConfig:
    """alpha: ratio of heads to prune; gamma: ratio protected as critical."""

    alpha: float
    gamma: float = 0.3

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise ConfigurationError(
                f"alpha and gamma must be in [0, 1], got {self.alpha}, {self.gamma}"
            )


def _ranked(indices, values):
    """Head indices sorted by value non-increasing, ties to the lower index."""
    return sorted(indices, key=lambda h: (-values[h], h))


def fasp_select(effects: HeadEffectTable, cfg: FaspConfig) -> HeadMask:
    """Protect the top floor(gamma*N) heads by z_ppl, then prune the top
    floor(alpha*N) of the remainder by z_bias."""
    n = effects.n
    if n == 0:
        raise DataError("empty effect table")
    n_protect = int(np.floor(cfg.gamma * n))
    n_prune = int(np.floor(cfg.alpha * n))
    if n_prune > n - n_protect:
        raise ConfigurationError(
            f"cannot prune {n_prune} heads with {n - n_protect} unprotected"
        )
    by_ppl = _ranked(range(n), effects.z_ppl)
    protected = set(by_ppl[:n_protect])
    pool = [h for h in range(n) if h not in protected]
    pruned = _ranked(pool, effects.z_bias)[:n_prune]
    return HeadMask.from_indices(n, pruned)


def fasp_protected_set(effects: HeadEffectTable, cfg: FaspConfig) -> list[int]:
    """The critical set the selection above never prunes."""
    n_protect = int(np.floor(cfg.gamma * effects.n))
    return _ranked(range(effects.n), effects.z_ppl)[:n_protect]


def score_ranked_select(scores: dict[int, float], alpha: float, direction: str) -> HeadMask:
    """Prune floor(alpha*N) heads ranked by score in the given direction.

    direction: 'prune-lowest' or 'prune-highest'; ties to the lower index.
    """
    if direction not in ("prune-lowest", "prune-highest"):
        raise ConfigurationError(f"unknown direction {direction!r}")
    if not (0.0 <= alpha <= 1.0):
        raise ConfigurationError(f"alpha must be in [0, 1], got {alpha}")
    n = len(scores)
    if sorted(scores) != list(range(n)):
        raise DataError("scores must cover head indices 0..N-1 exactly once")
    n_prune = int(np.floor(alpha * n))
    sign = 1.0 if direction == "prune-lowest" else -1.0
    ranked = sorted(range(n), key=lambda h: (sign * scores[h], h))
    return HeadMask.from_indices(n, ranked[:n_prune])


def random_select(n: int, alpha_max: float, rng_seed) -> HeadMask:
    """Random mask with weight uniform in [1, floor(alpha_max*N)]."""
    if not (0.0 < alpha_max <= 1.0):
        raise ConfigurationError(f"alpha_max must be in (0, 1], got {alpha_max}")
    w_max = int(np.floor(alpha_max * n))
    if w_max < 1:
        raise ConfigurationError(
            f"alpha_max {alpha_max} prunes no heads at N={n}"
        )
    rng = np.random.default_rng(rng_seed)
    w = int(rng.integers(1, w_max + 1))
    return HeadMask.from_indices(n, rng.choice(n, size=w, replace=False))


# ---------------------------------------------------------------------------
# effect-table files: delimited text with header head_index, z_bias, z_ppl
# ---------------------------------------------------------------------------


def load_effect_table(path) -> HeadEffectTable:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no rows")
    for field in ("head_index", "z_bias", "z_ppl"):
        if field not in rows[0]:
            raise ParseError(f"{path}: missing column {field!r}")
    try:
        pairs = {
            int(r["head_index"]): (float(r["z_bias"]), float(r["z_ppl"])) for r in rows
        }
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric effect row: {exc}") from exc
    n = len(rows)
    if sorted(pairs) != list(range(n)):
        raise DataError(f"{path}: head indices must be dense in [0, {n})")
    z_bias = np.array([pairs[h][0] for h in range(n)])
    z_ppl = np.array([pairs[h][1] for h in range(n)])
    return HeadEffectTable(z_bias, z_ppl)


def save_effect_table(effects: HeadEffectTable, path) -> None:
    with atomic_writer(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["head_index", "z_bias", "z_ppl"])
        for h in range(effects.n):
            writer.writerow([h, repr(float(effects.z_bias[h])), repr(float(effects.z_ppl[h]))])


def load_score_file(path) -> dict[int, float]:
    """Delimited text with header (head_index, score)."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no rows")
    if "head_index" not in rows[0] or "score" not in rows[0]:
        raise ParseError(f"{path}: expected columns head_index, score")
    try:
        return {int(r["head_index"]): float(r["score"]) for r in rows}
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric score row: {exc}") from exc
