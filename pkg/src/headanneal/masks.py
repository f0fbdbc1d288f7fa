"""Pruning states as bit vectors over the Boolean hypercube of head subsets.

A state marks which attention heads are pruned (bit i = 1 means head i is
dropped). Head indices flatten the model layer-major: head index =
layer * heads_per_layer + head_within_layer. The neighborhood used by the
search is single-bit flips restricted to a pruned-count window
[n_l, n_u]; when n_l == n_u no flip can preserve the count, so neighbors
degrade to swap moves (clear one set bit, set one clear bit) at constant
weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, NeighborhoodError, ParseError


@dataclass(frozen=True)
class WeightBounds:
    """Inclusive window on how many heads a state may prune."""

    n_l: int
    n_u: int

    def __post_init__(self):
        if not (0 <= self.n_l <= self.n_u):
            raise ConfigurationError(
                f"invalid bounds: need 0 <= n_l <= n_u, got [{self.n_l}, {self.n_u}]"
            )

    def validate_for(self, n: int) -> None:
        if self.n_u > n:
            raise ConfigurationError(
                f"upper bound {self.n_u} exceeds head count {n}"
            )

    def contains(self, weight: int) -> bool:
        return self.n_l <= weight <= self.n_u

    @property
    def equal(self) -> bool:
        return self.n_l == self.n_u


class HeadMask:
    """Immutable fixed-length bit vector; 1 = head pruned."""

    __slots__ = ("bits", "_hash")

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("mask bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValueError("mask bits must be 0 or 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("HeadMask is immutable")

    @property
    def n(self) -> int:
        return self.bits.size

    @classmethod
    def zeros(cls, n: int) -> "HeadMask":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def from_indices(cls, n: int, indices) -> "HeadMask":
        bits = np.zeros(n, dtype=np.uint8)
        bits[np.asarray(indices, dtype=np.int64)] = 1
        return cls(bits)

    @classmethod
    def from_text(cls, text: str) -> "HeadMask":
        """Parse '0101...' or a comma list '0,1,0,1'."""
        s = text.strip()
        if "," in s:
            parts = [p.strip() for p in s.split(",")]
        else:
            parts = list(s)
        try:
            bits = [int(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"bad mask text {text!r}") from exc
        if any(b not in (0, 1) for b in bits):
            raise ParseError(f"mask text has non-binary digits: {text!r}")
        return cls(bits)

    def to_text(self) -> str:
        """Canonical text form: '0'/'1' string, leftmost = head index 0."""
        return "".join("1" if b else "0" for b in self.bits)

    def indices(self) -> np.ndarray:
        """Indices of pruned heads, ascending."""
        return np.flatnonzero(self.bits).astype(np.int64)

    def weight(self) -> int:
        return int(self.bits.sum())

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeadMask):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self.bits.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        if self.n <= 40:
            return f"HeadMask({self.to_text()!r})"
        return f"HeadMask(n={self.n}, weight={self.weight()})"


def hamming_weight(s: HeadMask) -> int:
    """Number of pruned heads in the state."""
    return s.weight()


def hamming_distance(a: HeadMask, b: HeadMask) -> int:
    """Number of positions where the two states differ."""
    if a.n != b.n:
        raise DimensionError(f"mask lengths differ: {a.n} vs {b.n}")
    return int(np.count_nonzero(a.bits != b.bits))


def random_state(n: int, bounds: WeightBounds, rng_seed) -> HeadMask:
    """Uniform feasible state: weight uniform in [n_l, n_u], positions uniform.

    rng_seed may be an int seed or a numpy Generator.
    """
    bounds.validate_for(n)
    rng = np.random.default_rng(rng_seed)
    k = int(rng.integers(bounds.n_l, bounds.n_u + 1))
    if k == 0:
        return HeadMask.zeros(n)
    return HeadMask.from_indices(n, rng.choice(n, size=k, replace=False))


def _propose_flips(bits: np.ndarray, hw: int, bounds: WeightBounds, rng) -> tuple[int, int]:
    """One uniform draw from the restricted neighborhood, as flip positions.

    Returns (p, -1) for a single-bit flip, or (clear_pos, set_pos) for the
    constant-weight swap used when n_l == n_u. Rejection-free: the legal
    flip set is enumerated (cheaply, by case) and sampled uniformly.
    """
    n = bits.size
    if bounds.equal:
        # swap move: drop one pruned head, prune one kept head
        if hw == 0 or hw == n:
            raise NeighborhoodError(
                f"no swap moves from weight {hw} with equal bounds [{bounds.n_l}]"
            )
        set_positions = np.flatnonzero(bits)
        clear_positions = np.flatnonzero(bits == 0)
        p_clear = int(set_positions[rng.integers(set_positions.size)])
        p_set = int(clear_positions[rng.integers(clear_positions.size)])
        return p_clear, p_set
    if hw == bounds.n_l:
        # clearing would leave the window: only set moves are legal
        legal = np.flatnonzero(bits == 0)
    elif hw == bounds.n_u:
        # setting would leave the window: only clear moves are legal
        legal = np.flatnonzero(bits)
    else:
        return int(rng.integers(n)), -1
    if legal.size == 0:
        raise NeighborhoodError(f"empty neighborhood at weight {hw} in [{bounds.n_l}, {bounds.n_u}]")
    return int(legal[rng.integers(legal.size)]), -1


def generate_neighbor(s: HeadMask, bounds: WeightBounds, rng_seed) -> HeadMask:
    """Uniform draw from the bounded neighborhood of s.

    Hamming distance is exactly 1, except in the equal-bounds regime where
    the move is a constant-weight swap (distance 2).
    """
    bounds.validate_for(s.n)
    hw = s.weight()
    if not bounds.contains(hw):
        raise ConfigurationError(
            f"state weight {hw} outside bounds [{bounds.n_l}, {bounds.n_u}]"
        )
    rng = np.random.default_rng(rng_seed)
    a, b = _propose_flips(s.bits, hw, bounds, rng)
    bits = s.bits.copy()
    bits[a] ^= 1
    if b >= 0:
        bits[b] ^= 1
    return HeadMask(bits)


def neighbor_mode(bounds: WeightBounds) -> str:
    """'swap' in the equal-bounds regime, 'flip' otherwise."""
    return "swap" if bounds.equal else "flip"
