import numpy as np
import pytest
from scipy import stats

from headanneal.errors import ConfigurationError, DimensionError, NeighborhoodError, ParseError
from headanneal.masks import (
    HeadMask,
    WeightBounds,
    generate_neighbor,
    hamming_distance,
    hamming_weight,
    neighbor_mode,
    random_state,
)


class TestHammingDistance:
    def test_single_differing_position(self):
        assert hamming_distance(HeadMask.from_text("0101"), HeadMask.from_text("0001")) == 1

    def test_identity(self):
        m = HeadMask.from_text("011010")
        assert hamming_distance(m, m) == 0

    def test_matches_positionwise_loop(self):
        # independent oracle: compare position by position
        rng = np.random.default_rng(42)
        for _ in range(200):
            a = HeadMask(rng.integers(0, 2, size=20))
            b = HeadMask(rng.integers(0, 2, size=20))
            expected = sum(1 for x, y in zip(a.bits, b.bits) if x != y)
            assert hamming_distance(a, b) == expected
            assert hamming_distance(a, b) == bin(
                int(a.to_text(), 2) ^ int(b.to_text(), 2)
            ).count("1")

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            hamming_distance(HeadMask.zeros(4), HeadMask.zeros(5))


class TestHammingWeight:
    def test_all_zero(self):
        assert hamming_weight(HeadMask.zeros(16)) == 0

    def test_all_one(self):
        assert hamming_weight(HeadMask(np.ones(12, dtype=np.uint8))) == 12

    def test_single_pruned_head_at_full_width(self):
        # 1024-head state with only the second head pruned
        bits = np.zeros(1024, dtype=np.uint8)
        bits[1] = 1
        assert hamming_weight(HeadMask(bits)) == 1


class TestMaskText:
    def test_round_trip(self):
        m = HeadMask.from_text("010110")
        assert m.to_text() == "010110"
        assert HeadMask.from_text(m.to_text()) == m

    def test_comma_list_form(self):
        m = HeadMask.from_text("0, 1, 0, 0, 0")
        assert m.to_text() == "01000"
        assert m.weight() == 1

    def test_bad_text(self):
        with pytest.raises(ParseError):
            HeadMask.from_text("01021")
        with pytest.raises(ParseError):
            HeadMask.from_text("0,x,1")

    def test_immutability_and_hash(self):
        m = HeadMask.from_text("0101")
        with pytest.raises((ValueError, AttributeError)):
            m.bits[0] = 1
        assert len({m, HeadMask.from_text("0101")}) == 1


class TestRandomState:
    def test_forced_weight(self):
        m = random_state(8, WeightBounds(3, 3), 0)
        assert m.weight() == 3

    def test_zero_bounds(self):
        assert random_state(8, WeightBounds(0, 0), 1) == HeadMask.zeros(8)

    def test_weight_histogram_uniform(self):
        rng = np.random.default_rng(7)
        counts = {2: 0, 3: 0, 4: 0}
        draws = 10_000
        for _ in range(draws):
            counts[random_state(10, WeightBounds(2, 4), rng).weight()] += 1
        expected = draws / 3
        sigma = np.sqrt(draws * (1 / 3) * (2 / 3))
        for k in (2, 3, 4):
            assert abs(counts[k] - expected) <= 3 * sigma
        chi2, p = stats.chisquare(list(counts.values()))
        assert p > 0.001

    def test_determinism(self):
        assert random_state(20, WeightBounds(1, 5), 123) == random_state(
            20, WeightBounds(1, 5), 123
        )

    def test_infeasible_bounds(self):
        with pytest.raises(ConfigurationError):
            random_state(4, WeightBounds(2, 10), 0)
        with pytest.raises(ConfigurationError):
            WeightBounds(5, 2)


class TestGenerateNeighbor:
    def test_uniform_over_restricted_neighborhood(self):
        s = HeadMask.zeros(3)
        bounds = WeightBounds(0, 1)
        rng = np.random.default_rng(11)
        counts = {"100": 0, "010": 0, "001": 0}
        draws = 3000
        for _ in range(draws):
            counts[generate_neighbor(s, bounds, rng).to_text()] += 1
        chi2, p = stats.chisquare(list(counts.values()))
        assert p > 0.001

    def test_upper_bound_forces_clearing(self):
        s = HeadMask.from_text("1101")
        rng = np.random.default_rng(3)
        for _ in range(50):
            nb = generate_neighbor(s, WeightBounds(0, 3), rng)
            assert nb.weight() == 2

    def test_membership_against_bruteforce_enumeration(self):
        # oracle: enumerate the legal neighborhood exhaustively for N=6
        s = HeadMask.from_text("101000")
        bounds = WeightBounds(1, 3)
        legal = set()
        for i in range(6):
            bits = s.bits.copy()
            bits[i] ^= 1
            if bounds.contains(int(bits.sum())):
                legal.add(HeadMask(bits))
        rng = np.random.default_rng(5)
        seen = set()
        for _ in range(500):
            nb = generate_neighbor(s, bounds, rng)
            assert nb in legal
            assert hamming_distance(s, nb) == 1
            seen.add(nb)
        assert seen == legal

    def test_bounds_never_violated(self):
        rng = np.random.default_rng(17)
        bounds = WeightBounds(2, 5)
        s = random_state(12, bounds, rng)
        for _ in range(2000):
            s = generate_neighbor(s, bounds, rng)
            assert bounds.contains(s.weight())

    def test_equal_bounds_swap_preserves_weight(self):
        bounds = WeightBounds(3, 3)
        assert neighbor_mode(bounds) == "swap"
        rng = np.random.default_rng(23)
        s = random_state(10, bounds, rng)
        for _ in range(200):
            nb = generate_neighbor(s, bounds, rng)
            assert nb.weight() == 3
            assert hamming_distance(s, nb) == 2
            s = nb

    def test_empty_swap_neighborhood(self):
        with pytest.raises(NeighborhoodError):
            generate_neighbor(HeadMask.zeros(4), WeightBounds(0, 0), 0)

    def test_state_outside_bounds_rejected(self):
        with pytest.raises(ConfigurationError):
            generate_neighbor(HeadMask.from_text("1111"), WeightBounds(0, 2), 0)

    def test_determinism(self):
        s = HeadMask.from_text("0101010101")
        b = WeightBounds(2, 8)
        assert generate_neighbor(s, b, 99) == generate_neighbor(s, b, 99)
