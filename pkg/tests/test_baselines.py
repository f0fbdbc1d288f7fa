import numpy as np
import pytest
from scipy import stats

from headanneal.baselines import (
    FaspConfig,
    HeadEffectTable,
    fasp_protected_set,
    fasp_select,
    load_effect_table,
    load_score_file,
    random_select,
    save_effect_table,
    score_ranked_select,
)
from headanneal.errors import ConfigurationError, DataError, ParseError
from headanneal.masks import HeadMask


class TestFaspSelect:
    def test_hand_traced_example(self):
        # N=10, gamma=0.3, alpha=0.2.
        # z_ppl ranking (non-increasing): 4 (.9), 1 (.8), 7 (.7), 0 (.6), ...
        #   -> protected = {4, 1, 7}
        # remaining {0,2,3,5,6,8,9} ranked by z_bias non-increasing:
        #   6 (.95), 2 (.85), 9 (.75), ... -> prune floor(0.2*10)=2 -> {6, 2}
        z_ppl = np.array([0.6, 0.8, 0.1, 0.2, 0.9, 0.3, 0.0, 0.7, 0.4, 0.5])
        z_bias = np.array([0.1, 0.9, 0.85, 0.2, 0.99, 0.3, 0.95, 0.98, 0.4, 0.75])
        effects = HeadEffectTable(z_bias, z_ppl)
        cfg = FaspConfig(alpha=0.2, gamma=0.3)
        assert fasp_protected_set(effects, cfg) == [4, 1, 7]
        mask = fasp_select(effects, cfg)
        assert mask == HeadMask.from_indices(10, [6, 2])

    def test_alpha_zero_prunes_nothing(self):
        effects = HeadEffectTable(np.arange(10.0), np.arange(10.0))
        assert fasp_select(effects, FaspConfig(alpha=0.0, gamma=0.3)) == HeadMask.zeros(10)

    def test_protected_heads_never_pruned(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(8, 40))
            effects = HeadEffectTable(rng.normal(size=n), rng.normal(size=n))
            gamma = float(rng.uniform(0, 0.5))
            alpha = float(rng.uniform(0, 0.4))
            cfg = FaspConfig(alpha=alpha, gamma=gamma)
            if int(np.floor(alpha * n)) > n - int(np.floor(gamma * n)):
                continue
            mask = fasp_select(effects, cfg)
            protected = fasp_protected_set(effects, cfg)
            assert not any(mask.bits[h] for h in protected)
            assert mask.weight() == min(
                int(np.floor(alpha * n)), n - int(np.floor(gamma * n))
            )

    def test_tie_break_lower_index(self):
        z_bias = np.array([0.5, 0.5, 0.5, 0.1])
        z_ppl = np.zeros(4)
        mask = fasp_select(HeadEffectTable(z_bias, z_ppl), FaspConfig(alpha=0.5, gamma=0.0))
        assert mask == HeadMask.from_indices(4, [0, 1])

    def test_infeasible_config(self):
        effects = HeadEffectTable(np.arange(10.0), np.arange(10.0))
        with pytest.raises(ConfigurationError):
            fasp_select(effects, FaspConfig(alpha=0.9, gamma=0.5))
        with pytest.raises(ConfigurationError):
            FaspConfig(alpha=1.2, gamma=0.3)

    def test_default_gamma_reference_value(self):
        assert FaspConfig(alpha=0.1).gamma == 0.3

    def test_determinism(self):
        rng = np.random.default_rng(1)
        effects = HeadEffectTable(rng.normal(size=20), rng.normal(size=20))
        cfg = FaspConfig(alpha=0.2, gamma=0.6)
        assert fasp_select(effects, cfg) == fasp_select(effects, cfg)


class TestScoreRanked:
    def test_alpha_one_prunes_everything(self):
        scores = {i: float(i * i % 7) for i in range(9)}
        mask = score_ranked_select(scores, 1.0, "prune-lowest")
        assert mask.weight() == 9

    def test_identity_scores_prune_lowest(self):
        scores = {i: float(i) for i in range(10)}
        mask = score_ranked_select(scores, 0.3, "prune-lowest")
        assert mask == HeadMask.from_indices(10, [0, 1, 2])
        mask = score_ranked_select(scores, 0.3, "prune-highest")
        assert mask == HeadMask.from_indices(10, [7, 8, 9])

    def test_agreement_with_full_sort_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            n = int(rng.integers(4, 30))
            values = np.round(rng.normal(size=n), 2)  # rounding forces ties
            scores = {i: float(values[i]) for i in range(n)}
            alpha = float(rng.uniform(0, 1))
            k = int(np.floor(alpha * n))
            # oracle: numpy lexsort with index as the secondary key
            order = np.lexsort((np.arange(n), values))
            expected = HeadMask.from_indices(n, order[:k])
            assert score_ranked_select(scores, alpha, "prune-lowest") == expected

    def test_sparse_scores_rejected(self):
        with pytest.raises(DataError):
            score_ranked_select({0: 1.0, 2: 2.0}, 0.5, "prune-lowest")

    def test_unknown_direction(self):
        with pytest.raises(ConfigurationError):
            score_ranked_select({0: 1.0}, 0.5, "sideways")


class TestRandomSelect:
    def test_single_head_floor(self):
        mask = random_select(12, 0.1, 0)  # floor(1.2) = 1
        assert mask.weight() == 1

    def test_weight_within_budget(self):
        rng = np.random.default_rng(3)
        cap = int(np.floor(0.2 * 30))
        weights = [random_select(30, 0.2, rng).weight() for _ in range(10_000)]
        assert min(weights) >= 1
        assert max(weights) <= cap

    def test_weight_distribution_uniform(self):
        rng = np.random.default_rng(4)
        cap = int(np.floor(0.2 * 30))
        counts = np.zeros(cap)
        for _ in range(10_000):
            counts[random_select(30, 0.2, rng).weight() - 1] += 1
        chi2, p = stats.chisquare(counts)
        assert p > 0.001

    def test_alpha_too_small(self):
        with pytest.raises(ConfigurationError):
            random_select(10, 0.05, 0)  # floor(0.5) = 0

    def test_determinism(self):
        assert random_select(20, 0.2, 99) == random_select(20, 0.2, 99)


class TestEffectFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        effects = HeadEffectTable(rng.normal(size=12), rng.normal(size=12))
        path = tmp_path / "effects.csv"
        save_effect_table(effects, path)
        loaded = load_effect_table(path)
        np.testing.assert_array_equal(loaded.z_bias, effects.z_bias)
        np.testing.assert_array_equal(loaded.z_ppl, effects.z_ppl)

    def test_extra_columns_tolerated(self, tmp_path):
        path = tmp_path / "effects.csv"
        path.write_text(
            "head_index,z_bias,z_ppl,bias_ablated,note\n"
            "0,0.1,-0.2,0.6,x\n1,0.3,-0.1,0.4,y\n"
        )
        loaded = load_effect_table(path)
        assert loaded.n == 2
        assert loaded.z_bias[1] == 0.3

    def test_missing_column(self, tmp_path):
        path = tmp_path / "effects.csv"
        path.write_text("head_index,z_bias\n0,0.1\n")
        with pytest.raises(ParseError):
            load_effect_table(path)

    def test_sparse_indices_rejected(self, tmp_path):
        path = tmp_path / "effects.csv"
        path.write_text("head_index,z_bias,z_ppl\n0,0.1,0.2\n2,0.3,0.4\n")
        with pytest.raises(DataError):
            load_effect_table(path)

    def test_score_file(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("head_index,score\n0,1.5\n1,-0.5\n2,3.0\n")
        scores = load_score_file(path)
        assert scores == {0: 1.5, 1: -0.5, 2: 3.0}
