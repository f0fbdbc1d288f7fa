import numpy as np
import pytest

from headanneal.kernels import HAVE_COMPILED, NumpyPairKernel, make_pair_kernel

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")


def random_net(rng, n, h1, h2, scale=0.08):
    return (
        rng.standard_normal((n, h1)) * scale,
        rng.standard_normal(h1) * scale,
        rng.standard_normal((h1, h2)) * scale,
        rng.standard_normal(h2) * scale,
        rng.standard_normal(h2) * scale,
        np.array([0.4]),
    )


def random_indices(rng, n):
    k = int(rng.integers(0, max(2, n // 4)))
    return np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)


@needs_compiled
class TestBackendParity:
    @pytest.mark.parametrize("n,h1,h2", [(16, 8, 4), (64, 64, 32), (1024, 256, 128)])
    def test_costs_agree(self, n, h1, h2):
        rng = np.random.default_rng(n)
        bn = random_net(rng, n, h1, h2)
        pn = random_net(rng, n, h1, h2)
        for epsilon in (0.0, 0.3, 0.5, 1.0):
            kc = make_pair_kernel(bn, pn, epsilon, backend="compiled")
            kn = make_pair_kernel(bn, pn, epsilon, backend="numpy")
            for _ in range(40):
                idx = random_indices(rng, n)
                a, b = kc.cost_of_indices(idx), kn.cost_of_indices(idx)
                assert a == pytest.approx(b, rel=1e-12, abs=1e-13)

    def test_predictions_agree(self):
        rng = np.random.default_rng(7)
        bn = random_net(rng, 32, 16, 8)
        pn = random_net(rng, 32, 16, 8)
        kc = make_pair_kernel(bn, pn, 0.5, backend="compiled")
        kn = make_pair_kernel(bn, pn, 0.5, backend="numpy")
        idx = random_indices(rng, 32)
        np.testing.assert_allclose(
            kc.predictions_of_indices(idx), kn.predictions_of_indices(idx), rtol=1e-12
        )


class TestSemantics:
    @pytest.mark.parametrize(
        "backend", ["numpy", pytest.param("compiled", marks=needs_compiled)]
    )
    def test_epsilon_extremes_skip_other_net(self, backend):
        rng = np.random.default_rng(11)
        good = random_net(rng, 12, 6, 4)
        poison = tuple(np.full_like(np.asarray(a, dtype=float), np.nan) for a in good)
        k_bias_only = make_pair_kernel(good, poison, 1.0, backend=backend)
        k_ppl_only = make_pair_kernel(poison, good, 0.0, backend=backend)
        idx = np.array([1, 4], dtype=np.int64)
        assert np.isfinite(k_bias_only.cost_of_indices(idx))
        assert np.isfinite(k_ppl_only.cost_of_indices(idx))

    @pytest.mark.parametrize(
        "backend", ["numpy", pytest.param("compiled", marks=needs_compiled)]
    )
    def test_outputs_clipped(self, backend):
        rng = np.random.default_rng(13)
        big = tuple(np.asarray(a) * 100 for a in random_net(rng, 10, 5, 4))
        k = make_pair_kernel(big, big, 0.5, clip_lo=0.0, clip_hi=1.5, backend=backend)
        for _ in range(50):
            idx = random_indices(rng, 10)
            assert 0.0 <= k.cost_of_indices(idx) <= 1.5

    def test_width_mismatch(self):
        rng = np.random.default_rng(17)
        with pytest.raises(ValueError):
            make_pair_kernel(
                random_net(rng, 8, 4, 3), random_net(rng, 9, 4, 3), 0.5, backend="numpy"
            )

    def test_backend_selection(self):
        rng = np.random.default_rng(19)
        bn = random_net(rng, 8, 4, 3)
        k = make_pair_kernel(bn, bn, 0.5, backend="numpy")
        assert isinstance(k, NumpyPairKernel)
        with pytest.raises(ValueError):
            make_pair_kernel(bn, bn, 0.5, backend="gpu")
