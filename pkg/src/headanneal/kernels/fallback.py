"""Pure numpy cost kernel, the reference implementation for the compiled one."""

import numpy as np


class NumpyPairKernel:
    """Evaluates eps*clip(net_b(s)) + (1-eps)*clip(net_p(s)) for a bit state.

    Same contract as kernels._fused.CompiledPairKernel; results agree up to
    floating summation order.
    """

    def __init__(self, bias_net, ppl_net, epsilon, clip_lo=0.0, clip_hi=1.5):
        self._bias = tuple(np.asarray(a, dtype=np.float64) for a in bias_net)
        self._ppl = tuple(np.asarray(a, dtype=np.float64) for a in ppl_net)
        if self._bias[0].shape[0] != self._ppl[0].shape[0]:
            raise ValueError("bias and perplexity nets disagree on input width")
        self.n = self._bias[0].shape[0]
        self.epsilon = float(epsilon)
        self.clip_lo = float(clip_lo)
        self.clip_hi = float(clip_hi)

    def _forward(self, net, idx):
        w1, b1, w2, b2, w3, b3 = net
        if len(idx):
            z1 = b1 + w1[idx].sum(axis=0)
        else:
            z1 = b1.copy()
        np.maximum(z1, 0.0, out=z1)
        z2 = z1 @ w2 + b2
        np.maximum(z2, 0.0, out=z2)
        y = float(z2 @ w3.ravel()) + float(np.ravel(b3)[0])
        return min(max(y, self.clip_lo), self.clip_hi)

    def cost_of_indices(self, idx):
        """Cost of the state whose set bits are listed in idx."""
        yb = self._forward(self._bias, idx) if self.epsilon > 0.0 else 0.0
        yp = self._forward(self._ppl, idx) if self.epsilon < 1.0 else 0.0
        return self.epsilon * yb + (1.0 - self.epsilon) * yp

    def predictions_of_indices(self, idx):
        """(bias, ppl) clipped predictions for one state; both nets run."""
        return self._forward(self._bias, idx), self._forward(self._ppl, idx)
