"""Cost-kernel backends.

The annealing loop spends nearly all of its time scoring states through the
two surrogate nets, so that forward pass is available both as a compiled
Cython extension and as a numpy fallback. The compiled backend is preferred
when the extension built; `make_pair_kernel(..., backend=...)` overrides.
"""

from .fallback import NumpyPairKernel

try:
    from ._fused import CompiledPairKernel

    HAVE_COMPILED = True
except ImportError:  # extension not built on this platform
    CompiledPairKernel = None
    HAVE_COMPILED = False

BACKENDS = ("auto", "compiled", "numpy")


def make_pair_kernel(bias_net, ppl_net, epsilon, clip_lo=0.0, clip_hi=1.5,
                     backend="auto"):
    """Build a fused two-net cost kernel on the requested backend.

    Each net is a (w1, b1, w2, b2, w3, b3) tuple of float arrays with
    w1: (n, h1), w2: (h1, h2), w3: (h2,) or (h2, 1).
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown kernel backend {backend!r}")
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernel requested but the extension is not built")
    cls = CompiledPairKernel if (HAVE_COMPILED and backend != "numpy") else NumpyPairKernel
    return cls(bias_net, ppl_net, epsilon, clip_lo, clip_hi)
