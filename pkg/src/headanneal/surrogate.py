"""Feedforward regressors mapping a pruning state to scaled bias/perplexity.

Two small fully connected nets ([n, h1, h2, 1], rectifier hiddens) are
trained by minibatch gradient descent with adaptive moments on mean squared
error, with early stopping on a held-out validation split. Targets are
preprocessed to [0, 1]: bias is divided by its observed maximum, and
perplexity, whose raw distribution is extremely heavy-tailed, is clamped
at the largest threshold p_max that brings the standard deviation under a
budget sigma, then divided by p_max. States that wreck utility therefore
all score ~1.0 instead of stretching the scale by orders of magnitude.

Everything is plain numpy and deterministic per seed; a trained regressor
is immutable and safe to read from many search chains at once.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DegenerateDataError,
    DimensionError,
    TrainingDivergenceError,
    ValidationError,
)
from .masks import HeadMask
from .records import SampleRecord

REGRESSOR_FORMAT = "headanneal-regressor/1"

PREDICT_CLIP = (0.0, 1.5)  # bounds extrapolation damage on unseen states

DEFAULT_SIGMA = 10.0
DEFAULT_SPLIT = 0.05
DEFAULT_LR = 1e-3
DEFAULT_BATCH = 256
DEFAULT_PATIENCE = 5
DEFAULT_MAX_EPOCHS = 500


@dataclass(frozen=True)
class ScalingSpec:
    """How raw targets were mapped to [0, 1]; inverts predictions."""

    bias_max: float
    ppl_max: float
    sigma: float

    def to_dict(self) -> dict:
        return {"bias_max": self.bias_max, "ppl_max": self.ppl_max, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingSpec":
        return cls(float(d["bias_max"]), float(d["ppl_max"]), float(d["sigma"]))


@dataclass
class TrainingCorpus:
    """Preprocessed mask matrix plus scaled targets for both metrics."""

    masks: np.ndarray  # (m, n) float64 of 0/1
    bias_targets: np.ndarray
    ppl_targets: np.ndarray
    scaling: ScalingSpec

    @property
    def n(self) -> int:
        return self.masks.shape[1]

    def __len__(self) -> int:
        return self.masks.shape[0]

    def targets(self, which: str) -> np.ndarray:
        if which == "bias":
            return self.bias_targets
        if which == "ppl":
            return self.ppl_targets
        raise ValueError(f"unknown target {which!r}")

    def to_records(self) -> list[SampleRecord]:
        """Rows as SampleRecords in the corpus's own (scaled) units."""
        return [
            SampleRecord(HeadMask(row.astype(np.uint8)), float(b), float(p))
            for row, b, p in zip(self.masks, self.bias_targets, self.ppl_targets)
        ]


def choose_ppl_clamp(ppl_values: np.ndarray, sigma: float) -> float:
    """Largest threshold among the observed values whose clamp brings the
    standard deviation under sigma; found by a descending scan.

    std(min(P, t)) is non-decreasing in t, so the first candidate that
    satisfies the budget is the largest feasible one.
    """
    x = np.sort(np.asarray(ppl_values, dtype=np.float64))
    m = x.size
    s1 = np.concatenate([[0.0], np.cumsum(x)])
    s2 = np.concatenate([[0.0], np.cumsum(x * x)])
    for t in np.unique(x)[::-1]:
        c = int(np.searchsorted(x, t, side="right"))
        total = s1[c] + t * (m - c)
        total_sq = s2[c] + t * t * (m - c)
        var = max(total_sq / m - (total / m) ** 2, 0.0)
        if np.sqrt(var) <= sigma:
            return float(t)
    raise DegenerateDataError("no clamp threshold satisfies the std budget")


def preprocess(raw: list[SampleRecord], sigma: float = DEFAULT_SIGMA) -> TrainingCorpus:
    """Scale bias by its max and clamp+scale perplexity to [0, 1] targets."""
    if not raw:
        raise DataError("empty sample list")
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    widths = {r.mask.n for r in raw}
    if len(widths) > 1:
        raise DimensionError(f"samples mix mask widths {sorted(widths)}")
    bias = np.array([r.bias for r in raw], dtype=np.float64)
    ppl = np.array([r.ppl for r in raw], dtype=np.float64)
    if not np.all(np.isfinite(bias)) or not np.all(np.isfinite(ppl)):
        raise ValidationError("non-finite bias or perplexity in samples")
    if bias.min() < 0.0:
        raise ValidationError("negative bias values in samples")
    if ppl.min() <= 0.0:
        raise ValidationError("non-positive perplexity values in samples")
    bias_max = float(bias.max())
    if bias_max <= 0.0:
        raise DegenerateDataError("all bias values are zero")
    p_max = choose_ppl_clamp(ppl, sigma)
    clamped = np.minimum(ppl, p_max)
    if clamped.max() == clamped.min() and len(raw) > 1:
        raise DegenerateDataError(
            f"clamp at {p_max} collapses every perplexity to one value"
        )
    masks = np.stack([r.mask.bits for r in raw]).astype(np.float64)
    return TrainingCorpus(
        masks=masks,
        bias_targets=bias / bias_max,
        ppl_targets=clamped / p_max,
        scaling=ScalingSpec(bias_max=bias_max, ppl_max=p_max, sigma=float(sigma)),
    )


def default_arch(n: int) -> list[int]:
    """Two hidden layers, sized like the reference model families."""
    return [n, 64, 32, 1] if n < 256 else [n, 256, 128, 1]


class SurrogateRegressor:
    """Immutable trained regressor; predictions are clipped to [0, 1.5]."""

    def __init__(self, layer_sizes, weights, biases, scaling=None, meta=None):
        self.layer_sizes = list(int(s) for s in layer_sizes)
        if len(self.layer_sizes) != 4 or self.layer_sizes[-1] != 1:
            raise ValidationError(
                f"layer sizes must be [n, h1, h2, 1], got {self.layer_sizes}"
            )
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ValidationError(f"layer {i} parameter shape mismatch")
        self.scaling = scaling
        self.meta = dict(meta or {})

    @property
    def n(self) -> int:
        return self.layer_sizes[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Raw (unclipped) outputs for a (m, n) batch of 0/1 rows."""
        a = np.asarray(x, dtype=np.float64)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        return (a @ self.weights[-1] + self.biases[-1]).ravel()

    def predict(self, s: HeadMask) -> float:
        """Deterministic scaled prediction for one state."""
        if s.n != self.n:
            raise DimensionError(f"mask width {s.n} != input width {self.n}")
        y = float(self.forward(s.bits[None, :].astype(np.float64))[0])
        return min(max(y, PREDICT_CLIP[0]), PREDICT_CLIP[1])

    def as_net_arrays(self):
        """(w1, b1, w2, b2, w3, b3) tuple for the cost kernels."""
        return (
            self.weights[0],
            self.biases[0],
            self.weights[1],
            self.biases[1],
            self.weights[2].ravel(),
            self.biases[2],
        )


def predict(model: SurrogateRegressor, s: HeadMask) -> float:
    return model.predict(s)


def _mse(pred: np.ndarray, y: np.ndarray) -> float:
    d = pred - y
    return float((d * d).mean())


def _forward_cache(weights, biases, x):
    pre = []
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
    y = (a @ weights[-1] + biases[-1]).ravel()
    return pre, y


def _gradients(weights, biases, x, y_true):
    """Analytic MSE-loss gradients for all parameters (batch mean)."""
    pre, y = _forward_cache(weights, biases, x)
    acts = [x] + [np.maximum(z, 0.0) for z in pre]
    m = x.shape[0]
    delta = (2.0 / m) * (y - y_true)[:, None]  # (m, 1)
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (pre[layer - 1] > 0.0)
    return grads_w, grads_b, _mse(y, y_true)


def train(
    corpus: TrainingCorpus,
    target: str = "bias",
    arch=None,
    split: float = DEFAULT_SPLIT,
    rng_seed=0,
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    patience: int = DEFAULT_PATIENCE,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
) -> SurrogateRegressor:
    """Fit one regressor on the corpus; returns the best-validation epoch.

    Stops once validation MSE has not improved for `patience` epochs.
    """
    y_all = corpus.targets(target)
    x_all = corpus.masks
    m = len(corpus)
    if m < 4:
        raise DataError(f"corpus too small to split ({m} samples)")
    sizes = list(arch) if arch is not None else default_arch(corpus.n)
    if sizes[0] != corpus.n:
        raise DimensionError(
            f"arch input width {sizes[0]} != corpus mask width {corpus.n}"
        )
    if not (0.0 < split < 1.0):
        raise ValidationError(f"validation split must be in (0, 1), got {split}")

    rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(m)
    n_val = max(1, int(round(split * m)))
    if n_val >= m:
        raise DataError("validation split leaves no training data")
    val_ix, train_ix = perm[:n_val], perm[n_val:]
    x_tr, y_tr = x_all[train_ix], y_all[train_ix]
    x_val, y_val = x_all[val_ix], y_all[val_ix]

    weights = [
        rng.standard_normal((sizes[i], sizes[i + 1])) * np.sqrt(2.0 / sizes[i])
        for i in range(3)
    ]
    biases = [np.zeros(sizes[i + 1]) for i in range(3)]

    # adaptive-moment accumulators
    mw = [np.zeros_like(w) for w in weights]
    vw = [np.zeros_like(w) for w in weights]
    mb = [np.zeros_like(b) for b in biases]
    vb = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps_opt = 0.9, 0.999, 1e-8
    step = 0

    best_val = np.inf
    best_epoch = 0
    best_params = None
    since_best = 0
    history = []
    epochs_run = 0

    for epoch in range(1, max_epochs + 1):
        epochs_run = epoch
        order = rng.permutation(len(x_tr))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            gw, gb, loss = _gradients(weights, biases, x_tr[batch], y_tr[batch])
            if not np.isfinite(loss):
                raise TrainingDivergenceError(
                    f"non-finite loss at epoch {epoch} (target={target}, lr={lr})"
                )
            epoch_losses.append(loss)
            step += 1
            bc1 = 1.0 - beta1**step
            bc2 = 1.0 - beta2**step
            for i in range(3):
                mw[i] = beta1 * mw[i] + (1 - beta1) * gw[i]
                vw[i] = beta2 * vw[i] + (1 - beta2) * gw[i] ** 2
                weights[i] = weights[i] - lr * (mw[i] / bc1) / (np.sqrt(vw[i] / bc2) + eps_opt)
                mb[i] = beta1 * mb[i] + (1 - beta1) * gb[i]
                vb[i] = beta2 * vb[i] + (1 - beta2) * gb[i] ** 2
                biases[i] = biases[i] - lr * (mb[i] / bc1) / (np.sqrt(vb[i] / bc2) + eps_opt)
        _, y_pred = _forward_cache(weights, biases, x_val)
        val_mse = _mse(y_pred, y_val)
        history.append(
            {"epoch": epoch, "train_mse": float(np.mean(epoch_losses)), "val_mse": val_mse}
        )
        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_params = ([w.copy() for w in weights], [b.copy() for b in biases])
            since_best = 0
        else:
            since_best += 1
            if since_best >= patience:
                break

    weights, biases = best_params
    _, y_pred = _forward_cache(weights, biases, x_tr)
    meta = {
        "target": target,
        "seed": rng_seed if isinstance(rng_seed, int) else repr(rng_seed),
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "best_val_mse": best_val,
        "final_train_mse": _mse(y_pred, y_tr),
        "optimizer": "adam",
        "lr": lr,
        "batch_size": batch_size,
        "patience": patience,
        "split": split,
        "history": history,
    }
    return SurrogateRegressor(sizes, weights, biases, corpus.scaling, meta)


def train_pair(corpus: TrainingCorpus, arch=None, split=DEFAULT_SPLIT, rng_seed=0, **kw):
    """Train the (bias, ppl) regressor pair with independent derived seeds."""
    ss = np.random.SeedSequence(rng_seed)
    seed_b, seed_p = ss.spawn(2)
    theta_bias = train(corpus, "bias", arch, split, seed_b, **kw)
    theta_ppl = train(corpus, "ppl", arch, split, seed_p, **kw)
    for t in (theta_bias, theta_ppl):
        t.meta["seed"] = rng_seed
    return theta_bias, theta_ppl


def finite_diff_check(
    model: SurrogateRegressor,
    x: np.ndarray,
    y: np.ndarray,
    epsilon_fd: float = 1e-6,
    samples_per_array: int = 20,
    rng_seed=0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Parameters whose perturbation crosses a rectifier kink (any hidden
    pre-activation changing sign between the two displaced evaluations) are
    skipped: the loss is not differentiable there.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gw, gb, _ = _gradients(model.weights, model.biases, x, y)
    rng = np.random.default_rng(rng_seed)
    worst = 0.0

    def loss_and_signs(weights, biases):
        pre, y_pred = _forward_cache(weights, biases, x)
        signs = [z > 0.0 for z in pre]
        return _mse(y_pred, y), signs

    for arrays, grads in ((model.weights, gw), (model.biases, gb)):
        for layer, (param, grad) in enumerate(zip(arrays, grads)):
            flat = param.ravel()
            count = min(samples_per_array, flat.size)
            picks = rng.choice(flat.size, size=count, replace=False)
            for k in picks:
                orig = flat[k]
                w_plus = [w.copy() for w in model.weights]
                b_plus = [b.copy() for b in model.biases]
                w_minus = [w.copy() for w in model.weights]
                b_minus = [b.copy() for b in model.biases]
                tgt_plus = (w_plus if arrays is model.weights else b_plus)[layer]
                tgt_minus = (w_minus if arrays is model.weights else b_minus)[layer]
                tgt_plus.ravel()[k] = orig + epsilon_fd
                tgt_minus.ravel()[k] = orig - epsilon_fd
                l_plus, s_plus = loss_and_signs(w_plus, b_plus)
                l_minus, s_minus = loss_and_signs(w_minus, b_minus)
                if any(
                    not np.array_equal(a, b) for a, b in zip(s_plus, s_minus)
                ):
                    continue  # kink crossed; subgradient exclusion
                numeric = (l_plus - l_minus) / (2.0 * epsilon_fd)
                analytic = grad.ravel()[k]
                err = abs(analytic - numeric) / (abs(numeric) + 1e-12)
                worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# persistence: versioned npz container with a JSON metadata blob
# ---------------------------------------------------------------------------


def save_regressor(model: SurrogateRegressor, path) -> None:
    meta = {
        "format": REGRESSOR_FORMAT,
        "layer_sizes": model.layer_sizes,
        "scaling": model.scaling.to_dict() if model.scaling else None,
        "meta": {k: v for k, v in model.meta.items() if k != "history"},
    }
    payload = {"meta_json": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for i in range(3):
        payload[f"w{i}"] = model.weights[i]
        payload[f"b{i}"] = model.biases[i]
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(suffix=".npz", dir=directory)
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez_compressed(fh, **payload)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_regressor(path) -> SurrogateRegressor:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        if meta.get("format") != REGRESSOR_FORMAT:
            raise DataError(f"{path}: not a regressor file")
        weights = [data[f"w{i}"] for i in range(3)]
        biases = [data[f"b{i}"] for i in range(3)]
    scaling = ScalingSpec.from_dict(meta["scaling"]) if meta.get("scaling") else None
    return SurrogateRegressor(meta["layer_sizes"], weights, biases, scaling, meta["meta"])
