"""The data-collection loops.

`collect_samples` repeatedly draws a bounded random pruning mask, applies
it, generates continuations for a stratified prompt subset, scores their
toxicity, computes the grouped bias and the corpus perplexity, and
appends one sample record. `collect_head_effects` ablates each head alone
and records the change of both metrics against the unpruned baseline
(z = baseline - ablated).

Output formats match the optimizer's corpus and effect-table contracts.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .modeling import MaskableModel
from .scoring import get_scorer
from .textdata import PromptSet


@dataclass
class CollectorConfig:
    model_spec: str = "tiny-random"
    layers: int = 2
    heads: int = 4
    embd: int = 64
    model_seed: int = 0
    eta_bias: float = 0.2
    eta_ppl: float = 1.0
    n_l: int = 0
    n_u: int = 2
    count: int = 50
    gen_tokens: int = 16
    top_k: int = 20
    temperature: float = 1.0
    seed: int = 0
    scorer: str = "lexicon"
    include_baseline: bool = True

    def __post_init__(self):
        if not (0.0 < self.eta_bias <= 1.0 and 0.0 < self.eta_ppl <= 1.0):
            raise ValueError("eta fractions must be in (0, 1]")
        if not (0 <= self.n_l <= self.n_u):
            raise ValueError(f"bad bounds [{self.n_l}, {self.n_u}]")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def mask_to_text(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def stratified_subset(prompts: PromptSet, fraction: float, rng) -> list[int]:
    """Per-subgroup draw preserving shares to within one-row rounding."""
    chosen: list[int] = []
    for group, indices in sorted(prompts.subgroup_indices().items()):
        k = int(round(fraction * len(indices)))
        if k < 1:
            raise ValueError(
                f"fraction {fraction} leaves subgroup {group!r} empty"
            )
        chosen.extend(rng.choice(indices, size=k, replace=False).tolist())
    return chosen


def grouped_bias(subgroups, scores) -> float:
    """Sum over subgroups of |mean-of-subgroup-means - subgroup mean|."""
    per_group: dict[str, list[float]] = {}
    for g, s in zip(subgroups, scores):
        per_group.setdefault(g, []).append(s)
    means = {g: float(np.mean(v)) for g, v in per_group.items()}
    overall = float(np.mean(list(means.values())))
    return float(sum(abs(overall - m) for m in means.values()))


def random_mask(n, n_l, n_u, rng) -> np.ndarray:
    k = int(rng.integers(n_l, n_u + 1))
    bits = np.zeros(n, dtype=np.uint8)
    if k:
        bits[rng.choice(n, size=k, replace=False)] = 1
    return bits


def _measure_bias(model: MaskableModel, bits, prompts, subset, cfg, seed_seq):
    """Generate + score the subset under the mask; also returns the texts."""
    scorer = get_scorer(cfg.scorer)
    subgroups = []
    scores = []
    texts = []
    gen_seeds = seed_seq.generate_state(len(subset))
    for gseed, idx in zip(gen_seeds, subset):
        ids = model.encode(prompts.texts[idx])
        out_ids = model.generate(
            ids, bits, cfg.gen_tokens, cfg.top_k, cfg.temperature, int(gseed)
        )
        text = model.decode(out_ids)
        texts.append(
            {"prompt_id": prompts.prompt_ids[idx], "subgroup": prompts.subgroups[idx],
             "generation": text}
        )
        subgroups.append(prompts.subgroups[idx])
        if scorer is not None:
            scores.append(scorer(text))
    bias = grouped_bias(subgroups, scores) if scorer is not None else None
    return bias, texts


def _ppl_lines(lines, fraction, rng):
    if fraction >= 1.0:
        return lines
    k = max(1, int(round(fraction * len(lines))))
    picked = rng.choice(len(lines), size=k, replace=False)
    return [lines[i] for i in sorted(picked)]


def collect_samples(model: MaskableModel, prompts: PromptSet, corpus_lines,
                    cfg: CollectorConfig, out_dir) -> dict:
    """Run the sampling loop; writes samples.jsonl (+ sidecars) and a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    root = np.random.SeedSequence(cfg.seed)
    mask_rng = np.random.default_rng(root.spawn(1)[0])
    started = datetime.now(timezone.utc).isoformat()

    baseline_bits = np.zeros(model.n, dtype=np.uint8)
    baseline_ppl = model.corpus_perplexity(corpus_lines, baseline_bits)

    samples_path = os.path.join(out_dir, "samples.jsonl")
    pending_path = os.path.join(out_dir, "generations.jsonl")
    scorer_deferred = get_scorer(cfg.scorer) is None
    n_records = 0
    with open(samples_path, "w", encoding="utf-8") as fh, open(
        pending_path, "w", encoding="utf-8"
    ) as pending:
        for iteration in range(cfg.count):
            iter_seq = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, iteration))
            iter_rng = np.random.default_rng(iter_seq.spawn(1)[0])
            if iteration == 0 and cfg.include_baseline and cfg.n_l == 0:
                bits = baseline_bits
            else:
                bits = random_mask(model.n, cfg.n_l, cfg.n_u, mask_rng)
            subset = stratified_subset(prompts, cfg.eta_bias, iter_rng)
            bias, texts = _measure_bias(model, bits, prompts, subset, cfg, iter_seq)
            if not bits.any():
                ppl = baseline_ppl  # identical computation; reuse the measurement
            else:
                ppl = model.corpus_perplexity(
                    _ppl_lines(corpus_lines, cfg.eta_ppl, iter_rng), bits
                )
            if scorer_deferred:
                pending.write(
                    json.dumps({"mask": mask_to_text(bits), "ppl": ppl, "texts": texts})
                    + "\n"
                )
            else:
                fh.write(
                    json.dumps({"mask": mask_to_text(bits), "bias": bias, "ppl": ppl})
                    + "\n"
                )
                n_records += 1
    if not scorer_deferred:
        os.unlink(pending_path)

    manifest = {
        "command": "samples",
        "version": __version__,
        "config": cfg.to_dict(),
        "head_count": model.n,
        "layers": model.n_layer,
        "heads_per_layer": model.n_head,
        "baseline_ppl": baseline_ppl,
        "records": n_records,
        "deferred_scoring": scorer_deferred,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "outputs": [samples_path] + ([pending_path] if scorer_deferred else []),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def collect_head_effects(model: MaskableModel, prompts: PromptSet, corpus_lines,
                         cfg: CollectorConfig, out_dir) -> dict:
    """Single-head ablations; writes effects.csv with z and raw columns."""
    if get_scorer(cfg.scorer) is None:
        raise ValueError("effect collection needs a toxicity scorer (not 'none')")
    os.makedirs(out_dir, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    # one fixed subset makes all N+1 bias measurements comparable
    base_seq = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(2,))
    subset = stratified_subset(
        prompts, cfg.eta_bias, np.random.default_rng(base_seq.spawn(1)[0])
    )

    def measure(bits):
        bias, _ = _measure_bias(model, bits, prompts, subset, cfg, base_seq)
        ppl = model.corpus_perplexity(corpus_lines, bits)
        return bias, ppl

    zero = np.zeros(model.n, dtype=np.uint8)
    baseline_bias, baseline_ppl = measure(zero)
    rows = []
    for h in range(model.n):
        bits = zero.copy()
        bits[h] = 1
        bias_h, ppl_h = measure(bits)
        rows.append((h, baseline_bias - bias_h, baseline_ppl - ppl_h, bias_h, ppl_h))

    effects_path = os.path.join(out_dir, "effects.csv")
    with open(effects_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["head_index", "z_bias", "z_ppl", "bias_ablated", "ppl_ablated"])
        for row in rows:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    manifest = {
        "command": "effects",
        "version": __version__,
        "config": cfg.to_dict(),
        "head_count": model.n,
        "baseline_bias": baseline_bias,
        "baseline_ppl": baseline_ppl,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "outputs": [effects_path],
    }
    with open(os.path.join(out_dir, "effects.meta.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
