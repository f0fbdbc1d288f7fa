"""Grouped-toxicity bias, corpus perplexity, and stratified subsampling.

All inputs are pre-scored tables; no text is generated or classified here.
Bias over a group of subgroups G is sum_g |T_G - T_g| where T_g is the
mean toxicity of subgroup g and T_G is the unweighted mean of the T_g.
Corpus perplexity pools per-sequence mean negative log-likelihoods with
token weights, exp(sum(nll_i * tokens_i) / sum(tokens_i)), so splitting a
sequence into rows with the same per-token losses leaves it unchanged.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, ParseError, ValidationError
from .manifest import atomic_writer

TOXICITY_FIELDS = ("prompt_id", "subgroup", "toxicity")
LOSS_FIELDS = ("sequence_id", "mean_nll", "token_count")


@dataclass
class PromptToxicityTable:
    """Per-prompt toxicity scores with subgroup labels."""

    prompt_ids: list[str]
    subgroups: list[str]
    toxicity: np.ndarray
    group_name: str = ""

    def __post_init__(self):
        self.toxicity = np.asarray(self.toxicity, dtype=np.float64)
        if not (len(self.prompt_ids) == len(self.subgroups) == self.toxicity.size):
            raise ValidationError("toxicity table columns have unequal lengths")
        if self.toxicity.size and (
            not np.all(np.isfinite(self.toxicity))
            or self.toxicity.min() < 0.0
            or self.toxicity.max() > 1.0
        ):
            raise ValidationError("toxicity values must be finite and in [0, 1]")

    def __len__(self) -> int:
        return self.toxicity.size

    def subgroup_indices(self) -> dict[str, np.ndarray]:
        out: dict[str, list[int]] = {}
        for i, g in enumerate(self.subgroups):
            out.setdefault(g, []).append(i)
        return {g: np.asarray(ix, dtype=np.int64) for g, ix in out.items()}

    def take(self, indices) -> "PromptToxicityTable":
        ix = np.asarray(indices, dtype=np.int64)
        return PromptToxicityTable(
            [self.prompt_ids[i] for i in ix],
            [self.subgroups[i] for i in ix],
            self.toxicity[ix],
            self.group_name,
        )


@dataclass
class SequenceLossTable:
    """Per-sequence mean negative log-likelihood with token counts."""

    sequence_ids: list[str]
    mean_nll: np.ndarray
    token_count: np.ndarray

    def __post_init__(self):
        self.mean_nll = np.asarray(self.mean_nll, dtype=np.float64)
        self.token_count = np.asarray(self.token_count, dtype=np.int64)
        if not (len(self.sequence_ids) == self.mean_nll.size == self.token_count.size):
            raise ValidationError("loss table columns have unequal lengths")
        if self.mean_nll.size and (
            not np.all(np.isfinite(self.mean_nll)) or self.mean_nll.min() < 0.0
        ):
            raise ValidationError("mean_nll must be finite and >= 0")
        if self.token_count.size and self.token_count.min() <= 0:
            raise ValidationError("token_count must be positive")

    def __len__(self) -> int:
        return self.mean_nll.size


@dataclass
class BiasReport:
    """Per-subgroup toxicities, their unweighted mean, and the bias score."""

    per_subgroup_toxicity: dict[str, float]
    group_mean: float
    bias: float
    mean_toxicity: float  # plain average over rows; low mean does not imply low bias
    group_name: str = ""
    subgroup_sizes: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "group_name": self.group_name,
            "per_subgroup_toxicity": self.per_subgroup_toxicity,
            "group_mean": self.group_mean,
            "bias": self.bias,
            "mean_toxicity": self.mean_toxicity,
            "subgroup_sizes": self.subgroup_sizes,
        }


def compute_bias(table: PromptToxicityTable) -> BiasReport:
    """Sum over subgroups of |group mean - subgroup mean| toxicity."""
    if len(table) == 0:
        raise DataError("toxicity table is empty")
    groups = table.subgroup_indices()
    per_group: dict[str, float] = {}
    sizes: dict[str, int] = {}
    for g, ix in sorted(groups.items()):
        if ix.size == 0:
            raise DataError(f"subgroup {g!r} has no rows")
        per_group[g] = float(table.toxicity[ix].mean())
        sizes[g] = int(ix.size)
    t_group = float(np.mean(list(per_group.values())))
    bias = float(sum(abs(t_group - t) for t in per_group.values()))
    return BiasReport(
        per_subgroup_toxicity=per_group,
        group_mean=t_group,
        bias=bias,
        mean_toxicity=float(table.toxicity.mean()),
        group_name=table.group_name,
        subgroup_sizes=sizes,
    )


def compute_perplexity(table: SequenceLossTable) -> float:
    """Token-weighted corpus perplexity from per-sequence mean NLLs."""
    if len(table) == 0:
        raise DataError("loss table is empty")
    total_tokens = int(table.token_count.sum())
    if total_tokens <= 0:
        raise DataError("loss table has zero total tokens")
    pooled = float((table.mean_nll * table.token_count).sum()) / total_tokens
    return math.exp(pooled)


def stratified_subsample(
    table: PromptToxicityTable, fraction: float, rng_seed
) -> PromptToxicityTable:
    """Subsample preserving each subgroup's share to within one-row rounding.

    Rows are drawn uniformly without replacement inside each subgroup.
    """
    if not (0.0 < fraction <= 1.0):
        raise ConfigurationError(f"fraction must be in (0, 1], got {fraction}")
    groups = table.subgroup_indices()
    for g, ix in groups.items():
        if fraction * ix.size < 1.0:
            raise ConfigurationError(
                f"fraction {fraction} leaves subgroup {g!r} empty "
                f"({ix.size} rows); need fraction >= {1.0 / ix.size:.4g}"
            )
    rng = np.random.default_rng(rng_seed)
    chosen: list[np.ndarray] = []
    for g, ix in sorted(groups.items()):
        k = int(round(fraction * ix.size))
        chosen.append(rng.choice(ix, size=k, replace=False))
    return table.take(np.concatenate(chosen))


# ---------------------------------------------------------------------------
# file I/O: JSON-lines or delimited text with a header row
# ---------------------------------------------------------------------------


def _read_rows(path, fields) -> list[dict]:
    text = open(path, "r", encoding="utf-8").read()
    rows: list[dict] = []
    if str(path).endswith((".jsonl", ".json")):
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            rows.append(obj)
    else:
        sample = text[:4096]
        try:
            dialect = csv.Sniffer().sniff(sample, delimiters=",\t;")
        except csv.Error:
            dialect = csv.excel
        reader = csv.DictReader(text.splitlines(), dialect=dialect)
        rows = list(reader)
    for lineno, row in enumerate(rows, 1):
        missing = [f for f in fields if f not in row or row[f] in (None, "")]
        if missing:
            raise ParseError(f"{path}: row {lineno} missing fields {missing}")
    return rows


def load_toxicity_table(path, group_name: str = "") -> PromptToxicityTable:
    rows = _read_rows(path, TOXICITY_FIELDS)
    if not rows:
        raise DataError(f"{path}: no rows")
    try:
        tox = np.array([float(r["toxicity"]) for r in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric toxicity: {exc}") from exc
    return PromptToxicityTable(
        [str(r["prompt_id"]) for r in rows],
        [str(r["subgroup"]) for r in rows],
        tox,
        group_name,
    )


def load_loss_table(path) -> SequenceLossTable:
    rows = _read_rows(path, LOSS_FIELDS)
    if not rows:
        raise DataError(f"{path}: no rows")
    try:
        nll = np.array([float(r["mean_nll"]) for r in rows])
        tokens = np.array([int(r["token_count"]) for r in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric loss row: {exc}") from exc
    return SequenceLossTable([str(r["sequence_id"]) for r in rows], nll, tokens)


def save_toxicity_table(table: PromptToxicityTable, path) -> None:
    with atomic_writer(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(TOXICITY_FIELDS)
        for pid, grp, tox in zip(table.prompt_ids, table.subgroups, table.toxicity):
            writer.writerow([pid, grp, repr(float(tox))])
