"""Prompt tables, perplexity corpora, and the desk-scale word tokenizer."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass


@dataclass
class PromptSet:
    """Labeled prompts: (prompt_id, subgroup, text) rows."""

    prompt_ids: list[str]
    subgroups: list[str]
    texts: list[str]

    def __len__(self) -> int:
        return len(self.prompt_ids)

    def subgroup_indices(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for i, g in enumerate(self.subgroups):
            out.setdefault(g, []).append(i)
        return out


def load_prompts(path) -> PromptSet:
    """CSV or JSON-lines with fields prompt_id, subgroup, text."""
    rows: list[dict] = []
    text = open(path, "r", encoding="utf-8").read()
    if str(path).endswith((".jsonl", ".json")):
        for line in text.splitlines():
            if line.strip():
                rows.append(json.loads(line))
    else:
        rows = list(csv.DictReader(text.splitlines()))
    if not rows:
        raise ValueError(f"{path}: no prompts")
    for field in ("prompt_id", "subgroup", "text"):
        if field not in rows[0]:
            raise ValueError(f"{path}: missing column {field!r}")
    return PromptSet(
        [str(r["prompt_id"]) for r in rows],
        [str(r["subgroup"]) for r in rows],
        [str(r["text"]) for r in rows],
    )


def load_corpus_lines(path) -> list[str]:
    """Plain text, one sequence per line; blank lines dropped."""
    lines = [ln.strip() for ln in open(path, "r", encoding="utf-8")]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty corpus")
    return lines


class WordTokenizer:
    """Whitespace word tokenizer with a vocabulary built from local text.

    Exists so the built-in randomly initialized model needs no downloaded
    tokenizer files; id 0 is the unknown token.
    """

    UNK = "<unk>"

    def __init__(self, texts):
        vocab = sorted({tok for text in texts for tok in text.split()})
        self.tokens = [self.UNK] + vocab
        self.ids = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.ids.get(tok, 0) for tok in text.split()]

    def decode(self, ids) -> str:
        return " ".join(self.tokens[i] if 0 <= i < len(self.tokens) else self.UNK for i in ids)
