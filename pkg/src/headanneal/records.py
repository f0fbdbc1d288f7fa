"""Mask/bias/perplexity sample records and their JSON-lines interchange."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DataError, ParseError
from .manifest import atomic_writer
from .masks import HeadMask


@dataclass(frozen=True)
class SampleRecord:
    """One measured training example: a pruning state and its two metrics."""

    mask: HeadMask
    bias: float
    ppl: float

    def to_json(self) -> str:
        return json.dumps(
            {"mask": self.mask.to_text(), "bias": self.bias, "ppl": self.ppl}
        )


def _mask_from_field(value, lineno: int) -> HeadMask:
    if isinstance(value, str):
        return HeadMask.from_text(value)
    if isinstance(value, (list, tuple)):
        return HeadMask(value)
    raise ParseError(f"line {lineno}: mask must be a bit string or list")


def load_corpus(path) -> list[SampleRecord]:
    """Read SampleRecords from JSON-lines with fields mask, bias, ppl."""
    records: list[SampleRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                mask = _mask_from_field(obj["mask"], lineno)
                rec = SampleRecord(mask, float(obj["bias"]), float(obj["ppl"]))
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing field {exc}") from exc
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad record: {exc}") from exc
            records.append(rec)
    if not records:
        raise DataError(f"{path}: no sample records")
    widths = {r.mask.n for r in records}
    if len(widths) > 1:
        raise DataError(f"{path}: inconsistent mask widths {sorted(widths)}")
    return records


def save_corpus(records, path) -> None:
    with atomic_writer(path) as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
