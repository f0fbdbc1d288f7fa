"""Run manifests and atomic file writes.

Every CLI command records what it ran with (full config snapshot, digests
of its inputs, paths of its outputs, timestamps) so any artifact can be
traced back and the command re-run identically. Writes go through a
temp-file-then-rename so interrupted runs never leave torn files.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone


@contextmanager
def atomic_writer(path, mode="w"):
    """Open a temp file in the target directory; rename over path on success."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory)
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8",
                       newline=None if "b" in mode else "") as fh:
            yield fh
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def atomic_write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    version: str
    config: dict
    started_at: str = field(default_factory=utc_now)
    finished_at: str | None = None
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_of(path)

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    def write(self, out_dir) -> str:
        self.finished_at = utc_now()
        path = os.path.join(out_dir, "manifest.json")
        atomic_write_json(
            path,
            {
                "command": self.command,
                "version": self.version,
                "config": self.config,
                "started_at": self.started_at,
                "finished_at": self.finished_at,
                "inputs": self.inputs,
                "outputs": self.outputs,
            },
        )
        return path
