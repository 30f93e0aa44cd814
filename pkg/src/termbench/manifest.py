"""Run manifest: provenance for every stage of a run directory.

The manifest is the only place timestamps live; stage outputs themselves
are deterministic. It is rewritten atomically (temp file + rename) after
each stage completes, recording SHA-256 digests of that stage's inputs
and outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from pathlib import Path

from . import GENERATOR_NAME, __version__
from .prompts import FINETUNE_HYPERPARAMETERS

MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest:
    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / MANIFEST_NAME
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {
                "tool": "termbench",
                "tool_version": __version__,
                "generator": GENERATOR_NAME,
                "finetune_hyperparameters": dict(FINETUNE_HYPERPARAMETERS),
                "config": {},
                "seeds": {},
                "release_tags": {},
                "stages": {},
            }

    def set_config(self, raw_config: dict, seeds: dict) -> None:
        self.data["config"] = {k: raw_config[k] for k in sorted(raw_config)}
        self.data["seeds"] = dict(seeds)

    def set_release_tag(self, terminology: str, tag: str | None) -> None:
        self.data["release_tags"][terminology] = tag

    def record_stage(self, stage: str, inputs: list[Path], outputs: list[Path]) -> None:
        self.data["stages"][stage] = {
            "completed_at": datetime.now(timezone.utc).isoformat(),
            "inputs": {str(p): sha256_file(p) for p in sorted(inputs)},
            "outputs": {str(p): sha256_file(p) for p in sorted(outputs)},
        }
        self.write()

    def write(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
        os.replace(tmp, self.path)
