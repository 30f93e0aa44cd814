"""Run configuration: a flat sectioned key/value text file.

Grammar (UTF-8, line oriented):

    # full-line comments start with '#'
    [section]                    sections are flat, never nested
    key = value                  one binding per line

Values: double-quoted strings (JSON escapes), integers, floats,
true/false, or a bare string taken verbatim to end of line. Inline
comments are not supported so paths may contain '#'. Relative paths are
resolved against the config file's directory. Secrets are never read from
config, only from environment variables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .ontology import Terminology

COMPLETION_KEY_ENV = "TERMBENCH_COMPLETION_API_KEY"
EMBEDDING_KEY_ENV = "TERMBENCH_EMBEDDING_API_KEY"
EUTILS_KEY_ENV = "NCBI_API_KEY"


def parse_flat_config(text: str) -> dict[str, object]:
    """Parse the flat config grammar into {'section.key': value}."""
    values: dict[str, object] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if not section:
                raise ParseError("empty section name", lineno)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if not key:
            raise ParseError("empty key", lineno)
        full_key = f"{section}.{key}" if section else key
        if full_key in values:
            raise ParseError(f"duplicate key {full_key!r}", lineno)
        values[full_key] = _parse_value(raw_value.strip(), lineno)
    return values


def _parse_value(raw: str, lineno: int) -> object:
    if raw.startswith('"'):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad quoted string {raw!r}: {exc}", lineno) from exc
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


TERMINOLOGY_KEYS = {
    Terminology.HPO: "hpo",
    Terminology.GO_CC: "go_cc",
    Terminology.GENE: "gene",
}

GO_CC_NAMESPACE = "cellular_component"


@dataclass
class RunConfig:
    base_dir: Path
    run_dir: Path
    raw: dict[str, object] = field(default_factory=dict)

    # paths
    hpo_obo: Path | None = None
    go_obo: Path | None = None
    gene_map: Path | None = None
    annotations: dict[Terminology, Path] = field(default_factory=dict)
    pmc_cache: Path | None = None
    embedding_store: Path | None = None
    transcripts: dict[str, Path] = field(default_factory=dict)  # phase -> path

    # seeds
    sampling_seed: int = 0
    cap_seed: int = 0
    synthetic_seed: int = 0

    # sampling
    n_bins: int = 20
    per_bin: int = 10
    ranking_proxy: str = "id_count_pmc"

    # endpoints / models
    completion_url: str | None = None
    embedding_url: str | None = None
    baseline_model: str = "baseline"
    finetuned_model: str = "finetuned"

    # limits
    concurrency: int = 1
    rate_per_second: float = 3.0
    validation_cap: int | None = None

    # flags
    extract_mode: bool = False
    all_templates: bool = False
    offline: bool = False

    # stats
    stats_phase: str = "baseline"
    stats_direction: str = "term_to_id"

    def resolve(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path


def load_config(path: str | Path, run_dir: str | Path | None = None) -> RunConfig:
    path = Path(path)
    values = parse_flat_config(path.read_text(encoding="utf-8"))
    base_dir = path.parent.resolve()

    cfg = RunConfig(base_dir=base_dir, run_dir=Path("."), raw=values)

    def get(key, default=None):
        return values.get(key, default)

    def get_path(key) -> Path | None:
        value = get(key)
        return cfg.resolve(str(value)) if value is not None else None

    cfg.hpo_obo = get_path("paths.hpo_obo")
    cfg.go_obo = get_path("paths.go_obo")
    cfg.gene_map = get_path("paths.gene_map")
    for terminology, key in TERMINOLOGY_KEYS.items():
        p = get_path(f"paths.annotations_{key}")
        if p is not None:
            cfg.annotations[terminology] = p
    cfg.pmc_cache = get_path("paths.pmc_cache")
    cfg.embedding_store = get_path("paths.embedding_store")
    for phase in ("baseline", "finetuned"):
        p = get_path(f"paths.transcript_{phase}")
        if p is not None:
            cfg.transcripts[phase] = p

    cfg.sampling_seed = int(get("seeds.sampling", 0))
    cfg.cap_seed = int(get("seeds.validation_cap", 0))
    cfg.synthetic_seed = int(get("seeds.synthetic", 0))

    cfg.n_bins = int(get("sampling.n_bins", 20))
    cfg.per_bin = int(get("sampling.per_bin", 10))
    cfg.ranking_proxy = str(get("sampling.proxy", "id_count_pmc"))

    cfg.completion_url = get("endpoints.completion_url")
    cfg.embedding_url = get("endpoints.embedding_url")
    cfg.baseline_model = str(get("models.baseline", "baseline"))
    cfg.finetuned_model = str(get("models.finetuned", "finetuned"))

    cfg.concurrency = int(get("limits.concurrency", 1))
    cfg.rate_per_second = float(get("limits.rate_per_second", 3.0))
    cap = get("limits.validation_cap")
    cfg.validation_cap = int(cap) if cap not in (None, 0) else None

    cfg.extract_mode = bool(get("flags.extract_mode", False))
    cfg.all_templates = bool(get("flags.all_templates", False))
    cfg.offline = bool(get("flags.offline", False))

    cfg.stats_phase = str(get("stats.correctness_phase", "baseline"))
    cfg.stats_direction = str(get("stats.direction", "term_to_id"))
    if cfg.stats_phase not in ("baseline", "finetuned"):
        raise ValidationError(f"stats.correctness_phase must be baseline|finetuned, got {cfg.stats_phase!r}")
    if cfg.stats_direction not in ("term_to_id", "id_to_term"):
        raise ValidationError(f"stats.direction must be term_to_id|id_to_term, got {cfg.stats_direction!r}")

    run_dir_value = run_dir if run_dir is not None else get("paths.run_dir")
    if run_dir_value is None:
        raise ValidationError("no run directory: pass --run-dir or set paths.run_dir")
    run_path = Path(run_dir_value)
    cfg.run_dir = run_path if run_path.is_absolute() else (base_dir / run_path)
    return cfg
