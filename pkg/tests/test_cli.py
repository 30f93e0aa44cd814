import json
from pathlib import Path

import pytest

from termbench.cli import main
from termbench.config import load_config, parse_flat_config
from termbench.errors import ParseError, ValidationError

FIXTURE = Path(__file__).parent / "fixtures" / "mini"
CONFIG = FIXTURE / "run.cfg"


# ---------------------------------------------------------------------------
# config grammar


def test_parse_flat_config_types():
    text = """# comment
[paths]
run_dir = runs/demo
quoted = "a b # c"

[limits]
concurrency = 4
rate_per_second = 2.5

[flags]
offline = true
extract_mode = false
"""
    values = parse_flat_config(text)
    assert values["paths.run_dir"] == "runs/demo"
    assert values["paths.quoted"] == "a b # c"
    assert values["limits.concurrency"] == 4
    assert values["limits.rate_per_second"] == 2.5
    assert values["flags.offline"] is True
    assert values["flags.extract_mode"] is False


def test_parse_flat_config_duplicate_key():
    with pytest.raises(ParseError):
        parse_flat_config("[a]\nx = 1\nx = 2\n")


def test_parse_flat_config_malformed_line():
    with pytest.raises(ParseError) as exc:
        parse_flat_config("[a]\njust words\n")
    assert exc.value.line_number == 2


def test_load_config_resolves_paths_and_overrides(tmp_path):
    cfg = load_config(CONFIG, run_dir=tmp_path / "run")
    assert cfg.hpo_obo == FIXTURE / "hpo.obo"
    assert cfg.run_dir == tmp_path / "run"
    assert cfg.n_bins == 10
    assert cfg.per_bin == 3
    assert cfg.sampling_seed == 42
    assert cfg.offline is True
    assert cfg.transcripts["baseline"] == FIXTURE / "transcripts" / "baseline.jsonl"


def test_load_config_requires_run_dir(tmp_path):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text("[seeds]\nsampling = 1\n")
    with pytest.raises(ValidationError, match="run directory"):
        load_config(cfg_file)


# ---------------------------------------------------------------------------
# CLI behaviour


def test_missing_prior_stage_names_artifact_and_stage(tmp_path, capsys):
    code = main(["--config", str(CONFIG), "--run-dir", str(tmp_path / "r"),
                 "--stage", "eval"])
    assert code == 1
    err = capsys.readouterr().err
    assert "prompts.jsonl" in err
    assert "prompts" in err


def test_sample_requires_popularity(tmp_path, capsys):
    code = main(["--config", str(CONFIG), "--run-dir", str(tmp_path / "r"),
                 "--stage", "sample"])
    assert code == 1
    assert "popularity" in capsys.readouterr().err


def test_unknown_stage(tmp_path, capsys):
    code = main(["--config", str(CONFIG), "--run-dir", str(tmp_path / "r"),
                 "--stage", "nope"])
    assert code == 1
    assert "unknown stage" in capsys.readouterr().err


def test_dry_run_writes_nothing(tmp_path, capsys):
    run_dir = tmp_path / "r"
    code = main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                 "--stage", "ingest", "--dry-run"])
    assert code == 0
    assert not run_dir.exists()
    assert "[dry-run]" in capsys.readouterr().out


def test_missing_input_path_is_domain_error(tmp_path, capsys):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text(
        "[paths]\nhpo_obo = missing.obo\ngo_obo = missing.obo\n"
        "gene_map = missing.tsv\nrun_dir = run\n"
    )
    code = main(["--config", str(cfg_file), "--stage", "ingest"])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_offline_cache_miss_is_transport_error(tmp_path, capsys):
    # a config whose cache lacks the needed queries -> exit 2 at popularity
    run_dir = tmp_path / "run"
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text(
        f"""[paths]
hpo_obo = {FIXTURE / 'hpo.obo'}
go_obo = {FIXTURE / 'go.obo'}
gene_map = {FIXTURE / 'gene_map.tsv'}
pmc_cache = empty_cache.jsonl

[flags]
offline = true
"""
    )
    (tmp_path / "empty_cache.jsonl").write_text("")
    assert main(["--config", str(cfg_file), "--run-dir", str(run_dir),
                 "--stage", "ingest"]) == 0
    code = main(["--config", str(cfg_file), "--run-dir", str(run_dir),
                 "--stage", "popularity"])
    assert code == 2
    assert "not cached" in capsys.readouterr().err


def test_stage_sequence_and_manifest(tmp_path):
    run_dir = tmp_path / "run"
    for stage in ("ingest", "popularity", "sample"):
        assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                     "--stage", stage]) == 0
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["generator"] == "splitmix64"
    assert manifest["seeds"]["sampling"] == 42
    assert manifest["release_tags"]["HPO"] == "fixtures/mini-2024"
    assert manifest["finetune_hyperparameters"]["lora_rank"] == 64
    assert set(manifest["stages"]) == {"ingest", "popularity", "sample"}
    split_digest = manifest["stages"]["sample"]["outputs"][
        str(run_dir / "sample" / "split.jsonl")
    ]
    assert len(split_digest) == 64
    # every recorded output exists
    for stage_info in manifest["stages"].values():
        for path in stage_info["outputs"]:
            assert Path(path).exists()


def test_seed_override_changes_split(tmp_path):
    base = tmp_path / "a"
    other = tmp_path / "b"
    for run_dir, seed in ((base, "42"), (other, "43")):
        for stage in ("ingest", "popularity"):
            assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                         "--stage", stage]) == 0
        assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                     "--stage", "sample", "--seed", seed]) == 0
    a = (base / "sample" / "split.jsonl").read_bytes()
    b = (other / "sample" / "split.jsonl").read_bytes()
    assert a != b


def test_sample_rerun_byte_identical(tmp_path):
    run_dir = tmp_path / "run"
    for stage in ("ingest", "popularity", "sample"):
        assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                     "--stage", stage]) == 0
    first = (run_dir / "sample" / "split.jsonl").read_bytes()
    assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                 "--stage", "sample"]) == 0
    assert (run_dir / "sample" / "split.jsonl").read_bytes() == first


def test_validation_cap_flag(tmp_path):
    run_dir = tmp_path / "run"
    for stage in ("ingest", "popularity"):
        assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                     "--stage", stage]) == 0
    assert main(["--config", str(CONFIG), "--run-dir", str(run_dir),
                 "--stage", "sample", "--validation-cap", "10"]) == 0
    lines = (run_dir / "sample" / "split.jsonl").read_text().splitlines()
    rows = [json.loads(l) for l in lines]
    val = [r for r in rows if r["split"] == "validation"]
    train = [r for r in rows if r["split"] == "train"]
    assert len(val) == 30  # 10 per terminology
    assert len(train) == 90
