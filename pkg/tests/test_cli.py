import csv
import json

import numpy as np
import pytest
import yaml

from tvfx import metrics
from tvfx.audio import AudioClip, read_wav, write_wav
from tvfx.cli import EXIT_CODES, main
from tvfx.model import ModelConfig
from tvfx.nn import checkpoint

TINY = {k: v for k, v in ModelConfig.tiny().to_dict().items()}


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny corpus plus a finished tiny training run, shared across tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {
        "preset": "tremolo", "seed": 2, "count": 5,
        "model": TINY,
        "train": {"pretrain_epochs": 1, "supervised_epochs": 2},
        "paths": {"corpus": str(root / "corpus"), "run": str(root / "run")},
    }
    (root / "run.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["gen-dataset", "--config", str(root / "run.yaml"), "--duration", "0.25"]) == 0
    assert main(["train", "--config", str(root / "run.yaml")]) == 0
    return root


def test_gen_dataset_layout_and_determinism(tmp_path, capsys):
    code, out, _ = run(capsys, "gen-dataset", "--preset", "tremolo", "--count", 20, "--duration", 0.25,
                       "--out", tmp_path / "a")
    assert code == 0
    assert json.loads(out)["splits"] == {"train": 18, "validation": 1, "test": 1}
    assert len(list((tmp_path / "a" / "dry").glob("*.wav"))) == 20
    assert len(list((tmp_path / "a" / "wet").glob("*.wav"))) == 20
    run(capsys, "gen-dataset", "--preset", "tremolo", "--count", 20, "--duration", 0.25, "--out", tmp_path / "b")
    for f in (tmp_path / "a").rglob("*.*"):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_gen_dataset_refuses_non_empty_dir(tmp_path, capsys):
    (tmp_path / "x").mkdir()
    (tmp_path / "x" / "f").write_text("")
    code, _, err = run(capsys, "gen-dataset", "--preset", "tremolo", "--count", 3, "--duration", 0.25,
                       "--out", tmp_path / "x")
    assert code == EXIT_CODES["input"] and "error[input]" in err and "--force" in err


def test_unknown_preset_is_a_config_error(tmp_path, capsys):
    code, _, err = run(capsys, "gen-dataset", "--preset", "theremin", "--out", tmp_path / "c")
    assert code == EXIT_CODES["config"] and "error[config]" in err


def test_unknown_config_key(tmp_path, capsys):
    (tmp_path / "bad.yaml").write_text("preset: tremolo\nlearning_rate: 0.1\n")
    code, _, err = run(capsys, "train", "--config", tmp_path / "bad.yaml", "--dry-run")
    assert code == EXIT_CODES["config"] and "unknown keys" in err


def test_invalid_model_override(capsys):
    code, _, err = run(capsys, "train", "--preset", "tremolo", "--frame-size", 1000, "--dry-run")
    assert code == EXIT_CODES["config"] and "power of two" in err


def test_dry_run_prints_parameter_count(capsys):
    code, out, _ = run(capsys, "train", "--preset", "tremolo", "--dry-run")
    info = json.loads(out)
    assert code == 0
    assert info["parameters"] == 275_936
    assert info["model"]["frame_size"] == 4096 and info["schedule"] == "desk"


def test_paper_schedule_and_cli_overrides(capsys):
    _, out, _ = run(capsys, "train", "--preset", "vibrato", "--schedule", "paper", "--epochs", 7,
                    "--pretrain-epochs", 3, "--frame-size", 1024, "--context", 2, "--seed", 9, "--dry-run")
    info = json.loads(out)
    assert info["plan"]["supervised_epochs"] == 7 and info["plan"]["pretrain_epochs"] == 3
    assert info["plan"]["initial_lr"] == 5e-5 and info["plan"]["seed"] == 9
    assert info["model"]["frame_size"] == 1024 and info["model"]["context"] == 2


def test_train_needs_paths(capsys):
    code, _, err = run(capsys, "train", "--preset", "tremolo")
    assert code == EXIT_CODES["usage"]


def test_missing_corpus_is_an_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--corpus", tmp_path / "none", "--run-dir", tmp_path / "r")
    assert code == EXIT_CODES["input"]


def test_run_directory_contents(workspace):
    run_dir = workspace / "run"
    for name in ("config.json", "log.jsonl", "report.json", "checkpoints/last.ckpt", "checkpoints/best.ckpt"):
        assert (run_dir / name).is_file(), name
    config = json.loads((run_dir / "config.json").read_text())
    assert config["model"]["frame_size"] == 64 and config["plan"]["seed"] == 2
    assert len((run_dir / "log.jsonl").read_text().splitlines()) == 3


def test_rerun_resumes_without_retraining(workspace, capsys):
    before = (workspace / "run" / "checkpoints" / "last.ckpt").read_bytes()
    code, _, _ = run(capsys, "train", "--config", workspace / "run.yaml")
    assert code == 0
    assert (workspace / "run" / "checkpoints" / "last.ckpt").read_bytes() == before
    assert len((workspace / "run" / "log.jsonl").read_text().splitlines()) == 3


def test_eval_matches_report(workspace, capsys):
    report = json.loads((workspace / "run" / "report.json").read_text())
    code, out, _ = run(capsys, "eval", workspace / "run" / "checkpoints" / "best.ckpt",
                       "--corpus", workspace / "corpus", "--out", workspace / "eval.json")
    assert code == 0
    assert abs(json.loads(out)["mae"] - report["test"]["mae"]) < 1e-9
    full = json.loads((workspace / "eval.json").read_text())
    assert abs(full["msed"] - report["test"]["msed"]) < 1e-9


def test_process_reproduces_report_render(workspace, capsys, tmp_path):
    report = json.loads((workspace / "run" / "report.json").read_text())
    note = report["test"]["clips"][0]
    dry = workspace / "corpus" / "dry" / f"{note['id']}.wav"
    code, _, _ = run(capsys, "process", workspace / "run" / "checkpoints" / "best.ckpt", dry, tmp_path / "y.wav")
    assert code == 0
    out = read_wav(tmp_path / "y.wav")
    logged = read_wav(workspace / "run" / "outputs" / f"{note['id']}.wav")
    assert out.channels == 1 and out.num_frames == read_wav(dry).num_frames
    np.testing.assert_array_equal(out.samples, logged.samples)
    wet = read_wav(workspace / "corpus" / "wet" / f"{note['id']}.wav")
    assert abs(metrics.energy_normalized_mae(wet, out) - note["mae"]) < 1e-9
    assert abs(metrics.msed(wet, out) - note["msed"]) < 1e-9


def test_process_refuses_incompatible_checkpoint(workspace, capsys, tmp_path):
    arrays, meta = checkpoint.load(workspace / "run" / "checkpoints" / "best.ckpt")
    checkpoint.save(tmp_path / "old.ckpt", arrays, {**meta, "model_format": 99})
    dry = next((workspace / "corpus" / "dry").glob("*.wav"))
    code, _, err = run(capsys, "process", tmp_path / "old.ckpt", dry, tmp_path / "y.wav")
    assert code == EXIT_CODES["checkpoint"] and "incompatible" in err
    code, _, _ = run(capsys, "process", tmp_path / "missing.ckpt", dry, tmp_path / "y.wav")
    assert code == EXIT_CODES["input"]


def test_msed_same_file(workspace, capsys):
    wav = next((workspace / "corpus" / "wet").glob("*.wav"))
    code, out, _ = run(capsys, "msed", wav, wav)
    assert code == 0 and json.loads(out) == {"mae": 0.0, "msed": 0.0}


def test_msed_dry_vs_tremolo_csv(tmp_path, capsys):
    from tvfx.corpus import generate_corpus

    item = generate_corpus("tremolo", 3, seed=0).items[0]
    write_wav(item.dry, tmp_path / "dry.wav", encoding="float32")
    write_wav(item.wet, tmp_path / "wet.wav", encoding="float32")
    code, out, _ = run(capsys, "msed", tmp_path / "dry.wav", tmp_path / "wet.wav",
                       "--csv-a", tmp_path / "a.csv", "--csv-b", tmp_path / "b.csv")
    assert code == 0 and json.loads(out)["msed"] > 0
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["0.5-4Hz", "4.5-10Hz", "10.5-20Hz", "20.5-100Hz"]
    energies = np.array(rows[1:], dtype=float)
    assert energies.shape == (12, 4)
    active = energies.sum(axis=1) > 1e-6
    assert np.all(np.argmax(energies[active], axis=1) == 0)


def test_msed_length_mismatch(tmp_path, capsys, caplog):
    x = np.random.default_rng(0).normal(size=16000) * 0.1
    write_wav(AudioClip(x, 16000), tmp_path / "a.wav", encoding="float32")
    write_wav(AudioClip(x[:15000], 16000), tmp_path / "b.wav", encoding="float32")
    code, out, _ = run(capsys, "msed", tmp_path / "a.wav", tmp_path / "b.wav")
    assert code == 0 and json.loads(out)["mae"] == 0.0
    code, _, err = run(capsys, "msed", tmp_path / "a.wav", tmp_path / "b.wav", "--strict")
    assert code == EXIT_CODES["input"] and "lengths differ" in err


def test_msed_resamples_other_rate(tmp_path, capsys):
    t = np.arange(32000) / 32000
    write_wav(AudioClip(np.sin(2 * np.pi * 440 * t[:16000 * 2][::2]), 16000), tmp_path / "a.wav")
    write_wav(AudioClip(np.sin(2 * np.pi * 440 * t), 32000), tmp_path / "b.wav")
    code, out, _ = run(capsys, "msed", tmp_path / "a.wav", tmp_path / "b.wav")
    assert code == 0 and json.loads(out)["mae"] < 0.01
    code, _, _ = run(capsys, "msed", tmp_path / "a.wav", tmp_path / "b.wav", "--strict")
    assert code == EXIT_CODES["input"]


def test_usage_error_from_argparse(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_CODES["usage"]
