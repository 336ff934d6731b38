"""Command-line entry point: ``tvfx gen-dataset | train | eval | process | msed``.

Failures print ``tvfx: error[<category>]: <message>`` on stderr and exit
with the category's code (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from . import __version__, metrics
from .audio import AudioClip, WavFormatError, read_wav, resample, write_wav
from .corpus import CorpusError, generate_corpus, load_corpus, load_manifest, save_corpus
from .fx.presets import PresetError, list_presets, load_preset
from .model import FxModel, ModelConfig
from .nn.checkpoint import CheckpointError
from .train import TrainingError, TrainPlan, evaluate, load_model, run_experiment

log = logging.getLogger("tvfx")

EXIT_CODES = {"usage": 2, "input": 3, "config": 4, "checkpoint": 5, "training": 6, "internal": 1}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@dataclass
class RunConfig:
    """Everything a run depends on; written to the run directory as resolved."""

    preset: str | None = None
    seed: int = 0
    count: int = 16
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    schedule: str = "desk"
    corpus_dir: str | None = None
    run_dir: str | None = None

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict({**ModelConfig().to_dict(), **self.model})

    def train_plan(self) -> TrainPlan:
        overrides = {**self.train, "seed": self.seed}
        if self.schedule == "paper":
            return replace(TrainPlan(), **overrides)
        if self.schedule == "desk":
            return TrainPlan.desk(**overrides)
        raise ValueError(f"schedule must be 'desk' or 'paper', got {self.schedule!r}")


_CONFIG_KEYS = {"preset", "seed", "count", "model", "train", "schedule", "paths"}


def load_run_config(path) -> RunConfig:
    """Read a YAML run config::

        preset: tremolo
        seed: 0
        count: 16
        schedule: desk          # or paper
        model: {frame_size: 4096, context: 4}
        train: {supervised_epochs: 60}
        paths: {corpus: data/tremolo, run: runs/tremolo}
    """
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise CliError("config", f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError("config", f"{path}: top level must be a mapping")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise CliError("config", f"{path}: unknown keys {sorted(unknown)}")
    paths = data.get("paths") or {}
    return RunConfig(
        preset=data.get("preset"),
        seed=int(data.get("seed", 0)),
        count=int(data.get("count", 16)),
        model=dict(data.get("model") or {}),
        train=dict(data.get("train") or {}),
        schedule=str(data.get("schedule", "desk")),
        corpus_dir=paths.get("corpus"),
        run_dir=paths.get("run"),
    )


def resolve_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "preset", None):
        cfg.preset = args.preset
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "count", None) is not None:
        cfg.count = args.count
    if getattr(args, "frame_size", None) is not None:
        cfg.model["frame_size"] = args.frame_size
    if getattr(args, "context", None) is not None:
        cfg.model["context"] = args.context
    if getattr(args, "epochs", None) is not None:
        cfg.train["supervised_epochs"] = args.epochs
    if getattr(args, "pretrain_epochs", None) is not None:
        cfg.train["pretrain_epochs"] = args.pretrain_epochs
    if getattr(args, "schedule", None):
        cfg.schedule = args.schedule
    if getattr(args, "corpus", None):
        cfg.corpus_dir = args.corpus
    if getattr(args, "run_dir", None):
        cfg.run_dir = args.run_dir
    if cfg.preset is not None:
        try:
            load_preset(cfg.preset)
        except PresetError as exc:
            raise CliError("config", str(exc)) from exc
    try:
        cfg.model_config()
        cfg.train_plan()
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc)) from exc
    return cfg


def _load_corpus(path):
    try:
        return load_corpus(path)
    except (CorpusError, WavFormatError, FileNotFoundError) as exc:
        raise CliError("input", str(exc)) from exc


# verbs --------------------------------------------------------------------------------
def cmd_gen_dataset(args) -> int:
    cfg = resolve_config(args)
    if cfg.preset is None:
        raise CliError("usage", "gen-dataset needs --preset (or preset: in --config)")
    out = args.out or cfg.corpus_dir
    if out is None:
        raise CliError("usage", "gen-dataset needs --out")
    try:
        corpus = generate_corpus(cfg.preset, count=cfg.count, seed=cfg.seed, duration=args.duration)
        manifest = save_corpus(corpus, out, force=args.force)
    except CorpusError as exc:
        raise CliError("input", str(exc)) from exc
    except ValueError as exc:
        raise CliError("config", str(exc)) from exc
    print(json.dumps({"corpus": str(out), "splits": manifest["splits"], "digest": manifest["digest"]}))
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    config, plan = cfg.model_config(), cfg.train_plan()
    if args.dry_run:
        model = FxModel(config, seed=plan.seed)
        print(json.dumps({
            "preset": cfg.preset, "corpus": cfg.corpus_dir, "run_dir": cfg.run_dir, "schedule": cfg.schedule,
            "model": config.to_dict(), "plan": plan.to_dict(), "parameters": model.num_parameters(),
        }, indent=2, sort_keys=True))
        return 0
    if cfg.corpus_dir is None or cfg.run_dir is None:
        raise CliError("usage", "train needs --corpus and --run-dir (or paths: in --config)")
    corpus = _load_corpus(cfg.corpus_dir)
    if cfg.preset is not None and cfg.preset != corpus.preset.name:
        raise CliError("config", f"corpus was rendered with preset {corpus.preset.name!r}, not {cfg.preset!r}")
    run_dir = Path(cfg.run_dir)
    if run_dir.exists() and any(run_dir.iterdir()) and args.force:
        _clear_run_dir(run_dir)
    manifest = load_manifest(cfg.corpus_dir)
    extra = {"preset": corpus.preset.name, "corpus_digest": manifest["digest"], "schedule": cfg.schedule}
    try:
        report = run_experiment(corpus, config, plan, run_dir, extra_meta=extra, workers=args.workers)
    except TrainingError as exc:
        raise CliError("training", str(exc)) from exc
    except CheckpointError as exc:
        raise CliError("checkpoint", str(exc)) from exc
    print(json.dumps({k: report[k]["mae"] for k in ("baseline", "untrained", "test")} | {"run_dir": str(run_dir)}))
    return 0


def _clear_run_dir(run_dir: Path) -> None:
    for name in ("config.json", "log.jsonl", "report.json"):
        (run_dir / name).unlink(missing_ok=True)
    for sub in ("checkpoints", "outputs"):
        for f in (run_dir / sub).glob("*") if (run_dir / sub).is_dir() else ():
            f.unlink()


def _load_checkpoint(path):
    try:
        return load_model(path)
    except FileNotFoundError as exc:
        raise CliError("input", f"checkpoint {path} not found") from exc
    except (CheckpointError, KeyError, ValueError) as exc:
        raise CliError("checkpoint", f"{path}: {exc}") from exc


def cmd_eval(args) -> int:
    model, _ = _load_checkpoint(args.checkpoint)
    corpus = _load_corpus(args.corpus)
    report = evaluate(model, corpus.split(args.split), workers=args.workers)
    report["split"] = args.split
    report["corpus_digest"] = load_manifest(args.corpus)["digest"]
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(json.dumps({"split": args.split, "mae": report["mae"], "msed": report["msed"]}))
    return 0


def _read(path) -> AudioClip:
    try:
        return read_wav(path)
    except FileNotFoundError as exc:
        raise CliError("input", f"{path} not found") from exc
    except WavFormatError as exc:
        raise CliError("input", str(exc)) from exc


def cmd_process(args) -> int:
    model, _ = _load_checkpoint(args.checkpoint)
    clip = _read(args.input)
    if clip.channels != 1:
        log.warning("%s has %d channels; processing the mono downmix", args.input, clip.channels)
    # float32 output stores the model's result exactly as the run report scored it
    write_wav(model.process_clip(clip.to_mono()), args.output, encoding="float32")
    return 0


def _match_lengths(a: AudioClip, b: AudioClip, strict: bool) -> tuple[AudioClip, AudioClip]:
    a, b = a.to_mono(), b.to_mono()
    if a.sample_rate != b.sample_rate:
        if strict:
            raise CliError("input", f"sample rates differ ({a.sample_rate} vs {b.sample_rate})")
        log.warning("resampling second file from %d Hz to %d Hz", b.sample_rate, a.sample_rate)
        b = resample(b, a.sample_rate)
    if a.num_frames != b.num_frames:
        if strict:
            raise CliError("input", f"lengths differ ({a.num_frames} vs {b.num_frames} samples)")
        n = min(a.num_frames, b.num_frames)
        log.warning("lengths differ (%d vs %d samples); trimming both to %d", a.num_frames, b.num_frames, n)
        a, b = a.with_samples(a.samples[:n]), b.with_samples(b.samples[:n])
    return a, b


def write_spectrum_csv(spectrum: metrics.ModulationSpectrum, path) -> None:
    """12 rows (gammatone bands, ascending centre frequency) by 4 summary-band energies."""
    header = [f"{lo:g}-{hi:g}Hz" for lo, hi in spectrum.band_edges]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in spectrum.energies:
            w.writerow([repr(float(v)) for v in row])


def cmd_msed(args) -> int:
    a, b = _match_lengths(_read(args.a), _read(args.b), args.strict)
    try:
        sa, sb = metrics.modulation_spectrum(a), metrics.modulation_spectrum(b)
        result = {"mae": metrics.energy_normalized_mae(a, b), "msed": metrics.msed_from_spectra(sa, sb)}
    except ValueError as exc:
        raise CliError("input", str(exc)) from exc
    if args.csv_a:
        write_spectrum_csv(sa, args.csv_a)
    if args.csv_b:
        write_spectrum_csv(sb, args.csv_b)
    print(json.dumps(result))
    return 0


# parser -------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvfx", description="Train and evaluate black-box models of time-varying audio effects.")
    p.add_argument("--version", action="version", version=f"tvfx {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, training: bool = False):
        sp.add_argument("--config", help="YAML run config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--preset", help=f"effect preset ({', '.join(list_presets())})")
        if training:
            sp.add_argument("--frame-size", type=int, dest="frame_size")
            sp.add_argument("--context", type=int)
            sp.add_argument("--epochs", type=int, help="supervised epochs")
            sp.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
            sp.add_argument("--schedule", choices=("desk", "paper"))

    g = sub.add_parser("gen-dataset", help="synthesize a dry/wet corpus")
    common(g)
    g.add_argument("--count", type=int)
    g.add_argument("--duration", type=float, default=2.0)
    g.add_argument("--out")
    g.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    g.set_defaults(func=cmd_gen_dataset)

    t = sub.add_parser("train", help="pretrain, train and evaluate a model")
    common(t, training=True)
    t.add_argument("--corpus")
    t.add_argument("--run-dir", dest="run_dir")
    t.add_argument("--workers", type=int, default=1, help="threads for evaluation")
    t.add_argument("--dry-run", action="store_true", help="print the resolved config and parameter count")
    t.add_argument("--force", action="store_true", help="discard an existing run instead of resuming it")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a corpus split")
    e.add_argument("checkpoint")
    e.add_argument("--corpus", required=True)
    e.add_argument("--split", default="test", choices=("train", "validation", "test"))
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", help="write the full report here")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("process", help="apply a trained model to a WAV file")
    r.add_argument("checkpoint")
    r.add_argument("input")
    r.add_argument("output")
    r.set_defaults(func=cmd_process)

    m = sub.add_parser("msed", help="compare two WAV files (energy-normalized mae and msed)")
    m.add_argument("a", help="reference")
    m.add_argument("b", help="comparison")
    m.add_argument("--csv-a", dest="csv_a", help="write the reference's 12x4 modulation energies")
    m.add_argument("--csv-b", dest="csv_b", help="write the comparison's 12x4 modulation energies")
    m.add_argument("--strict", action="store_true", help="fail on sample-rate or length mismatch")
    m.set_defaults(func=cmd_msed)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"tvfx: error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.category]
    except KeyboardInterrupt:
        print("tvfx: error[internal]: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
