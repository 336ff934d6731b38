"""Two-phase training, validation-based model selection and evaluation.

Every random draw (clip order, dropout masks) comes from a generator seeded
with ``(seed, phase, epoch[, clip])``, so a run interrupted after any epoch
and resumed from its checkpoint continues exactly as an uninterrupted run.

Run directory layout::

    config.json              resolved model config, train plan and corpus digest
    log.jsonl                one JSON object per epoch and phase
    checkpoints/last.ckpt    parameters, optimizer state and progress
    checkpoints/best.ckpt    parameters with the lowest validation mae
    report.json              test-split evaluation of the best parameters
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import metrics
from .audio import frame_signal, write_wav
from .corpus import Corpus
from .model import MODEL_FORMAT_VERSION, FxModel, ModelConfig
from .nn import checkpoint, ops
from .nn.optim import Adam
from .nn.tensor import Tape

log = logging.getLogger(__name__)

PHASE_IDS = {"pretrain": 1, "supervised": 2}


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainPlan:
    pretrain_epochs: int = 200
    supervised_epochs: int = 500
    initial_lr: float = 5e-5
    lr_halving_period: int = 150
    pretrain_lr: float = 5e-5
    seed: int = 0

    def __post_init__(self):
        for name in ("initial_lr", "pretrain_lr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_halving_period <= 0:
            raise ValueError("lr_halving_period must be positive")
        if self.pretrain_epochs < 0 or self.supervised_epochs < 0:
            raise ValueError("epoch counts must be non-negative")

    @classmethod
    def desk(cls, **overrides) -> "TrainPlan":
        """Workstation-scale schedule used by the acceptance runs.

        Sixty supervised epochs at 3e-3, halved every 15, with no
        pretraining: with only 14 training clips the Glorot-initialised
        front end already reconstructs its input closely, and short
        pretraining runs moved it away from that. Pass
        ``pretrain_epochs`` to enable the first phase.
        """
        base = dict(pretrain_epochs=0, supervised_epochs=60, initial_lr=3e-3,
                    lr_halving_period=15, pretrain_lr=1e-3)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainPlan":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train plan keys: {sorted(unknown)}")
        return cls(**d)


def learning_rate(plan: TrainPlan, epoch: int) -> float:
    """Supervised learning rate for a 1-based epoch: halved every ``lr_halving_period`` epochs."""
    if epoch < 1:
        raise ValueError("epochs are 1-based")
    return plan.initial_lr * 0.5 ** ((epoch - 1) // plan.lr_halving_period)


def _epoch_rng(seed: int, phase: str, epoch: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([seed, PHASE_IDS[phase], epoch, *extra])


# evaluation ---------------------------------------------------------------------------
def render(model: FxModel, clip):
    """``process_clip`` quantized to float32, i.e. exactly what a float32 WAV stores."""
    out = model.process_clip(clip)
    return out.with_samples(out.samples.astype(np.float32).astype(np.float64))


def evaluate(model: FxModel, items, with_spectra: bool = False, workers: int = 1, renders: dict | None = None) -> dict:
    """Render every item's dry clip and score it against the wet clip.

    ``workers > 1`` renders clips on a thread pool; rows keep the order of
    ``items``. If ``renders`` is a dict it receives the rendered clips by id.
    """
    if model.phase != "supervised":
        raise TrainingError("evaluate needs a model in the supervised phase")
    items = list(items)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(lambda it: render(model, it.dry), items))
    else:
        outs = [render(model, it.dry) for it in items]
    rows = []
    for it, out in zip(items, outs):
        if renders is not None:
            renders[it.note_id] = out
        row = {
            "id": it.note_id,
            "mae": metrics.energy_normalized_mae(it.wet, out),
            "msed": metrics.msed(it.wet, out),
        }
        if with_spectra:
            row["energies"] = metrics.modulation_spectrum(out).energies.tolist()
        rows.append(row)
    return _aggregate(rows)


def baseline(items) -> dict:
    """Dry-vs-wet distances: the score of a model that passes its input through."""
    rows = [
        {"id": it.note_id, "mae": metrics.energy_normalized_mae(it.wet, it.dry), "msed": metrics.msed(it.wet, it.dry)}
        for it in items
    ]
    return _aggregate(rows)


def _aggregate(rows: list) -> dict:
    if not rows:
        return {"clips": [], "mae": float("nan"), "msed": float("nan")}
    return {
        "clips": rows,
        "mae": float(np.mean([r["mae"] for r in rows])),
        "msed": float(np.mean([r["msed"] for r in rows])),
    }


# run directory ------------------------------------------------------------------------
class RunDir:
    def __init__(self, root):
        self.root = Path(root)
        (self.root / "checkpoints").mkdir(parents=True, exist_ok=True)

    @property
    def last(self) -> Path:
        return self.root / "checkpoints" / "last.ckpt"

    @property
    def best(self) -> Path:
        return self.root / "checkpoints" / "best.ckpt"

    def write_json(self, name: str, obj) -> None:
        (self.root / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def append_log(self, row: dict) -> None:
        with open(self.root / "log.jsonl", "a") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    def truncate_log(self, keep: int) -> None:
        path = self.root / "log.jsonl"
        if not path.exists():
            return
        lines = path.read_text().splitlines(keepends=True)[:keep]
        path.write_text("".join(lines))

    def read_log(self) -> list:
        path = self.root / "log.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def model_metadata(model: FxModel, extra: dict | None = None) -> dict:
    meta = {"model_format": MODEL_FORMAT_VERSION, "model_config": model.config.to_dict(), "seed": model.seed}
    meta.update(extra or {})
    return meta


def save_model(path, model: FxModel, extra: dict | None = None) -> None:
    checkpoint.save(path, model.state_dict(), model_metadata(model, extra))


def load_model(path) -> tuple[FxModel, dict]:
    arrays, meta = checkpoint.load(path)
    version = meta.get("model_format")
    if version != MODEL_FORMAT_VERSION:
        raise checkpoint.CheckpointError(
            f"checkpoint model format {version} is incompatible with this build (expects {MODEL_FORMAT_VERSION})"
        )
    model = FxModel(ModelConfig.from_dict(meta["model_config"]), seed=meta.get("seed", 0))
    model.load_state_dict(arrays)
    model.set_phase("supervised")
    return model, meta


# training loops -----------------------------------------------------------------------
@dataclass
class _Clip:
    frames: object
    target: np.ndarray


def _prepare(model: FxModel, pairs) -> list:
    c = model.config
    out = []
    for x, y in pairs:
        frames = frame_signal(x, c.frame_size, c.context)
        target = frame_signal(y, c.frame_size, 0).centers
        out.append(_Clip(frames, target))
    return out


def _check_loss(value: float, phase: str, epoch: int, clip: int) -> None:
    if not np.isfinite(value):
        raise TrainingError(f"{phase} loss became {value} at epoch {epoch}, clip {clip}; aborting")


def _guarded(step, phase: str, epoch: int, clip: int, *args) -> float:
    """Run one optimizer step; a non-finite value anywhere on the tape aborts training."""
    try:
        value = step(*args)
    except FloatingPointError as exc:
        raise TrainingError(f"{phase} diverged at epoch {epoch}, clip {clip}: {exc}") from exc
    _check_loss(value, phase, epoch, clip)
    return value


def _pretrain_step(model: FxModel, opt: Adam, clip: _Clip, lr: float) -> float:
    opt.zero_grad()
    with Tape() as tape:
        loss = ops.mae(model.forward_pretrain(clip.frames), clip.frames.centers)
    tape.backward(loss)
    opt.step(lr)
    return float(loss.value)


def _supervised_step(model: FxModel, opt: Adam, clip: _Clip, lr: float, rng) -> float:
    opt.zero_grad()
    with Tape() as tape:
        out = model.forward(clip.frames, training=True, rng=rng).output
        data = ops.mae(out, clip.target)
        loss = ops.add(data, model.regularization())
    tape.backward(loss)
    opt.step(lr)
    return float(data.value)


class Trainer:
    """Runs pretraining then supervised training on a corpus, optionally inside a run directory."""

    def __init__(self, model: FxModel, corpus: Corpus, plan: TrainPlan, run_dir=None, extra_meta: dict | None = None):
        self.model = model
        self.corpus = corpus
        self.plan = plan
        self.run = RunDir(run_dir) if run_dir is not None else None
        self.extra_meta = dict(extra_meta or {})
        self.history: list[dict] = []
        self.best_state: dict | None = None
        self.best_val = float("inf")
        self.best_epoch = 0
        self._pre_opt = Adam([p for n, p in model.params.items() if n.startswith("front.")], lr=plan.pretrain_lr)
        self._sup_opt = Adam(model.parameters(), lr=plan.initial_lr)
        self._phase = "pretrain"
        self._epoch = 0   # last completed epoch of the current phase

    # checkpointing
    def _save_last(self) -> None:
        if self.run is None:
            return
        arrays = dict(self.model.state_dict())
        arrays.update({f"pre.{k}": v for k, v in self._pre_opt.state().items()})
        arrays.update({f"sup.{k}": v for k, v in self._sup_opt.state().items()})
        if self.best_state is not None:
            arrays.update({f"best.{k}": v for k, v in self.best_state.items()})
        meta = model_metadata(self.model, {
            "phase": self._phase, "epoch": self._epoch, "best_val": self.best_val,
            "best_epoch": self.best_epoch, "log_rows": len(self.history), "plan": self.plan.to_dict(),
        })
        checkpoint.save(self.run.last, arrays, meta)

    def _resume(self) -> bool:
        if self.run is None or not self.run.last.exists():
            return False
        arrays, meta = checkpoint.load(self.run.last)
        if meta.get("plan") != self.plan.to_dict() or meta.get("model_config") != self.model.config.to_dict():
            raise TrainingError(f"{self.run.last} was written with a different plan or model config")
        self.model.load_state_dict(arrays)
        self._pre_opt.load_state({k[4:]: v for k, v in arrays.items() if k.startswith("pre.")})
        self._sup_opt.load_state({k[4:]: v for k, v in arrays.items() if k.startswith("sup.")})
        best = {k[5:]: v for k, v in arrays.items() if k.startswith("best.")}
        self.best_state = best or None
        self.best_val = meta["best_val"]
        self.best_epoch = meta["best_epoch"]
        self._phase = meta["phase"]
        self._epoch = meta["epoch"]
        self.run.truncate_log(meta["log_rows"])
        self.history = self.run.read_log()
        log.info("resumed %s at %s epoch %d", self.run.root, self._phase, self._epoch)
        return True

    def _log(self, row: dict) -> None:
        self.history.append(row)
        if self.run is not None:
            self.run.append_log(row)
        log.info("%s", row)

    # phases
    def _train_pairs(self):
        return self.corpus.split("train")

    def pretrain(self) -> None:
        model, plan = self.model, self.plan
        model.set_phase("pretrain")
        items = self._train_pairs()
        # dry and wet clips both serve as input and reconstruction target
        clips = _prepare(model, [(it.dry, it.dry) for it in items] + [(it.wet, it.wet) for it in items])
        start = self._epoch + 1 if self._phase == "pretrain" else plan.pretrain_epochs + 1
        for epoch in range(start, plan.pretrain_epochs + 1):
            order = _epoch_rng(plan.seed, "pretrain", epoch).permutation(len(clips))
            losses = []
            for k in order:
                losses.append(_guarded(_pretrain_step, "pretrain", epoch, int(k),
                                       model, self._pre_opt, clips[k], plan.pretrain_lr))
            self._epoch = epoch
            self._log({"phase": "pretrain", "epoch": epoch, "loss": float(np.mean(losses))})
            self._save_last()

    def train_supervised(self) -> None:
        model, plan = self.model, self.plan
        model.set_phase("supervised")
        train = self._train_pairs()
        val = self.corpus.split("validation")
        if not val:
            raise TrainingError("the validation split is empty")
        clips = _prepare(model, [(it.dry, it.wet) for it in train])
        start = self._epoch + 1 if self._phase == "supervised" else 1
        if self._phase != "supervised":
            self._phase, self._epoch = "supervised", 0
        for epoch in range(start, plan.supervised_epochs + 1):
            lr = learning_rate(plan, epoch)
            order = _epoch_rng(plan.seed, "supervised", epoch).permutation(len(clips))
            losses = []
            for k in order:
                rng = _epoch_rng(plan.seed, "supervised", epoch, int(k) + 1)
                losses.append(_guarded(_supervised_step, "supervised", epoch, int(k),
                                       model, self._sup_opt, clips[k], lr, rng))
            v = evaluate(model, val)
            self._epoch = epoch
            if v["mae"] < self.best_val:
                self.best_val, self.best_epoch = v["mae"], epoch
                self.best_state = model.state_dict()
                if self.run is not None:
                    save_model(self.run.best, model, {"epoch": epoch, "val_mae": v["mae"], **self.extra_meta})
            self._log({"phase": "supervised", "epoch": epoch, "lr": lr, "loss": float(np.mean(losses)),
                       "val_mae": v["mae"], "val_msed": v["msed"]})
            self._save_last()

    def fit(self) -> FxModel:
        """Both phases (resuming if the run directory has a checkpoint); returns the best model."""
        self._resume()
        if self._phase == "pretrain":
            self.pretrain()
            self._phase, self._epoch = "supervised", 0
            self._save_last()
        self.train_supervised()
        if self.best_state is not None:
            self.model.load_state_dict(self.best_state)
        self.model.set_phase("supervised")
        return self.model


def run_experiment(corpus: Corpus, config: ModelConfig, plan: TrainPlan, run_dir=None, extra_meta=None,
                   workers: int = 1) -> dict:
    """Train on ``corpus`` and evaluate the selected model on its test split.

    Returns (and, with a run directory, writes) a report with the test
    metrics, the dry-vs-wet baseline and the untrained model's score. The
    run directory also receives the test renders under ``outputs/``.
    """
    untrained = FxModel(config, seed=plan.seed)
    untrained.set_phase("supervised")
    test = corpus.split("test")
    report = {
        "preset": corpus.preset.name,
        "model": {"config": config.to_dict(), "parameters": untrained.num_parameters()},
        "plan": plan.to_dict(),
        "baseline": baseline(test),
        "untrained": evaluate(untrained, test, workers=workers),
    }
    model = FxModel(config, seed=plan.seed)
    trainer = Trainer(model, corpus, plan, run_dir, extra_meta)
    if trainer.run is not None:
        trainer.run.write_json("config.json", {"model": config.to_dict(), "plan": plan.to_dict(),
                                               "preset": corpus.preset.to_dict(), **(extra_meta or {})})
    trainer.fit()
    report["best_epoch"] = trainer.best_epoch
    report["best_val_mae"] = trainer.best_val
    renders = {}
    report["test"] = evaluate(model, test, workers=workers, renders=renders)
    if trainer.run is not None:
        out_dir = trainer.run.root / "outputs"
        out_dir.mkdir(exist_ok=True)
        for note_id, clip in renders.items():
            write_wav(clip, out_dir / f"{note_id}.wav", encoding="float32")
        trainer.run.write_json("report.json", report)
    return report
