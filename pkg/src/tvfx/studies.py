"""Workstation-scale experiment protocols shared by the scripts and the acceptance suite."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .corpus import generate_corpus
from .fx.presets import list_presets
from .model import ModelConfig
from .train import TrainPlan, baseline, run_experiment

DESK_NOTES = 16
# context frames per side that cover one period of a 2 Hz modulator at 50% hop
CONTEXT_FOR_FRAME = {1024: 16, 2048: 8, 4096: 4, 8192: 2}


@dataclass
class TaskResult:
    preset: str
    frame_size: int
    context: int
    report: dict
    seconds: float

    @property
    def test_mae(self) -> float:
        return self.report["test"]["mae"]

    @property
    def test_msed(self) -> float:
        return self.report["test"]["msed"]

    @property
    def baseline_mae(self) -> float:
        return self.report["baseline"]["mae"]

    @property
    def baseline_msed(self) -> float:
        return self.report["baseline"]["msed"]

    @property
    def untrained_mae(self) -> float:
        return self.report["untrained"]["mae"]

    def summary(self) -> dict:
        return {
            "preset": self.preset, "frame_size": self.frame_size, "context": self.context,
            "test_mae": self.test_mae, "test_msed": self.test_msed,
            "baseline_mae": self.baseline_mae, "baseline_msed": self.baseline_msed,
            "untrained_mae": self.untrained_mae, "best_epoch": self.report["best_epoch"],
            "seconds": round(self.seconds, 1),
        }


def desk_task(preset: str, frame_size: int = 4096, context: int | None = None, seed: int = 0,
              notes: int = DESK_NOTES, plan: TrainPlan | None = None, run_dir=None) -> TaskResult:
    """Generate a desk corpus for ``preset``, train with the desk schedule and score the test split."""
    k = CONTEXT_FOR_FRAME[frame_size] if context is None else context
    corpus = generate_corpus(preset, notes, seed=seed)
    config = ModelConfig().with_frame_size(frame_size, k)
    plan = plan or TrainPlan.desk(seed=seed)
    start = time.perf_counter()
    report = run_experiment(corpus, config, plan, run_dir, extra_meta={"preset": preset})
    return TaskResult(preset, frame_size, k, report, time.perf_counter() - start)


def baseline_table(presets=None, notes: int = DESK_NOTES, seed: int = 0) -> dict:
    """Dry-vs-wet mae and msed over every note of each preset's desk corpus, plus their means."""
    rows = {}
    for name in presets or list_presets():
        b = baseline(generate_corpus(name, notes, seed=seed).items)
        rows[name] = {"mae": b["mae"], "msed": b["msed"]}
    return {
        "presets": rows,
        "mean_mae": float(np.mean([r["mae"] for r in rows.values()])),
        "mean_msed": float(np.mean([r["msed"] for r in rows.values()])),
    }
