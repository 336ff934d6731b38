"""Synthetic dry/wet note corpora with a hashed manifest.

Layout of a corpus directory::

    manifest.json
    dry/<note_id>.wav     float32 mono
    wet/<note_id>.wav

The manifest records the preset, the generator settings, the split of every
note and the SHA-256 of every WAV, so a modified corpus is refused on load.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_wav, write_wav
from .fx.presets import Preset, load_preset, preset_from_dict, render, source_level
from .fx.synth import midi_to_hz, synth_note

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SPLITS = ("train", "validation", "test")
HELD_OUT_FRACTION = 0.05


class CorpusError(RuntimeError):
    pass


@dataclass(frozen=True)
class CorpusItem:
    note_id: str
    midi: int
    dry: AudioClip
    wet: AudioClip
    split: str


@dataclass
class Corpus:
    preset: Preset
    items: list
    seed: int
    settings: dict = field(default_factory=dict)

    def split(self, name: str) -> list:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [it for it in self.items if it.split == name]

    def split_counts(self) -> dict:
        return {s: len(self.split(s)) for s in SPLITS}


def split_sizes(count: int) -> tuple[int, int, int]:
    """Train/validation/test sizes: 5% each (floor, at least one), rest to train."""
    if count < 3:
        raise ValueError(f"a corpus needs at least 3 notes for train/validation/test, got {count}")
    held = max(1, int(np.floor(HELD_OUT_FRACTION * count)))
    return count - 2 * held, held, held


def note_pitches(count: int, low: int = 28, high: int = 67) -> list[int]:
    """``count`` MIDI pitches spread evenly over ``[low, high]`` (repeats once the range is exhausted)."""
    return [int(round(m)) for m in np.linspace(low, high, count)]


def _float32(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32).astype(np.float64)


def generate_corpus(
    preset: Preset | str,
    count: int = 16,
    seed: int = 0,
    duration: float = 2.0,
    sample_rate: int = 16000,
    low: int = 28,
    high: int = 67,
) -> Corpus:
    """Synthesize ``count`` dry plucks, render them through ``preset`` and assign splits."""
    if isinstance(preset, str):
        preset = load_preset(preset)
    n_train, n_val, n_test = split_sizes(count)
    order = np.random.default_rng([seed, 101]).permutation(count)
    labels = np.empty(count, dtype=object)
    labels[order[:n_val]] = "validation"
    labels[order[n_val:n_val + n_test]] = "test"
    labels[order[n_val + n_test:]] = "train"
    level = source_level(preset)
    note_seeds = np.random.default_rng([seed, 202]).integers(0, 2**31 - 1, size=count)
    items = []
    for i, midi in enumerate(note_pitches(count, low, high)):
        dry = synth_note(midi_to_hz(midi), duration=duration, sample_rate=sample_rate, seed=int(note_seeds[i]))
        # stored as float32 on disk; quantize now so in-memory and reloaded corpora agree
        dry = dry.with_samples(_float32(dry.samples * level))
        wet = render(preset, dry)
        wet = wet.with_samples(_float32(wet.samples))
        items.append(CorpusItem(f"note{i:03d}_m{midi}", midi, dry, wet, str(labels[i])))
    settings = {"count": count, "duration": duration, "sample_rate": sample_rate, "low": low, "high": high}
    return Corpus(preset, items, seed, settings)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def corpus_digest(manifest: dict) -> str:
    """Stable hash of a corpus' content (the file hashes plus the preset)."""
    payload = json.dumps({"preset": manifest["preset"], "files": manifest["files"]}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def save_corpus(corpus: Corpus, out_dir, force: bool = False) -> dict:
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise CorpusError(f"{out} exists and is not empty; use --force to overwrite")
    for sub in ("dry", "wet"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    files = {}
    notes = []
    for it in corpus.items:
        entry = {"id": it.note_id, "midi": it.midi, "split": it.split}
        for kind, clip in (("dry", it.dry), ("wet", it.wet)):
            rel = f"{kind}/{it.note_id}.wav"
            write_wav(clip, out / rel, encoding="float32")
            files[rel] = _sha256(out / rel)
            entry[kind] = rel
        notes.append(entry)
    manifest = {
        "version": MANIFEST_VERSION,
        "preset": corpus.preset.to_dict(),
        "seed": corpus.seed,
        "settings": corpus.settings,
        "splits": corpus.split_counts(),
        "notes": notes,
        "files": files,
    }
    manifest["digest"] = corpus_digest(manifest)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_manifest(corpus_dir) -> dict:
    path = Path(corpus_dir) / "manifest.json"
    if not path.is_file():
        raise CorpusError(f"{corpus_dir} has no manifest.json")
    manifest = json.loads(path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise CorpusError(f"unsupported manifest version {manifest.get('version')}")
    return manifest


def load_corpus(corpus_dir, verify: bool = True) -> Corpus:
    """Read a corpus written by :func:`save_corpus`, checking every file hash."""
    root = Path(corpus_dir)
    manifest = load_manifest(root)
    if verify:
        for rel, digest in manifest["files"].items():
            path = root / rel
            if not path.is_file():
                raise CorpusError(f"corpus file {rel} is missing")
            if _sha256(path) != digest:
                raise CorpusError(f"corpus file {rel} does not match its manifest hash")
    items = [
        CorpusItem(n["id"], int(n["midi"]), read_wav(root / n["dry"]), read_wav(root / n["wet"]), n["split"])
        for n in manifest["notes"]
    ]
    return Corpus(preset_from_dict(manifest["preset"]), items, int(manifest["seed"]), manifest["settings"])
