"""Versioned effect presets and the renderer that applies them to dry clips.

A preset is a YAML document::

    name: tremolo
    version: 1
    normalize: true        # peak-normalise the wet output
    channel: left          # optional, picks one channel of a stereo effect
    source: {level_db: -20.0}   # optional, peak level of the dry notes
    chain:
      - effect: tremolo
        lfo: {shape: sine, rate: 2.0, depth: 0.6, phase: 0.0}

Each chain step names a function from :data:`EFFECTS`; the remaining keys
are passed to it as keyword arguments (``lfo``/``lfos`` become :class:`Lfo`,
``settings``/``low``/``high`` become :class:`CompressorSettings`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from ..audio import AudioClip, normalize_amplitude
from . import dynamics, modulation
from .dynamics import CompressorSettings
from .lfo import Lfo

PRESET_FORMAT_VERSION = 1

EFFECTS = {
    "tremolo": modulation.tremolo,
    "vibrato": modulation.vibrato,
    "chorus": modulation.chorus,
    "flanger": modulation.flanger,
    "phaser": modulation.phaser,
    "auto_wah_lfo": modulation.auto_wah_lfo,
    "auto_wah_env": modulation.auto_wah_env,
    "ring_modulator": modulation.ring_modulator,
    "leslie": modulation.leslie,
    "overdrive": dynamics.overdrive,
    "compressor": dynamics.compressor,
    "multiband_compressor": dynamics.multiband_compressor,
}

_LFO_KEYS = ("lfo",)
_SETTINGS_KEYS = ("settings", "low", "high")


class PresetError(ValueError):
    pass


@dataclass(frozen=True)
class Preset:
    name: str
    chain: tuple
    version: int = PRESET_FORMAT_VERSION
    normalize: bool = True
    channel: str | None = None
    family: str = ""
    source: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "version": self.version,
            "family": self.family,
            "normalize": self.normalize,
            "chain": [dict(step) for step in self.chain],
        }
        if self.channel is not None:
            d["channel"] = self.channel
        if self.source:
            d["source"] = dict(self.source)
        return d


def _build_kwargs(step: dict) -> dict:
    kwargs = {k: v for k, v in step.items() if k != "effect"}
    for key in _LFO_KEYS:
        if key in kwargs:
            kwargs[key] = Lfo.from_dict(kwargs[key])
    if "lfos" in kwargs:
        kwargs["lfos"] = [Lfo.from_dict(d) for d in kwargs["lfos"]]
    for key in _SETTINGS_KEYS:
        if key in kwargs:
            kwargs[key] = CompressorSettings(**kwargs[key])
    return kwargs


def preset_from_dict(d: dict) -> Preset:
    for key in ("name", "chain"):
        if key not in d:
            raise PresetError(f"preset is missing required key {key!r}")
    version = int(d.get("version", PRESET_FORMAT_VERSION))
    if version > PRESET_FORMAT_VERSION:
        raise PresetError(f"preset {d['name']!r} has version {version}; this build reads up to {PRESET_FORMAT_VERSION}")
    chain = tuple(dict(step) for step in d["chain"])
    for step in chain:
        if step.get("effect") not in EFFECTS:
            raise PresetError(f"preset {d['name']!r}: unknown effect {step.get('effect')!r}")
        _build_kwargs(step)
    channel = d.get("channel")
    if channel not in (None, "left", "right"):
        raise PresetError(f"preset {d['name']!r}: channel must be left or right")
    return Preset(
        name=d["name"],
        chain=chain,
        version=version,
        normalize=bool(d.get("normalize", True)),
        channel=channel,
        family=d.get("family", ""),
        source=dict(d.get("source", {})),
    )


def _preset_dir():
    return resources.files(__package__) / "presets"


def list_presets() -> list[str]:
    return sorted(p.name[:-5] for p in _preset_dir().iterdir() if p.name.endswith(".yaml"))


def load_preset(name_or_path) -> Preset:
    """Load a shipped preset by name, or any preset file by path."""
    path = Path(str(name_or_path))
    if path.suffix in (".yaml", ".yml") and path.exists():
        text = path.read_text()
    else:
        res = _preset_dir() / f"{name_or_path}.yaml"
        if not res.is_file():
            raise PresetError(f"unknown preset {name_or_path!r}; available: {', '.join(list_presets())}")
        text = res.read_text()
    return preset_from_dict(yaml.safe_load(text))


def source_level(preset: Preset) -> float:
    """Linear peak level the dry notes of this preset are synthesized at."""
    return 10.0 ** (float(preset.source.get("level_db", 0.0)) / 20.0)


def render(preset: Preset, dry: AudioClip) -> AudioClip:
    """Apply the preset chain to a mono dry clip and return a mono wet clip."""
    wet = dry
    for step in preset.chain:
        fn = EFFECTS[step["effect"]]
        wet = fn(wet, **_build_kwargs(step))
    if wet.channels == 2:
        wet = wet.channel(0 if preset.channel in (None, "left") else 1)
    if preset.normalize:
        wet = normalize_amplitude(wet)
    return wet
