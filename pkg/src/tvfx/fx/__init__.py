"""Reference effect processors used to build dry/wet corpora."""

from .dynamics import (
    CompressorSettings,
    compressor,
    gain_computer,
    linkwitz_riley_split,
    multiband_compressor,
    overdrive,
)
from .lfo import Lfo
from .modulation import (
    auto_wah_env,
    auto_wah_lfo,
    chorus,
    envelope_follower,
    flanger,
    leslie,
    phaser,
    ring_modulator,
    tremolo,
    vibrato,
)
from .presets import Preset, list_presets, load_preset, render
from .synth import midi_to_hz, synth_note

__all__ = [
    "CompressorSettings",
    "Lfo",
    "Preset",
    "auto_wah_env",
    "auto_wah_lfo",
    "chorus",
    "compressor",
    "envelope_follower",
    "flanger",
    "gain_computer",
    "leslie",
    "linkwitz_riley_split",
    "list_presets",
    "load_preset",
    "midi_to_hz",
    "multiband_compressor",
    "overdrive",
    "phaser",
    "render",
    "ring_modulator",
    "synth_note",
    "tremolo",
    "vibrato",
]
