"""Low-frequency oscillators with a unipolar [0, 1] output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHAPES = ("sine", "triangle")


@dataclass(frozen=True)
class Lfo:
    """Periodic modulator.

    ``unit(t)`` swings over the full [0, 1] range; ``value(t)`` swings
    ``depth``-scaled around 0.5, so a depth-0 LFO is frozen at 0.5.
    """

    shape: str = "sine"
    rate: float = 2.0
    depth: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown LFO shape {self.shape!r}; expected one of {SHAPES}")
        if self.rate <= 0:
            raise ValueError(f"LFO rate must be positive, got {self.rate}")
        if not 0.0 <= self.depth <= 1.0:
            raise ValueError(f"LFO depth must lie in [0, 1], got {self.depth}")

    def waveform(self, t) -> np.ndarray:
        theta = 2.0 * np.pi * self.rate * np.asarray(t, dtype=np.float64) + self.phase
        if self.shape == "sine":
            return np.sin(theta)
        return 2.0 / np.pi * np.arcsin(np.sin(theta))

    def unit(self, t) -> np.ndarray:
        return 0.5 + 0.5 * self.waveform(t)

    def value(self, t) -> np.ndarray:
        return 0.5 + 0.5 * self.depth * self.waveform(t)

    def sample(self, n: int, sample_rate: int, attr: str = "value") -> np.ndarray:
        t = np.arange(n) / sample_rate
        return getattr(self, attr)(t)

    @classmethod
    def from_dict(cls, d: dict) -> "Lfo":
        return cls(**d)
