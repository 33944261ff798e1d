"""Piecewise-linear slope terrains for the posture scenarios.

Heights are zero outside features.  The two named presets mirror the
uneven-road layouts: ``parallel_slopes`` puts a 110 mm ramp under the
left track and a 50 mm ramp under the right track at the same station;
``separated_slopes`` puts the 50 mm and 110 mm ramps one behind the
other, each spanning the full width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Ramp:
    """Trapezoidal feature: rise, plateau, fall, optionally limited in y."""

    x_start: float
    height: float
    rise_len: float = 0.8
    plateau_len: float = 1.5
    fall_len: float = 0.8
    y_min: float = -np.inf
    y_max: float = np.inf

    def height_at(self, x: float, y: float) -> float:
        if not (self.y_min <= y <= self.y_max):
            return 0.0
        s = x - self.x_start
        if s <= 0.0:
            return 0.0
        if s < self.rise_len:
            return self.height * s / self.rise_len
        s -= self.rise_len
        if s < self.plateau_len:
            return self.height
        s -= self.plateau_len
        if s < self.fall_len:
            return self.height * (1.0 - s / self.fall_len)
        return 0.0


@dataclass
class TerrainProfile:
    name: str
    ramps: list[Ramp] = field(default_factory=list)
    noise_amp: float = 0.0
    noise_seed: int = 0
    _noise_grid: np.ndarray | None = field(default=None, repr=False)

    # noise is sampled on a coarse grid and linearly interpolated so it
    # stays continuous and slope-bounded
    NOISE_SPACING = 0.25  # m
    NOISE_SPAN = (-2.0, 40.0)

    def __post_init__(self):
        if self.noise_amp > 0.0:
            rng = np.random.default_rng(self.noise_seed)
            n = int((self.NOISE_SPAN[1] - self.NOISE_SPAN[0]) / self.NOISE_SPACING) + 1
            self._noise_grid = rng.uniform(-self.noise_amp, self.noise_amp, n)

    def height(self, x: float, y: float) -> float:
        h = 0.0
        for ramp in self.ramps:
            h += ramp.height_at(x, y)
        if self._noise_grid is not None:
            h += self._noise_at(x)
        return h

    def _noise_at(self, x: float) -> float:
        lo, hi = self.NOISE_SPAN
        if not (lo <= x <= hi):
            return 0.0
        pos = (x - lo) / self.NOISE_SPACING
        i = min(int(pos), len(self._noise_grid) - 2)
        frac = pos - i
        return float((1.0 - frac) * self._noise_grid[i] + frac * self._noise_grid[i + 1])


def flat(**kwargs) -> TerrainProfile:
    return TerrainProfile("flat", [], **kwargs)


def parallel_slopes(x_start: float = 1.2, **kwargs) -> TerrainProfile:
    return TerrainProfile("parallel_slopes", [
        Ramp(x_start=x_start, height=0.110, y_min=0.0),
        Ramp(x_start=x_start, height=0.050, y_max=0.0),
    ], **kwargs)


def separated_slopes(x_start: float = 1.2, gap: float = 2.0, **kwargs) -> TerrainProfile:
    first = Ramp(x_start=x_start, height=0.050)
    second_start = x_start + first.rise_len + first.plateau_len + first.fall_len + gap
    return TerrainProfile("separated_slopes", [
        first,
        Ramp(x_start=second_start, height=0.110),
    ], **kwargs)


PRESETS = {
    "flat": flat,
    "parallel_slopes": parallel_slopes,
    "separated_slopes": separated_slopes,
}


def make_terrain(preset: str, noise_amp: float = 0.0,
                 noise_seed: int = 0) -> TerrainProfile:
    if preset not in PRESETS:
        raise ValueError(f"unknown terrain preset {preset!r}; "
                         f"choose from {sorted(PRESETS)}")
    return PRESETS[preset](noise_amp=noise_amp, noise_seed=noise_seed)
