"""Uniform frequency and time grids with trapezoid weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class _UniformGrid:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 2:
            raise InputError(f"grid count must be an integer >= 2, got {self.count}")
        if not self.max > self.min:
            raise InputError(f"grid max ({self.max}) must exceed min ({self.min})")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.count - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.count, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


@dataclass(frozen=True)
class FrequencyGrid(_UniformGrid):
    @classmethod
    def symmetric(cls, omega_max: float, count: int) -> "FrequencyGrid":
        return cls(-float(omega_max), float(omega_max), int(count))

    @property
    def is_symmetric(self) -> bool:
        return abs(self.min + self.max) <= 1e-12 * max(abs(self.min), abs(self.max))


@dataclass(frozen=True)
class TimeGrid(_UniformGrid):
    @property
    def step(self) -> float:
        return self.spacing

    def matches(self, other: "TimeGrid", rtol: float = 1e-12) -> bool:
        scale = max(abs(self.min), abs(self.max), abs(other.min), abs(other.max), 1.0)
        return (self.count == other.count
                and abs(self.min - other.min) <= rtol * scale
                and abs(self.max - other.max) <= rtol * scale)


def default_frequency_grid(temperature: float, cutoff: float, s_min: float,
                           s_max: float) -> FrequencyGrid:
    """Symmetric grid wide enough for the thermal, cutoff and time scales.

    Uses ``omega_max >= max(50 T, 20 cutoff, 20 / s_min)`` and spacing at most
    ``pi / (10 s_max)``; the point count is odd so that ``omega = 0`` is a node.
    """
    omega_max = max(50.0 * temperature, 20.0 * cutoff, 20.0 / s_min)
    n_half = int(np.ceil(omega_max / (np.pi / (10.0 * s_max))))
    return FrequencyGrid.symmetric(omega_max, 2 * max(n_half, 1) + 1)
