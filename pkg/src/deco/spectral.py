"""Environment correlation kernels.

Conventions: hbar = k_B = 1, so frequencies, temperatures and inverse times
share a unit.  The stationary kernel and its spectrum are related by

    alpha~(omega) = int ds exp(-i omega s) alpha(s),
    alpha(s)      = (1/2 pi) int domega exp(+i omega s) alpha~(omega),

which puts the larger (emission) weight of a thermal bath at negative
frequency, matching ``gamma(omega) [kappa_T(omega) - omega]``.

A :class:`StationaryKernel` is a positive matrix-valued spectral measure made of
three parts: a continuous density, a finite set of spectral lines (discrete
baths) and a frequency-independent ``local`` part, which is white noise
``c delta(s)`` in the time domain.  A :class:`SampledKernel` holds two-time
values on a uniform :class:`~deco.grids.TimeGrid`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (ChannelCollision, GridTooCoarse, HermiticityViolation,
                     IncompatibleGrids, InputError, ValidationError)
from .grids import FrequencyGrid, TimeGrid

Density = Callable[[np.ndarray], np.ndarray]

# occupation allowed above the Fock truncation of a discrete bath mode
FOCK_TAIL = 1e-8


class Family(str, enum.Enum):
    DRUDE = "drude"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ThermalReservoirSpec:
    family: Family
    gamma0: float
    cutoff: float
    temperature: float
    channel: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.gamma0 > 0:
            raise ValidationError(f"gamma0 must be > 0, got {self.gamma0}")
        if not self.cutoff > 0:
            raise ValidationError(f"cutoff must be > 0, got {self.cutoff}")
        if not self.temperature >= 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class DiscreteBathSpec:
    """Finite oscillator bath coupled through ``l = sum_k g_k (a_k + a_k^dag)``."""

    modes: tuple
    temperature: float
    fock_truncation: int | tuple = 4
    channel: int = 0

    def __post_init__(self):
        modes = tuple((float(w), float(g)) for w, g in self.modes)
        object.__setattr__(self, "modes", modes)
        if not modes:
            raise ValidationError("a discrete bath needs at least one mode")
        if any(w <= 0 for w, _ in modes):
            raise ValidationError("mode frequencies must be > 0")
        if not self.temperature >= 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        levels = self.levels
        if len(levels) != len(modes) or any(n < 2 for n in levels):
            raise ValidationError("fock_truncation must be >= 2 for every mode")
        if self.temperature > 0:
            for (w, _), n in zip(modes, levels):
                if math.exp(-n * w / self.temperature) >= FOCK_TAIL:
                    raise ValidationError(
                        f"fock_truncation {n} leaves thermal tail >= {FOCK_TAIL} "
                        f"for mode omega={w}")

    @property
    def levels(self) -> tuple:
        if isinstance(self.fock_truncation, (int, np.integer)):
            return (int(self.fock_truncation),) * len(self.modes)
        return tuple(int(n) for n in self.fock_truncation)


def fock_levels_for(omega: float, temperature: float, tail: float = FOCK_TAIL) -> int:
    """Smallest truncation whose neglected thermal occupation is below ``tail``."""
    if temperature == 0:
        return 2
    return max(2, math.floor(-math.log(tail) * temperature / omega) + 1)


# --- scalar kernels ----------------------------------------------------------

def fdr_kernel(omega, temperature: float):
    """Fluctuation-dissipation kernel ``omega coth(omega / 2T)``.

    The ``omega = 0`` value is the limit ``2T`` and ``T = 0`` gives ``|omega|``.
    """
    if temperature < 0:
        raise InputError(f"temperature must be >= 0, got {temperature}")
    w = np.abs(np.asarray(omega, dtype=float))
    if temperature == 0:
        out = w
    else:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            x = w / (2.0 * temperature)
            out = np.where(x > 0, w / np.tanh(np.where(x > 0, x, 1.0)), 2.0 * temperature)
    return out if np.ndim(omega) else float(out)


def _fdr_minus_omega(omega: np.ndarray, temperature: float) -> np.ndarray:
    """``kappa_T(omega) - omega`` in the cancellation-free form ``2 omega / expm1(omega / T)``."""
    w = np.asarray(omega, dtype=float)
    if temperature == 0:
        return np.where(w < 0, -2.0 * w, 0.0)
    with np.errstate(over="ignore"):
        x = w / temperature
        nz = x != 0
        val = 2.0 * w / np.expm1(np.where(nz, x, 1.0))
    return np.where(nz, val, 2.0 * temperature)


def damping_kernel(omega, spec: ThermalReservoirSpec):
    w = np.asarray(omega, dtype=float)
    if spec.family is Family.DRUDE:
        out = spec.gamma0 / (1.0 + (w / spec.cutoff) ** 2)
    else:
        out = spec.gamma0 * np.exp(-np.abs(w) / spec.cutoff)
    return out if np.ndim(omega) else float(out)


def correlation_freq(omega, spec: ThermalReservoirSpec):
    """Thermal spectrum ``gamma(omega) [kappa_T(omega) - omega]`` (non-negative)."""
    out = damping_kernel(np.asarray(omega, dtype=float), spec) * _fdr_minus_omega(omega, spec.temperature)
    return out if np.ndim(omega) else float(out)


def discrete_bath_correlation(spec: DiscreteBathSpec, s):
    """Exact ``<l(s) l(0)>`` for a thermal oscillator bath.

    ``sum_k g_k^2 [coth(omega_k / 2T) cos(omega_k s) - i sin(omega_k s)]``.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape, dtype=complex)
    for w, g in spec.modes:
        c = 1.0 if spec.temperature == 0 else 1.0 / math.tanh(w / (2.0 * spec.temperature))
        out += g * g * (c * np.cos(w * s) - 1j * np.sin(w * s))
    return out if s.ndim else complex(out)


# --- kernel containers -------------------------------------------------------

def _as_matrix(value, n: int) -> np.ndarray:
    m = np.asarray(value, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.shape != (n, n):
        raise InputError(f"expected a {n}x{n} channel matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class StationaryKernel:
    """Stationary multichannel kernel given by its spectral measure.

    ``density(omegas)`` returns an array of shape ``(len(omegas), N, N)``;
    ``lines`` is a tuple of ``(omega_j, W_j)`` meaning ``2 pi W_j delta(omega - omega_j)``
    in the spectrum (``W_j exp(i omega_j s)`` in time); ``local`` is the white
    noise coefficient.  ``bandwidth`` is the frequency range the density needs
    to be resolved on (``max(50 T, 20 cutoff)`` for thermal reservoirs).
    """

    n_channels: int
    density: Density | None = None
    lines: tuple = ()
    local: np.ndarray | None = None
    bandwidth: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        n = self.n_channels
        object.__setattr__(self, "lines", _merge_lines(
            [(float(w), _as_matrix(W, n)) for w, W in self.lines]))
        if self.local is not None:
            object.__setattr__(self, "local", _as_matrix(self.local, n))

    def freq_eval(self, omegas) -> np.ndarray:
        """Continuous spectrum (density plus white-noise part) at ``omegas``."""
        om = np.atleast_1d(np.asarray(omegas, dtype=float))
        out = np.zeros((om.size, self.n_channels, self.n_channels), dtype=complex)
        if self.density is not None:
            out += self.density(om)
        if self.local is not None:
            out += self.local
        return out

    def line_values(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.size, self.n_channels, self.n_channels), dtype=complex)
        for w, W in self.lines:
            out += np.exp(1j * w * s)[:, None, None] * W
        return out

    # arithmetic ------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, StationaryKernel):
            raise IncompatibleGrids("cannot combine stationary and sampled kernels")
        if other.n_channels != self.n_channels:
            raise IncompatibleGrids(
                f"channel spaces differ ({self.n_channels} vs {other.n_channels})")

    def __add__(self, other: "StationaryKernel") -> "StationaryKernel":
        self._check(other)
        return StationaryKernel(
            self.n_channels,
            density=_sum_density(self.density, other.density),
            lines=self.lines + other.lines,
            local=_sum_optional(self.local, other.local),
            bandwidth=max(self.bandwidth, other.bandwidth))

    def scaled(self, factor: float) -> "StationaryKernel":
        d = self.density
        return StationaryKernel(
            self.n_channels,
            density=None if d is None else (lambda om: factor * d(om)),
            lines=tuple((w, factor * W) for w, W in self.lines),
            local=None if self.local is None else factor * self.local,
            bandwidth=self.bandwidth)

    def __mul__(self, factor: float) -> "StationaryKernel":
        return self.scaled(float(factor))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def embed(self, channel_map: Sequence[int], n_channels: int) -> "StationaryKernel":
        idx = _check_channel_map(channel_map, self.n_channels, n_channels)

        def place(m):
            out = np.zeros(m.shape[:-2] + (n_channels, n_channels), dtype=complex)
            out[..., idx[:, None], idx[None, :]] = m
            return out

        d = self.density
        return StationaryKernel(
            n_channels,
            density=None if d is None else (lambda om: place(d(om))),
            lines=tuple((w, place(W)) for w, W in self.lines),
            local=None if self.local is None else place(self.local),
            bandwidth=self.bandwidth, label=self.label)


@dataclass(frozen=True, eq=False)
class SampledKernel:
    """Two-time kernel values ``values[k, l] = alpha(t_k, t_l)`` (each ``N x N``)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[:, :, None, None]
        n = self.grid.count
        if v.ndim != 4 or v.shape[:2] != (n, n) or v.shape[2] != v.shape[3]:
            raise InputError(f"sampled values must have shape ({n}, {n}, N, N), got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    def gram(self) -> np.ndarray:
        """Block matrix ``M[(n, k), (m, l)] = alpha_nm(t_k, t_l)``."""
        n, N = self.grid.count, self.n_channels
        return self.values.transpose(2, 0, 3, 1).reshape(N * n, N * n)

    def _check(self, other):
        if not isinstance(other, SampledKernel):
            raise IncompatibleGrids("cannot combine stationary and sampled kernels")
        if not self.grid.matches(other.grid) or other.n_channels != self.n_channels:
            raise IncompatibleGrids("sampled kernels live on different grids or channel spaces")

    def __add__(self, other):
        self._check(other)
        return SampledKernel(self.grid, self.values + other.values)

    def scaled(self, factor: float) -> "SampledKernel":
        return SampledKernel(self.grid, factor * self.values)

    def __mul__(self, factor):
        return self.scaled(float(factor))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def embed(self, channel_map: Sequence[int], n_channels: int) -> "SampledKernel":
        idx = _check_channel_map(channel_map, self.n_channels, n_channels)
        n = self.grid.count
        out = np.zeros((n, n, n_channels, n_channels), dtype=self.values.dtype)
        out[:, :, idx[:, None], idx[None, :]] = self.values
        return SampledKernel(self.grid, out)


CorrelationKernel = StationaryKernel | SampledKernel


def _merge_lines(lines):
    merged: dict[float, np.ndarray] = {}
    for w, W in lines:
        merged[w] = merged[w] + W if w in merged else W
    return tuple(sorted(merged.items(), key=lambda item: item[0]))


def _sum_density(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return lambda om: a(om) + b(om)


def _sum_optional(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _check_channel_map(channel_map, n_local, n_total) -> np.ndarray:
    idx = np.asarray(channel_map, dtype=int).reshape(-1)
    if idx.size != n_local:
        raise ChannelCollision(f"channel map has {idx.size} entries for {n_local} channels")
    if len(set(idx.tolist())) != idx.size:
        raise ChannelCollision(f"channel map {idx.tolist()} sends two channels to one slot")
    if idx.min() < 0 or idx.max() >= n_total:
        raise ChannelCollision(f"channel map {idx.tolist()} outside 0..{n_total - 1}")
    return idx


# --- kernel constructors -----------------------------------------------------

def reservoir_kernel(spec: ThermalReservoirSpec) -> StationaryKernel:
    """Scalar stationary kernel of one thermal reservoir."""
    return StationaryKernel(
        1,
        density=lambda om: correlation_freq(om, spec)[:, None, None].astype(complex),
        bandwidth=max(50.0 * spec.temperature, 20.0 * spec.cutoff),
        label=f"{spec.family.value}(gamma0={spec.gamma0}, cutoff={spec.cutoff}, T={spec.temperature})")


def white_noise_kernel(strength) -> StationaryKernel:
    """Local kernel ``c delta(t - tau)``; ``strength`` is a scalar or PSD matrix ``c``."""
    c = np.asarray(strength, dtype=complex)
    n = 1 if c.ndim == 0 else c.shape[0]
    return StationaryKernel(n, local=c)


def discrete_bath_kernel(spec: DiscreteBathSpec) -> StationaryKernel:
    """Line spectrum of a finite thermal oscillator bath (one channel)."""
    lines = []
    for w, g in spec.modes:
        n = 0.0 if spec.temperature == 0 else 1.0 / math.expm1(w / spec.temperature)
        lines.append((-w, g * g * (n + 1.0)))
        if n > 0:
            lines.append((w, g * g * n))
    return StationaryKernel(1, lines=tuple(lines))


def composite_correlation(parts: Sequence[CorrelationKernel], channel_map=None,
                          n_channels: int | None = None) -> CorrelationKernel:
    """Channel-wise sum of independent environments.

    ``channel_map[p]`` lists the composite channel of each channel of part
    ``p``; the default maps every part onto the same channel space.
    """
    if not parts:
        raise InputError("composite needs at least one part")
    kinds = {type(p) for p in parts}
    if len(kinds) != 1:
        raise IncompatibleGrids("cannot mix stationary and sampled parts")
    if channel_map is None:
        channel_map = [list(range(p.n_channels)) for p in parts]
    if len(channel_map) != len(parts):
        raise ChannelCollision("channel_map needs one entry per part")
    if n_channels is None:
        n_channels = 1 + max(max(np.atleast_1d(m)) for m in channel_map)
    placed = [p.embed(m, n_channels) for p, m in zip(parts, channel_map)]
    total = placed[0]
    for p in placed[1:]:
        total = total + p
    return total


# --- time domain -------------------------------------------------------------

def stationary_time_values(kernel: StationaryKernel, s, freq_grid: FrequencyGrid) -> np.ndarray:
    """``alpha(s)`` of the density (trapezoid on ``freq_grid``) plus the lines.

    The white-noise part is not included.  Returns shape ``(len(s), N, N)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = kernel.line_values(s)
    if kernel.density is not None:
        om = freq_grid.points
        coeff = kernel.density(om) * (freq_grid.weights / (2.0 * np.pi))[:, None, None]
        chunk = max(1, 2_000_000 // om.size)
        for start in range(0, s.size, chunk):
            phase = np.exp(1j * np.outer(s[start:start + chunk], om))
            out[start:start + chunk] += np.einsum("sp,pnm->snm", phase, coeff)
    return out


def _density_series(density: Density, step: float, count: int, omega_max: float) -> np.ndarray:
    """``alpha(j step)`` for ``j = 0..count-1`` by FFT of a trapezoid sum.

    The frequency grid is symmetric, covers at least ``omega_max`` and has
    spacing below ``pi / (10 s_max)``.  Each sample is a non-negatively
    weighted sum of ``alpha~(omega_p) exp(i omega_p s)``, so Gram matrices
    built from the series are positive whenever the spectrum is.
    """
    r = max(1, math.ceil(omega_max * step / math.pi))
    ds = step / r
    s_max = max(count - 1, 1) * step
    m = 1 << math.ceil(math.log2(max(20.0 * s_max / ds, 16.0)))
    half_width = math.pi / ds
    dw = 2.0 * math.pi / (m * ds)
    om = -half_width + dw * np.arange(m + 1)
    vals = density(om)
    c = vals[:m].copy()
    # the two end nodes carry identical phases on the sample points
    c[0] = 0.5 * (vals[0] + vals[m])
    n_fine = (count - 1) * r + 1
    fine = m * np.fft.ifft(c, axis=0)[:n_fine]
    sign = np.where(np.arange(n_fine) % 2 == 0, 1.0, -1.0)
    fine *= sign[:, None, None] * (dw / (2.0 * math.pi))
    return fine[::r]


def kernel_series(kernel: StationaryKernel, step: float, count: int,
                  bandwidth: float | None = None) -> np.ndarray:
    """Smooth part of ``alpha(j step)``, ``j = 0..count-1`` (density and lines)."""
    s = step * np.arange(count)
    out = kernel.line_values(s)
    if kernel.density is not None:
        bw = kernel.bandwidth if bandwidth is None else bandwidth
        out += _density_series(kernel.density, step, count, max(bw, 20.0 / step))
    return out


def _toeplitz(series: np.ndarray) -> np.ndarray:
    """``values[k, l] = alpha(t_k - t_l)`` using ``alpha(-s) = alpha(s)^dag``."""
    n = series.shape[0]
    diff = np.arange(n)[:, None] - np.arange(n)[None, :]
    fwd = series[np.abs(diff)]
    back = np.conj(np.swapaxes(fwd, -1, -2))
    return np.where((diff >= 0)[:, :, None, None], fwd, back)


def sample_on_grid(kernel: CorrelationKernel, grid: TimeGrid, weights=None,
                   bandwidth: float | None = None, include_local: bool = True) -> np.ndarray:
    """Kernel values ``(n, n, N, N)`` on ``grid`` for quadrature.

    A white-noise part ``c delta`` becomes ``c / weights[k]`` on the diagonal so
    that a weighted double sum reproduces the exact line integral.
    """
    if isinstance(kernel, SampledKernel):
        if not kernel.grid.matches(grid):
            raise IncompatibleGrids("sampled kernel grid does not match the quadrature grid")
        return kernel.values.astype(complex)
    values = _toeplitz(kernel_series(kernel, grid.step, grid.count, bandwidth))
    if include_local and kernel.local is not None:
        if weights is None:
            raise InputError("quadrature weights are needed to place a white-noise part")
        k = np.arange(grid.count)
        values[k, k] += kernel.local[None, :, :] / np.asarray(weights)[:, None, None]
    return values


def correlation_time_domain(kernel: StationaryKernel, s_grid: TimeGrid,
                            freq_grid: FrequencyGrid, tol: float | None = None) -> SampledKernel:
    """Sample ``alpha(t_k - t_l)`` on ``s_grid`` by trapezoid inversion on ``freq_grid``.

    A white-noise part is discretized as ``c / step`` on the diagonal.  With
    ``tol`` set, the quadrature error is estimated by comparison with every
    other frequency node and :class:`GridTooCoarse` is raised when it exceeds
    ``tol`` relative to ``max |alpha(0)|``.
    """
    if not isinstance(kernel, StationaryKernel):
        raise InputError("correlation_time_domain needs a stationary kernel")
    if not freq_grid.is_symmetric:
        raise InputError("frequency grid for inverse transforms must be symmetric about 0")
    s = s_grid.step * np.arange(s_grid.count)
    series = stationary_time_values(kernel, s, freq_grid)
    if tol is not None and kernel.density is not None and freq_grid.count >= 5:
        count = freq_grid.count if freq_grid.count % 2 else freq_grid.count - 1
        coarse_grid = FrequencyGrid(freq_grid.min, freq_grid.points[count - 1], (count + 1) // 2)
        dense_grid = FrequencyGrid(freq_grid.min, freq_grid.points[count - 1], count)
        dense = stationary_time_values(kernel, s, dense_grid)
        coarse = stationary_time_values(kernel, s, coarse_grid)
        err = np.max(np.abs(dense - coarse)) / 3.0
        scale = max(np.max(np.abs(series[0])), np.finfo(float).tiny)
        if err > tol * scale:
            raise GridTooCoarse(
                f"estimated quadrature error {err:.3g} exceeds {tol:.3g} x {scale:.3g}")
    values = _toeplitz(series)
    if kernel.local is not None:
        k = np.arange(s_grid.count)
        values[k, k] += kernel.local / s_grid.step
    return SampledKernel(s_grid, values)


def split_noise_dissipation(kernel: SampledKernel, tol: float = 1e-10):
    """Split ``alpha = nu + i mu`` into real noise and dissipation kernels.

    With ``alpha_nm(t, tau) = conj(alpha_mn(tau, t))`` the symmetrized part
    ``(alpha_nm(t, tau) + alpha_mn(tau, t)) / 2`` is the elementwise real part.
    """
    v = kernel.values
    swapped = np.conj(v.transpose(1, 0, 3, 2))
    scale = max(np.max(np.abs(v)), np.finfo(float).tiny)
    if np.max(np.abs(v - swapped)) > tol * scale:
        raise HermiticityViolation("kernel violates alpha(t, tau) = alpha(tau, t)^dag")
    nu = SampledKernel(kernel.grid, 0.5 * (v + np.conj(v)).real)
    mu = SampledKernel(kernel.grid, (0.5 * (v - np.conj(v)) / 1j).real)
    return nu, mu


def total_damping(specs: Sequence[ThermalReservoirSpec]) -> Callable[[np.ndarray], np.ndarray]:
    """Summed damping kernel of several reservoirs driving one channel."""
    specs = list(specs)
    return lambda om: sum(damping_kernel(np.asarray(om, dtype=float), sp) for sp in specs)
