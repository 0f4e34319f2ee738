"""Kernel positivity and the partial order of decoherence strength.

One environment is at least as decoherent as another when the difference of
their correlation kernels is a positive kernel.  Stationary kernels are
tested frequency by frequency (a stationary kernel is positive exactly when
its spectral measure is); sampled kernels through the eigenvalues of their
block Gram matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import DampingVanishes, IncompatibleGrids, InputError, InvalidParameters, NonHermitianInput
from .grids import FrequencyGrid, default_frequency_grid
from .spectral import (CorrelationKernel, Family, SampledKernel, StationaryKernel,
                       ThermalReservoirSpec, fdr_kernel, reservoir_kernel)

TOL_REL = 1e-9
TOL_EQUIVALENT = 1e-12
TOL_STRICT = 1e-6
HERMITIAN_TOL = 1e-8


class Verdict(str, enum.Enum):
    STRICTLY_GREATER = "StrictlyGreater"
    STRICTLY_LESS = "StrictlyLess"
    EQUIVALENT = "Equivalent"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class Tolerances:
    tol_rel: float = TOL_REL
    tol_equivalent: float = TOL_EQUIVALENT
    tol_strict: float = TOL_STRICT


@dataclass
class PositivityReport:
    is_psd: bool
    min_eigenvalue: float
    max_eigenvalue: float
    grid: object
    worst_point: object = None
    tol_rel: float = TOL_REL
    floor: float = 0.0


@dataclass
class OrderResult:
    verdict: Verdict
    min_eig_forward: float
    min_eig_backward: float
    worst_point: object
    tolerances: Tolerances = field(default_factory=Tolerances)
    max_eig_forward: float = 0.0
    scale: float = 0.0

    def to_dict(self) -> dict:
        """JSON-ready mapping with the documented field names and order."""
        return {
            "verdict": self.verdict.value,
            "min_eig_forward": float(self.min_eig_forward),
            "min_eig_backward": float(self.min_eig_backward),
            "worst_point": self.worst_point,
            "tolerances": asdict(self.tolerances),
        }


def _psd_from_extremes(lo: float, hi: float, tol_rel: float, floor: float) -> bool:
    return lo >= -tol_rel * max(abs(hi), floor)


def _stationary_eigs(kernel: StationaryKernel, grid: FrequencyGrid):
    """Eigenvalue extremes per frequency node and per spectral line."""
    om = grid.points
    mats = kernel.freq_eval(om)
    _check_hermitian(mats)
    eig = np.linalg.eigvalsh(0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2))))
    points = list(om)
    lo, hi = eig[:, 0], eig[:, -1]
    if kernel.lines:
        # lines are point masses; compare them in the same spectral units per unit bandwidth
        lw = np.stack([W for _, W in kernel.lines])
        _check_hermitian(lw)
        le = np.linalg.eigvalsh(0.5 * (lw + np.conj(np.swapaxes(lw, -1, -2))))
        lo = np.concatenate([lo, le[:, 0]])
        hi = np.concatenate([hi, le[:, -1]])
        points += [w for w, _ in kernel.lines]
    return lo, hi, points


def _check_hermitian(mats: np.ndarray):
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2)))
    scale = max(np.max(np.abs(mats)), np.finfo(float).tiny) if mats.size else 1.0
    if mats.size and np.max(np.abs(mats - herm)) > HERMITIAN_TOL * scale:
        raise NonHermitianInput("kernel is not Hermitian beyond 1e-8 relative")


def _default_grid(kernel: StationaryKernel) -> FrequencyGrid:
    bw = kernel.bandwidth if kernel.bandwidth > 0 else 1.0
    return FrequencyGrid.symmetric(bw, 801)


def check_kernel_positive(kernel: CorrelationKernel, grid: FrequencyGrid | None = None,
                          tol_rel: float = TOL_REL, floor: float = 0.0) -> PositivityReport:
    """Positivity of a kernel within ``tol_rel`` of its largest eigenvalue.

    ``floor`` sets a minimum reference magnitude, so a kernel that is zero up
    to rounding relative to ``floor`` counts as positive.
    """
    if isinstance(kernel, SampledKernel):
        m = kernel.gram()
        _check_hermitian(m)
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        lo, hi = float(w[0]), float(w[-1])
        n = kernel.grid.count
        weight = (np.abs(v[:, 0]) ** 2).reshape(kernel.n_channels, n).sum(axis=0)
        t = float(kernel.grid.points[int(np.argmax(weight))])
        return PositivityReport(_psd_from_extremes(lo, hi, tol_rel, floor), lo, hi,
                                kernel.grid, [t, t], tol_rel, floor)
    grid = _default_grid(kernel) if grid is None else grid
    lo, hi, points = _stationary_eigs(kernel, grid)
    i = int(np.argmin(lo))
    lo_v, hi_v = float(lo[i]), float(np.max(hi))
    return PositivityReport(_psd_from_extremes(lo_v, hi_v, tol_rel, floor), lo_v, hi_v,
                            grid, float(points[i]), tol_rel, floor)


def _kernel_scale(kernel: CorrelationKernel, grid) -> float:
    if isinstance(kernel, SampledKernel):
        m = kernel.gram()
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))
    lo, hi, _ = _stationary_eigs(kernel, grid)
    return float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))


def verdict_from_extremes(fwd_lo: float, fwd_hi: float, scale: float,
                          tol: Tolerances) -> Verdict:
    """Order verdict from the eigenvalue extremes of ``a - b``.

    The extremes of ``b - a`` are ``(-fwd_hi, -fwd_lo)``.
    """
    if max(abs(fwd_lo), abs(fwd_hi)) <= tol.tol_equivalent * scale:
        return Verdict.EQUIVALENT
    fwd_psd = fwd_lo >= -tol.tol_rel * scale
    bwd_psd = -fwd_hi >= -tol.tol_rel * scale
    if fwd_psd and bwd_psd:
        return Verdict.EQUIVALENT
    if fwd_psd:
        return Verdict.STRICTLY_GREATER if fwd_hi > tol.tol_strict * scale else Verdict.EQUIVALENT
    if bwd_psd:
        return Verdict.STRICTLY_LESS if -fwd_lo > tol.tol_strict * scale else Verdict.EQUIVALENT
    return Verdict.INCOMPARABLE


def compare_environments(a: CorrelationKernel, b: CorrelationKernel,
                         grid: FrequencyGrid | None = None,
                         tol: Tolerances = Tolerances()) -> OrderResult:
    """Partial-order comparison of two kernels on a common grid."""
    if type(a) is not type(b) or a.n_channels != b.n_channels:
        raise IncompatibleGrids("kernels must share representation and channel space")
    if isinstance(a, SampledKernel) and not a.grid.matches(b.grid):
        raise IncompatibleGrids("sampled kernels live on different time grids")
    if isinstance(a, StationaryKernel) and grid is None:
        grid = _default_grid(a + b)
    scale = max(_kernel_scale(a, grid), _kernel_scale(b, grid))
    fwd = check_kernel_positive(a - b, grid, tol.tol_rel, scale)
    bwd = check_kernel_positive(b - a, grid, tol.tol_rel, scale)
    verdict = verdict_from_extremes(fwd.min_eigenvalue, fwd.max_eigenvalue, scale, tol)
    worst = fwd.worst_point if fwd.min_eigenvalue <= bwd.min_eigenvalue else bwd.worst_point
    return OrderResult(verdict, fwd.min_eigenvalue, bwd.min_eigenvalue, worst, tol,
                       fwd.max_eigenvalue, scale)


def lutz_compare(gamma0: float, lambda_high: float, lambda_low: float, t_hot: float,
                 t_cold: float, family: Family | str = Family.DRUDE,
                 grid: FrequencyGrid | None = None, tol: Tolerances = Tolerances()) -> OrderResult:
    """Compare (high cutoff, hot) + (low cutoff, cold) against the swapped pairing.

    ``(gamma_high - gamma_low)(kappa_hot - kappa_cold) >= 0`` pointwise, so the
    first composite is never the weaker one.
    """
    if not (gamma0 > 0 and lambda_high >= lambda_low > 0 and t_hot >= t_cold >= 0):
        raise InvalidParameters(
            "need gamma0 > 0, lambda_high >= lambda_low > 0 and t_hot >= t_cold >= 0")
    family = Family(family)

    def k(cut, temp):
        return reservoir_kernel(ThermalReservoirSpec(family, gamma0, cut, temp))

    first = k(lambda_high, t_hot) + k(lambda_low, t_cold)
    second = k(lambda_low, t_hot) + k(lambda_high, t_cold)
    if grid is None:
        grid = FrequencyGrid.symmetric(max(50.0 * t_hot, 20.0 * lambda_high), 801)
    return compare_environments(first, second, grid, tol)


def _golden_min(f: Callable[[float], float], lo: float, hi: float, xtol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def fdr_fit(kernel: StationaryKernel, total_damping: Callable[[np.ndarray], np.ndarray],
            grid: FrequencyGrid, damping_floor: float = 1e-300) -> tuple[float, float]:
    """Best effective temperature of a scalar spectrum and its relative misfit.

    ``kappa_eff = alpha~ / gamma_total + omega`` is fitted with
    ``omega coth(omega / 2T)`` in the max norm by golden-section search over
    ``log T`` on ``(0, 100 max|omega|]``.  Returns ``(T*, residual / max kappa_eff)``;
    a residual near zero means the spectrum obeys a thermal FDR.
    """
    if kernel.n_channels != 1:
        raise InputError("fdr_fit needs a scalar kernel")
    om = grid.points
    gam = np.asarray(total_damping(om), dtype=float)
    if np.any(gam <= damping_floor):
        raise DampingVanishes("total damping vanishes on the grid")
    kappa = kernel.freq_eval(om)[:, 0, 0].real / gam + om
    t_max = 100.0 * float(np.max(np.abs(om)))

    def resid(log_t):
        return float(np.max(np.abs(kappa - fdr_kernel(om, math.exp(log_t)))))

    # the misfit is quasi-convex in T: each |kappa_eff - kappa_T| is monotone on either side of its zero
    log_lo = math.log(t_max) - 60.0
    log_t = _golden_min(resid, log_lo, math.log(t_max), 1e-10)
    t_star = math.exp(log_t)
    best = resid(log_t)
    zero = float(np.max(np.abs(kappa - np.abs(om))))
    if zero < best:
        t_star, best = 0.0, zero
    return t_star, best / float(np.max(np.abs(kappa)))
