"""Second-order algebraic Lindblad dissipators.

For a system coupled through ``H_I = sum_n L_n (x) l_n`` the coefficient matrix

    Delta_IJ(t) = sum_nm int_0^t int_0^t <i|L_m(tau)|i'> alpha_nm(tau', tau)
                  conj(<j|L_n(tau')|j'>) dtau dtau'

(interaction picture, ``e_I = |i><i'|``) is a positive quadratic form in the
kernel, so ordered kernels give ordered dissipators.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import superop
from .errors import (DecompositionResidualTooLarge, InputError, KernelSystemMismatch,
                     NonPositiveKernelWarning, ValidationError)
from .grids import TimeGrid
from .ordering import OrderResult, Tolerances, verdict_from_extremes
from .spectral import CorrelationKernel, SampledKernel, sample_on_grid

HERMITIAN_RTOL = 1e-12
DEFAULT_N_TAU = 257


def _is_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(np.max(np.abs(m)), 1.0)
    return np.max(np.abs(m - m.conj().T)) <= rtol * scale


@dataclass(frozen=True, eq=False)
class SystemModel:
    """System Hamiltonian and Hermitian coupling operators with channel indices.

    Couplings sharing a channel are summed.  Channels must cover ``0..N-1``.
    """

    hamiltonian: np.ndarray
    couplings: tuple

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
            raise ValidationError("hamiltonian must be a square matrix of dimension >= 2")
        if not _is_hermitian(h):
            raise ValidationError("hamiltonian is not Hermitian")
        couplings = []
        for mat, channel in self.couplings:
            m = np.asarray(mat, dtype=complex)
            if m.shape != h.shape:
                raise ValidationError(f"coupling on channel {channel} has shape {m.shape}")
            if not _is_hermitian(m):
                raise ValidationError(f"coupling on channel {channel} is not Hermitian")
            couplings.append((m, int(channel)))
        channels = sorted({c for _, c in couplings})
        if not couplings or channels != list(range(len(channels))):
            raise ValidationError(f"coupling channels must be 0..N-1, got {channels}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "couplings", tuple(couplings))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_channels(self) -> int:
        return 1 + max(c for _, c in self.couplings)

    @cached_property
    def channel_operators(self) -> np.ndarray:
        ops = np.zeros((self.n_channels, self.dim, self.dim), dtype=complex)
        for m, c in self.couplings:
            ops[c] += m
        return ops

    @cached_property
    def eigh(self):
        return np.linalg.eigh(self.hamiltonian)

    def free_unitary(self, t: float) -> np.ndarray:
        """``exp(-i H t)``."""
        e, v = self.eigh
        return (v * np.exp(-1j * e * t)) @ v.conj().T

    def interaction_ops(self, taus) -> np.ndarray:
        """``exp(iH tau) L_n exp(-iH tau)`` for all channels, shape ``(N, len(taus), d, d)``."""
        e, v = self.eigh
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        lt = np.einsum("ai,nab,bj->nij", v.conj(), self.channel_operators, v)
        phase = np.exp(1j * taus[:, None, None] * (e[:, None] - e[None, :]))
        rotated = lt[:, None, :, :] * phase[None]
        return np.einsum("ai,nkij,bj->nkab", v, rotated, v.conj())


def interaction_picture_op(system: SystemModel, n: int, tau: float) -> np.ndarray:
    return system.interaction_ops([tau])[n, 0]


@dataclass
class DissipatorMatrix:
    """Hermitian ``d^2 x d^2`` dissipator, rows and columns indexed by ``I = i d + i'``."""

    time: float
    matrix: np.ndarray
    rate_definiteness: dict | None = None
    kernel_positive: bool = True

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        m = self.matrix
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_eig(self) -> float:
        return float(self.eigenvalues[-1])

    def to_dict(self) -> dict:
        flat = self.matrix.reshape(-1)
        return {
            "t": float(self.time),
            "dim": self.dim,
            "matrix": [[float(z.real), float(z.imag)] for z in flat],
            "min_eig": self.min_eig,
            "max_eig": self.max_eig,
            "rate_definiteness": self.rate_definiteness,
        }


@dataclass
class GeneratorDecomposition:
    theta: np.ndarray
    delta: DissipatorMatrix
    residual: float = 0.0
    phi_norm: float = 0.0
    extras: dict = field(default_factory=dict)


def _check_channels(system: SystemModel, kernel: CorrelationKernel):
    if kernel.n_channels != system.n_channels:
        raise KernelSystemMismatch(
            f"kernel has {kernel.n_channels} channels, system has {system.n_channels}")


def quadrature_grid(kernel: CorrelationKernel, t: float, n_tau: int | None) -> TimeGrid:
    if isinstance(kernel, SampledKernel):
        grid = kernel.grid
        if n_tau not in (None, grid.count) or abs(grid.min) > 0 or abs(grid.max - t) > 1e-12 * max(t, 1):
            raise InputError("a sampled kernel must be given on the grid [0, t] used for quadrature")
        return grid
    n = DEFAULT_N_TAU if n_tau is None else int(n_tau)
    if n < 2:
        raise InputError("n_tau must be >= 2")
    return TimeGrid(0.0, t, n)


def _delta_matrix(system, kernel, t, n_tau, bandwidth):
    d2 = system.dim ** 2
    if t == 0:
        return np.zeros((d2, d2), dtype=complex), True
    grid = quadrature_grid(kernel, t, n_tau)
    w = grid.weights
    vals = sample_on_grid(kernel, grid, w, bandwidth)
    n, nch = grid.count, kernel.n_channels
    gram = vals.transpose(2, 0, 3, 1).reshape(nch * n, nch * n)
    gram = 0.5 * (gram + gram.conj().T)
    ev = np.linalg.eigvalsh(gram)
    kernel_ok = ev[0] >= -1e-9 * max(abs(ev[-1]), np.finfo(float).tiny)
    ops = system.interaction_ops(grid.points)
    b = (ops.reshape(nch, n, d2) * w[None, :, None]).reshape(nch * n, d2)
    # Delta_IJ = sum B[(m,k),I] A[(n,l),(m,k)] conj(B[(n,l),J]) = (B^dag A B)_JI
    delta = (b.conj().T @ gram @ b).T
    return 0.5 * (delta + delta.conj().T), kernel_ok


def algebraic_dissipator(system: SystemModel, kernel: CorrelationKernel, t: float,
                         n_tau: int | None = DEFAULT_N_TAU, rate_steps: int = 0,
                         bandwidth: float | None = None) -> DissipatorMatrix:
    """Trapezoid assembly of the dissipator as ``(B^dag A B)^T``.

    ``B[(m, k), I] = w_k <i|L_m(tau_k)|i'>`` and ``A`` is the kernel Gram matrix,
    so the result is positive whenever the sampled kernel is.  With
    ``rate_steps > 0`` the dissipator is also evaluated on ``rate_steps + 1``
    equally spaced times in ``[0, t]`` and the smallest eigenvalue of each
    finite-difference rate is reported.
    """
    if t < 0:
        raise InputError("t must be >= 0")
    _check_channels(system, kernel)
    delta, ok = _delta_matrix(system, kernel, t, n_tau, bandwidth)
    if not ok:
        warnings.warn("kernel Gram matrix is not positive semidefinite", NonPositiveKernelWarning)
    rates = None
    if rate_steps > 0 and t > 0:
        if isinstance(kernel, SampledKernel):
            raise InputError("rate diagnostics need a stationary kernel")
        ts = np.linspace(0.0, t, rate_steps + 1)
        mats = [_delta_matrix(system, kernel, tj, n_tau, bandwidth)[0] for tj in ts]
        dt = ts[1] - ts[0]
        min_rate = [float(np.linalg.eigvalsh((mats[j + 1] - mats[j]) / dt)[0])
                    for j in range(rate_steps)]
        rates = {"grid": [float(x) for x in ts], "min_rate_eig": min_rate}
    return DissipatorMatrix(float(t), delta, rates, bool(ok))


def lindblad_decompose(phi: np.ndarray, delta: DissipatorMatrix,
                       rtol: float = 1e-8) -> GeneratorDecomposition:
    """Split a generator into ``-i[Theta, .]`` plus the dissipator built from ``delta``.

    ``Theta`` is the traceless Hermitian least-squares fit of ``phi - D[delta]``;
    raises :class:`DecompositionResidualTooLarge` when what remains exceeds
    ``rtol * ||phi||`` (Frobenius norms).
    """
    d = delta.dim
    phi = np.asarray(phi)
    rest = phi - superop.lindblad_dissipator(delta.matrix, d)
    design = np.empty((d ** 4, d * d), dtype=complex)
    for col in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[col] = 1.0
        design[:, col] = superop.commutator(e.reshape(d, d)).reshape(-1)
    coeffs = np.linalg.lstsq(design, rest.reshape(-1), rcond=None)[0]
    theta = coeffs.reshape(d, d)
    theta = 0.5 * (theta + theta.conj().T)
    theta -= np.trace(theta).real / d * np.eye(d)
    residual = float(np.linalg.norm(rest - superop.commutator(theta)))
    norm = float(np.linalg.norm(phi))
    if residual > rtol * norm + 1e-14:
        raise DecompositionResidualTooLarge(
            f"residual {residual:.3g} exceeds {rtol:g} x ||phi|| = {rtol * norm:.3g}")
    return GeneratorDecomposition(theta, delta, residual, norm)


def dissipator_order(system: SystemModel, kernel_a: CorrelationKernel,
                     kernel_b: CorrelationKernel, t: float,
                     n_tau: int | None = DEFAULT_N_TAU,
                     tol: Tolerances = Tolerances()) -> OrderResult:
    """Order two environments by the eigenvalues of ``Delta_a - Delta_b``."""
    if kernel_a.n_channels != kernel_b.n_channels:
        raise KernelSystemMismatch("kernels act on different channel spaces")
    bw = max(getattr(kernel_a, "bandwidth", 0.0), getattr(kernel_b, "bandwidth", 0.0))
    da = algebraic_dissipator(system, kernel_a, t, n_tau, bandwidth=bw)
    db = algebraic_dissipator(system, kernel_b, t, n_tau, bandwidth=bw)
    ev = np.linalg.eigvalsh(da.matrix - db.matrix)
    scale = max(np.max(np.abs(da.eigenvalues)), np.max(np.abs(db.eigenvalues)))
    lo, hi = float(ev[0]), float(ev[-1])
    return OrderResult(verdict_from_extremes(lo, hi, scale, tol), lo, -hi, float(t), tol, hi,
                       float(scale))
