"""Reduced dynamics: second-order Magnus map, second-order master equation,
and an exact system-plus-oscillator-bath oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from . import superop
from .dissipator import DEFAULT_N_TAU, SystemModel, _check_channels, quadrature_grid
from .errors import (DimensionTooLarge, ExponentialDivergence, InputError, StepSizeTooLarge,
                     TruncationError, ValidationError)
from .grids import TimeGrid
from .spectral import (CorrelationKernel, DiscreteBathSpec, SampledKernel, StationaryKernel,
                       kernel_series, sample_on_grid)

log = logging.getLogger(__name__)

MAX_EXACT_DIM = 4096
TOP_LEVEL_TOL = 1e-6


def as_density_matrix(rho, tol: float = 1e-12) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace and PSD within ``tol``."""
    r = np.asarray(rho, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError("density matrix must be square")
    if np.max(np.abs(r - r.conj().T)) > tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(r) - 1.0) > tol:
        raise ValidationError(f"density matrix trace is {np.trace(r).real:.15g}, not 1")
    if np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0] < -tol:
        raise ValidationError("density matrix is not positive semidefinite")
    return r


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    method: str

    def table(self) -> tuple[list[str], list[list[float]]]:
        """Rows of ``t, rho_re_ij, rho_im_ij (row-major), trace, purity``."""
        d = self.states.shape[1]
        cols = ["t"]
        for i in range(d):
            for j in range(d):
                cols += [f"rho_re_{i}{j}", f"rho_im_{i}{j}"]
        cols += ["trace", "purity"]
        rows = []
        for t, rho in zip(self.times, self.states):
            row = [float(t)]
            for z in rho.reshape(-1):
                row += [float(z.real), float(z.imag)]
            row += [float(np.trace(rho).real), float(np.trace(rho @ rho).real)]
            rows.append(row)
        return cols, rows


# --- Magnus -------------------------------------------------------------------

def _triangle_weights(w: np.ndarray) -> np.ndarray:
    """Weights for the ordered region ``tau' <= tau`` that mirror to the square rule."""
    tri = np.tril(np.outer(w, w), -1)
    tri[np.diag_indices_from(tri)] = 0.5 * w * w
    return tri


def magnus_generator(system: SystemModel, kernel: CorrelationKernel, t: float,
                     n_tau: int | None = DEFAULT_N_TAU,
                     bandwidth: float | None = None) -> np.ndarray:
    """Second-order Magnus generator in the interaction picture.

    The ordered double integral over ``0 <= tau' <= tau <= t`` of
    ``alpha_nm(tau, tau') [L_m(tau') X L_n(tau) - L_n(tau) L_m(tau') X]``
    plus the conjugate terms, assembled directly term by term.
    """
    if t < 0:
        raise InputError("t must be >= 0")
    _check_channels(system, kernel)
    d = system.dim
    if t == 0:
        return np.zeros((d * d, d * d), dtype=complex)
    grid = quadrature_grid(kernel, t, n_tau)
    w = grid.weights
    vals = sample_on_grid(kernel, grid, w, bandwidth)
    n, nch = grid.count, kernel.n_channels
    c = (vals * _triangle_weights(w)[:, :, None, None]).transpose(2, 0, 3, 1).reshape(nch * n, nch * n)
    ops = system.interaction_ops(grid.points).reshape(nch * n, d, d)
    flat = ops.reshape(nch * n, d * d)
    y = (c @ flat).reshape(-1, d, d)             # sum_{m,l} C[(n,k),(m,l)] L_m(l)
    z = (c.conj().T @ flat).reshape(-1, d, d)    # sum_{n,k} conj(C[(n,k),(m,l)]) L_n(k)
    jump = (np.einsum("xrp,xqs->pqrs", ops, y) + np.einsum("xrp,xqs->pqrs", ops, z)).reshape(d * d, d * d)
    left = np.einsum("xab,xbc->ac", ops, y)
    right = np.einsum("xab,xbc->ac", ops, z)
    return jump - superop.spre(left) - superop.spost(right)


def magnus_map(system: SystemModel, kernel: CorrelationKernel, t: float,
               n_tau: int | None = DEFAULT_N_TAU, bandwidth: float | None = None) -> np.ndarray:
    """Superoperator ``G_0(t) exp(Phi_2(t))``."""
    phi = magnus_generator(system, kernel, t, n_tau, bandwidth)
    prop = scipy.linalg.expm(phi)
    if not np.all(np.isfinite(prop)):
        raise ExponentialDivergence("matrix exponential of the Magnus generator is not finite")
    u = system.free_unitary(t)
    return superop.sprepost(u, u.conj().T) @ prop


def magnus_propagate(system: SystemModel, kernel: CorrelationKernel, t: float,
                     n_tau: int | None = DEFAULT_N_TAU, rho0=None,
                     bandwidth: float | None = None) -> np.ndarray:
    rho0 = as_density_matrix(rho0)
    rho = superop.apply(magnus_map(system, kernel, t, n_tau, bandwidth), rho0)
    return 0.5 * (rho + rho.conj().T)


def magnus_trajectory(system: SystemModel, kernel: CorrelationKernel, times: Sequence[float],
                      rho0, n_tau: int | None = DEFAULT_N_TAU) -> Trajectory:
    rho0 = as_density_matrix(rho0)
    states = [rho0 if t == 0 else magnus_propagate(system, kernel, t, n_tau, rho0) for t in times]
    return Trajectory(np.asarray(times, dtype=float), np.array(states), "Magnus")


# --- master equation ------------------------------------------------------------

def _bilinear(kernel: SampledKernel, t: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Linear interpolation of sampled values at the pairs ``(t[i], tau[j])``."""
    g = kernel.grid

    def locate(x):
        pos = np.clip((np.asarray(x) - g.min) / g.step, 0.0, g.count - 1.0)
        i0 = np.minimum(np.floor(pos).astype(int), g.count - 2)
        return i0, pos - i0

    i0, fi = locate(t)
    j0, fj = locate(tau)
    v = kernel.values
    a = v[i0[:, None], j0[None, :]]
    b = v[i0[:, None] + 1, j0[None, :]]
    c = v[i0[:, None], j0[None, :] + 1]
    e = v[i0[:, None] + 1, j0[None, :] + 1]
    fi = fi[:, None, None, None]
    fj = fj[None, :, None, None]
    return (1 - fi) * (1 - fj) * a + fi * (1 - fj) * b + (1 - fi) * fj * c + fi * fj * e


def _memory_operators(system: SystemModel, kernel: CorrelationKernel, step: float,
                      count: int) -> np.ndarray:
    """``O_n(u_j) = sum_m int_0^u alpha_nm(u, tau) e^{-iH(u-tau)} L_m e^{iH(u-tau)} dtau``
    at ``u_j = j step`` by trapezoid quadrature, shape ``(count, N, d, d)``."""
    nch, d = system.n_channels, system.dim
    lags = step * np.arange(count)
    heis = system.interaction_ops(-lags)          # (N, count, d, d), L_m at lag s
    out = np.zeros((count, nch, d, d), dtype=complex)
    if isinstance(kernel, StationaryKernel):
        alpha = kernel_series(kernel, step, count)     # (count, N, N)
        f = np.einsum("jnm,mjab->jnab", alpha, heis)
        # cumulative trapezoid in the lag variable
        out[1:] = 0.5 * step * np.cumsum(f[1:] + f[:-1], axis=0)
        if kernel.local is not None:
            out += 0.5 * np.einsum("nm,mab->nab", kernel.local, system.channel_operators)[None]
        return out
    for j in range(1, count):
        u = lags[j]
        taus = lags[: j + 1]
        a = _bilinear(kernel, np.array([u]), taus)[0]     # (j+1, N, N)
        w = np.full(j + 1, step)
        w[0] = w[-1] = 0.5 * step
        lag_ops = heis[:, j - np.arange(j + 1)]          # L_m at u - tau_i
        out[j] = np.einsum("i,inm,miab->nab", w, a, lag_ops)
    return out


def _generator(system: SystemModel, mem: np.ndarray) -> np.ndarray:
    """Superoperator of ``-i[H, X] + sum_n [L_n, X O_n^dag - O_n X]``."""
    gen = superop.commutator(system.hamiltonian)
    for l_n, o_n in zip(system.channel_operators, mem):
        od = o_n.conj().T
        gen = gen + (superop.sprepost(l_n, od) - superop.spre(l_n @ o_n)
                     - superop.spost(od @ l_n) + superop.sprepost(o_n, l_n))
    return gen


def _rk4(gens, x, h):
    g0, gm, g1 = gens
    k1 = g0 @ x
    k2 = gm @ (x + 0.5 * h * k1)
    k3 = gm @ (x + 0.5 * h * k2)
    k4 = g1 @ (x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def master_equation_evolve(system: SystemModel, kernel: CorrelationKernel, t_span: float,
                           dt: float, rho0, step_tol: float = 1e-6,
                           record_every: int = 1) -> Trajectory:
    """Integrate the second-order (time-convolutionless) master equation with RK4.

    Every step is also taken as two half steps; the half-step result is kept
    and their difference (Frobenius norm) must stay below ``step_tol``.
    Heuristic: ``dt <= min(1/||H||, 1/cutoff, 1/T) / 20``.
    """
    _check_channels(system, kernel)
    rho0 = as_density_matrix(rho0)
    n_steps = int(round(t_span / dt))
    if n_steps < 1 or abs(n_steps * dt - t_span) > 1e-9 * max(t_span, 1.0):
        raise InputError(f"dt={dt} does not divide t_span={t_span}")
    quarter = dt / 4.0
    count = 4 * n_steps + 1
    if isinstance(kernel, SampledKernel):
        g = kernel.grid
        if g.min > 1e-12 * max(t_span, 1) or g.max < t_span * (1 - 1e-12):
            raise InputError("sampled kernel grid must cover [0, t_span]")
    mem = _memory_operators(system, kernel, quarter, count)
    gens = [_generator(system, mem[j]) for j in range(count)]
    x = superop.vec(rho0)
    times, states = [0.0], [rho0]
    min_eig = 0.0
    for i in range(n_steps):
        j = 4 * i
        full = _rk4((gens[j], gens[j + 2], gens[j + 4]), x, dt)
        half = _rk4((gens[j], gens[j + 1], gens[j + 2]), x, 0.5 * dt)
        half = _rk4((gens[j + 2], gens[j + 3], gens[j + 4]), half, 0.5 * dt)
        err = float(np.linalg.norm(full - half))
        if not err <= step_tol:
            raise StepSizeTooLarge(f"step-doubling error {err:.3g} > {step_tol:g} at t={i * dt:.6g}")
        rho = superop.unvec(half, system.dim)
        rho = 0.5 * (rho + rho.conj().T)
        x = superop.vec(rho)
        if (i + 1) % record_every == 0 or i + 1 == n_steps:
            times.append((i + 1) * dt)
            states.append(rho)
            min_eig = min(min_eig, float(np.linalg.eigvalsh(rho)[0]))
    if min_eig < -1e-9:
        log.info("master-equation trajectory left the positive cone (min eigenvalue %.3g)", min_eig)
    return Trajectory(np.array(times), np.array(states), "Master")


# --- maps and distances -------------------------------------------------------------

def choi_matrix(superoperator: np.ndarray) -> np.ndarray:
    """Choi matrix ``C[(i,k),(j,l)] = <i| map(|k><l|) |j>`` (Hermitized)."""
    s = np.asarray(superoperator)
    d = int(round(math.sqrt(s.shape[0])))
    c = superop.reshuffle(s, d)
    return 0.5 * (c + c.conj().T)


def trace_distance(rho1, rho2) -> float:
    r1, r2 = np.asarray(rho1), np.asarray(rho2)
    if r1.shape != r2.shape:
        raise InputError("density matrices differ in dimension")
    return 0.5 * float(np.sum(np.linalg.svd(r1 - r2, compute_uv=False)))


# --- exact oscillator bath --------------------------------------------------------

def _thermal_populations(omega: float, temperature: float, levels: int) -> np.ndarray:
    if temperature == 0:
        p = np.zeros(levels)
        p[0] = 1.0
        return p
    p = np.exp(-omega * np.arange(levels) / temperature)
    return p / p.sum()


def exact_bath_trajectory(system: SystemModel, baths, times: Sequence[float], rho0) -> Trajectory:
    """Reduced states of system plus truncated oscillator baths at ``times``.

    ``H = H_S + sum_k omega_k a_k^dag a_k + sum_n L_n (x) sum_k g_k (a_k + a_k^dag)``
    evolved exactly from ``rho0 (x) Gibbs``; raises :class:`TruncationError`
    if the top Fock level of any mode holds more than 1e-6 population.
    """
    if isinstance(baths, DiscreteBathSpec):
        baths = [baths]
    rho0 = as_density_matrix(rho0)
    d = system.dim
    modes = [(w, g, n, b.temperature, b.channel) for b in baths for (w, g), n in zip(b.modes, b.levels)]
    dims = [m[2] for m in modes]
    dim_bath = int(np.prod(dims))
    if d * dim_bath > MAX_EXACT_DIM:
        raise DimensionTooLarge(f"total dimension {d * dim_bath} exceeds {MAX_EXACT_DIM}")
    for *_, ch in modes:
        if not 0 <= ch < system.n_channels:
            raise ValidationError(f"bath channel {ch} is not a system channel")

    def embed(op, k):
        mats = [np.eye(n) for n in dims]
        mats[k] = op
        out = np.ones((1, 1))
        for m in mats:
            out = np.kron(out, m)
        return out

    h_bath = np.zeros((dim_bath, dim_bath))
    couple = np.zeros((system.n_channels, dim_bath, dim_bath))
    rho_bath = np.ones((1, 1))
    for k, (w, g, n, temp, ch) in enumerate(modes):
        a = np.diag(np.sqrt(np.arange(1, n)), 1)
        h_bath += w * embed(a.T @ a, k)
        couple[ch] += g * embed(a + a.T, k)
        rho_bath = np.kron(rho_bath, np.diag(_thermal_populations(w, temp, n)))
    h_tot = np.kron(system.hamiltonian, np.eye(dim_bath)) + np.kron(np.eye(d), h_bath)
    for l_n, c_n in zip(system.channel_operators, couple):
        h_tot = h_tot + np.kron(l_n, c_n)
    e, v = np.linalg.eigh(h_tot)
    rho_e = v.conj().T @ np.kron(rho0, rho_bath) @ v
    states = []
    for t in times:
        ph = np.exp(-1j * e * t)
        rho_t = v @ (ph[:, None] * rho_e * ph.conj()[None, :]) @ v.conj().T
        pops = np.real(np.diag(rho_t)).reshape([d] + dims)
        for k, n in enumerate(dims):
            top = float(np.take(pops, n - 1, axis=k + 1).sum())
            if top > TOP_LEVEL_TOL:
                raise TruncationError(f"mode {k} top Fock level holds {top:.3g} at t={t:g}")
        red = np.einsum("aibi->ab", rho_t.reshape(d, dim_bath, d, dim_bath))
        states.append(0.5 * (red + red.conj().T))
    return Trajectory(np.asarray(times, dtype=float), np.array(states), "Exact")


def exact_bath_evolve(system: SystemModel, baths, t: float, dt: float, rho0) -> np.ndarray:
    """Exact reduced state at ``t``; truncation is checked every ``dt``."""
    n = max(1, int(math.ceil(t / dt - 1e-9)))
    times = np.linspace(0.0, t, n + 1)
    return exact_bath_trajectory(system, baths, times, rho0).states[-1]
