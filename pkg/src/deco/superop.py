"""Superoperators on column-stacked density matrices.

``vec(A X B) = (B^T kron A) vec(X)``.  Operator-basis pairs ``I = (i, i')``
are flattened row-major, ``I = i d + i'``, for ``e_I = |i><i'|``.
"""

from __future__ import annotations

import numpy as np


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size))) if dim is None else dim
    return v.reshape(d, d, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """``X -> A X``."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    """``X -> X B``."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``X -> A X B``."""
    return np.kron(b.T, a)


def commutator(h: np.ndarray) -> np.ndarray:
    """``X -> -i [H, X]``."""
    return -1j * (spre(h) - spost(h))


def apply(superop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(superop @ vec(rho), rho.shape[0])


def lindblad_dissipator(delta: np.ndarray, dim: int) -> np.ndarray:
    """Superoperator of ``sum_IJ Delta_IJ (e_I X e_J^dag - {e_J^dag e_I, X} / 2)``."""
    d = dim
    d4 = np.asarray(delta).reshape(d, d, d, d)  # [a, i', b, j']
    # (e_I X e_J^dag)[a, b] = sum Delta[(a, i'), (b, j')] X[i', j']
    jump = d4.transpose(2, 0, 3, 1).reshape(d * d, d * d)
    # K = sum_IJ Delta_IJ e_J^dag e_I, K[j', i'] = sum_i Delta[(i, i'), (i, j')]
    k = np.einsum("iaib->ba", d4)
    return jump - 0.5 * (spre(k) + spost(k))


def reshuffle(superop: np.ndarray, dim: int) -> np.ndarray:
    """Matrix ``X`` with ``superop X = sum_IJ X_IJ e_I X e_J^dag`` (inverse of the jump map above)."""
    d = dim
    return np.asarray(superop).reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)


def traceless_projector(dim: int) -> np.ndarray:
    """Projector removing the identity direction from row-major operator vectors."""
    u = np.eye(dim).reshape(-1) / np.sqrt(dim)
    return np.eye(dim * dim) - np.outer(u, u)
