"""Smallest eigenpairs of the symmetric pencil ``a p = phi b p``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .objective import ObjectivePair


class SolverError(ArithmeticError):
    """The pencil could not be reduced to a definite standard problem."""


@dataclass(frozen=True)
class EigenSolution:
    """Eigenvectors ``p`` (columns, ``b_reg``-orthonormal) and ascending ``phi``.

    ``b_fraction[i]`` is ``p_i^T b p_i``, the share of the unit constraint
    carried by the unregularized ``b``; entries well below 1 mark directions
    that only exist because of the regularizer.
    """

    p: np.ndarray
    phi: np.ndarray
    eps: float
    b_fraction: np.ndarray

    @property
    def n_degenerate(self) -> int:
        return int((self.b_fraction < 0.5).sum())


def default_eps(b: np.ndarray) -> float:
    return 1e-9 * float(np.trace(b)) / b.shape[0]


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _as_pair(pair_or_a, b=None):
    if isinstance(pair_or_a, ObjectivePair):
        return pair_or_a.a, pair_or_a.b
    return np.asarray(pair_or_a, dtype=np.float64), np.asarray(b, dtype=np.float64)


def generalized_eig_smallest(pair, m: int, eps: float | None = None, b=None) -> EigenSolution:
    """Return the ``m`` smallest eigenpairs of ``a p = phi (b + eps I) p``.

    ``a`` must be positive definite. It is Cholesky-factored and the
    reversed problem ``b_reg q = psi a q`` is solved for its largest ``psi``;
    then ``phi = 1/psi`` and ``p = q / sqrt(psi)``. This never factors the
    possibly singular ``b``.

    ``pair`` is an :class:`ObjectivePair` or the matrix ``a`` (with ``b``
    passed separately). ``eps`` defaults to ``1e-9 * trace(b) / dim``.
    """
    a, b = _as_pair(pair, b)
    dim = a.shape[0]
    if a.shape != (dim, dim) or b.shape != (dim, dim):
        raise ValueError("a and b must be square matrices of equal size")
    if not 1 <= m <= dim:
        raise ValueError(f"m must lie in [1, {dim}], got {m}")
    if eps is None:
        eps = default_eps(b)
    b_reg = b + eps * np.eye(dim)

    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        min_eig = float(np.linalg.eigvalsh(a)[0])
        raise SolverError(
            f"a is not numerically positive definite (minimum eigenvalue {min_eig:.3e})"
        ) from None
    # c = L^-1 b_reg L^-T
    tmp = scipy.linalg.solve_triangular(low, b_reg, lower=True)
    c = scipy.linalg.solve_triangular(low, tmp.T, lower=True)
    c = 0.5 * (c + c.T)
    psi, y = scipy.linalg.eigh(c, subset_by_index=[dim - m, dim - 1])
    psi = psi[::-1]
    y = y[:, ::-1]
    if psi[-1] <= 0:
        min_eig = float(np.linalg.eigvalsh(b_reg)[0])
        raise SolverError(
            "regularized b is not positive definite on the requested subspace "
            f"(minimum eigenvalue {min_eig:.3e})"
        )
    q = scipy.linalg.solve_triangular(low.T, y, lower=False)
    p = fix_signs(q / np.sqrt(psi))
    phi = 1.0 / psi
    b_fraction = np.einsum("ij,ik,kj->j", p, b, p)
    return EigenSolution(p, phi, float(eps), b_fraction)


def generalized_eig_smallest_reference(pair, m: int, eps: float | None = None, b=None) -> EigenSolution:
    """Same contract, solved by LAPACK's definite-pencil driver on ``b_reg``.

    Used as an independent cross-check; requires ``b_reg`` definite.
    """
    a, b = _as_pair(pair, b)
    dim = a.shape[0]
    if not 1 <= m <= dim:
        raise ValueError(f"m must lie in [1, {dim}], got {m}")
    if eps is None:
        eps = default_eps(b)
    b_reg = b + eps * np.eye(dim)
    phi, p = scipy.linalg.eigh(a, b_reg, subset_by_index=[0, m - 1])
    p = fix_signs(p)
    return EigenSolution(p, phi, float(eps), np.einsum("ij,ik,kj->j", p, b, p))


def objective_value(pair, p, eps: float | None = None, b=None) -> float:
    """Trace ratio ``tr(p^T a p) / tr(p^T b_reg p)``."""
    a, b = _as_pair(pair, b)
    if eps is None:
        eps = default_eps(b)
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    num = float(np.trace(p.T @ a @ p))
    den = float(np.trace(p.T @ b @ p)) + eps * float((p * p).sum())
    if den == 0:
        raise ZeroDivisionError("tr(p^T b_reg p) is zero")
    return num / den
