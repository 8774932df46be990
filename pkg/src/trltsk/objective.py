"""Objective ingredients: MMD coefficient matrices, scatters and the (A, B) pencil.

Conventions: design matrices are ``D x n`` with one column per example,
source columns first in any stacked matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fuzzy import FuzzyDesignMatrix


class SingleClassWarning(UserWarning):
    """Between-class scatter requested for data holding a single class."""


def _arr(g) -> np.ndarray:
    return g.data if isinstance(g, FuzzyDesignMatrix) else np.asarray(g, dtype=np.float64)


def mmd_marginal_matrix(n_s: int, n_t: int) -> np.ndarray:
    """Coefficients ``M`` such that ``tr(P^T G M G^T P)`` is the squared gap of domain means."""
    if n_s < 1 or n_t < 1:
        raise ValueError(f"domain sizes must be positive, got n_s={n_s}, n_t={n_t}")
    e = np.concatenate([np.full(n_s, 1.0 / n_s), np.full(n_t, -1.0 / n_t)])
    return np.outer(e, e)


def mmd_conditional_matrix(source_labels, target_pseudo, c) -> Optional[np.ndarray]:
    """Class-``c`` coefficient matrix, or ``None`` when ``c`` is missing from a domain.

    Cross-domain entries are ``-1/(n_s^c n_t^c)``; the negative sign is what
    makes the trace equal the squared distance between class means.
    """
    ys = np.asarray(source_labels)
    yt = np.asarray(target_pseudo)
    in_s = ys == c
    in_t = yt == c
    ns_c = int(in_s.sum())
    nt_c = int(in_t.sum())
    if ns_c == 0 or nt_c == 0:
        return None
    e = np.concatenate([in_s / ns_c, -(in_t / nt_c)])
    return np.outer(e, e)


def centering_matrix(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return np.eye(n) - np.full((n, n), 1.0 / n)


def between_scatter(g_s, labels) -> np.ndarray:
    """``sum_c n_c (m_c - m)(m_c - m)^T`` over the columns of ``g_s``."""
    g = _arr(g_s)
    y = np.asarray(labels)
    if y.shape != (g.shape[1],):
        raise ValueError("labels length must equal the number of columns")
    classes = _ordered_unique(y)
    out = np.zeros((g.shape[0], g.shape[0]))
    if len(classes) < 2:
        warnings.warn("between-class scatter of a single class is zero", SingleClassWarning)
        return out
    grand = g.mean(axis=1)
    for c in classes:
        cols = g[:, y == c]
        diff = cols.mean(axis=1) - grand
        out += cols.shape[1] * np.outer(diff, diff)
    return out


def within_scatter(g_s, labels) -> np.ndarray:
    """``sum_c G_c H_c G_c^T`` with per-class centering."""
    g = _arr(g_s)
    y = np.asarray(labels)
    if y.shape != (g.shape[1],):
        raise ValueError("labels length must equal the number of columns")
    out = np.zeros((g.shape[0], g.shape[0]))
    for c in _ordered_unique(y):
        cols = g[:, y == c]
        centered = cols - cols.mean(axis=1, keepdims=True)
        out += centered @ centered.T
    return out


def _ordered_unique(y: np.ndarray) -> list:
    seen = {}
    for v in y.tolist():
        seen.setdefault(v, None)
    return list(seen)


@dataclass(frozen=True)
class ScatterSet:
    s_b: np.ndarray
    s_w: np.ndarray
    h_t: np.ndarray


def scatter_set(g_s, labels, n_t: int) -> ScatterSet:
    return ScatterSet(between_scatter(g_s, labels), within_scatter(g_s, labels), centering_matrix(n_t))


@dataclass(frozen=True)
class ObjectivePair:
    """Numerator ``a`` and denominator ``b`` of the trace-ratio objective."""

    a: np.ndarray
    b: np.ndarray
    alpha: float
    beta: float
    lam: float

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def assemble_objective(
    g_x,
    g_t,
    mmds: Sequence[np.ndarray],
    scatter: ScatterSet,
    alpha: float,
    beta: float,
    lam: float,
    require_positive_alpha: bool = True,
) -> ObjectivePair:
    """Build ``a = G_X (sum mmds) G_X^T + alpha I + beta S_w`` and
    ``b = lam G_T H_T G_T^T + beta S_b``, both symmetrized.

    ``mmds`` holds the marginal matrix followed by whichever class matrices
    are available; ``None`` entries are skipped.
    """
    gx = _arr(g_x)
    gt = _arr(g_t)
    dim = gx.shape[0]
    if gt.shape[0] != dim:
        raise ValueError("g_x and g_t must have the same row count")
    if require_positive_alpha and not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if min(alpha, beta, lam) < 0:
        raise ValueError("alpha, beta and lam must be non-negative")
    n = gx.shape[1]
    total = np.zeros((n, n))
    for m in mmds:
        if m is None:
            continue
        if m.shape != (n, n):
            raise ValueError(f"MMD matrix shape {m.shape} does not match {n} columns")
        total += m
    for name, s in (("s_w", scatter.s_w), ("s_b", scatter.s_b)):
        if s.shape != (dim, dim):
            raise ValueError(f"{name} has shape {s.shape}, expected {(dim, dim)}")
    if scatter.h_t.shape != (gt.shape[1], gt.shape[1]):
        raise ValueError("h_t size does not match g_t column count")

    a = gx @ total @ gx.T + alpha * np.eye(dim) + beta * scatter.s_w
    b = lam * (gt @ scatter.h_t @ gt.T) + beta * scatter.s_b
    return ObjectivePair(0.5 * (a + a.T), 0.5 * (b + b.T), alpha, beta, lam)
