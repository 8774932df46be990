"""Deterministic rule antecedents: Var-Part clustering and kernel widths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WIDTH_MIN = 1.0
WIDTH_MAX = 10.0
# relative gap under which two variances or SSEs count as tied
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class AntecedentParams:
    """Rule centers and Gaussian widths, both ``K x d``."""

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=np.float64)
        w = np.array(self.widths, dtype=np.float64)
        if c.ndim != 2 or c.shape != w.shape:
            raise ValueError(
                f"centers and widths must be matching 2-D arrays, got {c.shape} and {w.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("centers must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("widths must be finite and strictly positive")
        c.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]


def _sse(x: np.ndarray) -> float:
    if x.shape[0] == 0:
        return 0.0
    return float(((x - x.mean(axis=0)) ** 2).sum())


def _first_max(values) -> int:
    """Index of the maximum, treating values within ``TIE_RTOL`` of it as ties."""
    values = np.asarray(values, dtype=np.float64)
    top = values.max()
    return int(np.flatnonzero(values >= top - TIE_RTOL * abs(top))[0])


def var_part(features, K: int):
    """Divisive clustering into exactly ``K`` clusters.

    Repeatedly takes the cluster with the largest within-cluster SSE and
    splits it at its mean along its highest-variance dimension (values
    ``<=`` the mean go to the first child). Ties resolve to the lowest
    index, where values equal up to a relative ``1e-9`` count as tied
    (standardized columns have unit variance up to rounding). The first
    child keeps the parent's slot and the second child is inserted right
    after it.

    Returns
    -------
    centers : ndarray, shape (K, d)
    assignment : ndarray of int, shape (n,)
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D array")
    n = x.shape[0]
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of examples n={n}")

    clusters = [np.arange(n)]
    sses = [_sse(x)]
    while len(clusters) < K:
        if max(sses) > 0:
            j = _first_max(sses)
        else:
            # every cluster is a set of repeated points: split the largest
            sizes = [len(c) for c in clusters]
            j = sizes.index(max(sizes))
        members = clusters[j]
        pts = x[members]
        if len(members) >= 2:
            dim = _first_max(pts.var(axis=0))
            mu = pts[:, dim].mean()
            mask = pts[:, dim] <= mu
            left, right = members[mask], members[~mask]
            if len(left) == 0 or len(right) == 0:
                half = len(members) // 2
                left, right = members[:half], members[half:]
        else:
            # unreachable while K <= n; keeps a duplicate center if it happens
            left, right = members, members[:0]
        clusters[j:j + 1] = [left, right]
        sses[j:j + 1] = [_sse(x[left]), _sse(x[right])]

    centers = np.empty((K, x.shape[1]))
    assignment = np.empty(n, dtype=np.int64)
    for k, members in enumerate(clusters):
        if len(members):
            centers[k] = x[members].mean(axis=0)
            assignment[members] = k
        else:
            centers[k] = centers[k - 1]
    return centers, assignment


def kernel_widths(features, centers) -> np.ndarray:
    """Per-rule, per-dimension widths rescaled into ``[1, 10]``.

    The raw width of rule ``k`` in dimension ``p`` is the sum over *all*
    examples of ``(x_ip - c_kp)**2``. Each dimension is then mapped affinely
    across the rules so its smallest raw width becomes 1 and its largest 10;
    a dimension whose raw widths coincide gets 5.5.
    """
    x = np.asarray(features, dtype=np.float64)
    c = np.asarray(centers, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("kernel widths need at least two examples")
    if x.ndim != 2 or c.ndim != 2 or x.shape[1] != c.shape[1]:
        raise ValueError("features and centers must be 2-D with equal column counts")
    raw = ((x[None, :, :] - c[:, None, :]) ** 2).sum(axis=1)
    return scale_widths(raw)


def scale_widths(raw: np.ndarray) -> np.ndarray:
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    flat = span <= 1e-12 * np.maximum(np.abs(hi), 1.0)
    safe = np.where(flat, 1.0, span)
    scaled = WIDTH_MIN + (WIDTH_MAX - WIDTH_MIN) * (raw - lo) / safe
    scaled = np.where(flat, 0.5 * (WIDTH_MIN + WIDTH_MAX), scaled)
    return np.clip(scaled, WIDTH_MIN, WIDTH_MAX)


def fit_antecedents(features, K: int) -> AntecedentParams:
    centers, _ = var_part(features, K)
    return AntecedentParams(centers, kernel_widths(features, centers))
