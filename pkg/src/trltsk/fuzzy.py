"""TSK antecedent mapping: Gaussian memberships, rule firing and design matrices.

The mapped vector of an example ``x`` is the rule-major concatenation of
``w_k * [1, x]`` over rules ``k``, where ``w_k`` are the normalized firing
levels. This layout is part of the saved-model contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .varpart import AntecedentParams


@dataclass(frozen=True)
class FuzzyDesignMatrix:
    """Mapped data, one column per example, shape ``K(d+1) x n``."""

    data: np.ndarray
    K: int
    d: int

    def __post_init__(self):
        if self.data.shape[0] != self.K * (self.d + 1):
            raise ValueError(
                f"design matrix has {self.data.shape[0]} rows, expected K(d+1)="
                f"{self.K * (self.d + 1)}"
            )

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def bias_rows(self) -> np.ndarray:
        return self.data[:: self.d + 1]


def membership(x, c, delta):
    """Gaussian membership ``exp(-(x - c)**2 / (2 * delta))``.

    ``delta`` is a variance-like width, not a standard deviation.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise ValueError("membership width delta must be positive")
    out = np.exp(-((np.asarray(x, dtype=np.float64) - c) ** 2) / (2.0 * delta))
    return float(out) if out.ndim == 0 else out


def _log_firing(x: np.ndarray, params: AntecedentParams) -> np.ndarray:
    # (n, K) log of the product of memberships
    diff = x[:, None, :] - params.centers[None, :, :]
    return -(diff**2 / (2.0 * params.widths[None, :, :])).sum(axis=2)


def _normalize(logf: np.ndarray) -> np.ndarray:
    shifted = logf - logf.max(axis=1, keepdims=True)
    w = np.exp(shifted)
    total = w.sum(axis=1, keepdims=True)
    bad = ~(total[:, 0] > 0)
    if np.any(bad):
        w[bad] = 1.0
        total[bad] = w.shape[1]
    return w / total


def firing_levels(x, params: AntecedentParams):
    """Raw and normalized firing levels of every rule for one example.

    Normalization is done in log space with the max exponent subtracted, so
    it stays well defined when the raw products underflow to zero.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != params.d:
        raise ValueError(f"x has dimension {x.shape[1]}, rules expect {params.d}")
    logf = _log_firing(x, params)
    return np.exp(logf[0]), _normalize(logf)[0]


def _map_rows(x: np.ndarray, params: AntecedentParams) -> np.ndarray:
    n, d = x.shape
    w = _normalize(_log_firing(x, params))
    xe = np.hstack([np.ones((n, 1)), x])
    return (w[:, :, None] * xe[:, None, :]).reshape(n, params.K * (d + 1))


def fuzzy_map(x, params: AntecedentParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != params.d:
        raise ValueError(f"x has dimension {x.shape[1]}, rules expect {params.d}")
    return _map_rows(x, params)[0]


def design_matrix(dataset, params: AntecedentParams) -> FuzzyDesignMatrix:
    """Map every row of ``dataset`` (a Dataset or an ``n x d`` array)."""
    x = dataset.features if isinstance(dataset, Dataset) else np.asarray(
        dataset, dtype=np.float64
    )
    if x.ndim != 2 or x.shape[1] != params.d:
        raise ValueError(
            f"data dimension {x.shape[-1] if x.ndim else None} does not match "
            f"antecedent dimension {params.d}"
        )
    return FuzzyDesignMatrix(np.ascontiguousarray(_map_rows(x, params).T), params.K, params.d)

