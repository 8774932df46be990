"""Training loop, transformation, 1NN classification, baselines and model files."""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset, DomainPair, apply_scaling, standardization_params
from .fuzzy import design_matrix
from .objective import (
    assemble_objective,
    mmd_conditional_matrix,
    mmd_marginal_matrix,
    scatter_set,
)
from .solver import fix_signs, generalized_eig_smallest, objective_value
from .varpart import AntecedentParams, fit_antecedents

log = logging.getLogger(__name__)

MODEL_FORMAT = "trltsk-model"
MODEL_VERSION = 1
STANDARDIZE_MODES = ("per-domain", "pooled", "none")

# searched values for each hyper-parameter
DEFAULT_GRID = {
    "rules": list(range(3, 11)),
    "dim": list(range(10, 101, 10)),
    "alpha": [0.01, 0.1, 1.0, 10.0, 100.0],
    "beta": [0.01, 0.1, 1.0, 10.0, 100.0],
    "lam": [0.01, 0.1, 1.0, 10.0, 100.0],
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdaptationConfig:
    rules: int = 3
    dim: int = 20
    alpha: float = 0.1
    beta: float = 0.01
    lam: float = 0.01
    iters: int = 5
    standardize: str = "per-domain"

    def validate(self, d: Optional[int] = None) -> "AdaptationConfig":
        if self.rules < 1:
            raise ConfigError(f"rules (K) must be >= 1, got {self.rules}")
        if self.iters < 1:
            raise ConfigError(f"iters (T) must be >= 1, got {self.iters}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must satisfy alpha > 0, got {self.alpha}")
        if self.beta < 0 or self.lam < 0:
            raise ConfigError("beta and lam must be non-negative")
        if self.standardize not in STANDARDIZE_MODES:
            raise ConfigError(
                f"standardize must be one of {STANDARDIZE_MODES}, got {self.standardize!r}"
            )
        if self.dim < 1:
            raise ConfigError(f"dim (m) must be >= 1, got {self.dim}")
        if d is not None and self.dim > self.rules * (d + 1):
            raise ConfigError(
                f"dim (m) must satisfy m <= K(d+1) = {self.rules * (d + 1)}, got {self.dim}"
            )
        return self


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    marginal_mmd: float
    conditional_mmd: float
    label_changes: int
    missing_classes: tuple = ()
    degenerate_directions: int = 0


@dataclass(frozen=True)
class Scaling:
    mean: np.ndarray
    scale: np.ndarray


@dataclass(frozen=True)
class AdaptationModel:
    config: AdaptationConfig
    classes: tuple
    source_scaling: Scaling
    target_scaling: Scaling
    source_antecedents: AntecedentParams
    target_antecedents: AntecedentParams
    p: np.ndarray
    diagnostics: tuple = ()
    target_predictions: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def d(self) -> int:
        return self.source_antecedents.d

    def antecedents(self, domain: str) -> AntecedentParams:
        return self._pick(domain, self.source_antecedents, self.target_antecedents)

    def scaling(self, domain: str) -> Scaling:
        return self._pick(domain, self.source_scaling, self.target_scaling)

    @staticmethod
    def _pick(domain, source, target):
        if domain == "source":
            return source
        if domain == "target":
            return target
        raise ValueError(f"domain must be 'source' or 'target', got {domain!r}")


def encode_labels(labels, classes: Optional[Sequence] = None):
    """Map labels to ``0..C-1`` by order of first appearance."""
    values = np.asarray(labels).tolist()
    if classes is None:
        classes = list(dict.fromkeys(values))
    index = {c: i for i, c in enumerate(classes)}
    return tuple(classes), np.array([index[v] for v in values], dtype=np.int64)


def knn1_predict(train_features, train_labels, test_features) -> np.ndarray:
    """Label of the Euclidean-nearest training row; ties go to the lowest index."""
    train = np.asarray(train_features, dtype=np.float64)
    test = np.asarray(test_features, dtype=np.float64)
    labels = np.asarray(train_labels)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ValueError("training set is empty")
    if labels.shape != (train.shape[0],):
        raise ValueError("train_labels length must equal train row count")
    if test.ndim != 2 or test.shape[1] != train.shape[1]:
        raise ValueError("train and test feature dimensions differ")
    out = np.empty(test.shape[0], dtype=np.int64)
    step = max(1, 4_000_000 // max(train.shape[0], 1))
    for start in range(0, test.shape[0], step):
        dist = cdist(test[start:start + step], train, metric="sqeuclidean")
        out[start:start + step] = np.argmin(dist, axis=1)
    return labels[out]


def evaluate(predicted, truth) -> float:
    pred = np.asarray(predicted).tolist()
    true = np.asarray(truth).tolist()
    if len(pred) != len(true):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(true)} labels")
    if not pred:
        raise ValueError("cannot evaluate empty sequences")
    return sum(str(a) == str(b) for a, b in zip(pred, true)) / len(pred)


def pca_project(features, m: int) -> np.ndarray:
    """Scores on the ``m`` leading principal directions of the centered data."""
    x = np.asarray(features, dtype=np.float64)
    n, d = x.shape
    if not 1 <= m <= min(n, d):
        raise ValueError(f"m must lie in [1, {min(n, d)}], got {m}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / n
    _, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    components = fix_signs(vecs[:, ::-1][:, :m])
    return centered @ components


def empirical_mmd(z_s, z_t, source_labels=None, target_labels=None):
    """Squared distance of domain means and, given labels, the summed class-mean distances.

    Classes are compared only when present in both domains. ``conditional``
    is ``None`` without labels.
    """
    zs = np.asarray(z_s, dtype=np.float64)
    zt = np.asarray(z_t, dtype=np.float64)
    if zs.shape[1] != zt.shape[1]:
        raise ValueError("z_s and z_t must have the same number of columns")
    gap = zs.mean(axis=0) - zt.mean(axis=0)
    marginal = float(gap @ gap)
    if source_labels is None or target_labels is None:
        return marginal, None
    ys = np.asarray(source_labels)
    yt = np.asarray(target_labels)
    conditional = 0.0
    for c in dict.fromkeys(ys.tolist()):
        in_t = yt == c
        if not in_t.any():
            continue
        diff = zs[ys == c].mean(axis=0) - zt[in_t].mean(axis=0)
        conditional += float(diff @ diff)
    return marginal, conditional


def _scalings(pair: DomainPair, mode: str):
    if mode == "none":
        d = pair.source.d
        ident = Scaling(np.zeros(d), np.ones(d))
        return ident, ident
    mean_s, scale_s, mean_t, scale_t = standardization_params(pair, mode)
    return Scaling(mean_s, scale_s), Scaling(mean_t, scale_t)


def _project(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    return (p.T @ g).T


def fit(pair: DomainPair, config: AdaptationConfig = AdaptationConfig()) -> AdaptationModel:
    """Learn rule antecedents for both domains and the shared consequent matrix.

    Steps: standardize (per ``config.standardize``), Var-Part antecedents
    per domain, fuzzy design matrices, initial target pseudo-labels from 1NN
    on the standardized inputs, then ``config.iters`` rounds of
    {MMD + scatter assembly, generalized eigen-solve, 1NN relabeling}.
    ``pair.target_truth`` is never read.
    """
    d = pair.source.d
    config.validate(d)
    classes, ys = encode_labels(pair.source.labels)
    if len(classes) < 2:
        raise ConfigError("source labels must contain at least two classes")
    k = config.rules
    if k > min(pair.source.n, pair.target.n):
        raise ConfigError(
            f"rules (K={k}) exceeds a domain's example count "
            f"(n_s={pair.source.n}, n_t={pair.target.n})"
        )

    sc_s, sc_t = _scalings(pair, config.standardize)
    xs = apply_scaling(pair.source.features, sc_s.mean, sc_s.scale)
    xt = apply_scaling(pair.target.features, sc_t.mean, sc_t.scale)

    ante_s = fit_antecedents(xs, k)
    ante_t = fit_antecedents(xt, k)
    gs = design_matrix(xs, ante_s).data
    gt = design_matrix(xt, ante_t).data
    gx = np.hstack([gs, gt])
    n_s, n_t = gs.shape[1], gt.shape[1]

    # both depend only on n_s, n_t and the source labels: built once
    marginal = mmd_marginal_matrix(n_s, n_t)
    scatter = scatter_set(gs, ys, n_t)

    pseudo = knn1_predict(xs, ys, xt)
    history = []
    p = None
    for t in range(1, config.iters + 1):
        mmds = [marginal]
        missing = []
        for c in range(len(classes)):
            mc = mmd_conditional_matrix(ys, pseudo, c)
            if mc is None:
                missing.append(classes[c])
            else:
                mmds.append(mc)
        if missing:
            log.info("iteration %d: classes absent from pseudo-labels: %s", t, missing)
        pencil = assemble_objective(gx, gt, mmds, scatter, config.alpha, config.beta, config.lam)
        sol = generalized_eig_smallest(pencil, config.dim)
        p = sol.p
        zs = _project(p, gs)
        zt = _project(p, gt)
        marg, cond = empirical_mmd(zs, zt, ys, pseudo)
        new = knn1_predict(zs, ys, zt)
        history.append(
            IterationRecord(
                iteration=t,
                objective=objective_value(pencil, p, eps=sol.eps),
                marginal_mmd=marg,
                conditional_mmd=cond,
                label_changes=int((new != pseudo).sum()),
                missing_classes=tuple(_plain(c) for c in missing),
                degenerate_directions=sol.n_degenerate,
            )
        )
        log.debug("iteration %d: %s", t, history[-1])
        pseudo = new

    return AdaptationModel(
        config=config,
        classes=tuple(_plain(c) for c in classes),
        source_scaling=sc_s,
        target_scaling=sc_t,
        source_antecedents=ante_s,
        target_antecedents=ante_t,
        p=p,
        diagnostics=tuple(history),
        target_predictions=np.array([classes[i] for i in pseudo]),
    )


def transform(model: AdaptationModel, dataset, domain: str) -> np.ndarray:
    """Map raw rows of ``domain`` into the learned ``m``-dimensional space."""
    x = dataset.features if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ValueError(f"data dimension does not match model dimension d={model.d}")
    sc = model.scaling(domain)
    g = design_matrix(apply_scaling(x, sc.mean, sc.scale), model.antecedents(domain)).data
    return _project(model.p, g)


def predict(model: AdaptationModel, pair: DomainPair) -> np.ndarray:
    zs = transform(model, pair.source, "source")
    zt = transform(model, pair.target, "target")
    return knn1_predict(zs, pair.source.labels, zt)


def baseline_raw(pair: DomainPair, standardize: str = "per-domain") -> np.ndarray:
    """1NN trained on the (standardized) source rows."""
    sc_s, sc_t = _scalings(pair, standardize)
    xs = apply_scaling(pair.source.features, sc_s.mean, sc_s.scale)
    xt = apply_scaling(pair.target.features, sc_t.mean, sc_t.scale)
    return knn1_predict(xs, pair.source.labels, xt)


def baseline_pca(pair: DomainPair, m: int, standardize: str = "per-domain") -> np.ndarray:
    """1NN after a PCA fitted on the stacked, standardized domains."""
    sc_s, sc_t = _scalings(pair, standardize)
    xs = apply_scaling(pair.source.features, sc_s.mean, sc_s.scale)
    xt = apply_scaling(pair.target.features, sc_t.mean, sc_t.scale)
    stacked = np.vstack([xs, xt])
    m = min(m, *stacked.shape)
    z = pca_project(stacked, m)
    return knn1_predict(z[: xs.shape[0]], pair.source.labels, z[xs.shape[0]:])


# --- model files -----------------------------------------------------------


def _plain(v):
    return v.item() if isinstance(v, np.generic) else v


def _floats(a: np.ndarray):
    return np.asarray(a, dtype=np.float64).tolist()


def model_to_dict(model: AdaptationModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(model.config),
        "classes": list(model.classes),
        "layout": "rule-major, bias first",
        "scaling": {
            dom: {"mean": _floats(s.mean), "scale": _floats(s.scale)}
            for dom, s in (("source", model.source_scaling), ("target", model.target_scaling))
        },
        "antecedents": {
            dom: {"centers": _floats(a.centers), "widths": _floats(a.widths)}
            for dom, a in (
                ("source", model.source_antecedents),
                ("target", model.target_antecedents),
            )
        },
        "p": _floats(model.p),
        "diagnostics": [
            {**asdict(r), "missing_classes": list(r.missing_classes)} for r in model.diagnostics
        ],
    }


def model_from_dict(obj: dict) -> AdaptationModel:
    if obj.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a model file (format={obj.get('format')!r})")
    if obj.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {obj.get('version')!r}")
    scaling = {
        dom: Scaling(np.array(v["mean"], dtype=np.float64), np.array(v["scale"], dtype=np.float64))
        for dom, v in obj["scaling"].items()
    }
    ante = {
        dom: AntecedentParams(np.array(v["centers"]), np.array(v["widths"]))
        for dom, v in obj["antecedents"].items()
    }
    diags = tuple(
        IterationRecord(**{**r, "missing_classes": tuple(r["missing_classes"])})
        for r in obj["diagnostics"]
    )
    return AdaptationModel(
        config=AdaptationConfig(**obj["config"]),
        classes=tuple(obj["classes"]),
        source_scaling=scaling["source"],
        target_scaling=scaling["target"],
        source_antecedents=ante["source"],
        target_antecedents=ante["target"],
        p=np.array(obj["p"], dtype=np.float64),
        diagnostics=diags,
    )


def save_model(model: AdaptationModel, path) -> None:
    # json writes floats with repr, which round-trips exactly
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> AdaptationModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- grid search -----------------------------------------------------------


@dataclass(frozen=True)
class GridResult:
    config: AdaptationConfig
    accuracy: Optional[float]
    objective: float


def grid_configs(d: int, base: AdaptationConfig, grid: Optional[dict] = None):
    """Every valid configuration of ``grid`` in canonical (sorted-key) order."""
    grid = {**DEFAULT_GRID, **(grid or {})}
    keys = sorted(grid)
    out = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cfg = replace(base, **dict(zip(keys, values)))
        try:
            cfg.validate(d)
        except ConfigError:
            continue
        out.append(cfg)
    return out


def _grid_one(args):
    pair, cfg = args
    model = fit(pair, cfg)
    acc = None
    if pair.target_truth is not None:
        acc = evaluate(model.target_predictions, pair.target_truth)
    return GridResult(cfg, acc, model.diagnostics[-1].objective)


def grid_search(pair: DomainPair, base: AdaptationConfig = AdaptationConfig(),
                grid: Optional[dict] = None, jobs: int = 1):
    """Fit every grid configuration; results keep canonical order.

    The best entry maximizes target accuracy when ``pair.target_truth`` is
    set and minimizes the final objective otherwise; ties go to the earlier
    configuration.
    """
    configs = grid_configs(pair.source.d, base, grid)
    if not configs:
        raise ConfigError("grid contains no valid configuration")
    tasks = [(pair, c) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_grid_one, tasks, chunksize=8))
    else:
        results = [_grid_one(t) for t in tasks]
    if pair.target_truth is not None:
        best = max(range(len(results)), key=lambda i: (results[i].accuracy, -i))
    else:
        best = min(range(len(results)), key=lambda i: (results[i].objective, i))
    return results, results[best]
