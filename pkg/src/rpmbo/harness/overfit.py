"""Posterior-sample test error of trained feature maps at small labelled sizes."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from ..benchmarks import make_objective
from ..gp import GpModel, fit_map, posterior_sample
from ..losses import TrainingConfig, draw_unlabeled, train_feature_map
from ..manifolds import IdentityMap, SphereMap
from ..neural import NeuralMap
from ..seeding import derive_seed, stream
from .config import OverfitSpec

log = logging.getLogger(__name__)

STUDY_HEADER = ("setting", "size", "mean", "std", "median", "repeats")


def overfit_loss_from_samples(samples, y) -> float:
    """Sum over draws of the mean squared error against y."""
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty test set")
    return float(np.sum(np.mean((S - y[None, :]) ** 2, axis=1)))


def overfit_metric(h, gp: GpModel, X_test, y_test, k: int = 100, seed=0) -> float:
    """k joint posterior draws g(h(x)) on the test set, scored by overfit_loss_from_samples."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_test.shape[0] == 0:
        raise ValueError("empty test set")
    if k < 1:
        raise ValueError("k must be >= 1")
    feats = np.nan_to_num(h(X_test, allow_singular=True))
    draws = posterior_sample(gp, feats, seed, n_samples=k)
    return overfit_loss_from_samples(draws, y_test)


def _trained_map(setting, spec: OverfitSpec, obj, X, y, unlabeled, seed):
    D = obj.big_d
    if setting == "original-gp":
        return IdentityMap(D)
    # both network settings start from the same weights
    if setting in ("sup-nn", "semi-nn"):
        h0 = NeuralMap.init(D, stream(seed, "nn-init"), hidden=spec.hidden)
        gamma = 0.0 if setting == "sup-nn" else 1.0
        u = None if setting == "sup-nn" else unlabeled
    else:
        h0 = SphereMap.random(D, obj.d, stream(seed, "sphere-init"))
        gamma, u = 1.0, unlabeled
    cfg = TrainingConfig(gamma=gamma, p=spec.lambdas, q=spec.unlabeled, steps=spec.steps, lr=spec.lr)
    return train_feature_map(h0, X, y, u, cfg, seed=derive_seed(seed, "train")).map


def overfit_trial(spec: OverfitSpec, repeat: int) -> dict:
    """{(setting, size): loss} for one repeat."""
    obj = make_objective(spec.objective)
    D = obj.big_d
    seed = derive_seed(spec.seed, "overfit", repeat)
    rng = stream(seed, "data")
    X_pool = rng.uniform(-1, 1, (max(spec.sizes), D))
    y_pool = np.asarray(obj(X_pool), dtype=float)
    X_test = rng.uniform(-1, 1, (spec.test_size, D))
    y_test = np.asarray(obj(X_test), dtype=float)
    unlabeled = draw_unlabeled(D, spec.unlabeled, spec.lambdas, derive_seed(seed, "unlabeled"))
    out = {}
    for n in spec.sizes:
        X, y = X_pool[:n], y_pool[:n]
        for setting in spec.settings:
            h = _trained_map(setting, spec, obj, X, y, unlabeled, derive_seed(seed, n))
            feats = np.nan_to_num(h(X, allow_singular=True))
            gp = fit_map(GpModel(feats, y))
            out[(setting, n)] = overfit_metric(h, gp, X_test, y_test, spec.samples, derive_seed(seed, n, "draws"))
    return out


def run_overfit_study(spec: OverfitSpec, write: bool = True) -> list[dict]:
    """Table of loss statistics per (setting, size); also written to study.csv."""
    trials = [overfit_trial(spec, r) for r in range(spec.repeats)]
    rows = []
    for setting in spec.settings:
        for n in spec.sizes:
            vals = np.array([t[(setting, n)] for t in trials])
            rows.append({
                "setting": setting,
                "size": n,
                "mean": float(vals.mean()),
                "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                "median": float(np.median(vals)),
                "repeats": len(vals),
                "values": vals.tolist(),
            })
    if write:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "study.csv").write_text(study_csv(rows))
    return rows


def study_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_HEADER)
    for r in rows:
        w.writerow([r["setting"], r["size"], repr(r["mean"]), repr(r["std"]), repr(r["median"]), r["repeats"]])
    return buf.getvalue()
