"""Six classifier families behind one fit / predict / serialize contract."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, SchemaError, UnsupportedModelError
from . import gbdt, gnb, logreg, mlp

FAMILIES = ("gbdt_ordered", "gbdt_leafwise", "gbdt_levelwise", "logreg", "gaussian_nb", "mlp")
TREE_FAMILIES = FAMILIES[:3]
SCHEMA_VERSION = 1

# Defaults used when a config leaves a hyperparameter out.
DEFAULT_CONFIGS = {
    "gbdt_ordered": {"n_rounds": 200, "learning_rate": 0.05, "max_depth": 4, "l2_reg": 3.0,
                     "min_samples_leaf": 20},
    "gbdt_leafwise": {"n_rounds": 200, "learning_rate": 0.05, "max_depth": 8,
                      "max_leaves": 15, "l2_reg": 1.0, "min_samples_leaf": 20},
    "gbdt_levelwise": {"n_rounds": 200, "learning_rate": 0.05, "max_depth": 4,
                       "l2_reg": 1.0, "min_samples_leaf": 20},
    "logreg": {"penalty": "l2", "lam": 1e-3},
    "gaussian_nb": {},
    "mlp": {"hidden_units": 32, "dropout": 0.1, "learning_rate": 0.01, "batch_size": 128,
            "epochs": 40},
}

# Small fixed grids searched by mean CV AUROC.
DEFAULT_GRIDS = {
    "gbdt_ordered": {"max_depth": [3, 4]},
    "gbdt_leafwise": {"max_leaves": [7, 15]},
    "gbdt_levelwise": {"max_depth": [3, 4]},
    "logreg": {"penalty": ["l1", "l2"], "lam": [1e-4, 1e-2]},
    "gaussian_nb": {},
    "mlp": {"hidden_units": [16, 32]},
}

_ALLOWED = {
    **{f: set(gbdt.DEFAULTS) - {"variant"} for f in TREE_FAMILIES},
    "logreg": set(logreg.DEFAULTS),
    "gaussian_nb": {"var_floor"},
    "mlp": set(mlp.DEFAULTS),
}


def resolve_config(config):
    """Config with family defaults filled in; rejects unknown families and keys."""
    family = config.get("family")
    if family not in FAMILIES:
        raise UnsupportedModelError(f"unknown model family {family!r}")
    hp = {k: v for k, v in config.items() if k != "family"}
    bad = sorted(set(hp) - _ALLOWED[family])
    if bad:
        raise ConfigError(f"{family}: unknown hyperparameter {bad[0]!r}")
    return {"family": family, **DEFAULT_CONFIGS[family], **hp}


def grid_configs(family, grid=None):
    """Expand a {param: [values]} grid into full configs (sorted key order)."""
    import itertools

    grid = DEFAULT_GRIDS[family] if grid is None else grid
    keys = sorted(grid)
    return [resolve_config({"family": family, **dict(zip(keys, combo))})
            for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class TrainedModel:
    family: str
    config: dict
    params: dict
    loss_trace: list = field(default_factory=list)
    feature_names: list = field(default_factory=list)
    logit_offset: float = 0.0

    def __post_init__(self):
        self._ensemble = None

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def ensemble(self):
        if self.family not in TREE_FAMILIES:
            raise UnsupportedModelError(f"{self.family} is not a tree ensemble")
        if self._ensemble is None:
            self._ensemble = gbdt.FlatEnsemble(self.params["base_score"],
                                               self.params["trees"])
        return self._ensemble

    # -------------------------------------------------------------- io

    def to_dict(self):
        p = self.params
        if self.family in TREE_FAMILIES:
            p = {"base_score": p["base_score"],
                 "trees": [gbdt.tree_to_nested(t) for t in p["trees"]]}
        else:
            p = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                 for k, v in p.items()}
        return {"schema_version": SCHEMA_VERSION, "family": self.family,
                "config": self.config, "feature_names": list(self.feature_names),
                "logit_offset": self.logit_offset, "loss_trace": list(self.loss_trace),
                "params": p}

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported model schema_version {d.get('schema_version')!r}",
                              "schema_version")
        family = d["family"]
        if family not in FAMILIES:
            raise UnsupportedModelError(f"unknown model family {family!r}")
        p = d["params"]
        if family in TREE_FAMILIES:
            p = {"base_score": p["base_score"],
                 "trees": [gbdt.tree_from_nested(t) for t in p["trees"]]}
        else:
            p = {k: (np.asarray(v, dtype=float) if isinstance(v, list) else v)
                 for k, v in p.items()}
        return cls(family, d["config"], p, list(d["loss_trace"]), list(d["feature_names"]),
                   float(d.get("logit_offset", 0.0)))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_model(config, data, seed=0):
    """Train the family named in ``config['family']`` on a Dataset."""
    cfg = resolve_config(config)
    family = cfg["family"]
    hp = {k: v for k, v in cfg.items() if k != "family"}
    X, y = data.X, data.y
    if family in TREE_FAMILIES:
        params, trace = gbdt.train_gbdt(X, y, seed=seed, variant=family.split("_")[1], **hp)
        if family != "gbdt_leafwise":
            cfg.pop("max_leaves", None)
    elif family == "logreg":
        params, trace = logreg.train_logreg(X, y, **hp)
    elif family == "gaussian_nb":
        params, trace = gnb.train_gnb(X, y, **hp)
    else:
        params, trace = mlp.train_mlp(X, y, seed=seed, **hp)
    return TrainedModel(family, cfg, params, [float(v) for v in trace], list(data.names))


def _rows(model, X):
    X = getattr(X, "X", X)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise SchemaError(f"expected {model.n_features} columns, got {X.shape[1]}", "width")
    return X


def predict_raw(model, X):
    """Log-odds score before the prior-shift offset."""
    X = _rows(model, X)
    if len(X) == 0:
        return np.empty(0)
    if model.family in TREE_FAMILIES:
        return model.ensemble.raw(X)
    if model.family == "logreg":
        return logreg.raw(model.params, X)
    if model.family == "gaussian_nb":
        return gnb.raw(model.params, X)
    return mlp.raw(model.params, X)


def predict_proba(model, X):
    """P(elevation) per row; a 1-D input is treated as a single row."""
    single = np.ndim(getattr(X, "X", X)) == 1
    p = gbdt.sigmoid(predict_raw(model, X) + model.logit_offset)
    return float(p[0]) if single else p


def prior_shift_offset(train_rate, target_rate):
    """Log-odds correction mapping scores fitted at ``train_rate`` prevalence to
    ``target_rate`` prevalence."""
    return math.log(target_rate / (1 - target_rate)) - math.log(train_rate / (1 - train_rate))


__all__ = ["FAMILIES", "TREE_FAMILIES", "DEFAULT_CONFIGS", "DEFAULT_GRIDS", "TrainedModel",
           "fit_model", "predict_proba", "predict_raw", "prior_shift_offset",
           "resolve_config", "grid_configs"]
