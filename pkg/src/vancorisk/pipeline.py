"""Stage-wise pipeline over an artifact directory.

Stages read upstream artifacts from ``out`` and write their own; running them
in order equals ``run_pipeline``. Every stage's reads and writes go into
manifest.json, along with a config hash, library versions and wall times.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import platform
import time
import zlib
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .artifacts import read_csv, read_json, write_csv, write_json
from .cohort import AttritionReport, build_labeled_cohort, read_timelines, write_timelines
from .dataset import Dataset, META_COLUMNS
from .errors import ConfigError, SchemaError
from .evaluation import (compare_groups, cross_validate, evaluate_scores, roc_curve)
from .feature_select import two_stage_select
from .models import (DEFAULT_GRIDS, FAMILIES, TrainedModel, fit_model, grid_configs,
                     predict_proba, prior_shift_offset)
from .preprocess import PreprocessParams, fit_params, smote, stratified_split, transform
from .schema import ALL_FEATURES, BINARY, BY_NAME, table_order
from .synth import GeneratorSpec, generate_cohort

log = logging.getLogger(__name__)

STAGES = ("generate", "label", "preprocess", "select", "train", "evaluate", "explain", "uq",
          "report")

DEFAULT_CONFIG = {
    "seed": 0,
    "input": None,  # {"events": path, "admissions": path} instead of the generator
    "generator": {"n_patients": 10288, "prevalence": 0.282, "include_excluded": True},
    "split": {"test_fraction": 0.3},
    "smote": {"enabled": True, "k": 5, "ratio": 1.0},
    "selection": {"k_filter": 30, "k_final": 15, "n_trees": 200, "max_depth": 8,
                  "p_threshold": None},
    "models": {"families": list(FAMILIES), "primary": "gbdt_ordered", "cv_folds": 5,
               "grids": None},
    "evaluation": {"n_boot": 2000, "alpha": 0.05, "target_sensitivity": 0.8},
    "interpret": {"enabled": True, "shap_rows": 1000, "ale_bins": 32, "ablation_boot": 20},
    "uq": {"enabled": True, "n_chains": 38, "n_iterations": 2000, "burn_in_fraction": 0.5,
           "crossover_prob": 0.9, "priors": ["elevation", "cohort"]},
    "threads": 1,
}

_num = {"type": "number"}
_bool = {"type": "boolean"}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["seed"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "input": {"oneOf": [{"type": "null"}, {
            "type": "object", "required": ["events", "admissions"],
            "additionalProperties": False,
            "properties": {"events": {"type": "string"}, "admissions": {"type": "string"}}}]},
        "generator": {"type": "object", "additionalProperties": False, "properties": {
            "n_patients": {"type": "integer", "minimum": 0},
            "prevalence": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "include_excluded": _bool,
            "missing_rate": {"type": "object", "additionalProperties": _num}}},
        "split": {"type": "object", "additionalProperties": False, "properties": {
            "test_fraction": {"type": "number", "exclusiveMinimum": 0,
                              "exclusiveMaximum": 1}}},
        "smote": {"type": "object", "additionalProperties": False, "properties": {
            "enabled": _bool, "k": {"type": "integer", "minimum": 1},
            "ratio": {"type": "number", "exclusiveMinimum": 0}}},
        "selection": {"type": "object", "additionalProperties": False, "properties": {
            "k_filter": {"type": "integer", "minimum": 1},
            "k_final": {"type": "integer", "minimum": 1},
            "n_trees": {"type": "integer", "minimum": 1},
            "max_depth": {"type": "integer", "minimum": 1},
            "p_threshold": {"type": ["number", "null"]}}},
        "models": {"type": "object", "additionalProperties": False, "properties": {
            "families": {"type": "array", "minItems": 1,
                         "items": {"enum": list(FAMILIES)}},
            "primary": {"enum": list(FAMILIES[:3])},
            "cv_folds": {"type": "integer", "minimum": 2},
            "grids": {"type": ["object", "null"]}}},
        "evaluation": {"type": "object", "additionalProperties": False, "properties": {
            "n_boot": {"type": "integer", "minimum": 0},
            "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "target_sensitivity": {"type": "number", "exclusiveMinimum": 0,
                                   "maximum": 1}}},
        "interpret": {"type": "object", "additionalProperties": False, "properties": {
            "enabled": _bool, "shap_rows": {"type": "integer", "minimum": 1},
            "ale_bins": {"type": "integer", "minimum": 2},
            "ablation_boot": {"type": "integer", "minimum": 0}}},
        "uq": {"type": "object", "additionalProperties": False, "properties": {
            "enabled": _bool, "n_chains": {"type": "integer", "minimum": 3},
            "n_iterations": {"type": "integer", "minimum": 2},
            "burn_in_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            "crossover_prob": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "priors": {"type": "array", "items": {"enum": ["elevation", "non_elevation",
                                                           "cohort"]}}}},
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides=None):
    """Defaults <- config file <- overrides, validated against CONFIG_SCHEMA."""
    user = {}
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
    user.pop("schema_version", None)
    cfg = _merge(DEFAULT_CONFIG, user)
    cfg = _merge(cfg, {k: v for k, v in (overrides or {}).items() if v is not None})
    return validate_config(cfg)


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ConfigError(f"config {where}: {exc.message}") from None
    if cfg["input"] is not None:
        for key in ("events", "admissions"):
            if not Path(cfg["input"][key]).exists():
                raise ConfigError(f"config input/{key}: {cfg['input'][key]} does not exist")
    if cfg["models"]["primary"] not in cfg["models"]["families"]:
        raise ConfigError("config models/primary must be one of models/families")
    if cfg["selection"]["k_final"] > cfg["selection"]["k_filter"]:
        raise ConfigError("config selection/k_final exceeds selection/k_filter")
    return cfg


def config_hash(cfg):
    body = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def sub_seed(seed, tag):
    """Stable per-purpose seed derived from the run seed."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(tag.encode())])
    return int(ss.generate_state(1)[0])


# ----------------------------------------------------------------- context

class Run:
    """Artifact directory plus config; records reads/writes per stage."""

    def __init__(self, out, cfg):
        self.out = Path(out)
        self.cfg = cfg
        self.threads = int(cfg.get("threads", 1))
        self.reads, self.writes = [], []

    def path(self, name):
        return self.out / name

    def need(self, name):
        p = self.path(name)
        if not p.exists():
            raise SchemaError(f"missing upstream artifact {name}", name)
        self.reads.append(name)
        return p

    def made(self, name):
        self.writes.append(name)
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def seed(self, tag):
        return sub_seed(self.cfg["seed"], tag)


def _selected(run):
    rows = read_csv(run.need("features.csv"))
    return [r["feature"] for r in rows if r["selected"] == "1"]


def _prepared(run, which, selected=True):
    """(dataset restricted to selected features, raw version, params)."""
    params = PreprocessParams.load(run.need("preprocess.json"))
    raw = Dataset.from_csv(run.need(f"{which}.csv"), features=list(params.names))
    if selected:
        names = _selected(run)
        raw = raw.select(names)
        params = params.restrict(names)
    return transform(raw, params), raw, params


def _training_set(run, train):
    sm = run.cfg["smote"]
    if not sm["enabled"]:
        return train
    return smote(train, sm["k"], sm["ratio"], run.seed("smote"))


def _models(run):
    fams = run.cfg["models"]["families"]
    return {f: TrainedModel.load(run.need(f"models/{f}.json")) for f in fams}


# ------------------------------------------------------------------ stages

def stage_generate(run):
    if run.cfg["input"] is not None:
        log.info("input tables given; nothing to generate")
        return
    g = run.cfg["generator"]
    spec = GeneratorSpec(n_patients=g["n_patients"], prevalence=g["prevalence"],
                         seed=run.cfg["seed"], include_excluded=g["include_excluded"])
    if "missing_rate" in g:
        spec.missing_rate = {**spec.missing_rate, **g["missing_rate"]}
    timelines = generate_cohort(spec)
    write_timelines(timelines, run.made("events.csv"), run.made("admissions.csv"))
    write_json(run.made("generator.json"),
               {k: v for k, v in spec.to_dict().items() if k != "features"})


def stage_label(run):
    if run.cfg["input"] is not None:
        ev, adm = run.cfg["input"]["events"], run.cfg["input"]["admissions"]
        run.reads += [ev, adm]
    else:
        ev, adm = run.need("events.csv"), run.need("admissions.csv")
    cohort, report = build_labeled_cohort(read_timelines(ev, adm), ALL_FEATURES)
    write_json(run.made("attrition.json"), report.to_dict())
    names = [f.name for f in ALL_FEATURES]
    header = list(META_COLUMNS) + names
    rows = []
    for p in cohort:
        lab = p.label
        rows.append([f"{p.patient_id}/{p.stay_index}", p.patient_id, p.stay_index,
                     int(lab.positive), lab.trigger, lab.trigger_time,
                     lab.baseline_creatinine, lab.peak_post_creatinine,
                     lab.data_quality_flag, *(p.features[n] for n in names)])
    write_csv(run.made("cohort.csv"), header, rows)


def stage_preprocess(run):
    names = [f.name for f in ALL_FEATURES]
    data = Dataset.from_csv(run.need("cohort.csv"), features=names)
    train, test = stratified_split(data, run.cfg["split"]["test_fraction"], run.seed("split"))
    train.to_csv(run.made("train.csv"))
    test.to_csv(run.made("test.csv"))
    fit_params(train).save(run.made("preprocess.json"))
    # group summary over the whole cohort and a train/test balance table
    model_like = data.select(table_order(names))
    for fname, a, b, labels in (
            ("groups_outcome.csv", model_like.y == 0, model_like.y == 1,
             ("non_elevation", "elevation")),
            ("groups_split.csv", np.isin(model_like.ids, train.ids),
             np.isin(model_like.ids, test.ids), ("train", "test"))):
        rows = compare_groups(model_like, a, b, labels)
        write_csv(run.made(fname), list(rows[0]), rows)


def stage_select(run):
    train, _, _ = _prepared(run, "train", selected=False)
    s = run.cfg["selection"]
    res = two_stage_select(train, k_filter=s["k_filter"], k_final=s["k_final"],
                           n_trees=s["n_trees"], max_depth=s["max_depth"],
                           seed=run.seed("select"), p_threshold=s["p_threshold"])
    scored = {sc.name: sc for sc in res.scores}
    rows = []
    for name in table_order(train.names):
        sc = scored.get(name)
        if sc is None:
            rows.append({"feature": name, "group": "admission", "selected": 1})
            continue
        rows.append({"feature": name, "group": BY_NAME[name].source if name in BY_NAME
                     else "", "f_statistic": sc.f_statistic, "p_value": sc.p_value,
                     "f_rank": sc.rank, "gini_importance": sc.gini_importance,
                     "selected": int(name in res.features)})
    write_csv(run.made("features.csv"), ["feature", "group", "f_statistic", "p_value",
                                         "f_rank", "gini_importance", "selected"], rows)


def stage_train(run):
    train, raw_train, _ = _prepared(run, "train")
    m = run.cfg["models"]
    sm = run.cfg["smote"]
    grids = m["grids"] or {}
    cv_rows = []
    for fam in m["families"]:
        configs = grid_configs(fam, grids.get(fam, DEFAULT_GRIDS[fam]))
        best, best_auc = None, -np.inf
        for ci, cfg in enumerate(configs):
            reps = cross_validate(raw_train, cfg, m["cv_folds"], run.seed(f"cv/{fam}"),
                                  smote_k=sm["k"], smote_ratio=sm["ratio"],
                                  use_smote=sm["enabled"],
                                  target_sensitivity=run.cfg["evaluation"]
                                  ["target_sensitivity"], workers=run.threads)
            mean_auc = float(np.mean([r.auroc for r in reps]))
            for r in reps:
                cv_rows.append({"family": fam, "config_index": ci,
                                "config": json.dumps(cfg, sort_keys=True),
                                "fold": r.extra["fold"], "auroc": r.auroc,
                                "threshold": r.threshold, "sensitivity": r.sensitivity,
                                "specificity": r.specificity, "mean_auroc": mean_auc})
            if mean_auc > best_auc:
                best, best_auc = cfg, mean_auc
        fit_set = _training_set(run, train)
        model = fit_model(best, fit_set, seed=run.seed(f"fit/{fam}"))
        if sm["enabled"]:
            model.logit_offset = prior_shift_offset(float(fit_set.y.mean()),
                                                    float(train.y.mean()))
        model.save(run.made(f"models/{fam}.json"))
    write_csv(run.made("cv.csv"), ["family", "config_index", "config", "fold", "auroc",
                                   "threshold", "sensitivity", "specificity", "mean_auroc"],
              cv_rows)


def stage_evaluate(run):
    test, _, _ = _prepared(run, "test")
    ev = run.cfg["evaluation"]
    reports, roc_rows = {}, []
    for fam, model in _models(run).items():
        p = predict_proba(model, test.X)
        rep = evaluate_scores(p, test.y, ev["target_sensitivity"], ev["n_boot"], ev["alpha"],
                              run.seed("bootstrap"), family=fam, workers=run.threads)
        reports[fam] = rep.to_dict()
        fpr, tpr, thr = roc_curve(p, test.y)
        roc_rows += [{"family": fam, "fpr": a, "tpr": b,
                      "threshold": (None if np.isinf(c) else c)}
                     for a, b, c in zip(fpr, tpr, thr)]
    write_json(run.made("metrics.json"), {"threshold_source": "test_scores",
                                          "primary": run.cfg["models"]["primary"],
                                          "models": reports})
    write_csv(run.made("roc.csv"), ["family", "fpr", "tpr", "threshold"], roc_rows)


def stage_explain(run):
    if not run.cfg["interpret"]["enabled"]:
        return
    from .interpret import ablation, ale_curve, shap_summary

    it = run.cfg["interpret"]
    primary = run.cfg["models"]["primary"]
    model = TrainedModel.load(run.need(f"models/{primary}.json"))
    test, raw_test, params = _prepared(run, "test")
    train, _, _ = _prepared(run, "train")
    ranking, rows, phi = shap_summary(model, test, it["shap_rows"], run.seed("shap"))
    shap_rows = []
    for k, i in enumerate(rows):
        for j, name in enumerate(test.names):
            shap_rows.append({"id": test.ids[i], "feature": name,
                              "value": raw_test.X[i, j], "scaled_value": test.X[i, j],
                              "phi": phi[k, j]})
    write_csv(run.made("shap.csv"), ["id", "feature", "value", "scaled_value", "phi"],
              shap_rows)
    write_csv(run.made("shap_importance.csv"), ["rank", "feature", "mean_abs_shap", "share"],
              ranking)
    ale_rows = []
    for f in test.features:
        if f.kind == BINARY:
            continue
        c = ale_curve(model, test, f.name, it["ale_bins"])
        raw_edges = params.inverse_scale(f.name, c.edges)
        counts = np.r_[0, c.counts]
        ale_rows += [{"feature": f.name, "edge": e, "edge_raw": er, "effect": v,
                      "count": int(n)} for e, er, v, n in zip(c.edges, raw_edges, c.effects,
                                                              counts)]
    write_csv(run.made("ale.csv"), ["feature", "edge", "edge_raw", "effect", "count"],
              ale_rows)
    ab = ablation(_training_set(run, train), test, test.names, it["ablation_boot"],
                  run.seed("ablation"), workers=run.threads)
    write_csv(run.made("ablation.csv"), ["rank", "feature", "auc_full", "auc_without",
                                         "delta_auc", "boot_mean", "boot_sd", "boot_low",
                                         "boot_high"], ab)


def stage_uq(run):
    if not run.cfg["uq"]["enabled"]:
        return
    from .uq import Prior, SamplerConfig, posterior_risk

    u = run.cfg["uq"]
    primary = run.cfg["models"]["primary"]
    model = TrainedModel.load(run.need(f"models/{primary}.json"))
    _, _, params = _prepared(run, "train")
    prevalence = run.cfg["generator"]["prevalence"]
    out, hist = {}, []
    for group in u["priors"]:
        cfg = SamplerConfig(n_chains=u["n_chains"], n_iterations=u["n_iterations"],
                            burn_in_fraction=u["burn_in_fraction"],
                            crossover_prob=u["crossover_prob"], seed=run.seed(f"uq/{group}"))
        prior = Prior.from_schema(model.feature_names, group, prevalence)
        summary, _ = posterior_risk(model, prior, cfg, params, prior_group=group)
        d = summary.to_dict()
        d["sampler"] = cfg.to_dict()
        d["profile"] = dict(zip(prior.names, prior.profile().tolist()))
        out[group] = d
        edges = summary.hist_edges
        hist += [{"prior": group, "bin_low": edges[k], "bin_high": edges[k + 1],
                  "count": c} for k, c in enumerate(summary.hist_counts)]
    write_json(run.made("posterior.json"), {"model": primary, "priors": out})
    write_csv(run.made("posterior_hist.csv"), ["prior", "bin_low", "bin_high", "count"], hist)


def _fmt_metric(v, nd=3):
    return "n/a" if v is None else f"{v:.{nd}f}"


def stage_report(run):
    from . import plots

    metrics = read_json(run.need("metrics.json"))
    roc = read_csv(run.need("roc.csv"))
    curves = {}
    for fam in run.cfg["models"]["families"]:
        rep = metrics["models"][fam]
        pts = [r for r in roc if r["family"] == fam]
        curves[fam] = ([float(r["fpr"]) for r in pts], [float(r["tpr"]) for r in pts],
                       rep["auroc"])
    plots.roc_plot(curves, run.made("roc.svg"))
    lines = ["# Model performance on the held-out test set", "",
             f"Thresholds fix sensitivity at "
             f"{run.cfg['evaluation']['target_sensitivity']:.3f} on each model's own test "
             f"scores. AUROC intervals are percentile bootstrap "
             f"({run.cfg['evaluation']['n_boot']} replicates).", "",
             "| Model | AUC (95% CI) | Accuracy | F1 | Sensitivity | Specificity | PPV | NPV |",
             "|---|---|---|---|---|---|---|---|"]
    for fam in run.cfg["models"]["families"]:
        r = metrics["models"][fam]
        ci = "" if r["auroc_ci_low"] is None else \
            f" ({r['auroc_ci_low']:.3f}-{r['auroc_ci_high']:.3f})"
        lines.append(f"| {fam} | {r['auroc']:.3f}{ci} | {_fmt_metric(r['accuracy'])} | "
                     f"{_fmt_metric(r['f1'])} | {_fmt_metric(r['sensitivity'])} | "
                     f"{_fmt_metric(r['specificity'])} | {_fmt_metric(r['ppv'])} | "
                     f"{_fmt_metric(r['npv'])} |")
    att = read_json(run.need("attrition.json"))
    lines += ["", "## Cohort screening", "", "| Stage | In | Out |", "|---|---|---|"]
    lines += [f"| {s['stage']} | {s['n_in']} | {s['n_out']} |" for s in att["stages"]]
    feats = _selected(run)
    lines += ["", "## Selected features", "", ", ".join(feats)]

    if run.path("shap.csv").exists() and run.cfg["interpret"]["enabled"]:
        shap = read_csv(run.need("shap.csv"))
        ids = sorted({r["id"] for r in shap})
        index = {k: i for i, k in enumerate(ids)}
        phi = np.zeros((len(ids), len(feats)))
        val = np.zeros_like(phi)
        col = {f: j for j, f in enumerate(feats)}
        for r in shap:
            phi[index[r["id"]], col[r["feature"]]] = float(r["phi"])
            val[index[r["id"]], col[r["feature"]]] = float(r["scaled_value"])
        plots.shap_beeswarm(feats, phi, val, run.made("shap_summary.svg"))
        ab = read_csv(run.need("ablation.csv"))
        ab = [{k: (float(v) if k not in ("feature",) and v != "" else
                   (None if v == "" else v)) for k, v in r.items()} for r in ab]
        plots.ablation_plot(ab, run.made("ablation.svg"))
        from .interpret import AleCurve

        ale = read_csv(run.need("ale.csv"))
        curves_ale = []
        for f in feats:
            pts = [r for r in ale if r["feature"] == f]
            if pts:
                curves_ale.append(AleCurve(f, np.array([float(r["edge_raw"]) for r in pts]),
                                           np.array([float(r["effect"]) for r in pts]),
                                           np.array([int(r["count"]) for r in pts[1:]])))
        plots.ale_plot(curves_ale, run.made("ale.svg"))
        imp = read_csv(run.need("shap_importance.csv"))
        lines += ["", "## Feature contributions", "",
                  "| Rank | Feature (SHAP) | Mean abs SHAP | Feature (ablation) | Delta AUC |",
                  "|---|---|---|---|---|"]
        for k in range(min(5, len(imp), len(ab))):
            lines.append(f"| {k + 1} | {imp[k]['feature']} | "
                         f"{float(imp[k]['mean_abs_shap']):.4f} | {ab[k]['feature']} | "
                         f"{ab[k]['delta_auc']:.4f} |")
    if run.path("posterior.json").exists() and run.cfg["uq"]["enabled"]:
        post = read_json(run.need("posterior.json"))
        plots.posterior_plot(post["priors"], run.made("posterior.svg"))
        lines += ["", "## Posterior risk", "",
                  "| Prior | Mean | 95% CrI | R-hat (max) | Acceptance |", "|---|---|---|---|---|"]
        for g, s in post["priors"].items():
            lines.append(f"| {g} | {s['mean']:.3f} | {s['cri_low']:.3f}-{s['cri_high']:.3f} | "
                         f"{s['rhat_max']:.3f} | {s['acceptance_rate']:.3f} |")
    with open(run.made("report.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


STAGE_FUNCS = {name: globals()[f"stage_{name}"] for name in STAGES}


def _versions():
    import matplotlib
    import numba
    import scipy

    return {"vancorisk": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "matplotlib": matplotlib.__version__}


def run_stage(name, cfg, out):
    """Run one stage and append its record to manifest.json."""
    if name not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {name!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(out, cfg)
    t0 = time.perf_counter()
    STAGE_FUNCS[name](run)
    wall = time.perf_counter() - t0
    log.info("stage %s done in %.1fs", name, wall)
    mpath = out / "manifest.json"
    manifest = read_json(mpath) if mpath.exists() else {}
    if manifest.get("config_hash") != config_hash(cfg):
        manifest = {"config_hash": config_hash(cfg), "seed": cfg["seed"],
                    "versions": _versions(), "steps": []}
    manifest["steps"] = [s for s in manifest["steps"] if s["stage"] != name]
    manifest["steps"].append({"stage": name, "reads": [str(r) for r in run.reads],
                              "writes": run.writes, "wall_time_s": round(wall, 3)})
    manifest["steps"].sort(key=lambda s: STAGES.index(s["stage"]))
    write_json(mpath, manifest)
    write_json(out / "config.json", cfg)
    return run


def run_pipeline(cfg, out, stages=STAGES):
    for name in stages:
        run_stage(name, cfg, out)
    return Path(out)


def resolve_out(out=None, cfg=None):
    env = os.environ.get("VANCORISK_OUT")
    if env:
        return env
    if out:
        return out
    return (cfg or {}).get("out") or "vancorisk_out"


def resolve_threads(threads=None, cfg=None):
    n = threads or (cfg or {}).get("threads") or 1
    cap = os.environ.get("VANCORISK_THREADS")
    if cap:
        n = min(n, int(cap))
    return max(1, int(n))


__all__ = ["DEFAULT_CONFIG", "CONFIG_SCHEMA", "STAGES", "load_config", "run_pipeline",
           "run_stage", "config_hash", "AttritionReport"]
