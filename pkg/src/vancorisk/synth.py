"""Synthetic ICU timelines calibrated to group-conditional cohort statistics.

Each patient gets a latent outcome group; pre-dose features are drawn from
that group's marginal, and the post-dose creatinine trajectory is built so
that the KDIGO labeler recovers the group exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import ClinicalEvent, PatientTimeline
from .errors import ConfigError
from .marginals import make_marginal
from .schema import (ADMISSION_FEATURES, ALL_FEATURES, BINARY, CREATININE, EVENT_KIND,
                     MODEL_FEATURE_NAMES, VANCOMYCIN, FeatureSpec)

# Reference screening counts: vancomycin stays, age 18-80, no malignancy, first stay.
SCREENING_COUNTS = (25916, 21925, 19205, 10288)
# Stays without vancomycin are not reported; this fixture uses 30,000 total stays.
NO_VANCO_STAYS = 30000 - SCREENING_COUNTS[0]


@dataclass
class GeneratorSpec:
    n_patients: int = 10288
    prevalence: float = 0.282
    seed: int = 0
    features: list = field(default_factory=lambda: list(ALL_FEATURES))
    missing_rate: dict = field(default_factory=lambda: {"labevents": 0.06,
                                                        "chartevents": 0.04,
                                                        "procedureevents": 0.0})
    include_excluded: bool = False

    def validate(self):
        if self.n_patients < 0:
            raise ConfigError("n_patients must be >= 0")
        if not 0 < self.prevalence < 1:
            raise ConfigError("prevalence must lie in (0, 1)")
        names = [f.name for f in self.features]
        missing = [n for n in MODEL_FEATURE_NAMES if n not in names]
        if missing:
            raise ConfigError(f"generator spec lacks model feature {missing[0]!r}")
        for f in self.features:
            for grp in (f.non_elevation, f.elevation):
                if f.kind == BINARY:
                    if not 0 <= grp[0] <= 1:
                        raise ConfigError(f"{f.name}: rate outside [0, 1]")
                elif not grp[1] > 0:
                    raise ConfigError(f"{f.name}: standard deviation must be > 0")
        for v in self.missing_rate.values():
            if not 0 <= v < 1:
                raise ConfigError("missing rates must lie in [0, 1)")
        return self

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["schema_version"] = 1
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("schema_version", None)
        if "features" in d:
            d["features"] = [f if isinstance(f, FeatureSpec) else
                             FeatureSpec(**{**f, "non_elevation": tuple(f["non_elevation"]),
                                            "elevation": tuple(f["elevation"])})
                             for f in d["features"]]
        return cls(**d).validate()

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _marginals(spec):
    return {f.name: (make_marginal(f, "non_elevation"), make_marginal(f, "elevation"))
            for f in spec.features}


def _draw_features(spec, groups, rng):
    values = {}
    margs = _marginals(spec)
    for f in spec.features:
        non, elev = margs[f.name]
        col = np.empty(len(groups))
        pos = groups == 1
        col[~pos] = non.sample(int((~pos).sum()), rng)
        col[pos] = elev.sample(int(pos.sum()), rng)
        if f.resolution:
            col = np.round(col / f.resolution) * f.resolution
            col = np.clip(col, f.lower, f.upper)
        values[f.name] = col
    return values


def _creatinine_events(base, t0, positive, rng):
    """Pre-dose history ending at ``base`` plus a post-dose trajectory.

    Negatives stay below both thresholds by a 2% margin of the allowed band;
    positives receive one event that crosses the absolute or relative rule.
    """
    ev = []
    n_pre = rng.integers(1, 4)
    times = np.sort(rng.uniform(0.0, t0, n_pre))
    for t in times[:-1]:
        ev.append(ClinicalEvent(float(t), "lab", CREATININE,
                                float(round(base * rng.uniform(0.85, 1.1), 2))))
    ev.append(ClinicalEvent(float(times[-1]), "lab", CREATININE, float(base)))

    offsets = np.sort(rng.uniform(0.0, 200.0, rng.integers(3, 8)))
    offsets[0] = rng.uniform(0.0, 48.0)  # at least one early draw
    offsets.sort()
    for dt in offsets:
        cap = min(base + 0.3, 1.5 * base) if dt <= 48 else 1.5 * base
        if dt > 168:
            cap = 2.5 * base  # outside both windows; may be high
        lo = 0.8 * base
        v = lo + rng.random() * 0.98 * (cap - lo)
        ev.append(ClinicalEvent(float(t0 + dt), "lab", CREATININE, float(v)))
    if positive:
        if rng.random() < 0.6:
            dt = rng.uniform(0.0, 48.0)
            v = base + 0.3 + rng.uniform(0.02, 0.6)
        else:
            dt = rng.uniform(48.0, 168.0)
            v = 1.5 * base + base * rng.uniform(0.02, 0.5)
        ev.append(ClinicalEvent(float(t0 + dt), "lab", CREATININE, float(v)))
    return ev


def _feature_events(f, value, t0, u, other):
    """Events for one feature. ``u`` holds 5 uniforms, ``other`` 2 extra draws."""
    kind = EVENT_KIND[f.source]
    ev = []
    if u[0] >= 0.0:
        ta, tb = sorted((u[1] * t0, u[2] * t0))
        if u[3] < 0.5:
            ev.append(ClinicalEvent(float(ta), kind, f.name, float(other[0])))
        ev.append(ClinicalEvent(float(tb), kind, f.name, float(value)))
    # post-dose charting must never reach the snapshot
    if u[4] < 0.05:
        ev.append(ClinicalEvent(float(t0), kind, f.name, float(other[1])))
    elif u[4] < 0.5:
        ev.append(ClinicalEvent(float(t0 + 144.0 * (u[4] - 0.05)), kind, f.name,
                                float(other[1])))
    return ev


def _included_timelines(spec, rng):
    n = spec.n_patients
    n_pos = int(round(n * spec.prevalence))
    groups = np.zeros(n, dtype=np.int8)
    groups[rng.permutation(n)[:n_pos]] = 1
    values = _draw_features(spec, groups, rng)
    margs = _marginals(spec)
    base = np.clip(np.round(np.exp(rng.normal(np.log(1.0), 0.35, n)), 2), 0.4, 4.0)
    t0s = np.round(rng.uniform(4.0, 72.0, n), 3)
    event_features = [f for f in spec.features if f.name not in ADMISSION_FEATURES]

    # per feature: uniforms driving timing/missingness and two extra draws
    unif = {f.name: rng.random((n, 5)) for f in event_features}
    extra = {}
    for f in event_features:
        non, elev = margs[f.name]
        block = np.where(groups[:, None] == 1, elev.sample(2 * n, rng).reshape(n, 2),
                         non.sample(2 * n, rng).reshape(n, 2))
        if f.resolution:
            block = np.clip(np.round(block / f.resolution) * f.resolution, f.lower, f.upper)
        extra[f.name] = block
        miss = spec.missing_rate.get(f.source, 0.0)
        unif[f.name][:, 0] = np.where(unif[f.name][:, 0] < miss, -1.0, unif[f.name][:, 0])
    n_doses = rng.integers(1, 5, n)

    timelines = []
    for i in range(n):
        t0 = float(t0s[i])
        g = int(groups[i])
        events = [ClinicalEvent(t0 + 12.0 * k, "drug_dose", VANCOMYCIN, 1000.0)
                  for k in range(int(n_doses[i]))]
        events += _creatinine_events(float(base[i]), t0, bool(g), rng)
        for f in event_features:
            events += _feature_events(f, values[f.name][i], t0, unif[f.name][i],
                                      extra[f.name][i])
        adm = {k: float(values[k][i]) for k in ("ed_duration", "charlson", "apsiii")
               if k in values}
        timelines.append(PatientTimeline(
            patient_id=f"P{i:06d}", stay_index=1, age=float(values["age"][i]),
            has_active_malignancy=False, admission_features=adm, events=events,
            first_vanco_time=t0))
    return timelines, groups



def _light_timeline(pid, stay, age, malignancy, vanco, rng):
    t0 = float(round(rng.uniform(4.0, 72.0), 3))
    base = float(round(rng.uniform(0.6, 1.6), 2))
    t_pre = float(round(rng.uniform(0.0, t0 - 0.01), 3))  # strictly before the dose
    events = [ClinicalEvent(t_pre, "lab", CREATININE, base),
              ClinicalEvent(t0 + 24.0, "lab", CREATININE, base)]
    if vanco:
        events.append(ClinicalEvent(t0, "drug_dose", VANCOMYCIN, 1000.0))
    adm = {"ed_duration": float(round(rng.uniform(0, 8), 2)),
           "charlson": float(rng.integers(0, 12)), "apsiii": float(rng.integers(10, 120))}
    return PatientTimeline(pid, stay, float(age), malignancy, adm, events)


def excluded_timelines(counts, n_no_vanco, rng, id_pool=None):
    """Stays failing exactly one screening filter, sized to ``counts``.

    ``counts`` are the filter outputs (vancomycin, age, malignancy, first stay);
    later stays reuse patient ids from ``id_pool`` when provided.
    """
    c0, c1, c2, c3 = counts
    out = []
    for i in range(n_no_vanco):
        out.append(_light_timeline(f"N{i:06d}", 1, rng.uniform(18, 80), False, False, rng))
    for i in range(c0 - c1):
        age = rng.uniform(15.0, 17.99) if rng.random() < 0.3 else rng.uniform(80.01, 95.0)
        out.append(_light_timeline(f"A{i:06d}", 1, round(age, 2), False, True, rng))
    for i in range(c1 - c2):
        out.append(_light_timeline(f"M{i:06d}", 1, round(rng.uniform(18, 80), 2), True,
                                   True, rng))
    for i in range(c2 - c3):
        if id_pool:
            pid = id_pool[int(rng.integers(len(id_pool)))]
        else:
            pid = f"R{i:06d}"
        out.append(_light_timeline(pid, int(rng.integers(2, 5)),
                                   round(rng.uniform(18, 80), 2), False, True, rng))
    return out


def _unique_later_stays(timelines):
    # a patient may not repeat a stay index
    seen = set()
    for tl in timelines:
        while tl.key in seen:
            tl.stay_index += 1
        seen.add(tl.key)
    return timelines


def scaled_counts(n_patients):
    s = n_patients / SCREENING_COUNTS[-1]
    counts = [int(round(c * s)) for c in SCREENING_COUNTS]
    counts[-1] = n_patients
    return tuple(counts), int(round(NO_VANCO_STAYS * s))


def generate_cohort(spec):
    """Deterministic list of PatientTimeline for ``spec`` (a GeneratorSpec)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    included, _ = _included_timelines(spec, rng)
    if not spec.include_excluded or spec.n_patients == 0:
        return included
    counts, n_no_vanco = scaled_counts(spec.n_patients)
    xrng = np.random.default_rng([spec.seed, 1])
    excl = excluded_timelines(counts, n_no_vanco, xrng,
                              id_pool=[tl.patient_id for tl in included])
    everything = _unique_later_stays(included + excl)
    order = xrng.permutation(len(everything))
    return [everything[i] for i in order]


def latent_groups(spec):
    """Latent outcome group per included patient id (for round-trip checks)."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_patients
    n_pos = int(round(n * spec.prevalence))
    groups = np.zeros(n, dtype=np.int8)
    groups[rng.permutation(n)[:n_pos]] = 1
    return {f"P{i:06d}": int(groups[i]) for i in range(n)}


def attrition_fixture(seed=0):
    """Minimal timelines whose screening reproduces the reference screening counts."""
    rng = np.random.default_rng(seed)
    kept = [_light_timeline(f"P{i:06d}", 1, round(rng.uniform(18, 80), 2), False, True, rng)
            for i in range(SCREENING_COUNTS[-1])]
    excl = excluded_timelines(SCREENING_COUNTS, NO_VANCO_STAYS, rng,
                              id_pool=[tl.patient_id for tl in kept])
    everything = _unique_later_stays(kept + excl)
    return [everything[i] for i in rng.permutation(len(everything))]


def summarize_groups(dataset):
    """Per-feature mean/SD for non-elevation (label 0) vs elevation (label 1) with Welch p."""
    from .evaluation import compare_groups

    return compare_groups(dataset, dataset.y == 0, dataset.y == 1,
                          names=("non_elevation", "elevation"))
