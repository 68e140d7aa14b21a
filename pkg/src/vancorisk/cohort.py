"""Cohort construction: inclusion filters, KDIGO outcome labels, pre-dose snapshots."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MissingBaselineError, MissingVancoTimeError, SchemaError
from .schema import ADMISSION_FEATURES, BY_NAME, CREATININE, VANCOMYCIN

EVENT_KINDS = ("lab", "chart", "procedure", "drug_dose")

ABSOLUTE_RISE = 0.3  # mg/dL
ABSOLUTE_WINDOW = 48.0  # hours, closed
RELATIVE_RATIO = 1.5
RELATIVE_WINDOW = 168.0  # hours, closed

EVENT_COLUMNS = ("patient_id", "stay_index", "timestamp_hours", "kind", "item_id", "value")
ADMISSION_COLUMNS = ("patient_id", "stay_index", "age", "malignancy", "ed_duration",
                     "charlson", "apsiii")


@dataclass(frozen=True, slots=True)
class ClinicalEvent:
    timestamp: float
    kind: str
    item_id: str
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise ValueError(f"invalid timestamp {self.timestamp!r} for {self.item_id}")
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.item_id}")
        spec = BY_NAME.get(self.item_id)
        if spec is not None and spec.kind == "binary" and self.value not in (0.0, 1.0):
            raise ValueError(f"binary item {self.item_id} has value {self.value!r}")


@dataclass
class PatientTimeline:
    patient_id: str
    stay_index: int
    age: float
    has_active_malignancy: bool
    admission_features: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    first_vanco_time: float | None = None

    def __post_init__(self):
        if self.stay_index < 1:
            raise ValueError("stay_index must be >= 1")
        self.events = sorted(self.events, key=lambda e: e.timestamp)
        doses = [e.timestamp for e in self.events
                 if e.kind == "drug_dose" and e.item_id == VANCOMYCIN]
        derived = doses[0] if doses else None
        if self.first_vanco_time is None:
            self.first_vanco_time = derived
        elif derived is None or self.first_vanco_time != derived:
            raise ValueError(f"first_vanco_time {self.first_vanco_time} disagrees with "
                             f"dose events for {self.patient_id}")

    @property
    def key(self):
        return (self.patient_id, self.stay_index)


@dataclass(frozen=True)
class OutcomeLabel:
    positive: bool
    trigger: str  # absolute_48h | relative_7d | none
    trigger_time: float | None
    baseline_creatinine: float
    peak_post_creatinine: float | None
    data_quality_flag: str = "ok"  # ok | no_post_creatinine


@dataclass
class AttritionReport:
    rows: list = field(default_factory=list)

    def add(self, stage, n_in, n_out):
        self.rows.append({"stage": stage, "n_in": int(n_in), "n_out": int(n_out)})

    @property
    def final_count(self):
        return self.rows[-1]["n_out"] if self.rows else 0

    def counts(self):
        """Stage output counts, e.g. [25916, 21925, 19205, 10288]."""
        return [r["n_out"] for r in self.rows]

    def to_dict(self):
        return {"schema_version": 1, "stages": [dict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d):
        return cls(rows=[dict(r) for r in d["stages"]])


# (stage name, predicate) in screening order
INCLUSION_FILTERS = (
    ("vancomycin_exposure", lambda tl: tl.first_vanco_time is not None),
    ("age_18_to_80", lambda tl: 18 <= tl.age <= 80),
    ("no_active_malignancy", lambda tl: not tl.has_active_malignancy),
    ("first_icu_stay", lambda tl: tl.stay_index == 1),
)


def apply_inclusion_filters(timelines):
    """Apply the four screening filters in order; returns (kept, AttritionReport)."""
    report = AttritionReport()
    kept = list(timelines)
    for stage, keep in INCLUSION_FILTERS:
        n_in = len(kept)
        kept = [tl for tl in kept if keep(tl)]
        report.add(stage, n_in, len(kept))
    return kept, report


def _require_vanco(timeline):
    if timeline.first_vanco_time is None:
        raise MissingVancoTimeError(f"{timeline.patient_id}: no vancomycin dose")
    return timeline.first_vanco_time


def baseline_creatinine(timeline):
    """Most recent creatinine strictly before the first vancomycin dose, or None."""
    t0 = _require_vanco(timeline)
    value = None
    for e in timeline.events:
        if e.timestamp >= t0:
            break
        if e.item_id == CREATININE:
            value = e.value
    return value


def label_kdigo(timeline):
    """KDIGO-style creatinine elevation after the first vancomycin dose.

    Positive when a post-dose value within 48 h rises >= 0.3 mg/dL over baseline,
    or a post-dose value within 168 h reaches 1.5x baseline. Both windows are
    closed; an event at the dose time counts as post-dose. The earliest
    qualifying event sets trigger_time, with the absolute rule winning ties.
    """
    t0 = _require_vanco(timeline)
    base = baseline_creatinine(timeline)
    if base is None:
        raise MissingBaselineError(f"{timeline.patient_id}: no pre-dose creatinine")

    post = [e for e in timeline.events if e.item_id == CREATININE and e.timestamp >= t0]
    if not post:
        return OutcomeLabel(False, "none", None, base, None, "no_post_creatinine")

    in_window = [e.value for e in post if e.timestamp - t0 <= RELATIVE_WINDOW]
    peak = max(in_window) if in_window else None

    first_abs = first_rel = None
    for e in post:
        dt = e.timestamp - t0
        if dt > RELATIVE_WINDOW or first_abs is not None:
            break
        if first_rel is not None and e.timestamp > first_rel:
            break
        if dt <= ABSOLUTE_WINDOW and e.value - base >= ABSOLUTE_RISE:
            first_abs = e.timestamp
        elif first_rel is None and e.value >= RELATIVE_RATIO * base:
            first_rel = e.timestamp
    if first_abs is not None:
        return OutcomeLabel(True, "absolute_48h", first_abs, base, peak)
    if first_rel is not None:
        return OutcomeLabel(True, "relative_7d", first_rel, base, peak)
    return OutcomeLabel(False, "none", None, base, peak)


def _names(schema):
    return [getattr(f, "name", f) for f in schema]


def snapshot_sources(timeline, feature_schema):
    """Map each event feature to the latest pre-dose event that feeds it (or None).

    Events sharing a timestamp resolve to the one listed last.
    """
    t0 = _require_vanco(timeline)
    feature_schema = _names(feature_schema)
    wanted = set(feature_schema)
    latest = {}
    for e in timeline.events:
        if e.timestamp >= t0:
            break
        if e.item_id in wanted and e.kind != "drug_dose":
            latest[e.item_id] = e
    return {name: latest.get(name) for name in feature_schema
            if name not in ADMISSION_FEATURES}


def extract_feature_snapshot(timeline, feature_schema):
    """Feature vector at drug initiation: {name: value or None for missing}."""
    feature_schema = _names(feature_schema)
    sources = snapshot_sources(timeline, feature_schema)
    snap = {}
    for name in feature_schema:
        if name in ADMISSION_FEATURES:
            snap[name] = float(timeline.age) if name == "age" else \
                timeline.admission_features.get(name)
        else:
            ev = sources[name]
            snap[name] = None if ev is None else ev.value
    return snap


@dataclass
class LabeledPatient:
    patient_id: str
    stay_index: int
    features: dict
    label: OutcomeLabel


def build_labeled_cohort(timelines, feature_schema):
    """Filter, label and snapshot. Patients without a pre-dose creatinine are
    dropped and counted in an extra attrition row."""
    kept, report = apply_inclusion_filters(timelines)
    cohort = []
    for tl in kept:
        try:
            label = label_kdigo(tl)
        except MissingBaselineError:
            continue
        cohort.append(LabeledPatient(tl.patient_id, tl.stay_index,
                                     extract_feature_snapshot(tl, feature_schema), label))
    report.add("pre_dose_creatinine_available", len(kept), len(cohort))
    return cohort, report


# ---------------------------------------------------------------- CSV formats

def _num(x):
    return repr(float(x))


def write_timelines(timelines, events_path, admissions_path):
    with open(events_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for tl in timelines:
            for e in tl.events:
                w.writerow((tl.patient_id, tl.stay_index, _num(e.timestamp), e.kind,
                            e.item_id, _num(e.value)))
    with open(admissions_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ADMISSION_COLUMNS)
        for tl in timelines:
            af = tl.admission_features
            w.writerow((tl.patient_id, tl.stay_index, _num(tl.age),
                        int(tl.has_active_malignancy),
                        *(_opt(af.get(k)) for k in ("ed_duration", "charlson", "apsiii"))))


def _opt(x):
    return "" if x is None else _num(x)


def _check_header(header, expected, path):
    missing = [c for c in expected if c not in header]
    if missing:
        raise SchemaError(f"{Path(path).name}: missing column {missing[0]!r}", missing[0])


def read_timelines(events_path, admissions_path):
    events = defaultdict(list)
    with open(events_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames or [], EVENT_COLUMNS, events_path)
        for row in reader:
            key = (row["patient_id"], int(row["stay_index"]))
            events[key].append(ClinicalEvent(float(row["timestamp_hours"]), row["kind"],
                                             row["item_id"], float(row["value"])))
    timelines = []
    with open(admissions_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames or [], ADMISSION_COLUMNS, admissions_path)
        for row in reader:
            key = (row["patient_id"], int(row["stay_index"]))
            adm = {k: (float(row[k]) if row[k] != "" else None)
                   for k in ("ed_duration", "charlson", "apsiii")}
            timelines.append(PatientTimeline(
                patient_id=key[0], stay_index=key[1], age=float(row["age"]),
                has_active_malignancy=row["malignancy"] in ("1", "true", "True"),
                admission_features=adm, events=events.pop(key, [])))
    if events:
        pid, stay = next(iter(events))
        raise SchemaError(f"events for {pid}/{stay} have no admission row", "patient_id")
    return timelines
