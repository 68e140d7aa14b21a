"""Feature schema for the vancomycin creatinine-elevation cohort.

The 19 model features are grouped by source table. Group-conditional
statistics (non-elevation vs elevation) are cohort means and standard
deviations; they calibrate the synthetic generator and the elevation-group
prior used for posterior risk sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

CONTINUOUS = "continuous"
BINARY = "binary"

CREATININE = "creatinine"
VANCOMYCIN = "vancomycin"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    label: str
    unit: str
    kind: str
    source: str
    non_elevation: tuple[float, float]  # (mean, sd); binary: (rate, sd)
    elevation: tuple[float, float]
    lower: float | None = None
    upper: float | None = None
    # marginal family used by the generator and the prior:
    # "normal" (clipped), "lognormal" (moment matched), "truncnormal"
    # (moment matched on [lower, upper]) or "bernoulli"
    dist: str = "normal"
    resolution: float | None = None


# Grouping order: chart, procedure, lab, admission.
MODEL_FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec("rass", "Richmond-RAS Scale", "--", CONTINUOUS, "chartevents",
                (-1.17, 1.26), (-1.65, 1.50), -5.0, 4.0),
    FeatureSpec("total_bilirubin", "Total Bilirubin", "mg/dL", CONTINUOUS, "chartevents",
                (1.99, 3.15), (3.28, 6.08), 0.0, None, "lognormal"),
    FeatureSpec("base_excess", "Arterial Base Excess", "mmol/L", CONTINUOUS, "chartevents",
                (-0.99, 3.57), (-2.21, 3.96), -40.0, 40.0),
    FeatureSpec("ast", "AST", "U/L", CONTINUOUS, "chartevents",
                (250.16, 758.82), (496.48, 1427.11), 0.0, None, "lognormal"),
    FeatureSpec("braden_mobility", "Braden Mobility", "score", CONTINUOUS, "chartevents",
                (2.44, 0.58), (2.25, 0.59), 1.0, 4.0),
    FeatureSpec("mean_airway_pressure", "Mean Airway Pressure", "cmH2O", CONTINUOUS,
                "chartevents", (10.24, 3.07), (11.17, 3.69), 0.0, None),
    FeatureSpec("arterial_line", "Arterial Line", "binary", BINARY, "procedureevents",
                (0.57, 0.50), (0.71, 0.45), 0.0, 1.0, "bernoulli"),
    FeatureSpec("phosphate", "Phosphate", "mg/dL", CONTINUOUS, "labevents",
                (3.40, 1.07), (4.13, 1.31), 0.0, None),
    FeatureSpec("anion_gap", "Anion Gap", "mmol/L", CONTINUOUS, "labevents",
                (13.75, 3.34), (15.23, 3.96), 0.0, None),
    FeatureSpec("magnesium", "Magnesium", "mg/dL", CONTINUOUS, "labevents",
                (2.06, 0.28), (2.16, 0.32), 0.0, None),
    FeatureSpec("lactate", "Lactate", "mmol/L", CONTINUOUS, "labevents",
                (2.05, 1.26), (2.58, 1.83), 0.0, None, "lognormal"),
    FeatureSpec("ptt", "PTT", "sec", CONTINUOUS, "labevents",
                (38.65, 15.22), (43.62, 17.64), 0.0, None),
    FeatureSpec("platelets", "Platelet Count", "x10^3/uL", CONTINUOUS, "labevents",
                (202.85, 106.86), (183.31, 110.30), 0.0, None, "lognormal"),
    FeatureSpec("wbc", "White Blood Cells", "x10^3/uL", CONTINUOUS, "labevents",
                (12.83, 9.72), (13.52, 7.72), 0.0, None, "lognormal"),
    FeatureSpec("glucose", "Glucose", "mg/dL", CONTINUOUS, "labevents",
                (142.96, 48.24), (149.55, 52.59), 0.0, None),
    FeatureSpec("age", "Age", "years", CONTINUOUS, "admission",
                (60.80, 14.53), (62.47, 13.55), 18.0, 80.0, "truncnormal"),
    FeatureSpec("ed_duration", "ED Duration", "hours", CONTINUOUS, "admission",
                (3.51, 4.09), (3.36, 5.68), 0.0, None, "lognormal"),
    FeatureSpec("charlson", "Charlson Comorbidity Index", "score", CONTINUOUS, "admission",
                (4.37, 2.72), (5.24, 2.75), 0.0, None, "lognormal"),
    FeatureSpec("apsiii", "APS III", "--", CONTINUOUS, "admission",
                (48.66, 21.05), (60.44, 23.89), 0.0, None),
)

ADMISSION_FEATURES: tuple[str, ...] = ("age", "ed_duration", "charlson", "apsiii")

# Candidates screened but not retained. No group statistics exist for
# these, so the generator draws them identically in both outcome groups at
# their charted resolution.
EXTRA_CANDIDATES: tuple[FeatureSpec, ...] = (
    FeatureSpec("heart_rate", "Heart Rate", "bpm", CONTINUOUS, "chartevents",
                (92.0, 19.0), (92.0, 19.0), 30.0, 200.0, resolution=1.0),
    FeatureSpec("nibp_mean", "Non-Invasive BP Mean", "mmHg", CONTINUOUS, "chartevents",
                (78.0, 14.0), (78.0, 14.0), 30.0, 160.0, resolution=1.0),
    FeatureSpec("spo2", "SpO2", "%", CONTINUOUS, "chartevents",
                (96.5, 2.5), (96.5, 2.5), 70.0, 100.0, resolution=1.0),
    FeatureSpec("respiratory_rate", "Respiratory Rate", "insp/min", CONTINUOUS,
                "chartevents", (20.0, 5.0), (20.0, 5.0), 4.0, 60.0, resolution=1.0),
    FeatureSpec("temperature", "Temperature", "C", CONTINUOUS, "chartevents",
                (37.1, 0.7), (37.1, 0.7), 33.0, 42.0, resolution=0.1),
    FeatureSpec("fio2", "Inspired O2 Fraction", "%", CONTINUOUS, "chartevents",
                (45.0, 15.0), (45.0, 15.0), 21.0, 100.0, resolution=5.0),
    FeatureSpec("central_line", "Central Line", "binary", BINARY, "procedureevents",
                (0.45, 0.50), (0.45, 0.50), 0.0, 1.0, "bernoulli"),
    FeatureSpec("mech_vent", "Mechanical Ventilation", "binary", BINARY, "procedureevents",
                (0.40, 0.49), (0.40, 0.49), 0.0, 1.0, "bernoulli"),
    FeatureSpec("bun", "BUN", "mg/dL", CONTINUOUS, "labevents",
                (24.0, 10.0), (24.0, 10.0), 2.0, 150.0, resolution=1.0),
    FeatureSpec("inr", "INR", "ratio", CONTINUOUS, "labevents",
                (1.4, 0.3), (1.4, 0.3), 0.8, 6.0, resolution=0.1),
    FeatureSpec("calcium", "Calcium", "mg/dL", CONTINUOUS, "labevents",
                (8.4, 0.7), (8.4, 0.7), 5.0, 13.0, resolution=0.1),
    FeatureSpec("sodium", "Sodium", "mmol/L", CONTINUOUS, "labevents",
                (139.0, 4.5), (139.0, 4.5), 115.0, 165.0, resolution=1.0),
    FeatureSpec("potassium", "Potassium", "mmol/L", CONTINUOUS, "labevents",
                (4.1, 0.6), (4.1, 0.6), 2.0, 7.5, resolution=0.1),
    FeatureSpec("chloride", "Chloride", "mmol/L", CONTINUOUS, "labevents",
                (104.0, 5.5), (104.0, 5.5), 80.0, 130.0, resolution=1.0),
    FeatureSpec("bicarbonate", "Bicarbonate", "mmol/L", CONTINUOUS, "labevents",
                (23.0, 4.0), (23.0, 4.0), 5.0, 45.0, resolution=1.0),
    FeatureSpec("hemoglobin", "Hemoglobin", "g/dL", CONTINUOUS, "labevents",
                (10.2, 2.0), (10.2, 2.0), 4.0, 20.0, resolution=0.1),
    FeatureSpec("albumin", "Albumin", "g/dL", CONTINUOUS, "labevents",
                (3.0, 0.6), (3.0, 0.6), 1.0, 5.5, resolution=0.1),
)

ALL_FEATURES: tuple[FeatureSpec, ...] = MODEL_FEATURES + EXTRA_CANDIDATES
BY_NAME: dict[str, FeatureSpec] = {f.name: f for f in ALL_FEATURES}
MODEL_FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in MODEL_FEATURES)

SOURCE_ORDER = ("chartevents", "procedureevents", "labevents", "admission")
EVENT_KIND = {"chartevents": "chart", "procedureevents": "procedure", "labevents": "lab"}


def table_order(names) -> list[str]:
    """Sort feature names into source-table grouping order; unknown names last."""
    rank = {f.name: i for i, f in enumerate(ALL_FEATURES)}
    known = sorted((n for n in names if n in rank),
                   key=lambda n: (SOURCE_ORDER.index(BY_NAME[n].source), rank[n]))
    return known + [n for n in names if n not in rank]
