import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES = []


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line: criterion(n, title, ok, detail)."""
    def record(n, title, ok, detail=""):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
        _LINES.append(line)
        print(line)
        return ok
    return record


@pytest.fixture(scope="session")
def full_candidates():
    """Default synthetic cohort (n = 10,288) with every candidate feature."""
    from vancorisk.cohort import build_labeled_cohort
    from vancorisk.dataset import from_cohort
    from vancorisk.schema import ALL_FEATURES
    from vancorisk.synth import GeneratorSpec, generate_cohort

    cohort, _ = build_labeled_cohort(generate_cohort(GeneratorSpec()), ALL_FEATURES)
    return from_cohort(cohort, [f.name for f in ALL_FEATURES])


@pytest.fixture(scope="session")
def cohort_dataset(full_candidates):
    """The default cohort restricted to the 19 model features."""
    from vancorisk.schema import MODEL_FEATURE_NAMES, table_order

    return full_candidates.select(table_order(MODEL_FEATURE_NAMES))


@pytest.fixture(scope="session")
def prepared(cohort_dataset):
    """(raw train, scaled train, scaled+SMOTE train, scaled test, params)."""
    from vancorisk.preprocess import fit_params, smote, stratified_split, transform

    train, test = stratified_split(cohort_dataset, 0.3, 0)
    params = fit_params(train)
    tr = transform(train, params)
    return train, tr, smote(tr, 5, 1.0, 0), transform(test, params), params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
