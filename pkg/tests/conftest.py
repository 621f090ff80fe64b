import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
DEMO = ROOT / "demo"

CRITERIA = {
    1: "published table F1 consistency",
    2: "pLSA EM log-likelihood monotone",
    3: "LDA-VI ELBO monotone",
    4: "synthetic topic recovery",
    5: "coherence matches pair-count oracle",
    6: "aspect ensemble branch coverage",
    7: "sentiment ensemble branch coverage",
    8: "aspect ensemble sanity on labeled synthetic data",
    9: "bigrams match brute-force enumeration",
    10: "end-to-end determinism",
    11: "structural invariants",
}

_outcomes: dict[int, list[tuple[str, str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report.user_properties = [*report.user_properties, ("criterion", marker.args[0])]


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    criterion = props.get("criterion")
    if criterion is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(criterion, []).append((report.nodeid, report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title in CRITERIA.items():
        runs = _outcomes.get(number)
        if not runs:
            tr.write_line(f"NOT RUN  {number:>2}. {title}")
            continue
        ok = all(outcome == "passed" for _, outcome, _ in runs)
        details = "; ".join(d for _, _, d in runs if d)
        tr.write_line(f"{'PASS' if ok else 'FAIL':<8} {number:>2}. {title}" + (f"  [{details}]" if details else ""))


@pytest.fixture
def detail(record_property):
    """Attach a short measured value to the acceptance summary line."""
    parts = []

    def add(text):
        parts.append(text)
        record_property("detail", ", ".join(parts))

    return add


@pytest.fixture(scope="session")
def demo_dir():
    return DEMO


sys.path.insert(0, str(Path(__file__).parent))
