import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from nwdaf_lab.nf_agents import default_config, run_simulation, without_jitter  # noqa: E402
from nwdaf_lab.sba_model import OtherProtocol, PacketRecord, Protocol, Trace  # noqa: E402

NODES = ["nrf-1", "bsf-1", "amf-1", "smf-1", "upf-1", "gnb-1"]
LABELS = [p for p in Protocol] + [OtherProtocol("HTTP2-custom"), OtherProtocol("GTP-C")]


@pytest.fixture(scope="session")
def quiet_trace():
    """Default scenario with all jitter removed."""
    return run_simulation(without_jitter(default_config()))


@pytest.fixture(scope="session")
def default_trace():
    return run_simulation(default_config())


def random_trace(rng: np.random.Generator, n: int, duration: float = 1000.0) -> Trace:
    ts = np.sort(rng.uniform(0, duration, n))
    src = rng.integers(0, len(NODES), n)
    off = rng.integers(1, len(NODES), n)
    dst = (src + off) % len(NODES)
    proto = rng.integers(0, len(LABELS), n)
    lengths = rng.integers(1, 1500, n)
    records = [
        PacketRecord(float(t), NODES[s], NODES[d], LABELS[p], int(x))
        for t, s, d, p, x in zip(ts, src.tolist(), dst.tolist(), proto.tolist(), lengths.tolist())
    ]
    return Trace(records, duration)


@st.composite
def traces(draw, max_records=60):
    n = draw(st.integers(0, max_records))
    times = sorted(draw(st.lists(st.floats(0, 500, allow_nan=False), min_size=n, max_size=n)))
    records = []
    for t in times:
        src = draw(st.sampled_from(NODES))
        dst = draw(st.sampled_from([x for x in NODES if x != src]))
        records.append(PacketRecord(t, src, dst, draw(st.sampled_from(LABELS)), draw(st.integers(1, 9000))))
    duration = draw(st.floats(times[-1] if times else 0.0, 1000.0, allow_nan=False))
    return Trace(records, duration)


# -- acceptance summary ------------------------------------------------------------------
# Tests marked ``@pytest.mark.criterion(n, title)`` roll up into one line per criterion.

_criteria: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _criteria.setdefault(n, {"title": title, "outcomes": []})


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for n, title in getattr(report, "criterion", ()):
        _criteria[n]["outcomes"].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = [mark.args]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        c = _criteria[n]
        outcomes = c["outcomes"]
        if not outcomes:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"AC{n:<3} {verdict:<8} {c['title']}")
