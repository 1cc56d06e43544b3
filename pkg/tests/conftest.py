import pytest

from steersim.flowgen import FlowGenConfig, gen_flows
from steersim.mlcore import ForestParams
from steersim.radioenv import EnvConfig, gen_radio_samples

# Small forests keep the unit tests quick; acceptance tests use the defaults.
FAST_FOREST = ForestParams(n_trees=15, max_depth=8, min_leaf=5)


@pytest.fixture(scope="session")
def flows_2k():
    return gen_flows(FlowGenConfig(n_flows=2000, seed=3))


@pytest.fixture(scope="session")
def radio_2k():
    return gen_radio_samples(EnvConfig(seed=3), 2000)


# Acceptance tests append "criterion N: PASS/FAIL ..." lines here; they are
# echoed at the end of the run so they show up without -s.
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: _criterion_key(s)):
            terminalreporter.write_line(line)


def _criterion_key(line: str):
    tag = line.split()[1].rstrip(":")
    digits = "".join(ch for ch in tag if ch.isdigit())
    return int(digits), tag
