import numpy as np
import pytest

from bnsl_qubo.network import network_from_dict

_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record an acceptance outcome so the terminal summary lists every criterion."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(number, []).append((title, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} {detail}".rstrip())
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        for title, passed, detail in _ACCEPTANCE[number]:
            terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title} {detail}".rstrip())


def binary(name, parents=(), cpt=((0.5, 0.5),)):
    return {"name": name, "states": ["0", "1"], "parents": list(parents), "cpt": [list(r) for r in cpt]}


@pytest.fixture
def chain_doc():
    return {
        "name": "chain",
        "variables": [
            binary("A", cpt=[[0.6, 0.4]]),
            binary("B", ["A"], [[0.7, 0.3], [0.2, 0.8]]),
            binary("C", ["B"], [[0.9, 0.1], [0.4, 0.6]]),
        ],
    }


@pytest.fixture
def chain(chain_doc):
    return network_from_dict(chain_doc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
