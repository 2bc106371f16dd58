import pytest
from hypothesis import HealthCheck, settings

from rieszsplit.compose import PartitionSpec, build_partition
from rieszsplit.lattice import Window
from rieszsplit.numerics import parse_scalar

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_spec(lengths, K=1):
    return PartitionSpec(tuple(parse_scalar(t) for t in lengths), K)


@pytest.fixture(scope="session")
def split_sqrt2():
    return build_partition(make_spec(["sqrt2inv", "1-sqrt2inv"]), Window.of(-30, 25))


@pytest.fixture(scope="session")
def three_way():
    return build_partition(make_spec(["1/5", "sqrt2inv-1/5", "1-sqrt2inv"], 2))


@pytest.fixture(scope="session")
def thirds():
    return build_partition(make_spec(["1/3", "1/3", "1/3"], 2))


# one summary line per acceptance criterion, printed after the run
_CRITERIA = []


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}"
        line = f"criterion {self.number} {status}: {self.title}"
        _CRITERIA.append(line + (f" ({detail})" if detail else ""))
        print(_CRITERIA[-1])
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
