import stat

import pytest

import helpers
from catachc import transform


@pytest.fixture
def double():
    """Fresh parse of the double benchmark (transform mutates its input)."""
    return helpers.load_benchmark("double.chc")


@pytest.fixture(scope="session")
def double_result():
    program = helpers.load_benchmark("double.chc")
    return transform.transform(program)


@pytest.fixture
def make_solver(tmp_path):
    """Factory for fake solver executables; returns the command string."""

    def build(body: str, name: str = "solver") -> str:
        path = tmp_path / name
        path.write_text("#!/bin/sh\n" + body + "\n", encoding="utf-8")
        path.chmod(path.stat().st_mode | stat.S_IXUSR)
        return str(path)

    return build


@pytest.fixture(autouse=True)
def no_ambient_solver(monkeypatch):
    # the suite must behave the same with or without a solver on the host;
    # tests that want one set it explicitly
    monkeypatch.delenv("CATACHC_SOLVER", raising=False)
