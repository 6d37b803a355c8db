from pathlib import Path

import pytest

from fiberpinn.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# one line per acceptance criterion, printed in the terminal summary
REPORT = {}


def record(number, passed, detail):
    REPORT[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for number in sorted(REPORT):
            terminalreporter.write_line(REPORT[number])


def _cli(*args):
    code = main([str(a) for a in args])
    if code != 0:
        raise RuntimeError(f"fiberpinn {args[0]} exited with {code}")


def _toy_run(out):
    _cli("validate", "--config", CONFIGS / "toy.yaml", "--out", out)
    return out


def _desk_run(out):
    cfg = CONFIGS / "desk.yaml"
    _cli("greedy", "--config", cfg, "--out", out)
    _cli("validate", "--config", cfg, "--out", out)
    _cli("predict", "--config", cfg, "--out", out)
    return out


@pytest.fixture(scope="session")
def toy_runs(tmp_path_factory):
    """Two independent toy training runs from the shipped config."""
    return tuple(_toy_run(tmp_path_factory.mktemp(f"toy_{k}")) for k in "ab")


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    """Two independent desk-scale greedy runs, each validated and swept."""
    return tuple(_desk_run(tmp_path_factory.mktemp(f"desk_{k}")) for k in "ab")
