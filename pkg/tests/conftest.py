import re
import time

import numpy as np
import pytest

from bimanual_cmp.harness import scenario as sc
from bimanual_cmp.harness.config import (builtin_config, default_scenario_path, load_robot_model, load_scenario,
                                         parse_scenario)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lwr():
    return load_robot_model(builtin_config("lwr4.ini"))


@pytest.fixture(scope="session")
def default_config():
    return load_scenario()


@pytest.fixture(scope="session")
def demo(default_config):
    return sc.demonstrate(default_config)


@pytest.fixture(scope="session")
def learned(default_config, demo):
    """One stiff learning run of the default scenario, shared by every test that needs CMPs."""
    return sc.learn(default_config, demo)


@pytest.fixture(scope="session")
def comparison(default_config, demo, learned):
    started = time.perf_counter()
    comp = sc.compare_variants(default_config, learned.cmps, demo, workers=sc_workers())
    comp.elapsed = time.perf_counter() - started
    return comp


def short_scenario_text() -> str:
    """The default scenario cut to 5 s: a 5 cm lift with the push at 2 to 4 s."""
    text = default_scenario_path().read_text()
    text = text.replace("duration = 30.0", "duration = 5.0")
    text = re.sub(r"keyframes =\n(    .*\n)+",
                  "keyframes =\n    0 0 0 0\n    1 0 0 0\n    3 0 0 0.05\n    5 0 0 0.05\n", text)
    return re.sub(r"segments =\n(    .*\n)+",
                  "segments =\n    ramp 2.0 2.5 0 25 0 0 0 0\n    hold 2.5 3.5 0 25 0 0 0 0\n"
                  "    release 3.5 4.0 0 25 0 0 0 0\n", text)


@pytest.fixture(scope="session")
def short_config():
    return parse_scenario(short_scenario_text())


@pytest.fixture(scope="session")
def short_demo(short_config):
    return sc.demonstrate(short_config)


@pytest.fixture(scope="session")
def short_learned(short_config, short_demo):
    return sc.learn(short_config, short_demo)


def sc_workers():
    from bimanual_cmp.harness.cli import _workers
    return _workers()


def random_q(model, rng):
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    return rng.uniform(0.9 * lo, 0.9 * hi)
