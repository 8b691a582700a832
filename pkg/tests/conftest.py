import numpy as np
import pytest

from dynfsm.analysis import builtin_strategy
from dynfsm.simulate import MatchConfig, play_match


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tft_noisy_data():
    cfg = MatchConfig(builtin_strategy("tft"), builtin_strategy("tft"), 0.1, 0.1, 2000, seed=5)
    return play_match(cfg).player_data


def random_machine(rng, n_states, n_predictors, n_actions=2):
    from dynfsm.fsm import Fsm

    av = rng.integers(1, n_actions + 1, size=n_states)
    sm = rng.integers(1, n_states + 1, size=(n_states, 2**n_predictors))
    return Fsm.from_arrays(av, sm, n_actions=n_actions)


def pytest_terminal_summary(terminalreporter):
    from tests.acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
