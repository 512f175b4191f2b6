import datetime as dt
from pathlib import Path

import pytest

from episens.calibrate import InitPolicy, ParamBounds, fit
from episens.config import POST_BOUNDS, POST_GUESS, PRE_BOUNDS, PRE_GUESS
from episens.data import parse_national_csv, slice_window
from episens.scenario import TwoRegimeConfig
from episens.seir import SeirParams

DATA_FILE = Path(__file__).parent / "data" / "italy_national_2020.csv"

PRE_WINDOW = (dt.date(2020, 2, 24), dt.date(2020, 3, 8))
POST_WINDOW = (dt.date(2020, 3, 9), dt.date(2020, 4, 20))
ISSUANCE = dt.date(2020, 3, 9)
HORIZON = dt.date(2020, 4, 20)
SEED = 20200224


@pytest.fixture(scope="session")
def data_path() -> Path:
    return DATA_FILE


@pytest.fixture(scope="session")
def observations():
    return parse_national_csv(DATA_FILE.read_bytes())


@pytest.fixture(scope="session")
def pre_window(observations):
    return slice_window(observations, *PRE_WINDOW)


@pytest.fixture(scope="session")
def post_window(observations):
    return slice_window(observations, *POST_WINDOW)


def fit_window(window, guess: dict, bounds: dict, seed: int = 0):
    return fit(
        window,
        SeirParams(**guess),
        ParamBounds(dict(bounds)),
        InitPolicy(i0=float(window.total_confirmed[0]), fit_i0=False),
        n_starts=5,
        seed=seed,
    )


@pytest.fixture(scope="session")
def pre_fit(pre_window):
    return fit_window(pre_window, PRE_GUESS, PRE_BOUNDS)


@pytest.fixture(scope="session")
def post_fit(post_window):
    return fit_window(post_window, POST_GUESS, POST_BOUNDS)


@pytest.fixture(scope="session")
def base_scenario(pre_fit, post_fit):
    return TwoRegimeConfig(
        pre=pre_fit.params,
        post=post_fit.params,
        start_day=PRE_WINDOW[0],
        issuance_day=ISSUANCE,
        delay_days=0,
        horizon_end=HORIZON,
        init=pre_fit.init,
    )
