import numpy as np
import pytest

from rotorreach.plant import build_plant
from rotorreach.prediction import Belief
from rotorreach.scenario import (
    DEFAULT_PREDICTION_START,
    default_initial_belief,
    default_pilot_model,
    default_world,
)


@pytest.fixture(scope="session")
def pm():
    return build_plant()


@pytest.fixture(scope="session")
def pilot_model():
    return default_pilot_model()


@pytest.fixture(scope="session")
def world():
    return default_world()


@pytest.fixture()
def initial_belief() -> Belief:
    """Three-component initial uncertainty around the nominal spawn state."""
    return default_initial_belief(np.array(DEFAULT_PREDICTION_START))


@pytest.fixture()
def origin_belief() -> Belief:
    return default_initial_belief()
