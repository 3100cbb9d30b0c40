import numpy as np
import pytest

from ris_detnet.channel import FadingParams, Topology


@pytest.fixture
def topo():
    """Reference geometry: AP (0,20), RIS (50,20), Eve (50,0), two users
    inside the 2 m circle around Eve."""
    return Topology(ap_pos=(0.0, 20.0), ris_pos=(50.0, 20.0), eve_pos=(50.0, 0.0),
                    user_pos=[(50.6, 1.1), (49.2, -0.8)], n_elements=8)


@pytest.fixture
def fading():
    return FadingParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
