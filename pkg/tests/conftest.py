import numpy as np
import pytest

from nlosloc.scene import load_scene


def minimal_config(buildings=(), gnb=(0.0, 0.0, 5.0), bounds=(-200.0, -200.0, 200.0, 200.0)):
    return {
        "name": "unit",
        "bounds": list(bounds),
        "buildings": [list(b) for b in buildings],
        "streets": {"nodes": {"A": [-150.0, -150.0], "B": [-150.0, 150.0]},
                    "segments": [{"from": "A", "to": "B"}]},
        "gnbs": [{"id": 0, "position": list(gnb)}],
    }


@pytest.fixture
def free_scene():
    return load_scene(minimal_config())


@pytest.fixture(scope="session")
def toy_scene():
    return load_scene("toy")


@pytest.fixture(scope="session")
def madrid_scene():
    return load_scene("madrid-like")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
