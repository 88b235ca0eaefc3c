import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vrpo.games import load_game

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

SMALL_GAMES = ["matching_pennies_imperfect", "matching_pennies_perfect", "kuhn", "liars_dice:1x3"]
ALL_GAMES = SMALL_GAMES + ["leduc"]


def random_profile(game, rng, temperature: float = 1.0) -> np.ndarray:
    """Strictly positive random profile over legal actions at every infoset."""
    legal = game.infoset_legal()
    z = np.where(legal, rng.normal(scale=temperature, size=legal.shape), -np.inf)
    p = np.exp(z - z.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def deterministic_profile(game, choice: dict[int, int], base=None) -> np.ndarray:
    prof = game.uniform_profile() if base is None else base.copy()
    for info, a in choice.items():
        prof[info] = 0.0
        prof[info, a] = 1.0
    return prof


@pytest.fixture(scope="session")
def mp():
    return load_game("matching_pennies_imperfect")


@pytest.fixture(scope="session")
def mp_perfect():
    return load_game("matching_pennies_perfect")


@pytest.fixture(scope="session")
def kuhn():
    return load_game("kuhn")


@pytest.fixture(scope="session")
def leduc():
    return load_game("leduc")


@pytest.fixture(scope="session")
def dice13():
    return load_game("liars_dice:1x3")
