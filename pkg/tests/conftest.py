import numpy as np
import pytest

from robust_hvac.config import load_building
from robust_hvac.market import PriceShape, WeatherShape, synthesize_forecast, synthesize_prices
from robust_hvac.thermal import OperatingPoint, RcEdge, RcNetwork, RcNode, ThermalModel


@pytest.fixture(scope="session")
def building():
    return load_building()


@pytest.fixture(scope="session")
def data3(building):
    """Three days of synthetic prices and forecast: two simulated days plus a 48-step horizon."""
    rooms = [r.id for r in building.thermal.network.rooms]
    return synthesize_prices(PriceShape(days=3), seed=0), synthesize_forecast(rooms, WeatherShape(days=3), seed=0)


def one_room_network(c_wall=1.0, c_room=1.0, supply=13.0):
    """Wall between ambient and one room; every resistance 1."""
    return RcNetwork(
        nodes=(RcNode("w", "wall", c_wall), RcNode("r", "room", c_room)),
        edges=(RcEdge("w", "ambient", 1.0), RcEdge("w", "r", 1.0)),
        supply_temperature=(supply,),
    )


def tiny_model(dt=0.5):
    """1 wall + 1 room, small room mass so modest flows matter."""
    net = RcNetwork(
        nodes=(RcNode("w", "wall", 2.0), RcNode("r", "room", 0.5)),
        edges=(RcEdge("w", "ambient", 2.0), RcEdge("w", "r", 1.0), RcEdge("r", "ambient", 4.0)),
        supply_temperature=(13.0,),
    )
    return ThermalModel(net, OperatingPoint((0.0,), (24.0,)), dt, (1,))


def random_stable(rng, n, margin=0.1):
    """Random matrix with every eigenvalue real part <= -margin."""
    M = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(M).real) + margin + rng.uniform(0, 1)
    return M - shift * np.eye(n)
