import pytest

from trainkit import scenario as sn


def cw_doc() -> dict:
    """A fresh copy of the stock rendezvous config document."""
    return {
        "schema_version": 1,
        "scenario": "cw",
        "params": {"n": 1.1314e-3, "a_t": 0.05, "t_max": 14400.0},
        "nominal": [500.0, -500.0, 0.0, 0.0],
        "domain": {"center": [500.0, -500.0],
                   "half_width": [55.0, 150.0],
                   "variables": [0, 1]},
        "metric": {"kind": "squared-length", "position_scale": 5.0,
                   "velocity_scale": 0.01, "threshold": 1.0},
        "controller": {"kind": "analytic-tracking", "omega0": 3.0414e-4,
                       "zeta": 0.75, "scale": 2.0 ** -0.5},
        "ads": {"order": 4, "e_tol": 1e-4, "n_max": 15},
    }


@pytest.fixture
def doc() -> dict:
    return cw_doc()


@pytest.fixture
def setup() -> sn.CwSetup:
    return sn.from_doc(cw_doc())
