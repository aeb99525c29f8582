import numpy as np
import pytest

from physics.lattice import LatticeGeometry
from physics.model import ModelParams
from utils.config import Config


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def square3():
    return LatticeGeometry(3, 3)


@pytest.fixture
def quench_params():
    # pre- and post-quench couplings used throughout the oracle comparisons
    return ModelParams(1.0, 1.0, 0.1), ModelParams(1.0, 1.0, -0.2)


@pytest.fixture
def tiny_config(tmp_path):
    """2x2 run that finishes in well under a second."""
    return Config.from_dict({
        "geometry": {"rows": 2, "cols": 2},
        "initial_state": {"kind": "product_fv"},
        "evolution": {"t_max": 0.4, "dt": 0.05, "chi_q": 8},
        "sampling": {"times": [0.2, 0.4], "n_shots": 50, "seed": 7, "workers": 2},
        "output_directory": str(tmp_path / "run"),
    })
