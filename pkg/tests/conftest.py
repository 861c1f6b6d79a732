import numpy as np
import pytest

from mmqst import (build_case, evolve_single_excitation, run_synthesis)


@pytest.fixture(scope="session")
def fast_scenario():
    """Cheap midpoint scenario used by most unit tests."""
    return build_case("midpoint", 3, g_over_fsr=0.4, dt=0.004, t_f_max=8.0)


@pytest.fixture(scope="session")
def fast_run(fast_scenario):
    return run_synthesis(fast_scenario, refine=2)


@pytest.fixture(scope="session")
def fast_traj(fast_scenario, fast_run):
    return evolve_single_excitation(fast_scenario, fast_run.pair)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)
