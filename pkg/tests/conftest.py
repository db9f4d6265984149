import numpy as np
import pytest

from daecontract import registry
from daecontract.dae import simulate


@pytest.fixture(scope="session")
def exam1():
    return registry.exam1_system()


@pytest.fixture(scope="session")
def exam3():
    return registry.exam3_system()


@pytest.fixture(scope="session")
def smex1():
    return registry.smex1_system()


@pytest.fixture(scope="session")
def smex2():
    return registry.smex2_system()


@pytest.fixture(scope="session")
def short_trajs(exam1, exam3, smex1, smex2):
    """name -> (system, trajectory on [0, 2] with step 1e-3)."""
    plant = registry.oex1_plant()
    plant_traj = simulate(plant.as_dae(), 0.0, [-2.0, 2.0], [-2.0], 2.0, 1e-3)
    obs = registry.get_example("oex1_observer").dae(plant_traj)
    cases = {
        "exam1": (exam1, [1.0], [0.0]),
        "exam3": (exam3, [1.0], [0.0]),
        "smex1": (smex1, [3.0, -3.0], [1.38]),
        "smex2": (smex2, [0.5, 1.05], [1.9, 0.8]),
        "oex1_observer": (obs, [2.0, -2.0], [2.0]),
    }
    return {k: (s, simulate(s, 0.0, np.array(w0), np.array(zg), 2.0, 1e-3)) for k, (s, w0, zg) in cases.items()}
