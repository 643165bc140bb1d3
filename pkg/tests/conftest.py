from pathlib import Path

import numpy as np
import pytest

from imsmc.config import load_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

REF_A = np.array([[0.1012, 0.8075, 1.7837],
                    [-0.0529, 0.0944, -0.0396],
                    [0.0, 0.1937, 0.5402]])
REF_B = np.array([[0.0], [0.0], [0.1]])
REF_D = np.array([[0.2], [0.1], [0.2]])
REF_E = np.array([[0.5, 0.2, 0.1]])
REF_G = np.array([[0.0728, 0.4562]])
X0 = np.array([-1.0, 1.0, -5.0])


@pytest.fixture(scope="session")
def case1_config():
    return load_config(CONFIG_DIR / "example1_case1.json")


@pytest.fixture(scope="session")
def case2_config():
    return load_config(CONFIG_DIR / "example1_case2.json")


@pytest.fixture(scope="session")
def regulation_config():
    return load_config(CONFIG_DIR / "example2_regulation.json")


@pytest.fixture(scope="session")
def case1_imsmc_log(case1_config):
    from imsmc.harness import run_experiment
    return run_experiment(case1_config)


@pytest.fixture(scope="session")
def case1_robust_log(case1_config):
    from imsmc.harness import run_experiment
    return run_experiment(case1_config.with_controller_type("robust"))


@pytest.fixture(scope="session")
def nodist_config(case1_config):
    """Case 1 with the disturbance pulse removed (uncertainty kept)."""
    from dataclasses import replace
    from imsmc.config import ExperimentConfig
    from imsmc.plant import DisturbanceSchedule
    plant = replace(case1_config.plant, disturbance=DisturbanceSchedule())
    return ExperimentConfig(plant=plant, controller=case1_config.controller,
                            simulation=case1_config.simulation)


@pytest.fixture(scope="session")
def nodist_imsmc_log(nodist_config):
    from imsmc.harness import run_experiment
    return run_experiment(nodist_config)
