import pytest

from choiceval.design import enumerate_pairs, filter_dominated, select_design, table_grid_spec
from choiceval.synth import ClTruth, TruthSpec, simulate_sce

TABLE5_WORK_CL = {"wait": -0.034, "cost": -0.021, "unrel": -0.102}


@pytest.fixture(scope="session")
def grid_spec():
    return table_grid_spec()


@pytest.fixture(scope="session")
def all_pairs(grid_spec):
    return enumerate_pairs(grid_spec)


@pytest.fixture(scope="session")
def nondominated(all_pairs):
    return filter_dominated(all_pairs)


@pytest.fixture(scope="session")
def design16(nondominated, grid_spec):
    return select_design(nondominated, 16, seed=0, spec=grid_spec)


@pytest.fixture(scope="session")
def work_dataset(design16):
    truth = TruthSpec("clogit", ClTruth(dict(TABLE5_WORK_CL)), seed=7)
    return simulate_sce(design16, truth, 525, 4, scenarios=("work",))


@pytest.fixture(scope="session")
def small_work_dataset(design16):
    truth = TruthSpec("clogit", ClTruth(dict(TABLE5_WORK_CL)), seed=13)
    return simulate_sce(design16, truth, 40, 4, scenarios=("work",))
