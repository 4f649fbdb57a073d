import numpy as np
import pytest

from gaussdiff.gmm import GmmSpec, default_spec


@pytest.fixture(scope="session")
def four_cluster_spec() -> GmmSpec:
    return default_spec()


@pytest.fixture(scope="session")
def std_normal_spec() -> GmmSpec:
    return GmmSpec(weights=np.array([1.0]), means=np.zeros((1, 2)),
                   covariances=np.eye(2)[None, :, :])
