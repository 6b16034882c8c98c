import numpy as np
import pytest

from relaycache import CacheVector, NetworkConfig, Urp

# The canonical worked scenario: 20 files split 10/10, 12 users, 2 antennas.
# The request profile partitions users 9/3 and the placement below gathers
# to per-BS vectors [0.3,0.1,0.4,0.05,0.6,0.3,0.4,0.1,0.2] and [0.1,0.2,0.4],
# giving cooperation masses (0.2, 0) and a cooperative fraction of 0.04.
EXAMPLE_PI = (2, 17, 19, 7, 9, 3, 5, 2, 20, 1, 7, 6)
EXAMPLE_Q = {1: 0.4, 2: 0.3, 3: 0.05, 5: 0.6, 6: 0.2, 7: 0.1,
             9: 0.4, 17: 0.1, 19: 0.2, 20: 0.4}


@pytest.fixture
def example_config():
    return NetworkConfig(M=2, K=12, L=20, file_sizes=(1.0,) * 20,
                         cache_budget=4.0, ownership=(1,) * 10 + (2,) * 10,
                         gamma=2.0, seed=7)


@pytest.fixture
def example_pi():
    return Urp(pi=EXAMPLE_PI)


@pytest.fixture
def example_q():
    q = np.zeros(20)
    for f, v in EXAMPLE_Q.items():
        q[f - 1] = v
    return CacheVector(q)
