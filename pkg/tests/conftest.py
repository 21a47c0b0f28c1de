"""共享测试夹具"""

import numpy as np
import pytest

from unified_momentum.problems import make_logistic, make_toy_quadratic, recentre, synth_logistic


@pytest.fixture(scope="session")
def toy():
    """μ = 1e-3 的玩具二次问题（已平移到极小点）"""
    return recentre(make_toy_quadratic(1e-3))


@pytest.fixture(scope="session")
def logistic_raw():
    """m = 100, n = 20, λ = 5e-2 的逻辑回归（未平移，含参考解）"""
    return make_logistic(synth_logistic(100, 20, 5e-2, seed=0))


@pytest.fixture(scope="session")
def logistic(logistic_raw):
    return recentre(logistic_raw)


@pytest.fixture(scope="session")
def logistic_for(logistic):
    """按 λ 取平移后的逻辑回归（m = 100, n = 20, seed = 0）"""
    cache = {5e-2: logistic}

    def build(lam):
        if lam not in cache:
            cache[lam] = recentre(make_logistic(synth_logistic(100, 20, lam, seed=0)))
        return cache[lam]

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
