import numpy as np
import pytest
from hypothesis import settings

from hardballs.core import SystemParams, sample_phase_point

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def p3():
    return SystemParams(3, 2, 0.1)


@pytest.fixture
def p2():
    return SystemParams(2, 2, 0.1)


def normalized(v):
    v = np.asarray(v, dtype=float)
    v = v - v.mean(axis=0)
    return v / np.sqrt(np.sum(v**2))


def seeded_points(params, seeds):
    return [sample_phase_point(params, s) for s in seeds]
