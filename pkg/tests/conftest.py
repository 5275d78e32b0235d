import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qaegap.instance import LatticeGeometry, MaxCutInstance, SignConvention, generate_random

settings.register_profile(
    "repo", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

SHAPES = [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (1, 4), (2, 3), (3, 2)]


def single_qubit(w=1.0, convention=SignConvention.GROUND_ENCODES_MAX):
    return MaxCutInstance(LatticeGeometry(1, 1), (w,), (), 0, convention)


def edge_pair(w=1.0, convention=SignConvention.GROUND_ENCODES_MAX):
    return MaxCutInstance(LatticeGeometry(1, 2), (0.0, 0.0), ((0, 1, w),), 0, convention)


def free_instance(instance):
    """Copy of ``instance`` with every edge removed."""
    return MaxCutInstance(
        instance.geometry, instance.node_weights, (), instance.jw_m, instance.sign_convention
    )


@st.composite
def instances(draw, shapes=SHAPES, conventions=tuple(SignConvention), extra=True):
    rows, cols = draw(st.sampled_from(shapes))
    seed = draw(st.integers(0, 2**32 - 1))
    return generate_random(
        LatticeGeometry(rows, cols),
        seed=seed,
        extra_edge_prob=0.3 if extra else 0.0,
        jw_m=draw(st.integers(-1, 1)),
        sign_convention=draw(st.sampled_from(conventions)),
    )


@pytest.fixture
def qubit1():
    return single_qubit()


@pytest.fixture
def pair():
    return edge_pair()


@pytest.fixture
def inst4():
    return generate_random(LatticeGeometry(2, 2), seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
