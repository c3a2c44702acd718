import numpy as np
import pytest

from sphrad.builtin import (
    beta_gaussian_model,
    half_space_constraint,
    norm_ball_constraint,
    two_component_mixture,
)


@pytest.fixture(scope="session")
def planar_model():
    """Beta(2.5, 2.5)-parameterized planar Gaussian used across the suite."""
    return beta_gaussian_model(2.5)


@pytest.fixture(scope="session")
def ball():
    return norm_ball_constraint(1)


@pytest.fixture(scope="session")
def mixture_model():
    return two_component_mixture()


@pytest.fixture(scope="session")
def mixture_half_space():
    return half_space_constraint([1.0, 0.5], [1.0], 3.0)


def closed_form_radius(x_norm, c, v1, v2):
    """Independent oracle for the planar example's ray radius."""
    return -c * v2 + np.sqrt(x_norm ** 2 + 2.0 - (c * v1) ** 2)
