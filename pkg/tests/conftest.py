import numpy as np
import pytest

from rbfdeform import BoundarySet, SelectionConfig
from rbfdeform.deformers import BendTwistParams, bend_twist
from rbfdeform.synthetic import swept_wing_case


def make_boundary(points, disp=None):
    points = np.asarray(points, dtype=float)
    if disp is None:
        disp = np.zeros_like(points)
    return BoundarySet(
        indices=np.arange(len(points)), points=points, disp=np.asarray(disp, float)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def hemisphere():
    """200 boundary nodes on a hemisphere with a rigid translation."""
    rng = np.random.default_rng(7)
    u = rng.uniform(0.0, 2.0 * np.pi, 200)
    v = rng.uniform(0.0, 1.0, 200)
    points = np.column_stack(
        [np.cos(u) * np.sqrt(1 - v**2), np.sin(u) * np.sqrt(1 - v**2), v]
    )
    disp = np.tile([0.1, -0.05, 0.02], (200, 1))
    return make_boundary(points, disp)


@pytest.fixture(scope="session")
def small_wing():
    """A small analog of the desk case: mesh, boundary set and config."""
    mesh = swept_wing_case(n_span=12, n_section=24, n_layers=2, box_n=3)
    params = BendTwistParams(b=1.0, theta_m=30.0, x0=0.25, y0=0.0)
    disp = bend_twist(mesh.boundary_points(), params)
    boundary = mesh.boundary_set(disp)
    config = SelectionConfig(radius=7.0, tol=1e-6, max_supports=len(boundary), seed=0)
    return mesh, boundary, config
