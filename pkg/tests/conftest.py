
import numpy as np
import pytest

from cracktrack.crack_geometry import CrackSpec
from cracktrack.mesh_fem import mesh_slit_ball
from cracktrack.sphere_spectrum import SlitSphereSpectrum
from cracktrack.straightening import PotentialSpec, build_bundle

# Coarse slit ball: radius 0.5, outer size 0.125, two graded shells. The radii it resolves
# are 0.5 and 0.25 (and, in general, r >= 4 h_local(r)).
COARSE_RADIUS = 0.5
COARSE_H = 0.125
COARSE_LEVELS = 2


@pytest.fixture(scope="session")
def coarse_mesh():
    return mesh_slit_ball(COARSE_RADIUS, COARSE_H, levels=COARSE_LEVELS)


@pytest.fixture(scope="session")
def flat_crack():
    return CrackSpec("flat")


@pytest.fixture(scope="session")
def parabola_crack():
    return CrackSpec("radial_quadratic", (0.1,))


@pytest.fixture(scope="session")
def flat_bundle(flat_crack):
    return build_bundle(flat_crack)


@pytest.fixture(scope="session")
def parabola_bundle(parabola_crack):
    return build_bundle(parabola_crack)


@pytest.fixture(scope="session")
def zero_potential():
    return PotentialSpec.zero()


@pytest.fixture(scope="session")
def cubic_potential():
    """f(x) = |x|, mode a1 with delta = 3."""
    return PotentialSpec(mode="a1", delta=3.0, amplitude=1.0)


@pytest.fixture(scope="session")
def coarse_spectrum():
    return SlitSphereSpectrum.compute(h=0.2, count=6, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
