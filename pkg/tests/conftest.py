import numpy as np
import pytest

from reeb_atlas.contact import StarForm
from reeb_atlas.orbits import find_orbits, refine_orbit
from reeb_atlas.sections import _DiskIndex, builtin_disk

R2SQ = np.sqrt(2.0)


@pytest.fixture(scope="session")
def ell():
    return StarForm.ellipsoid(1.0, R2SQ, name="irrational-ellipsoid")


@pytest.fixture(scope="session")
def round_form():
    return StarForm.round_sphere()


@pytest.fixture(scope="session")
def gamma1(ell):
    return refine_orbit(ell, np.array([1.0, 0.0, 0.0, 0.0]), np.pi)


@pytest.fixture(scope="session")
def gamma2(ell):
    return refine_orbit(ell, np.array([0.0, 0.0, R2SQ ** 0.5, 0.0]),
                        np.pi * R2SQ)


@pytest.fixture(scope="session")
def db10(ell):
    return find_orbits(ell, 10.0, n_seeds=256)


@pytest.fixture(scope="session")
def db20(ell):
    return find_orbits(ell, 20.0, n_seeds=256)


@pytest.fixture(scope="session")
def page(ell, gamma1):
    disk = builtin_disk(ell, gamma1, theta0=0.0)
    disk.orbit_ref = 0
    return disk


@pytest.fixture(scope="session")
def page_index(ell, page):
    return _DiskIndex(ell, page)


@pytest.fixture(scope="session")
def near_ell_weighted():
    """Polynomial weight whose 2-jet along the planar circle matches the
    irrational ellipsoid, so the circle keeps period pi and index 3."""
    c = 1.0 - 1.0 / np.sqrt(2.0)
    mons = [
        ((0, 0, 0, 0), 1.0),
        ((0, 0, 2, 0), c), ((0, 0, 0, 2), c),
        ((0, 0, 4, 0), c * c), ((0, 0, 0, 4), c * c), ((0, 0, 2, 2), 2 * c * c),
    ]
    return StarForm.weighted(mons, name="near-ellipsoid")


@pytest.fixture(scope="session")
def perturbed_form(near_ell_weighted):
    """Degree-4 monomial perturbation at 1e-2 breaking the plane symmetry."""
    mons = [(tuple(e), float(c)) for e, c in
            zip(near_ell_weighted.exps, near_ell_weighted.coeffs)]
    mons.append(((3, 0, 1, 0), 1e-2))
    return StarForm.weighted(mons, name="perturbed-ellipsoid")
