import numpy as np
import pytest

from reeb_atlas import cz
from reeb_atlas.errors import (DegenerateOrbitError, DomainError,
                               InconsistencyError)
from reeb_atlas.orbits import refine_orbit

RHO1 = 1.0 + 1.0 / np.sqrt(2.0)
RHO2 = 1.0 + np.sqrt(2.0)


def rotation(theta):
    return np.array([[np.cos(theta), -np.sin(theta)],
                     [np.sin(theta), np.cos(theta)]])


# ---------------------------------------------------------------------------
# trivialized paths
# ---------------------------------------------------------------------------

def test_gamma1_path_is_pure_rotation(ell, gamma1):
    path = cz.trivialized_path(ell, gamma1)
    worst = 0.0
    for t, m in zip(path.times, path.mats):
        worst = max(worst, np.abs(m - rotation(2 * np.pi * RHO1 * t)).max())
    assert worst < 1e-6


def test_round_sphere_path_degenerate_endpoint(round_form):
    orbit = refine_orbit(round_form, np.array([1.0, 0.0, 0.0, 0.0]), np.pi)
    assert orbit.degenerate
    path = cz.trivialized_path(round_form, orbit)
    assert np.abs(path.endpoint - np.eye(2)).max() < 1e-6
    assert not path.nondegenerate(tol=1e-8)


def test_iterate_path_is_concatenation(ell, gamma1):
    p1 = cz.trivialized_path(ell, gamma1, n_min=256)
    p2 = cz.trivialized_path(ell, gamma1.iterate(2), n_min=512)
    synth = cz.path_power(p1, 2)
    assert np.abs(synth.mats - p2.mats).max() < 1e-5


# ---------------------------------------------------------------------------
# rotation intervals and the geometric index
# ---------------------------------------------------------------------------

def test_pure_rotation_half_turn():
    iv = cz.rotation_interval(cz.pure_rotation_path(0.5))
    assert iv.lo == pytest.approx(0.5, abs=1e-9)
    assert iv.hi == pytest.approx(0.5, abs=1e-9)
    assert cz.cz_from_interval(iv) == (1, False)


def test_gamma1_interval(ell, gamma1):
    iv = cz.rotation_interval(cz.trivialized_path(ell, gamma1))
    assert iv.lo == pytest.approx(RHO1, abs=1e-6)
    assert iv.length < 1e-6
    assert cz.cz_from_interval(iv) == (3, False)


def test_hyperbolic_interval_contains_zero():
    iv = cz.rotation_interval(cz.hyperbolic_path(1.0))
    assert iv.lo <= 0.0 <= iv.hi
    assert iv.length < 0.5
    assert cz.cz_from_interval(iv)[0] == 0


def test_interval_branches():
    make = lambda lo, hi: cz.RotationInterval(
        lo=lo, hi=hi,
        degenerate_margin=min(abs(lo - round(lo)), abs(hi - round(hi))))
    assert cz.cz_from_interval(make(1.69, 1.72))[0] == 3
    assert cz.cz_from_interval(make(-0.1, 0.1))[0] == 0
    mu, flag = cz.cz_from_interval(make(0.99997, 1.00002))
    assert mu == 2 and flag  # endpoint within 1e-4 of an integer
    with pytest.raises(InconsistencyError):
        cz.cz_from_interval(make(0.0, 0.6))


def test_maslov_loop():
    assert cz.maslov_loop(cz.pure_rotation_path(1.0)) == 1
    const = cz.SymplecticPath(times=np.linspace(0, 1, 65),
                              mats=np.tile(np.eye(2), (65, 1, 1)))
    assert cz.maslov_loop(const) == 0
    with pytest.raises(DomainError):
        cz.maslov_loop(cz.pure_rotation_path(0.25))


def test_axioms_sample():
    rng = np.random.default_rng(123)
    for _ in range(20):
        phi = cz.random_nondegenerate_path(rng)
        m = int(rng.integers(-2, 3))
        psi = cz.random_loop(rng, m, n=phi.n_steps)
        iv = cz.rotation_interval(phi)
        assert iv.length < 0.5
        mu, _ = cz.cz_from_interval(iv)
        mu_prod, _ = cz.cz_from_interval(
            cz.rotation_interval(cz.compose_paths(psi, phi)))
        mu_inv, _ = cz.cz_from_interval(
            cz.rotation_interval(cz.invert_path(phi)))
        assert mu_prod == 2 * m + mu
        assert mu_inv == -mu
        assert cz.maslov_loop(psi) == m


def test_homotopy_stability():
    rng = np.random.default_rng(77)
    for _ in range(10):
        phi = cz.random_nondegenerate_path(rng)
        mu, _ = cz.cz_from_interval(cz.rotation_interval(phi))
        bump = (np.sin(np.pi * phi.times) ** 2)[:, None, None]
        g = 3e-4 * np.array([[1.0, 0.5], [0.5, -1.0]])
        pert = phi.mats @ (np.eye(2) + bump * g)
        pert /= np.sqrt(np.linalg.det(pert))[:, None, None]
        assert np.abs(pert - phi.mats).max() <= 1e-3
        phi_p = cz.SymplecticPath(times=phi.times, mats=pert)
        assert phi_p.nondegenerate(tol=1e-6)
        mu_p, _ = cz.cz_from_interval(cz.rotation_interval(phi_p))
        assert mu_p == mu


# ---------------------------------------------------------------------------
# spectral route
# ---------------------------------------------------------------------------

def test_gamma1_spectrum_against_fourier_oracle(ell, gamma1):
    # constant-coefficient operator: eigenvalues 2 pi (k - rho), winding k
    data = cz.asymptotic_spectrum(ell, gamma1, n_grid=1024)
    assert data.wind_nu_neg == 1
    assert data.p == 1
    assert data.nu_neg == pytest.approx(2 * np.pi * (1 - RHO1), rel=1e-3)
    assert data.nu_pos == pytest.approx(2 * np.pi * (2 - RHO1), rel=1e-3)
    for nu, w in zip(data.eigenvalues, data.windings):
        assert nu == pytest.approx(2 * np.pi * (w - RHO1), rel=2e-3)
    assert cz.cz_from_spectrum(data) == 3


def test_gamma2_spectrum(ell, gamma2):
    data = cz.asymptotic_spectrum(ell, gamma2, n_grid=1024)
    assert data.wind_nu_neg == 2
    assert data.p == 1
    assert cz.cz_from_spectrum(data) == 5


def test_winding_pairing_and_monotonicity(ell, gamma1):
    data = cz.asymptotic_spectrum(ell, gamma1, n_grid=1024)
    census, monotone = cz.winding_census(data)
    assert monotone
    assert len(census) >= 7  # at least |k| <= 3 around the relevant winding
    assert all(count == 2 for count in census.values())


def test_spectrum_refuses_degenerate(round_form):
    orbit = refine_orbit(round_form, np.array([1.0, 0.0, 0.0, 0.0]), np.pi)
    with pytest.raises(DegenerateOrbitError):
        cz.asymptotic_spectrum(round_form, orbit)


def test_methods_agree_on_census(ell, db10):
    for orbit in db10.orbits:
        rep = cz.orbit_index_report(ell, orbit, n_grid=512)
        assert not rep["degenerate_flags"]
        assert rep["mu_geometric"] == rep["mu_spectral"]


# ---------------------------------------------------------------------------
# iterates
# ---------------------------------------------------------------------------

def test_iterate_tables(ell, gamma1, gamma2):
    tab1, flags1 = cz.iterate_index_table(ell, gamma1, 5)
    assert flags1 == []
    assert tab1 == [(k, 2 * k + 2 * int(np.floor(k / np.sqrt(2))) + 1)
                    for k in range(1, 6)]
    assert [m for _, m in tab1] == [3, 7, 11, 13, 17]
    tab2, flags2 = cz.iterate_index_table(ell, gamma2, 3)
    assert flags2 == []
    assert [m for _, m in tab2] == [5, 9, 15]


def test_hyperbolic_iterates_stay_nonpositive():
    # model check of the iteration inequality mu(P^k) <= 0 => mu(P^l) <= 0
    base = cz.hyperbolic_path(0.8, n=512)
    mus = []
    for k in range(1, 4):
        iv = cz.rotation_interval(cz.path_power(base, k))
        mus.append(cz.cz_from_interval(iv)[0])
    assert all(m <= 0 for m in mus)


def test_iterate_table_requires_prime(ell, gamma1):
    with pytest.raises(DomainError):
        cz.iterate_index_table(ell, gamma1.iterate(2), 2)


def test_index_report_round_sphere_flags(round_form):
    orbit = refine_orbit(round_form, np.array([1.0, 0.0, 0.0, 0.0]), np.pi)
    rep = cz.orbit_index_report(round_form, orbit)
    assert rep["mu_geometric"] is None
    assert rep["mu_spectral"] is None
    assert rep["degenerate_flags"]
