import numpy as np
import pytest

from reeb_atlas import sections as sec
from reeb_atlas.contact import StarForm
from reeb_atlas.errors import DomainError, GridQualityError, UnsupportedFormError
from reeb_atlas.linking import self_linking
from reeb_atlas.orbits import refine_orbit

SQ2 = np.sqrt(2.0)
T_RETURN = np.pi * SQ2  # first-return time of the standard page
BUDGET = 10 * np.pi * SQ2


def twisted_page(form, orbit, amplitude=1.0, n_r=128, n_theta=256):
    """Page with an angular twist large enough to force Reeb tangencies."""
    disk = sec.builtin_disk(form, orbit, theta0=0.0, n_r=n_r, n_theta=n_theta)
    s = np.linspace(0.0, 1.0, n_r + 1)[:, None]
    t = (np.arange(n_theta) / n_theta)[None, :]
    bump = 16.0 * s ** 2 * (1 - s) ** 2
    phase = amplitude * bump * np.sin(2 * np.pi * t)
    z2 = disk.samples[:, :, 2] + 1j * disk.samples[:, :, 3]
    z2 = np.abs(z2) * np.exp(1j * phase)
    out = disk.samples.copy()
    out[:, :, 2] = z2.real
    out[:, :, 3] = z2.imag
    return sec.DiskGrid(samples=out)


def test_builtin_disk_construction(ell, gamma1, page):
    # all samples on the page have arg z2 = 0: Im z2 == 0, Re z2 >= 0
    assert np.abs(page.samples[:, :, 3]).max() == 0.0
    assert page.samples[:-1, :, 2].min() > 0.0
    assert np.abs(page.samples[-1, :, 2:]).max() < 1e-15  # boundary in plane
    assert np.abs(ell.H_batch(page.samples.reshape(-1, 4)) - 1.0).max() < 1e-12
    page.validate(ell, gamma1)


def test_builtin_disk_embedded_at_64(ell, gamma1):
    # the 64x256 grid is embedded even though its boundary chord bound fails
    d64 = sec.builtin_disk(ell, gamma1, n_r=64)
    from scipy.spatial import cKDTree

    pts = d64.samples[1:].reshape(-1, 4)
    pairs = cKDTree(pts).query_pairs(1e-4)
    nt = d64.n_theta
    for a, b in pairs:
        ia, ja = divmod(a, nt)
        ib, jb = divmod(b, nt)
        dj = min((ja - jb) % nt, (jb - ja) % nt)
        assert abs(ia - ib) <= 1 and dj <= 1


def test_builtin_disk_requires_ellipsoid(near_ell_weighted):
    orbit = refine_orbit(near_ell_weighted, np.array([1.0, 0, 0, 0]), np.pi)
    with pytest.raises(UnsupportedFormError):
        sec.builtin_disk(near_ell_weighted, orbit)


def test_builtin_disk_other_circle(ell, gamma2):
    disk = sec.builtin_disk(ell, gamma2, n_r=128)
    disk.validate(ell, gamma2)
    md, sc = sec.transversality_check(ell, disk)
    assert sc and md > 0.1


def test_transversality(ell, page):
    md, sign_constant = sec.transversality_check(ell, page)
    assert sign_constant
    assert md > 0.1


def test_transversality_collar(ell, page):
    md, sc = sec.transversality_check(ell, page, rows=(page.n_r - 12, page.n_r))
    assert sc and md > 0.1


def test_tangent_fixture_breaks_sign_constancy(ell, gamma1):
    disk = twisted_page(ell, gamma1, amplitude=1.0)
    _, sign_constant = sec.transversality_check(ell, disk)
    assert not sign_constant


def test_characteristic_foliation(ell, page, gamma1):
    _, sings, wind = sec.characteristic_field(ell, page)
    assert wind == 1
    assert len(sings) == 1
    s0 = sings[0]
    assert s0.kind == "elliptic"
    assert s0.nicely_elliptic
    assert s0.sign == 1
    assert s0.s < 1e-6  # at the disk center
    assert sum(s.index for s in sings) == wind
    # the two self-linking routes agree: pushoff versus minus the winding
    assert self_linking(ell, gamma1) == -wind


def test_boundary_orientation_enforced(ell, page):
    flipped = sec.DiskGrid(samples=page.samples[:, ::-1, :].copy())
    with pytest.raises(DomainError):
        sec.characteristic_field(ell, flipped)


def test_return_map(ell, page, page_index):
    seeds = sec.disk_seeds(24)
    recs = sec.return_map(ell, page, seeds, t_budget=BUDGET, index=page_index)
    assert all(not r["timeout"] for r in recs)
    for r in recs:
        assert abs(r["return_time"] - T_RETURN) < 1e-6


def test_return_map_backward_and_inverse(ell, page, page_index):
    seeds = sec.disk_seeds(6)
    back = sec.return_map(ell, page, seeds, t_budget=BUDGET,
                          direction="backward", index=page_index)
    assert all(not r["timeout"] for r in back)
    # chain the actual return points forward: flow invertibility
    pts = np.array([r["return_point"] for r in back])
    fwd = sec.return_map_points(ell, page, pts, t_budget=BUDGET,
                                index=page_index)
    for (s0, t0), hit in zip(seeds, fwd):
        assert hit is not None
        x0 = sec._grid_point(page, s0, t0)
        x0 = x0 / np.sqrt(ell.H(x0))
        assert np.linalg.norm(hit[0] - x0) < 1e-6


def test_seed_on_binding_rejected(ell, page, page_index):
    with pytest.raises(DomainError):
        sec.return_map(ell, page, [(1.0, 0.2)], t_budget=BUDGET,
                       index=page_index)


def test_verify_global_section_small(ell, page):
    verdict = sec.verify_global_section(ell, page, n_seeds=20, t_budget=BUDGET)
    assert verdict["passes"]
    assert verdict["timeouts_forward"] == 0
    assert verdict["timeouts_backward"] == 0


def test_verify_budget_sensitivity(ell, page):
    verdict = sec.verify_global_section(ell, page, n_seeds=6, t_budget=2.0)
    assert not verdict["passes"]
    assert verdict["timeouts_forward"] == 6
    assert verdict["budget_note"] is not None


def test_verify_tangent_fixture_fails(ell, gamma1):
    disk = twisted_page(ell, gamma1, amplitude=1.0)
    verdict = sec.verify_global_section(ell, disk, n_seeds=4, t_budget=BUDGET)
    assert not verdict["passes"]
    assert not verdict["sign_constant"]


def test_disk_area(ell, page):
    area, boundary = sec.disk_area(ell, page)
    assert abs(area - np.pi) / np.pi < 1e-2
    assert abs(area - boundary) / abs(boundary) < 1e-2


def test_disk_area_additivity_and_half(ell, page):
    n_r = page.n_r
    i_half = round(n_r / SQ2)  # the inner region holds half the area
    inner, ring = sec.disk_area(ell, page, rows=(0, i_half))
    outer, _ = sec.disk_area(ell, page, rows=(i_half, n_r))
    total, _ = sec.disk_area(ell, page)
    assert abs(total - inner - outer) < 1e-12
    assert inner == pytest.approx(sec.ring_action(page, i_half), rel=1e-9)
    assert inner == pytest.approx(0.5 * np.pi, rel=5e-2)


def test_round_sphere_page_area(round_form):
    orbit = refine_orbit(round_form, np.array([1.0, 0, 0, 0]), np.pi)
    disk = sec.builtin_disk(round_form, orbit)
    area, _ = sec.disk_area(round_form, disk, check=True)
    assert abs(area - np.pi) / np.pi < 1e-2


def test_return_map_preserves_cell_actions(ell, page, page_index):
    n_r, n_t = page.n_r, page.n_theta

    def cell_polygon(i, j, m=6):
        pts = []
        for k in range(m):
            pts.append(((i + k / m) / n_r, j / n_t))
        for k in range(m):
            pts.append(((i + 1) / n_r, (j + k / m) / n_t))
        for k in range(m):
            pts.append(((i + 1 - k / m) / n_r, (j + 1) / n_t))
        for k in range(m):
            pts.append((i / n_r, (j + 1 - k / m) / n_t))
        poly = np.array([sec._grid_point(page, s, t) for s, t in pts])
        return poly / np.sqrt(ell.H_batch(poly))[:, None]

    for (ci, cj) in [(40, 10), (64, 100), (100, 200)]:
        poly = cell_polygon(ci, cj)
        a0 = sec.polygon_action(poly)
        hits = sec.return_map_points(ell, page, poly, t_budget=BUDGET,
                                     index=page_index)
        assert all(h is not None for h in hits)
        a1 = sec.polygon_action(np.array([h[0] for h in hits]))
        assert abs(a1 - a0) / abs(a0) < 0.02


def test_disk_save_load(tmp_path, ell, gamma1, page):
    path = tmp_path / "disk.json"
    sec.save_disk(page, path)
    again = sec.load_disk(path)
    assert again.n_r == page.n_r and again.n_theta == page.n_theta
    assert np.abs(again.samples - page.samples).max() == 0.0  # 17 digits round-trip
    again.validate(ell, gamma1)


def test_return_csv(tmp_path, ell, page, page_index):
    recs = sec.return_map(ell, page, sec.disk_seeds(3), t_budget=BUDGET,
                          index=page_index)
    recs.append({"seed_s": 0.5, "seed_t": 0.5, "timeout": True})
    path = tmp_path / "returns.csv"
    sec.write_return_csv(path, recs)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "seed_s,seed_t,ret_s,ret_t,time"
    assert len(lines) == 5
    assert lines[-1].endswith(",,,")
