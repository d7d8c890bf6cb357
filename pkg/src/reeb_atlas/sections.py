"""Candidate spanning disks and their verification as global sections.

A disk is a structured polar grid of points on the energy level whose
boundary row traces a periodic orbit.  The module checks transversality of
the interior to the Reeb field, computes the characteristic foliation (the
line field cut out on the disk by the contact planes) with its singularity
classification and boundary winding, runs first-return maps with bisection
event detection against per-cell tangent-plane defining functions, and
integrates the area form.  All verification is sampling-based evidence,
never proof.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .contact import (OMEGA, lambda0, omega_form, project_to_sigma,
                      reeb_vector, xi_frame)
from .errors import (DomainError, GridQualityError, ResolutionError,
                     UnsupportedFormError)
from .flow import integrate_flow
from .orbits import orbit_trace

__all__ = [
    "DiskGrid",
    "FoliationSingularity",
    "builtin_disk",
    "transversality_check",
    "characteristic_field",
    "return_map",
    "return_map_points",
    "verify_global_section",
    "disk_area",
    "ring_action",
    "polygon_action",
    "disk_seeds",
    "save_disk",
    "load_disk",
    "write_return_csv",
]


def _cross4(a, b, c):
    """Vector orthogonal to a, b, c in R^4 (generalized cross product)."""
    M = np.stack([a, b, c])
    out = np.empty(4)
    sign = 1.0
    for k in range(4):
        cols = [c for c in range(4) if c != k]
        out[k] = sign * np.linalg.det(M[:, cols])
        sign = -sign
    return out


@dataclass
class DiskGrid:
    """Polar grid of points on the level spanning a periodic orbit.

    ``samples[i, j]`` is the point at radial index i (0 = collapsed center,
    n_r = boundary) and angular index j (cyclic).  The boundary row must
    follow the orbit trace in the Reeb direction.
    """

    samples: np.ndarray  # (n_r + 1, n_theta, 4)
    orbit_ref: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 3 or self.samples.shape[2] != 4:
            raise DomainError("disk samples must be (n_r+1, n_theta, 4)")

    @property
    def n_r(self):
        return self.samples.shape[0] - 1

    @property
    def n_theta(self):
        return self.samples.shape[1]

    @property
    def boundary(self):
        return self.samples[-1]

    @property
    def center(self):
        return self.samples[0, 0]

    def diameter(self):
        pts = self.samples.reshape(-1, 4)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def max_cell_size(self):
        s = self.samples
        dr = np.linalg.norm(s[1:] - s[:-1], axis=2).max()
        dt = np.linalg.norm(np.roll(s, -1, axis=1) - s, axis=2)[1:].max()
        return float(max(dr, dt))

    def validate(self, form=None, orbit=None, coincidence_tol=1e-4,
                 boundary_tol=1e-6):
        s = self.samples
        if np.linalg.norm(s[0] - s[0, 0], axis=1).max() > 1e-12:
            raise GridQualityError("center row must collapse to one point")
        if self.max_cell_size() >= 0.05 * self.diameter():
            raise GridQualityError("adjacent samples too far apart")
        # embeddedness: no near-coincidences besides grid neighbors
        pts = s[1:].reshape(-1, 4)
        tree = cKDTree(pts)
        nt = self.n_theta
        for a, b in tree.query_pairs(coincidence_tol):
            ia, ja = divmod(a, nt)
            ib, jb = divmod(b, nt)
            dj = min((ja - jb) % nt, (jb - ja) % nt)
            if abs(ia - ib) <= 1 and dj <= 1:
                continue
            raise GridQualityError(
                f"grid not embedded: rows {ia + 1},{ib + 1} nearly coincide"
            )
        if form is not None and orbit is not None:
            tr = orbit_trace(form, orbit, n=self.n_theta, cover="geometric")
            gap = np.linalg.norm(self.boundary - tr, axis=1).max()
            if gap > boundary_tol:
                raise GridQualityError(
                    f"boundary row deviates from the orbit trace by {gap:.2e}"
                )
        return self


@dataclass
class FoliationSingularity:
    """Zero of the characteristic vector field on a spanning disk."""

    s: float
    t: float
    point: np.ndarray
    kind: str  # "elliptic" | "hyperbolic"
    nicely_elliptic: bool
    sign: int          # orientation match of disk and contact plane
    index: int         # Poincare-Hopf index, sign(det DV)
    eigenvalues: tuple


def builtin_disk(form, orbit, theta0=0.0, n_r=128, n_theta=256):
    """The page {arg z2 = theta0} spanning a coordinate-plane orbit of an
    exact ellipsoid (or the symmetric page when the orbit is the other
    circle).  Only exists for the ellipsoid encoding.

    The default radial resolution keeps the steepest boundary step of the
    sqrt profile below the grid chord bound.
    """
    if form.kind != "ellipsoid":
        raise UnsupportedFormError(
            "builtin pages exist only for exact ellipsoids; supply a disk file"
        )
    if orbit.multiplicity != 1:
        raise DomainError("the page boundary must be a simply covered orbit")
    x0 = orbit.x0
    if np.hypot(x0[2], x0[3]) < 1e-9:
        plane = 0  # boundary in the (q1, p1) plane
    elif np.hypot(x0[0], x0[1]) < 1e-9:
        plane = 1
    else:
        raise DomainError("orbit is not one of the coordinate-plane circles")
    rb = np.sqrt(form.r_squared[plane])      # boundary circle radius
    rc = np.sqrt(form.r_squared[1 - plane])  # transverse radius
    phi0 = np.arctan2(x0[2 * plane + 1], x0[2 * plane])
    ss = np.linspace(0.0, 1.0, n_r + 1)
    tt = np.arange(n_theta) / n_theta
    ang = phi0 + 2.0 * np.pi * tt
    zb = rb * np.stack([np.cos(ang), np.sin(ang)], axis=-1)  # (n_theta, 2)
    samples = np.empty((n_r + 1, n_theta, 4))
    for i, s in enumerate(ss):
        height = rc * np.sqrt(max(0.0, 1.0 - s * s))
        zc = height * np.array([np.cos(theta0), np.sin(theta0)])
        if plane == 0:
            samples[i, :, 0:2] = s * zb
            samples[i, :, 2:4] = zc
        else:
            samples[i, :, 2:4] = s * zb
            samples[i, :, 0:2] = zc
    return DiskGrid(samples=samples)


# ---------------------------------------------------------------------------
# transversality of the interior to the Reeb field
# ---------------------------------------------------------------------------

def transversality_check(form, disk, rows=None):
    """Minimum normalized transversality determinant over interior cells.

    Per cell the oriented volume det[grad H, R, d_s u, d_t u] is divided by
    the cell's tangent area, giving the normal speed of the Reeb field
    through the disk.  Returns (min |normalized det|, sign constant?).
    ``rows=(i0, i1)`` restricts to a radial band (e.g. a boundary collar).
    """
    s = disk.samples
    i0, i1 = (0, disk.n_r) if rows is None else rows
    sub = s[i0:i1 + 1]
    nxt = np.roll(sub, -1, axis=1)
    a = 0.5 * ((sub[1:] - sub[:-1]) + (nxt[1:] - nxt[:-1]))      # radial edge
    b = 0.5 * ((nxt[:-1] - sub[:-1]) + (nxt[1:] - sub[1:]))      # angular edge
    centers = 0.25 * (sub[:-1] + sub[1:] + nxt[:-1] + nxt[1:])
    flat_c = centers.reshape(-1, 4)
    flat_a = a.reshape(-1, 4)
    flat_b = b.reshape(-1, 4)
    vals = np.empty(len(flat_c))
    for k in range(len(flat_c)):
        x = project_to_sigma(form, flat_c[k])
        g = form.grad_H(x)
        nu = g / np.linalg.norm(g)
        R = reeb_vector(form, x, check=False)
        at = flat_a[k] - (flat_a[k] @ nu) * nu
        bt = flat_b[k] - (flat_b[k] @ nu) * nu
        area2 = (at @ at) * (bt @ bt) - (at @ bt) ** 2
        if area2 <= 1e-24:
            raise GridQualityError(f"degenerate cell at flat index {k}")
        det = np.linalg.det(np.stack([nu, R, flat_a[k], flat_b[k]]))
        vals[k] = det / np.sqrt(area2)
    sign_constant = bool(np.all(vals > 0) or np.all(vals < 0))
    return float(np.abs(vals).min()), sign_constant


# ---------------------------------------------------------------------------
# characteristic foliation
# ---------------------------------------------------------------------------

def _node_tangents(disk):
    """Radial/angular tangent vectors at grid nodes (rows 1..n_r)."""
    s = disk.samples
    n_r = disk.n_r
    ds = 1.0 / n_r
    dt = 1.0 / disk.n_theta
    d_s = np.empty_like(s[1:])
    d_s[:-1] = (s[2:] - s[:-2]) / (2 * ds)
    d_s[-1] = (s[-1] - s[-2]) / ds
    d_t = (np.roll(s[1:], -1, axis=1) - np.roll(s[1:], 1, axis=1)) / (2 * dt)
    return d_s, d_t


def _node_frame_field(form, disk):
    """Normals (within the level) and contact frames at rows 1..n_r."""
    d_s, d_t = _node_tangents(disk)
    s = disk.samples[1:]
    shape = s.shape[:2]
    normals = np.empty_like(s)
    vfield = np.empty(shape + (2,))
    for i in range(shape[0]):
        for j in range(shape[1]):
            x = s[i, j]
            g = form.grad_H(x)
            nu = g / np.linalg.norm(g)
            at = d_s[i, j] - (d_s[i, j] @ nu) * nu
            bt = d_t[i, j] - (d_t[i, j] @ nu) * nu
            n = _cross4(at, bt, nu)
            nn = np.linalg.norm(n)
            if nn < 1e-12:
                raise GridQualityError(f"degenerate tangent plane at node {(i + 1, j)}")
            n /= nn
            normals[i, j] = n
            fr = xi_frame(form, x)
            # i_V lambda = 0 and i_V dlambda = dG - (i_R dG) lambda give, in
            # frame coordinates, V = (n.e2, -n.e1)
            vfield[i, j, 0] = n @ fr.e2
            vfield[i, j, 1] = -(n @ fr.e1)
    return normals, vfield


def _winding_of(points2):
    ang = np.arctan2(points2[:, 1], points2[:, 0])
    ang = np.append(ang, ang[0])
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    if np.abs(d).max() > 0.5 * np.pi:
        raise ResolutionError("vector-field winding under-resolved on the grid")
    total = d.sum() / (2 * np.pi)
    k = round(total)
    if abs(total - k) > 1e-6:
        raise ResolutionError(f"winding {total:.6f} did not close to an integer")
    return int(k)


def _cell_winding(v00, v01, v11, v10):
    ang = np.arctan2([v00[1], v01[1], v11[1], v10[1], v00[1]],
                     [v00[0], v01[0], v11[0], v10[0], v00[0]])
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return d.sum() / (2 * np.pi)


def _disk_chart(disk, si, ti):
    """Cartesian chart coordinates (X, Y) = s (cos 2 pi t, sin 2 pi t)."""
    return np.array([si * np.cos(2 * np.pi * ti), si * np.sin(2 * np.pi * ti)])


def _classify_zero(form, disk, vfield, s0, t0):
    """Least-squares linearization of the field around a zero, classified
    through its eigenvalues as an endomorphism of the contact plane."""
    n_r, n_t = disk.n_r, disk.n_theta
    X0 = _disk_chart(disk, s0, t0)
    rows = []
    rhs = []
    radius = max(2.5 / n_r, 0.08)
    for i in range(1, n_r + 1):
        si = i / n_r
        if abs(si - s0) > radius:
            continue
        for j in range(n_t):
            tj = j / n_t
            Xj = _disk_chart(disk, si, tj)
            d = Xj - X0
            if np.linalg.norm(d) > radius:
                continue
            rows.append([1.0, 0.0, d[0], d[1], 0.0, 0.0])
            rhs.append(vfield[i - 1, j, 0])
            rows.append([0.0, 1.0, 0.0, 0.0, d[0], d[1]])
            rhs.append(vfield[i - 1, j, 1])
    if len(rows) < 12:
        raise ResolutionError("too few grid nodes near a singularity")
    coef, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    A = np.array([[coef[2], coef[3]], [coef[4], coef[5]]])

    # chart tangents at the zero, in frame coordinates
    point = _grid_point(disk, s0, t0)
    x = project_to_sigma(form, point)
    fr = xi_frame(form, x)
    R = reeb_vector(form, x, check=False)
    gH = form.grad_H(x)
    Y = 0.5 * x

    def xi_coords(v):
        pv = v - (gH @ v) * Y - omega_form(Y, v) * R
        return fr.coords(pv)

    eX, eY = _chart_tangents(disk, s0, t0)
    P = np.stack([xi_coords(eX), xi_coords(eY)], axis=1)
    dV = A @ np.linalg.inv(P)
    ev = np.linalg.eigvals(dV)
    det = float(np.real(ev[0] * ev[1]))
    kind = "elliptic" if det > 0 else "hyperbolic"
    real_ev = bool(np.abs(ev.imag).max() < 1e-8 * max(1.0, np.abs(ev).max()))
    sign = 1 if omega_form(eX - (gH @ eX) * Y - lambda0(x, eX) * R,
                           eY - (gH @ eY) * Y - lambda0(x, eY) * R) > 0 else -1
    index = 1 if det > 0 else -1
    return FoliationSingularity(
        s=float(s0), t=float(t0), point=x, kind=kind,
        nicely_elliptic=(kind == "elliptic" and real_ev),
        sign=sign, index=index,
        eigenvalues=(complex(ev[0]), complex(ev[1])),
    )


def _grid_point(disk, si, ti):
    """Bilinear interpolation of the grid at continuous (s, t)."""
    n_r, n_t = disk.n_r, disk.n_theta
    fs = np.clip(si, 0.0, 1.0) * n_r
    i = min(int(fs), n_r - 1)
    al = fs - i
    ft = (ti % 1.0) * n_t
    j = int(ft) % n_t
    be = ft - j
    jn = (j + 1) % n_t
    s = disk.samples
    return ((1 - al) * (1 - be) * s[i, j] + al * (1 - be) * s[i + 1, j]
            + (1 - al) * be * s[i, jn] + al * be * s[i + 1, jn])


def _chart_tangents(disk, si, ti, h=1e-3):
    """Tangent vectors of the disk along the Cartesian chart directions."""
    X0 = _disk_chart(disk, si, ti)

    def at(X):
        s = np.linalg.norm(X)
        t = np.arctan2(X[1], X[0]) / (2 * np.pi)
        return _grid_point(disk, s, t)

    eX = (at(X0 + [h, 0.0]) - at(X0 - [h, 0.0])) / (2 * h)
    eY = (at(X0 + [0.0, h]) - at(X0 - [0.0, h])) / (2 * h)
    return eX, eY


def characteristic_field(form, disk):
    """Characteristic vector field of the disk, its singularities, and the
    winding of the field along the boundary against the global frame.

    Returns (vfield, singularities, boundary_winding) where ``vfield`` holds
    frame coordinates of the field at grid rows 1..n_r.
    """
    _, vfield = _node_frame_field(form, disk)
    n_r, n_t = disk.n_r, disk.n_theta

    # boundary must run along the Reeb direction for the orientation
    # conventions used in the winding and sign computations
    bd = disk.boundary
    tangent = np.roll(bd, -1, axis=0) - bd
    R0 = reeb_vector(form, project_to_sigma(form, bd[0]), check=False)
    if tangent[0] @ R0 <= 0:
        raise DomainError("boundary row must traverse the orbit along the flow")

    boundary_winding = _winding_of(vfield[-1])

    singularities = []
    # winding test around the innermost ring catches a zero at/near the center
    try:
        center_wind = _winding_of(vfield[0])
    except ResolutionError:
        center_wind = None
    if center_wind is None or center_wind != 0:
        singularities.append(_classify_zero(form, disk, vfield, 0.0, 0.0))

    # cell-by-cell degree test away from the center
    for i in range(0, n_r - 1):  # rows i+1 .. i+2 of the grid
        for j in range(n_t):
            jn = (j + 1) % n_t
            w = _cell_winding(vfield[i, j], vfield[i, jn],
                              vfield[i + 1, jn], vfield[i + 1, j])
            if abs(w) > 0.5:
                s0, t0 = _refine_zero(disk, vfield, i, j)
                singularities.append(
                    _classify_zero(form, disk, vfield, s0, t0))
    return vfield, singularities, boundary_winding


def _refine_zero(disk, vfield, i, j):
    """Bilinear Newton for the zero inside cell (i, j) of the field rows."""
    n_r, n_t = disk.n_r, disk.n_theta
    jn = (j + 1) % n_t
    v00 = vfield[i, j]
    v10 = vfield[i + 1, j]
    v01 = vfield[i, jn]
    v11 = vfield[i + 1, jn]
    al, be = 0.5, 0.5
    for _ in range(30):
        v = ((1 - al) * (1 - be) * v00 + al * (1 - be) * v10
             + (1 - al) * be * v01 + al * be * v11)
        J = np.stack([
            -(1 - be) * v00 + (1 - be) * v10 - be * v01 + be * v11,
            -(1 - al) * v00 - al * v10 + (1 - al) * v01 + al * v11,
        ], axis=1)
        try:
            step = np.linalg.solve(J, -v)
        except np.linalg.LinAlgError:
            break
        al = float(np.clip(al + step[0], 0.0, 1.0))
        be = float(np.clip(be + step[1], 0.0, 1.0))
        if np.linalg.norm(step) < 1e-12:
            break
    return (i + 1 + al) / n_r, (j + be) / n_t


# ---------------------------------------------------------------------------
# first return maps
# ---------------------------------------------------------------------------

class _DiskIndex:
    """Spatial index of the grid with per-node tangent-plane data."""

    def __init__(self, form, disk):
        self.disk = disk
        self.form = form
        normals, _ = _node_frame_field(form, disk)
        self.normals = normals  # rows 1..n_r
        self.points = disk.samples[1:]
        flat = self.points.reshape(-1, 4)
        self.tree = cKDTree(flat)
        self.n_t = disk.n_theta
        self.cell = disk.max_cell_size()
        bd = disk.boundary
        self.boundary_tree = cKDTree(bd)
        self.boundary_chord = float(
            np.linalg.norm(np.roll(bd, -1, axis=0) - bd, axis=1).max())

    def node(self, flat_idx):
        i, j = divmod(int(flat_idx), self.n_t)
        return i, j

    def normal_of(self, flat_idx):
        i, j = self.node(flat_idx)
        return self.normals[i, j]

    def plane_height(self, y, flat_idx):
        i, j = self.node(flat_idx)
        return (y - self.points[i, j]) @ self.normals[i, j]

    def heights(self, ys):
        dists, idxs = self.tree.query(ys)
        h = np.empty(len(ys))
        for k, (y, fi) in enumerate(zip(ys, idxs)):
            h[k] = self.plane_height(y, fi)
        return dists, idxs, h

    def boundary_distance(self, y):
        d, idx = self.boundary_tree.query(y)
        # point-to-chord correction keeps rejections honest between samples
        return max(0.0, float(d) - 0.5 * self.boundary_chord)

    def locate(self, y):
        """Continuous (s, t) with surface point/normal via bilinear inversion.

        In-range cell solutions win over out-of-range ones; residual breaks
        ties (adjacent cells converge to shared-edge points from outside).
        """
        _, fi = self.tree.query(y)
        i, j = self.node(fi)
        best = None
        best_key = None
        for ci in (i - 1, i):
            for cj in (j - 1, j):
                res = self._invert_cell(y, ci, cj % self.n_t)
                if res is None:
                    continue
                key = (not res[5], abs(res[4]))
                if best is None or key < best_key:
                    best, best_key = res, key
        return best

    def _invert_cell(self, y, ci, cj):
        # ci indexes field rows: grid rows ci+1 .. ci+2
        rows = self.points.shape[0]
        if ci < -1 or ci + 1 >= rows:
            return None
        if ci == -1:
            c00 = self.disk.samples[0, 0]
            c01 = c00
            c10 = self.points[0, cj]
            c11 = self.points[0, (cj + 1) % self.n_t]
        else:
            c00 = self.points[ci, cj]
            c01 = self.points[ci, (cj + 1) % self.n_t]
            c10 = self.points[ci + 1, cj]
            c11 = self.points[ci + 1, (cj + 1) % self.n_t]
        al, be = 0.5, 0.5
        for _ in range(12):
            p = ((1 - al) * (1 - be) * c00 + al * (1 - be) * c10
                 + (1 - al) * be * c01 + al * be * c11)
            da = (-(1 - be) * c00 + (1 - be) * c10 - be * c01 + be * c11)
            db = (-(1 - al) * c00 - al * c10 + (1 - al) * c01 + al * c11)
            r = y - p
            JTJ = np.array([[da @ da, da @ db], [da @ db, db @ db]])
            try:
                step = np.linalg.solve(JTJ, np.array([da @ r, db @ r]))
            except np.linalg.LinAlgError:
                return None
            al += step[0]
            be += step[1]
            if not (np.isfinite(al) and np.isfinite(be)):
                return None
            al = float(np.clip(al, -0.2, 1.2))
            be = float(np.clip(be, -0.2, 1.2))
            if np.linalg.norm(step) < 1e-13:
                break
        p = ((1 - al) * (1 - be) * c00 + al * (1 - be) * c10
             + (1 - al) * be * c01 + al * be * c11)
        da = (-(1 - be) * c00 + (1 - be) * c10 - be * c01 + be * c11)
        db = (-(1 - al) * c00 - al * c10 + (1 - al) * c01 + al * c11)
        nvec = y - p
        tang = np.linalg.norm(nvec - ((nvec @ da) / max(da @ da, 1e-30)) * da
                              - ((nvec @ db) / max(db @ db, 1e-30)) * db)
        normal_resid = float(np.linalg.norm(nvec))
        # slack covers the tangential slop of projecting onto the bilinear
        # patch (the true surface sits a sagitta away); binding flybys are
        # rejected separately by the boundary-distance margin
        inside = -1e-2 <= al <= 1 + 1e-2 and -1e-2 <= be <= 1 + 1e-2
        n_r = self.disk.n_r
        si = (ci + 1 + al) / n_r
        ti = ((cj + be) / self.n_t) % 1.0
        return (si, ti, p, nvec, normal_resid, inside, tang)


def _first_crossing(form, index, x_start, t_budget, direction, skip_time,
                    boundary_margin=1e-3):
    """Earliest transversal crossing of the disk along one trajectory.

    Scans dense output at a spacing below half the cell size, brackets sign
    changes of the nearest node's tangent-plane height, bisects in time, and
    verifies that the refined point lands inside the sampled surface away
    from the binding.  Returns (point, time) or None on budget exhaustion.
    """
    sign = 1.0 if direction == "forward" else -1.0
    vmax = max(np.linalg.norm(reeb_vector(form, p, check=False))
               for p in index.disk.samples[::max(1, index.disk.n_r // 4),
                                            ::max(1, index.n_t // 8)].reshape(-1, 4))
    dt_scan = index.cell / (2.0 * vmax)
    chunk = max(4.0 * dt_scan, t_budget / 16.0)
    near = 2.5 * index.cell
    t_done = 0.0
    x = x_start.copy()
    armed = abs(index.heights(x[None, :])[2][0]) > 0.05 * index.cell
    carry = None  # (h, flat_idx) at the end of the previous chunk
    while t_done < t_budget - 1e-12:
        span = min(chunk, t_budget - t_done)
        res = integrate_flow(form, x, sign * span, tol=1e-10, dense=True)
        traj = res.trajectory
        n_samp = max(2, int(np.ceil(span / dt_scan)) + 1)
        ts = np.linspace(0.0, sign * span, n_samp)
        ys = traj(ts)[:, :4]
        dists, idxs, hs = index.heights(ys)
        prev = None if carry is None else (carry[0], carry[1], 0.0)
        for k in range(len(ts)):
            if dists[k] > near:
                prev = None
                armed = True
                continue
            h = hs[k]
            if not armed:
                if abs(h) > 0.05 * index.cell:
                    armed = True
                prev = (h, idxs[k], ts[k])
                continue
            if prev is not None and np.sign(h) != np.sign(prev[0]) and h != 0.0:
                t_cross = _bisect_crossing(index, traj, prev[2], ts[k],
                                           prev[1])
                y, t_cross, ok = _refine_to_surface(
                    index, traj, t_cross, index.normal_of(prev[1]))
                global_t = t_done + abs(t_cross)
                if (ok and global_t > skip_time
                        and index.boundary_distance(y) > boundary_margin):
                    return project_to_sigma(form, y), sign * global_t
                armed = False
                prev = (h, idxs[k], ts[k])
                continue
            prev = (h, idxs[k], ts[k])
        carry = None if dists[-1] > near else (hs[-1], idxs[-1])
        x = project_to_sigma(form, ys[-1])
        t_done += span
    return None


def _bisect_crossing(index, traj, t_lo, t_hi, flat_idx, iters=60):
    h_lo = index.plane_height(traj(t_lo)[:4], flat_idx)
    for _ in range(iters):
        t_mid = 0.5 * (t_lo + t_hi)
        h_mid = index.plane_height(traj(t_mid)[:4], flat_idx)
        if np.sign(h_mid) == np.sign(h_lo):
            t_lo = t_mid
            h_lo = h_mid
        else:
            t_hi = t_mid
        if abs(t_hi - t_lo) < 1e-10:
            break
    return 0.5 * (t_lo + t_hi)


def _refine_to_surface(index, traj, t_cross, nhat, iters=5):
    """Secant polish from the tangent-plane crossing to the bilinear surface.

    The root function is the height of the trajectory over its located
    surface point measured along the fixed plane normal, which is signed
    and vanishes exactly on the surface.
    """
    def height(tau):
        yy = traj(tau)[:4]
        loc = index.locate(yy)
        if loc is None:
            return None, None, None
        return (yy - loc[2]) @ nhat, yy, loc

    g, y, loc = height(t_cross)
    if g is None:
        return None, t_cross, False
    for _ in range(iters):
        if abs(g) < 1e-11:
            break
        dt = 1e-7
        g2, _, _ = height(t_cross + dt)
        if g2 is None:
            return y, t_cross, False
        slope = (g2 - g) / dt
        if abs(slope) < 1e-14:
            break
        step = -g / slope
        step = float(np.clip(step, -0.5 * index.cell, 0.5 * index.cell))
        t_cross = t_cross + step
        g, y, loc = height(t_cross)
        if g is None:
            return None, t_cross, False
    si, ti, p, nvec, resid, inside, tang = loc
    ok = inside and abs(g) < 1e-7 and resid < 0.3 * index.cell
    return y, t_cross, ok


def return_map(form, disk, seeds, t_budget, direction="forward",
               index=None, skip_time=1e-9):
    """First-return data for seeds given as (s, t) disk coordinates.

    Returns a list of dicts with seed coordinates, return coordinates, the
    return time, or ``"timeout": True`` when the budget is exhausted.
    Crossings within 1e-3 of the binding are rejected and the trajectory
    continues.
    """
    if direction not in ("forward", "backward"):
        raise DomainError("direction must be forward or backward")
    if index is None:
        index = _DiskIndex(form, disk)
    out = []
    for s0, t0 in np.atleast_2d(seeds):
        if s0 >= 1.0 - 1e-9:
            raise DomainError("seed lies on the binding; it never returns")
        x0 = project_to_sigma(form, _grid_point(disk, s0, t0))
        hit = _first_crossing(form, index, x0, t_budget, direction, skip_time)
        rec = {"seed_s": float(s0), "seed_t": float(t0)}
        if hit is None:
            rec["timeout"] = True
        else:
            y, tret = hit
            loc = index.locate(y)
            rec["timeout"] = False
            rec["return_s"] = float(loc[0])
            rec["return_t"] = float(loc[1])
            rec["return_time"] = float(tret)
            rec["return_point"] = y
        out.append(rec)
    return out


def return_map_points(form, disk, points, t_budget, direction="forward",
                      index=None):
    """First-return of explicit level points (not necessarily on the disk)."""
    if index is None:
        index = _DiskIndex(form, disk)
    out = []
    for p in np.atleast_2d(points):
        x0 = project_to_sigma(form, p)
        hit = _first_crossing(form, index, x0, t_budget, direction,
                              skip_time=1e-9)
        out.append(hit)
    return out


def disk_seeds(n, s_range=(0.08, 0.92), skip=0):
    """Quasi-uniform interior seeds, area-uniform in the disk coordinates."""
    from scipy.stats import qmc
    import warnings

    eng = qmc.Sobol(d=2, scramble=False)
    if skip:
        eng.fast_forward(skip)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = eng.random(n + 1)[1:]
    s = np.sqrt(u[:, 0]) * (s_range[1] - s_range[0]) + s_range[0]
    return np.stack([s, u[:, 1]], axis=1)


def verify_global_section(form, disk, n_seeds=500, t_budget=None,
                          return_details=False):
    """Sampling-based global-section verdict for a spanning disk.

    Passes iff the interior is transversal with a constant sign and every
    seed returns within budget both forward and backward.  A run where all
    seeds time out is reported as budget-limited evidence, not failure of
    transversality.
    """
    if t_budget is None or t_budget <= 0:
        raise DomainError("a positive t_budget is required")
    min_det, sign_constant = transversality_check(form, disk)
    index = _DiskIndex(form, disk)
    seeds = disk_seeds(n_seeds)
    fw = return_map(form, disk, seeds, t_budget, "forward", index=index)
    bw = return_map(form, disk, seeds, t_budget, "backward", index=index)
    t_f = sum(1 for r in fw if r["timeout"])
    t_b = sum(1 for r in bw if r["timeout"])
    verdict = {
        "passes": bool(sign_constant and t_f == 0 and t_b == 0),
        "sign_constant": sign_constant,
        "min_transversality": min_det,
        "n_seeds": int(n_seeds),
        "timeouts_forward": int(t_f),
        "timeouts_backward": int(t_b),
        "budget_note": None,
        "t_budget": float(t_budget),
    }
    if t_f == n_seeds and t_b == n_seeds and sign_constant:
        verdict["budget_note"] = (
            "all seeds timed out; the budget may be below the first-return time"
        )
    if return_details:
        return verdict, fw, bw
    return verdict


# ---------------------------------------------------------------------------
# area form
# ---------------------------------------------------------------------------

def ring_action(disk, row):
    """Line integral of the primitive 1-form along one grid ring."""
    pts = disk.samples[row]
    nxt = np.roll(pts, -1, axis=0)
    return float(0.5 * np.einsum("ij,jk,ik->", pts, OMEGA, nxt))


def polygon_action(points):
    """Line integral of the primitive 1-form around a closed polygon."""
    pts = np.asarray(points, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    return float(0.5 * np.einsum("ij,jk,ik->", pts, OMEGA, nxt))


def disk_area(form, disk, rows=None, check=True, stokes_tol=1e-2):
    """Area of (a radial band of) the disk in the contact area form.

    Returns (area, boundary_integral); for the full disk the boundary
    integral is the orbit action, and a mismatch beyond ``stokes_tol``
    relative error raises a grid-quality error.
    """
    s = disk.samples
    i0, i1 = (0, disk.n_r) if rows is None else rows
    sub = s[i0:i1 + 1]
    nxt = np.roll(sub, -1, axis=1)
    a = 0.5 * ((sub[1:] - sub[:-1]) + (nxt[1:] - nxt[:-1]))
    b = 0.5 * ((nxt[:-1] - sub[:-1]) + (nxt[1:] - sub[1:]))
    area = float(np.einsum("ijk,kl,ijl->", a, OMEGA, b))
    boundary = ring_action(disk, i1) - (ring_action(disk, i0) if i0 > 0 else 0.0)
    if check and abs(boundary) > 1e-12:
        rel = abs(area - boundary) / abs(boundary)
        if rel > stokes_tol:
            raise GridQualityError(
                f"area quadrature disagrees with the boundary integral by "
                f"{100 * rel:.2f}%"
            )
    return area, boundary


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_disk(disk, path_json, path_csv=None):
    """Disk file: JSON header plus an s-major CSV point block."""
    import os

    if path_csv is None:
        path_csv = str(path_json).rsplit(".", 1)[0] + ".csv"
    header = {
        "n_r": disk.n_r,
        "n_theta": disk.n_theta,
        "orbit_ref": disk.orbit_ref,
        "points_csv": os.path.basename(path_csv),
    }
    with open(path_json, "w") as fh:
        json.dump(header, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(path_csv, "w") as fh:
        fh.write("x1,x2,x3,x4\n")
        for row in disk.samples.reshape(-1, 4):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_disk(path_json):
    import os

    with open(path_json) as fh:
        header = json.load(fh)
    csv_path = os.path.join(os.path.dirname(str(path_json)),
                            header["points_csv"])
    pts = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    n_r, n_t = int(header["n_r"]), int(header["n_theta"])
    if pts.shape != ((n_r + 1) * n_t, 4):
        raise DomainError("disk CSV block does not match the header shape")
    return DiskGrid(samples=pts.reshape(n_r + 1, n_t, 4),
                    orbit_ref=header.get("orbit_ref"))


def write_return_csv(path, records):
    """Return-map CSV: seed_s, seed_t, ret_s, ret_t, time (blank on timeout)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed_s", "seed_t", "ret_s", "ret_t", "time"])
        for r in records:
            if r["timeout"]:
                w.writerow([f"{r['seed_s']:.17g}", f"{r['seed_t']:.17g}",
                            "", "", ""])
            else:
                w.writerow([f"{r['seed_s']:.17g}", f"{r['seed_t']:.17g}",
                            f"{r['return_s']:.17g}", f"{r['return_t']:.17g}",
                            f"{r['return_time']:.17g}"])
