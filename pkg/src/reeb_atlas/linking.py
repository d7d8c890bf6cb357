"""Linking numbers, self-linking via contact-plane pushoff, and a
conservative unknot certifier for sampled orbit traces.

Loops on the energy level are radially normalized to the unit sphere and
mapped to R^3 by stereographic projection from one of 26 fixed candidate
poles.  The projection basis is oriented so that linking numbers computed
in R^3 agree with the homological linking on the sphere oriented by the
contact volume form; two independent algorithms (exact Gauss solid-angle
sum and signed crossings of a generic planar diagram) are kept separate so
they can audit each other.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .contact import project_to_sigma, xi_frame
from .errors import (DomainError, PoleSelectionError, ProximityError,
                     ResolutionError)
from .flow import integrate_flow

__all__ = [
    "LoopTrace",
    "KnotVerdict",
    "trace_orbit",
    "stereo_project",
    "pick_pole",
    "linking_number",
    "crossing_linking",
    "self_linking",
    "unknot_check",
    "POLE_CANDIDATES",
]


def _pole_candidates():
    poles = []
    for i in range(4):
        for s in (1.0, -1.0):
            v = np.zeros(4)
            v[i] = s
            poles.append(v)
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for sz in (1.0, -1.0):
                for sw in (1.0, -1.0):
                    poles.append(np.array([sx, sy, sz, sw]) / 2.0)
    poles.append(np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2.0))
    poles.append(np.array([1.0, -1.0, 0.0, 0.0]) / np.sqrt(2.0))
    return np.array(poles)


POLE_CANDIDATES = _pole_candidates()  # 26 fixed directions, tried in order


@dataclass
class LoopTrace:
    """Closed polyline sampled uniformly in time along a loop in R^4."""

    points: np.ndarray  # (N, 4), implicit closure back to points[0]
    closure_gap: float

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 4:
            raise DomainError("trace points must be (N, 4)")

    def __len__(self):
        return len(self.points)

    def validate(self, closure_tol=1e-8, chord_factor=0.05):
        if self.closure_gap > closure_tol:
            raise DomainError(f"trace closure gap {self.closure_gap:.2e}")
        pts = self.points
        chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        diam = np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))
        if chords.max() >= chord_factor * diam:
            raise ResolutionError("trace chords too long relative to diameter")
        return self

    def reversed(self):
        return LoopTrace(points=self.points[::-1].copy(),
                         closure_gap=self.closure_gap)


def trace_orbit(form, orbit, n=1024, cover="full", tol=1e-11):
    """LoopTrace of an orbit; ``cover="full"`` winds multiplicity times."""
    T = orbit.T if cover == "full" else orbit.T_min
    ts = np.arange(n) / n * T
    res = integrate_flow(form, orbit.x0, T, tol=tol, t_eval=ts)
    end = integrate_flow(form, orbit.x0, orbit.T_min, tol=tol).endpoint
    gap = float(np.linalg.norm(end - orbit.x0))
    return LoopTrace(points=res.points, closure_gap=gap)


# ---------------------------------------------------------------------------
# stereographic projection with a pinned orientation
# ---------------------------------------------------------------------------

def _oriented_basis(pole):
    basis = []
    for seed in np.eye(4):
        v = seed - (seed @ pole) * pole
        for b in basis:
            v = v - (v @ b) * b
        if np.linalg.norm(v) > 1e-8:
            basis.append(v / np.linalg.norm(v))
        if len(basis) == 3:
            break
    B = np.array(basis)
    # det[b1, b2, b3, pole] = +1 makes the projection orientation-preserving
    # from the sphere oriented by the contact volume form
    if np.linalg.det(np.vstack([B, pole[None, :]])) < 0:
        B[2] = -B[2]
    return B


def stereo_project(points, pole, min_dist=1e-2):
    """Stereographic image in R^3 of a loop, after radial normalization."""
    pole = np.asarray(pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    y = points / np.linalg.norm(points, axis=1, keepdims=True)
    if np.linalg.norm(y - pole, axis=1).min() <= min_dist:
        raise PoleSelectionError("pole ray passes too close to the curve")
    B = _oriented_basis(pole)
    denom = (1.0 - y @ pole)[:, None]
    return ((y - np.outer(y @ pole, pole)) / denom) @ B.T


def pick_pole(point_sets, min_dist=1e-2):
    """First of the 26 candidate poles admissible for every given loop.

    A pole within a few chord lengths of a sampled curve blows the image up
    until the solid-angle sums lose the linking, so admissibility prefers a
    comfortable clearance and only falls back toward the hard floor when no
    candidate clears it.
    """
    sets = []
    floor = min_dist
    for pts in point_sets:
        y = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        sets.append(y)
        chord = np.linalg.norm(np.roll(y, -1, axis=0) - y, axis=1).max()
        floor = max(floor, 3.0 * chord)
    for threshold in (max(0.2, floor), floor):
        for pole in POLE_CANDIDATES:
            if all(np.linalg.norm(y - pole, axis=1).min() > threshold
                   for y in sets):
                return pole
    raise PoleSelectionError("no admissible pole among the 26 candidates")


# ---------------------------------------------------------------------------
# Gauss linking number
# ---------------------------------------------------------------------------

def linking_number(a, b, min_dist=1e-3, residual_cap=0.1):
    """Integer linking number by the exact Gauss solid-angle sum.

    Returns (lk, raw_residual).  Curves closer than ``min_dist`` are
    rejected; a residual above ``residual_cap`` demands denser traces.
    """
    pa = a.points if isinstance(a, LoopTrace) else np.ascontiguousarray(a)
    pb = b.points if isinstance(b, LoopTrace) else np.ascontiguousarray(b)
    gap = kernels.min_cross_distance(pa, pb)
    if gap <= min_dist:
        raise ProximityError(f"curves are {gap:.2e} apart (< {min_dist:.0e})")
    pole = pick_pole([pa, pb])
    a3 = np.ascontiguousarray(stereo_project(pa, pole))
    b3 = np.ascontiguousarray(stereo_project(pb, pole))
    raw = kernels.gauss_linking_raw(a3, b3)
    lk = int(np.rint(raw))
    residual = abs(raw - lk)
    if residual >= residual_cap:
        raise ResolutionError(
            f"Gauss sum residual {residual:.3f} >= {residual_cap}; densify"
        )
    return lk, residual


# ---------------------------------------------------------------------------
# signed-crossing linking (independent oracle)
# ---------------------------------------------------------------------------

_PLANE_DIRECTIONS = np.array([
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 1.0],
    [1.0, -1.0, 2.0],
    [2.0, 1.0, -1.0],
    [-1.0, 2.0, 1.0],
    [1.0, 2.0, 0.0],
    [0.0, 1.0, 2.0],
    [2.0, 0.0, 1.0],
    [1.0, -2.0, 1.0],
    [3.0, 1.0, 2.0],
    [0.12, 0.31, 0.94],
])


def _plane_basis(d):
    d = d / np.linalg.norm(d)
    t = np.array([1.0, 0.0, 0.0])
    if abs(t @ d) > 0.9:
        t = np.array([0.0, 1.0, 0.0])
    u1 = t - (t @ d) * d
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(d, u1)  # right-handed (u1, u2, d)
    return u1, u2, d


def _pair_crossings(a3, b3, direction, tangent_tol=1e-9):
    """Signed crossings between the shadows of two loops.

    Returns the signed sum, or None when the projection is non-generic
    (near-parallel strands at a crossing).
    """
    u1, u2, d = _plane_basis(direction)
    A2 = np.stack([a3 @ u1, a3 @ u2], axis=1)
    B2 = np.stack([b3 @ u1, b3 @ u2], axis=1)
    Ah = a3 @ d
    Bh = b3 @ d
    na, nb = len(A2), len(B2)
    p1 = A2
    p2 = np.roll(A2, -1, axis=0)
    q1 = B2
    q2 = np.roll(B2, -1, axis=0)
    r = p2 - p1  # (na, 2)
    s = q2 - q1  # (nb, 2)
    denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    dq = q1[None, :, :] - p1[:, None, :]
    tt = (dq[:, :, 0] * s[None, :, 1] - dq[:, :, 1] * s[None, :, 0])
    uu = (dq[:, :, 0] * r[:, None, 1] - dq[:, :, 1] * r[:, None, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = tt / denom
        uu = uu / denom
    scale = (np.linalg.norm(r, axis=1)[:, None]
             * np.linalg.norm(s, axis=1)[None, :])
    hit = (np.abs(denom) > tangent_tol * scale) & \
        (tt >= 0.0) & (tt < 1.0) & (uu >= 0.0) & (uu < 1.0)
    near_tangent = (np.abs(denom) <= tangent_tol * scale) & \
        (tt >= -0.1) & (tt < 1.1) & (uu >= -0.1) & (uu < 1.1)
    if np.any(near_tangent & np.isfinite(tt) & np.isfinite(uu)):
        return None
    total = 0
    ii, jj = np.nonzero(hit)
    ha_next = np.roll(Ah, -1)
    hb_next = np.roll(Bh, -1)
    for i, j in zip(ii, jj):
        ha = Ah[i] + tt[i, j] * (ha_next[i] - Ah[i])
        hb = Bh[j] + uu[i, j] * (hb_next[j] - Bh[j])
        over, under = (r[i], s[j]) if ha > hb else (s[j], r[i])
        total += int(np.sign(over[0] * under[1] - over[1] * under[0]))
    return total


def crossing_linking(a, b, min_dist=1e-3):
    """Linking number as half the signed crossing count of a generic shadow."""
    pa = a.points if isinstance(a, LoopTrace) else np.ascontiguousarray(a)
    pb = b.points if isinstance(b, LoopTrace) else np.ascontiguousarray(b)
    gap = kernels.min_cross_distance(pa, pb)
    if gap <= min_dist:
        raise ProximityError(f"curves are {gap:.2e} apart (< {min_dist:.0e})")
    pole = pick_pole([pa, pb])
    a3 = stereo_project(pa, pole)
    b3 = stereo_project(pb, pole)
    for direction in _PLANE_DIRECTIONS:
        total = _pair_crossings(a3, b3, direction)
        if total is None:
            continue
        if total % 2 != 0:
            continue  # odd sum signals a missed or double-counted crossing
        return total // 2
    raise ResolutionError("no generic projection direction found")


# ---------------------------------------------------------------------------
# self-linking number via pushoff along the global frame
# ---------------------------------------------------------------------------

def self_linking(form, orbit, eps=1e-2, n=512, frame_vector="e1",
                 check_stability=True):
    """Self-linking number of an orbit: linking with its pushoff along a
    global non-vanishing section of the contact plane.

    The result must be stable under halving the pushoff size, otherwise the
    pushoff was too large for the curve's geometry and an error is raised.
    """
    trace = trace_orbit(form, orbit, n=n)
    sections = np.empty_like(trace.points)
    for i, x in enumerate(trace.points):
        fr = xi_frame(form, x)
        sections[i] = fr.e1 if frame_vector == "e1" else fr.e2

    def lk_at(e):
        pushed = trace.points + e * sections
        pushed /= np.sqrt(form.H_batch(pushed))[:, None]
        lk, _ = linking_number(trace.points, pushed,
                               min_dist=min(1e-3, 0.2 * e))
        return lk

    sl = lk_at(eps)
    if check_stability:
        sl_half = lk_at(eps / 2.0)
        if sl_half != sl:
            raise ResolutionError(
                f"self-linking unstable under pushoff halving: {sl} vs {sl_half}"
            )
    return sl


# ---------------------------------------------------------------------------
# unknot certification by diagram reduction
# ---------------------------------------------------------------------------

@dataclass
class KnotVerdict:
    """Either a certified unknot or an abstention; never claims knottedness."""

    status: str  # "certified_unknot" | "unknown"
    crossing_count_after_reduction: int


def _self_crossings(p3, direction, tangent_tol=1e-9):
    """Crossing word of one loop's shadow: list of (cid, over) in arc order.

    Returns None on a non-generic projection.
    """
    u1, u2, d = _plane_basis(direction)
    P2 = np.stack([p3 @ u1, p3 @ u2], axis=1)
    H = p3 @ d
    n = len(P2)
    p1 = P2
    r = np.roll(P2, -1, axis=0) - P2
    hn = np.roll(H, -1)
    denom = r[:, None, 0] * r[None, :, 1] - r[:, None, 1] * r[None, :, 0]
    dq = p1[None, :, :] - p1[:, None, :]
    num_t = dq[:, :, 0] * r[None, :, 1] - dq[:, :, 1] * r[None, :, 0]
    num_u = dq[:, :, 0] * r[:, None, 1] - dq[:, :, 1] * r[:, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = num_t / denom
        uu = num_u / denom
    lens = np.linalg.norm(r, axis=1)
    nondeg = np.abs(denom) > tangent_tol * lens[:, None] * lens[None, :]
    idx = np.arange(n)
    upper = idx[None, :] >= idx[:, None] + 2
    upper &= ~((idx[:, None] == 0) & (idx[None, :] == n - 1))  # wrap-adjacent
    hit = nondeg & upper & (tt >= 0.0) & (tt < 1.0) & (uu >= 0.0) & (uu < 1.0)
    ii, jj = np.nonzero(hit)
    events = []
    for cid, (i, j) in enumerate(zip(ii, jj)):
        t, u = tt[i, j], uu[i, j]
        if min(t, 1 - t, u, 1 - u) < 1e-9:
            return None  # crossing at a vertex; retry another direction
        hi = H[i] + t * (hn[i] - H[i])
        hj = H[j] + u * (hn[j] - H[j])
        if abs(hi - hj) < 1e-12:
            return None
        events.append((i + t, cid, hi > hj))
        events.append((j + u, cid, hj > hi))
    events.sort()
    return [(c, over) for _, c, over in events]


def _reduce_word(word):
    """Crossing-removal passes to a fixed point.

    A kink is a crossing whose two occurrences are cyclically adjacent; a
    clasp-free bigon is a pair of crossings adjacent as over-over in one
    place and under-under in another.
    """
    word = list(word)
    changed = True
    while changed and word:
        changed = False
        L = len(word)
        # kinks
        for p in range(L):
            q = (p + 1) % L
            if word[p][0] == word[q][0]:
                word = [w for w in word if w[0] != word[p][0]]
                changed = True
                break
        if changed:
            continue
        # bigons
        L = len(word)
        adj = {}
        for p in range(L):
            q = (p + 1) % L
            a, oa = word[p]
            b, ob = word[q]
            if a != b and oa == ob:
                adj.setdefault(frozenset((a, b)), set()).add(oa)
        for pair, overs in adj.items():
            if overs == {True, False}:
                word = [w for w in word if w[0] not in pair]
                changed = True
                break
    return word


def unknot_check(trace, min_pole_dist=1e-2):
    """Certify a loop as unknotted, or abstain.

    A PL diagram is built from a generic projection and simplified by kink
    and bigon removal; zero remaining crossings certifies the unknot, and
    anything else is reported as unknown.
    """
    pts = trace.points if isinstance(trace, LoopTrace) else np.asarray(trace)
    last_count = None
    for pole in POLE_CANDIDATES:
        try:
            p3 = stereo_project(pts, pole, min_dist=min_pole_dist)
        except PoleSelectionError:
            continue
        for direction in _PLANE_DIRECTIONS:
            word = _self_crossings(p3, direction)
            if word is None:
                continue
            reduced = _reduce_word(word)
            count = len(reduced) // 2
            if count == 0:
                return KnotVerdict(status="certified_unknot",
                                   crossing_count_after_reduction=0)
            last_count = count if last_count is None else min(last_count, count)
        if last_count is not None:
            # one admissible pole with generic directions is enough to report
            break
    if last_count is None:
        raise PoleSelectionError(
            "no generic projection found for the unknot check"
        )
    return KnotVerdict(status="unknown",
                       crossing_count_after_reduction=last_count)
