"""Search, Newton refinement, and bookkeeping of periodic Reeb orbits.

The search is a best-effort truncation of the (generally infinite) set of
periodic orbits up to a period cap: low-discrepancy seeds are integrated
forward, near-returns of each trajectory are detected by a closest-return
scan, and every candidate is polished by Newton shooting on the augmented
system (return condition + energy level + phase anchor) using the analytic
variational matrix.  Completeness is never claimed; downstream verdicts
carry the truncation cap.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .contact import project_to_sigma, reeb_vector, sphere_samples
from .errors import DomainError, RefinementError
from .flow import flow_map, integrate_flow, monodromy_xi

__all__ = [
    "ReebOrbit",
    "OrbitDatabase",
    "refine_orbit",
    "find_orbits",
    "period_gaps",
    "orbit_trace",
    "classify_monodromy",
    "save_orbits",
    "load_orbits",
]

DEGENERACY_TOL = 1e-6


def classify_monodromy(mon, tol=DEGENERACY_TOL):
    """Non-degeneracy class from the contact-plane period map.

    degenerate iff some eigenvalue lies within ``tol`` of 1; otherwise
    elliptic (complex eigenvalues), positive-hyperbolic (real, positive) or
    negative-hyperbolic (real, negative).
    """
    ev = np.linalg.eigvals(mon)
    if np.abs(ev - 1.0).min() < tol:
        return "degenerate"
    tr = np.trace(mon)
    if abs(tr) < 2.0:
        return "elliptic"
    return "positive-hyperbolic" if tr > 0 else "negative-hyperbolic"


@dataclass
class ReebOrbit:
    """A periodic orbit anchored at a marked point.

    ``x0`` is the marked point (time 0 of the parametrization), ``T_min``
    the prime period found by divisor testing, and ``multiplicity`` the
    covering number, so the orbit's period is ``T = multiplicity * T_min``.
    ``monodromy`` is the contact-plane linearized period map over the full
    period T in the global frame.
    """

    x0: np.ndarray
    T_min: float
    multiplicity: int
    monodromy: np.ndarray
    nondeg_class: str
    residual: float
    monodromy_prime: np.ndarray | None = field(default=None, repr=False)
    newton_iters: int = field(default=0, repr=False)

    @property
    def T(self):
        return self.multiplicity * self.T_min

    @property
    def degenerate(self):
        return self.nondeg_class == "degenerate"

    def iterate(self, k):
        """The k-fold cover of this orbit (same marked point and prime period)."""
        if self.multiplicity != 1:
            raise DomainError("iterate() expects a simply covered orbit")
        mon_p = self.monodromy_prime if self.monodromy_prime is not None else self.monodromy
        mk = np.linalg.matrix_power(mon_p, k)
        return ReebOrbit(
            x0=self.x0.copy(), T_min=self.T_min, multiplicity=k,
            monodromy=mk, nondeg_class=classify_monodromy(mk),
            residual=self.residual, monodromy_prime=mon_p,
        )


@dataclass
class OrbitDatabase:
    """Deduplicated census of periodic orbits up to a period cap."""

    form_hash: str
    orbits: list
    params: dict

    def __len__(self):
        return len(self.orbits)

    def __getitem__(self, i):
        return self.orbits[i]

    @property
    def t_max(self):
        return self.params.get("t_max")


def orbit_trace(form, orbit, n=256, cover="geometric", tol=1e-11):
    """Sample the orbit uniformly in time.

    ``cover="geometric"`` samples one prime period (the geometric image);
    ``cover="full"`` samples the whole parametrized loop over T, winding
    ``multiplicity`` times around the image.
    """
    T = orbit.T_min if cover == "geometric" else orbit.T
    ts = np.arange(n) / n * T
    res = integrate_flow(form, orbit.x0, T, tol=tol, t_eval=ts)
    return res.points


def _detect_multiplicity(form, x, T, closure_tol=1e-6, min_period=0.05):
    res = integrate_flow(form, x, T, tol=1e-12, dense=True)
    k_best = 1
    k_cap = min(max(1, int(T / min_period)), 64)
    for k in range(2, k_cap + 1):
        y = res.trajectory(T / k)[:4]
        y = project_to_sigma(form, y)
        if np.linalg.norm(y - x) < closure_tol:
            k_best = k
    return k_best


def _newton_polish(form, x_guess, T_guess, tol=1e-10, max_iter=50,
                   initial_residual_cap=0.1, skip_cap=False):
    """Gauss-Newton on the augmented shooting system.

    Returns (x, T, residual, iters, degenerate_family).  Stalls and rank
    deficiencies are detected early so that hopeless candidates stay cheap.
    """
    x = project_to_sigma(form, np.asarray(x_guess, dtype=float))
    T = float(T_guess)
    if T <= 0:
        raise DomainError("period guess must be positive")
    anchor_x = x.copy()
    anchor_v = reeb_vector(form, x, check=False)

    end = flow_map(form, x, T, tol=1e-12)
    res0 = np.linalg.norm(end - x)
    if res0 > initial_residual_cap and not skip_cap:
        raise RefinementError(
            f"initial return residual {res0:.3e} exceeds {initial_residual_cap}"
        )

    iters = 0
    residual = res0
    best = res0
    stall = 0
    degenerate_family = False
    while residual > tol and iters < max_iter:
        end, M = flow_map(form, x, T, tol=1e-12, variational=True)
        residual = np.linalg.norm(end - x)
        if residual <= tol:
            break
        if residual < 0.5 * best:
            best, stall = residual, 0
        else:
            stall += 1
            if stall >= 4 and residual > 1e-6:
                raise RefinementError(
                    f"stalled after {iters} iterations (residual {residual:.3e})"
                )
        F = np.concatenate([end - x, [form.H(x) - 1.0],
                            [anchor_v @ (x - anchor_x)]])
        J = np.zeros((6, 5))
        J[:4, :4] = M - np.eye(4)
        J[:4, 4] = reeb_vector(form, end, check=False)
        J[4, :4] = form.grad_H(x)
        J[5, :4] = anchor_v
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] < 1e-10 * sv[0]:
            degenerate_family = True
            break
        delta, *_ = np.linalg.lstsq(J, -F, rcond=None)
        step = np.linalg.norm(delta)
        if step > 1.0:
            delta *= 1.0 / step  # crude trust region; guards wild candidates
        x = project_to_sigma(form, x + delta[:4])
        T = T + delta[4]
        if T <= 0:
            raise RefinementError("period iterated to a non-positive value")
        iters += 1
    if residual > tol and not degenerate_family:
        end = flow_map(form, x, T, tol=1e-12)
        residual = np.linalg.norm(end - x)
    return x, T, residual, iters, degenerate_family


def refine_orbit(form, x_guess, T_guess, tol=1e-10, max_iter=50,
                 initial_residual_cap=0.1, _skip_cap=False):
    """Newton-polish a candidate (point, period) into a certified orbit.

    Solves the augmented shooting system { phi_T(x) - x = 0, H(x) = 1,
    <v_anchor, x - x_anchor> = 0 } by Gauss-Newton with the analytic
    variational matrix.  The prime period is extracted afterwards by
    divisor testing.  Rank-deficient Jacobians (degenerate orbit families,
    e.g. on the round sphere) fall back to scalar minimization of the
    return proximity in T.
    """
    x, T, residual, iters, degenerate_family = _newton_polish(
        form, x_guess, T_guess, tol=tol, max_iter=max_iter,
        initial_residual_cap=initial_residual_cap, skip_cap=_skip_cap)

    if degenerate_family:
        from scipy.optimize import minimize_scalar

        g = lambda t: np.linalg.norm(flow_map(form, x, t, tol=1e-12) - x)
        opt = minimize_scalar(g, bracket=(0.8 * T, T, 1.2 * T))
        if opt.fun > 1e-9:
            raise RefinementError(
                f"rank-deficient shooting Jacobian and no nearby closure "
                f"(best residual {opt.fun:.3e})"
            )
        T = float(opt.x)
        residual = float(opt.fun)
    elif residual > tol:
        raise RefinementError(
            f"no convergence in {max_iter} iterations (residual {residual:.3e})"
        )

    mult = _detect_multiplicity(form, x, T)
    T_min = T / mult
    if mult > 1:
        # re-polish at the prime period to certify the prime residual
        end = flow_map(form, x, T_min, tol=1e-12)
        prime_res = np.linalg.norm(end - x)
    else:
        prime_res = residual

    mon_prime = monodromy_xi(form, x, T_min, closure_tol=1e-5)
    mon_full = np.linalg.matrix_power(mon_prime, mult)
    orbit = ReebOrbit(
        x0=x, T_min=T_min, multiplicity=mult, monodromy=mon_full,
        nondeg_class=classify_monodromy(mon_full),
        residual=float(max(residual, prime_res)),
        monodromy_prime=mon_prime, newton_iters=iters,
    )
    return orbit


def _near_return_candidates(times, pts, min_period, threshold, max_keep):
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    dt = times[None, :] - times[:, None]
    # a genuine near-return is a dip of d along the trajectory, not mere arc
    # proximity: require a strict local minimum in the second index
    interior = np.zeros_like(d, dtype=bool)
    interior[:, 1:-1] = (d[:, 1:-1] <= d[:, :-2]) & (d[:, 1:-1] <= d[:, 2:])
    mask = (dt >= min_period) & (d < threshold) & interior
    ii, jj = np.nonzero(mask)
    if len(ii) == 0:
        return []
    order = np.argsort(d[ii, jj])
    kept = []
    for idx in order:
        i, j = ii[idx], jj[idx]
        cand_dt = dt[i, j]
        if any(abs(cand_dt - kdt) < 0.5 * min_period for _, kdt, _ in kept):
            continue
        kept.append((pts[i], cand_dt, d[i, j]))
        if len(kept) >= max_keep:
            break
    return kept


def find_orbits(form, T_max, n_seeds=256, rng_seed=0, scan_dt=0.05,
                min_period=0.2, candidate_threshold=0.5, dedup_tol=1e-4,
                log=None):
    """Enumerate periodic orbits with period up to T_max (best effort).

    Every returned prime orbit passed Newton refinement; iterates up to the
    cap are synthesized from each prime.  Candidates that fail to refine are
    dropped (optionally reported through ``log``).
    """
    if T_max <= 0:
        raise DomainError("T_max must be positive")
    seeds = sphere_samples(n_seeds)
    seeds = seeds / np.sqrt(form.H_batch(seeds))[:, None]
    t_grid = np.arange(0.0, T_max + 0.5 * scan_dt, scan_dt)

    primes = []
    traces = []

    def explained_by_known(x, T, dist_tol, period_tol):
        for prime, tr in zip(primes, traces):
            if kernels.point_to_polyline(np.ascontiguousarray(x), tr) < dist_tol:
                k = T / prime.T_min
                if round(k) >= 1 and abs(k - round(k)) * prime.T_min < period_tol:
                    return True
        return False

    for seed in seeds:
        res = integrate_flow(form, seed, float(t_grid[-1]), tol=1e-8,
                             t_eval=t_grid)
        cands = _near_return_candidates(t_grid, res.points, min_period,
                                        candidate_threshold, max_keep=4)
        for x_c, dt_c, d_c in cands:
            # candidates this close to a known orbit with a near-commensurate
            # period would converge onto it; skip the polish
            if explained_by_known(x_c, float(dt_c), 0.25, 0.25):
                continue
            try:
                x, T, residual, _, degenerate_family = _newton_polish(
                    form, x_c, float(dt_c),
                    initial_residual_cap=candidate_threshold + 1e-9)
            except (RefinementError, DomainError) as exc:
                if log is not None:
                    log.append(f"candidate dropped: {exc}")
                continue
            # 1e-4 exceeds the sagitta of the 512-point trace polyline, so a
            # converged point on a known curve always registers as known
            if not degenerate_family and explained_by_known(x, T, 1e-4, 1e-4):
                continue
            try:
                orb = refine_orbit(form, x, T, initial_residual_cap=1.0)
            except (RefinementError, DomainError) as exc:
                if log is not None:
                    log.append(f"candidate dropped: {exc}")
                continue
            if orb.T_min > T_max + 1e-9:
                if log is not None:
                    log.append(f"prime period {orb.T_min:.6f} beyond cap")
                continue
            prime = orb if orb.multiplicity == 1 else refine_orbit(
                form, orb.x0, orb.T_min, initial_residual_cap=1e-3, _skip_cap=True)
            tr = orbit_trace(form, prime, n=512)
            if any(kernels.hausdorff_distance(tr, t0) <= dedup_tol for t0 in traces):
                continue
            primes.append(prime)
            traces.append(tr)

    entries = []
    for prime in primes:
        k_max = int(np.floor(T_max / prime.T_min + 1e-9))
        for k in range(1, max(k_max, 1) + 1):
            if k * prime.T_min <= T_max + 1e-9:
                entries.append(prime.iterate(k))
    entries.sort(key=lambda o: (o.T, tuple(o.x0)))
    params = {
        "t_max": float(T_max), "n_seeds": int(n_seeds),
        "rng_seed": int(rng_seed), "scan_dt": float(scan_dt),
        "min_period": float(min_period),
        "candidate_threshold": float(candidate_threshold),
        "dedup_tol": float(dedup_tol),
    }
    return OrbitDatabase(form_hash=form.form_hash, orbits=entries, params=params)


def period_gaps(db, C):
    """Minimal period, minimal gap between distinct periods up to C, and a
    safe lower scale sigma = 0.5 * min(sigma1, sigma2).

    sigma2 is infinite (numpy inf marker) when fewer than two distinct
    periods lie below C.
    """
    if len(db) == 0:
        raise DomainError("period_gaps needs a non-empty database")
    periods = np.array(sorted(o.T for o in db.orbits))
    sigma1 = float(periods[0])
    below = periods[periods <= C]
    distinct = []
    for p in below:
        if not distinct or p - distinct[-1] > 1e-9:
            distinct.append(p)
    if len(distinct) < 2:
        sigma2 = np.inf
    else:
        sigma2 = float(np.diff(np.array(distinct)).min())
    sigma = 0.5 * min(sigma1, sigma2)
    return sigma1, sigma2, sigma


# ---------------------------------------------------------------------------
# JSON persistence (stable ordering; schema: x0, T_min, multiplicity,
# monodromy, class, residual)
# ---------------------------------------------------------------------------

def save_orbits(db, path):
    payload = {
        "form_hash": db.form_hash,
        "params": db.params,
        "orbits": [
            {
                "x0": [float(v) for v in o.x0],
                "T_min": float(o.T_min),
                "multiplicity": int(o.multiplicity),
                "monodromy": [[float(v) for v in row] for row in o.monodromy],
                "class": o.nondeg_class,
                "residual": float(o.residual),
            }
            for o in db.orbits
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_orbits(form, path, verify=True, closure_tol=1e-9):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("form_hash") != form.form_hash:
        raise DomainError("orbit database was built for a different form")
    orbits = []
    for rec in payload["orbits"]:
        o = ReebOrbit(
            x0=np.array(rec["x0"], dtype=float),
            T_min=float(rec["T_min"]),
            multiplicity=int(rec["multiplicity"]),
            monodromy=np.array(rec["monodromy"], dtype=float),
            nondeg_class=rec["class"],
            residual=float(rec["residual"]),
        )
        if verify:
            end = flow_map(form, o.x0, o.T_min, tol=1e-12)
            gap = np.linalg.norm(end - o.x0)
            if gap > closure_tol:
                raise DomainError(
                    f"orbit failed closure re-verification: {gap:.3e}"
                )
        orbits.append(o)
    return OrbitDatabase(form_hash=payload["form_hash"], orbits=orbits,
                         params=payload.get("params", {}))
