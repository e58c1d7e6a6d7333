"""Flatness coefficient evaluators.

Two families over a weighted set S with mass mu and diameter d:

* beta_{p,V}(S) = ( (1/mu) sum_x w_x [dist(x,V)/d]^p )^(1/p), the
  p-mean distance to a fixed plane, with sup for p = inf;
* iota_{p,V}(S) = ( (1/mu^2) sum_{x,y} w_x w_y
  [|dist(x,y) - dist(pi_V x, pi_V y)|/d]^p )^(1/p), the p-mean pairwise
  distortion under the projection to V.

Infimum versions optimize over the plane family and always return
*upper bounds*, labeled as such in the records.  The double sum is
exact when |S|^2 fits the pair budget, otherwise an unbiased weighted
Monte Carlo estimate with recorded seed and standard error.

Translations of V cancel in the projected pairwise distances (both
geometries reduce them to |B^T(x - y)| for the direction frame B), so
the iota optimizers search directions only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from . import geometry as geo
from . import planes as pl
from .errors import (DegenerateDiameter, MetricUnsupported,
                     ScaleBelowResolution, TooFewPoints)
from .pointcloud import RESOLUTION_FACTOR, set_diameter

DEFAULT_PAIR_BUDGET = 2_000_000


@dataclass
class CoefficientRecord:
    cube_id: object
    kind: str                  # beta_p | beta_inf | iota_p | iota_map
    p: float
    value: float
    plane: object = None
    estimator: str = "exact_pairs"   # or "sampled"
    pairs: int = 0
    seed: int = 0
    diam_method: str = "exact"
    extra: dict = field(default_factory=dict)


@dataclass
class WeightedSet:
    """A weighted subset handed to the evaluators, with its diameter."""
    metric: geo.MetricSpec
    points: np.ndarray
    weights: np.ndarray
    diam: float
    diam_method: str
    h: float | None = None

    @classmethod
    def from_arrays(cls, metric, points, weights, h=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        weights = np.asarray(weights, dtype=float)
        diam, method = set_diameter(metric, points)
        return cls(metric, points, weights, diam, method, h)

    @classmethod
    def from_tree(cls, tree, indices):
        return cls.from_arrays(tree.cloud.metric,
                               tree.cloud.points[indices],
                               tree.cloud.weights[indices],
                               h=tree.cloud.h)

    def __len__(self):
        return len(self.points)

    @property
    def mass(self):
        return float(np.sum(self.weights))

    def guard(self):
        if len(self.points) < 2 or self.diam <= 0:
            raise DegenerateDiameter("coefficient needs >= 2 distinct points")
        if self.h is not None and self.diam < RESOLUTION_FACTOR * self.h:
            raise ScaleBelowResolution(
                f"set diameter {self.diam:g} below 10h = "
                f"{RESOLUTION_FACTOR * self.h:g}")


def _plane_distances(s: WeightedSet, plane):
    if isinstance(plane, pl.HorizontalPlane):
        return pl.heis_dist_to_plane(s.points, plane).inf_estimate
    return plane.distance(s.points)


# ---------------------------------------------------------------------------
# fixed-plane evaluators

def beta_p_V(s: WeightedSet, plane, p) -> float:
    """p-mean distance coefficient for a fixed plane (exact sum);
    Heisenberg point-plane distances use the descent estimate."""
    s.guard()
    d = _plane_distances(s, plane) / s.diam
    if np.isinf(p):
        return float(np.max(d))
    return float((np.sum(s.weights * d ** p) / s.mass) ** (1.0 / p))


def beta_inf_V(s: WeightedSet, plane) -> float:
    return beta_p_V(s, plane, np.inf)


def _projected_coords(s: WeightedSet, basis):
    if s.metric.is_heisenberg:
        return s.points[:, :-1] @ basis
    return s.points @ basis


def _pairwise_ambient(s: WeightedSet):
    if s.metric.is_heisenberg:
        return geo.pairwise_dist(s.metric, s.points)
    return squareform(pdist(s.points))


def iota_p_V(s: WeightedSet, plane, p, pair_budget=DEFAULT_PAIR_BUDGET,
             seed=0, cube_id=None) -> CoefficientRecord:
    """Pairwise-distortion coefficient for a fixed plane.

    Exact double sum when |S|^2 <= pair_budget, otherwise Monte Carlo
    over pairs drawn with probability proportional to w_x w_y (unbiased
    for the p-th power; the standard error of the power-mean is stored
    in extra['stderr']).
    """
    s.guard()
    basis = plane.basis
    n = len(s)
    if n * n <= pair_budget:
        amb = _pairwise_ambient(s)
        proj = _projected_coords(s, basis)
        pr = cdist(proj, proj)
        term = (np.abs(amb - pr) / s.diam) ** p
        val = float(np.einsum("i,ij,j->", s.weights, term, s.weights)
                    / s.mass ** 2) ** (1.0 / p)
        return CoefficientRecord(cube_id, "iota_p", p, val, plane,
                                 "exact_pairs", n * n, seed, s.diam_method)
    rng = np.random.default_rng(seed)
    prob = s.weights / s.mass
    m = int(pair_budget)
    ii = rng.choice(n, size=m, p=prob)
    jj = rng.choice(n, size=m, p=prob)
    amb = geo.dist(s.metric, s.points[ii], s.points[jj])
    proj = _projected_coords(s, basis)
    pr = np.linalg.norm(proj[ii] - proj[jj], axis=1)
    term = (np.abs(amb - pr) / s.diam) ** p
    mean = float(np.mean(term))
    se = float(np.std(term) / np.sqrt(m))
    val = mean ** (1.0 / p)
    return CoefficientRecord(cube_id, "iota_p", p, val, plane, "sampled",
                             m, seed, s.diam_method, {"stderr": se})


# ---------------------------------------------------------------------------
# infimum estimators

def beta_p(s: WeightedSet, k, p, starts=8, seed=0, cube_id=None) -> CoefficientRecord:
    """Upper-bound estimate of the infimum of beta_{p,V} over the plane
    family (Euclidean affine k-planes / affine horizontal k-planes)."""
    s.guard()
    if len(s) < k + 1:
        raise TooFewPoints(f"need {k + 1} points for a {k}-plane")
    if not s.metric.is_heisenberg:
        plane, val = pl.fit_plane(s.points, s.weights, k, p=p, starts=starts,
                                  seed=seed, diam=s.diam)
        return CoefficientRecord(cube_id, "beta_p", p, val, plane,
                                 "exact_pairs", 0, seed, s.diam_method)
    plane, val = _fit_horizontal(s, k, p, starts, seed)
    return CoefficientRecord(cube_id, "beta_p", p, val, plane,
                             "exact_pairs", 0, seed, s.diam_method)


def _proj_residuals(s, base, basis):
    """Projection distances d(x, P(x)) for a horizontal plane, vectorized."""
    rel = s.points[:, :-1] - base[:-1]
    hor_res = rel - (rel @ basis) @ basis.T
    t_proj = base[-1] + geo.omega(np.broadcast_to(base[:-1], rel.shape),
                                  (rel @ basis) @ basis.T)
    hor_proj = base[:-1] + (rel @ basis) @ basis.T
    dt = s.points[:, -1] - t_proj - geo.omega(hor_proj, hor_res)
    a = np.sum(hor_res ** 2, axis=-1)
    return np.sqrt(np.hypot(a, 4.0 * dt))


def _fit_horizontal(s: WeightedSet, k, p, starts, seed):
    """Multi-start direction search with base refinement for horizontal
    planes; objective during the search is the cheap projection
    distance, the reported value uses the descent estimate."""
    rng = np.random.default_rng(seed)
    n = s.metric.n
    if k > n:
        raise TooFewPoints(f"horizontal planes need k <= n = {n}")
    w = s.weights
    hor = s.points[:, :-1]
    centroid_h = (w @ hor) / s.mass

    def vertical_center(base_h):
        resid = s.points[:, -1] - geo.omega(np.broadcast_to(base_h, hor.shape),
                                            hor - base_h)
        order = np.argsort(resid)
        cum = np.cumsum(w[order])
        pos = np.searchsorted(cum, 0.5 * s.mass)
        return float(resid[order[min(pos, len(resid) - 1)]])

    def objective(base, basis):
        d = _proj_residuals(s, base, basis) / s.diam
        return float((np.sum(w * d ** p) / s.mass) ** (1.0 / p))

    # PCA of horizontal coordinates, isotropized, as the main start
    rel = hor - centroid_h
    cov = (rel * w[:, None]).T @ rel
    _, vecs = np.linalg.eigh(cov)
    pca_dirs = vecs[:, ::-1]
    fallback = np.eye(2 * n)
    best = None
    for start in range(max(1, starts)):
        if start == 0:
            dirs = pca_dirs[:, :k]
        else:
            dirs = rng.normal(size=(2 * n, k))
        try:
            basis = pl.isotropize(dirs, reference=fallback)[:, :k]
        except pl.NonIsotropicPlane:
            continue
        if basis.shape[1] < k:
            continue
        base = geo.heis_point(centroid_h, 0.0)
        base[-1] = vertical_center(centroid_h)
        obj = objective(base, basis)
        for _ in range(12):
            # IRLS reweighted horizontal PCA for the direction
            d = np.maximum(_proj_residuals(s, base, basis), 1e-12 * s.diam)
            w_eff = w * d ** (p - 2.0)
            relb = hor - base[:-1]
            cov = (relb * w_eff[:, None]).T @ relb
            _, vecs = np.linalg.eigh(cov)
            try:
                cand = pl.isotropize(vecs[:, ::-1][:, :k], reference=fallback)[:, :k]
            except pl.NonIsotropicPlane:
                break
            if cand.shape[1] < k:
                break
            # coordinate descent on the base point
            base_new = base.copy()
            step = 0.25 * s.diam
            obj_new = objective(base_new, cand)
            for _ in range(8):
                moved = False
                for dim in range(2 * n + 1):
                    for sign in (1.0, -1.0):
                        trial = base_new.copy()
                        trial[dim] += sign * step
                        val = objective(trial, cand)
                        if val < obj_new:
                            base_new, obj_new = trial, val
                            moved = True
                if not moved:
                    step *= 0.5
            if obj_new < obj - 1e-12:
                base, basis, obj = base_new, cand, obj_new
            else:
                break
        if best is None or obj < best[2]:
            best = (base, basis, obj)
    base, basis, _ = best
    plane = pl.HorizontalPlane(base, basis)
    return plane, beta_p_V(s, plane, p)


def beta_inf(s: WeightedSet, k, starts=8, seed=0, cube_id=None,
             extra_planes=()) -> CoefficientRecord:
    """Upper-bound estimate of the sup-coefficient infimum.

    For lines in R^2 the minimal-width strip is found exactly via the
    convex hull; otherwise multi-start Nelder-Mead.  extra_planes are
    additional candidate starts (used to compare embedded optima); the
    result is never worse than the best candidate supplied.
    """
    s.guard()
    from scipy.optimize import minimize

    if not s.metric.is_heisenberg:
        n = s.points.shape[1]
        best_plane, best_val = None, np.inf
        if n == 2 and k == 1:
            best_plane = _min_width_line(s.points)
            best_val = beta_inf_V(s, best_plane)
        else:
            pca = pl.weighted_pca_plane(s.points, s.weights, k)
            rng = np.random.default_rng(seed)

            def unpack(x):
                base = x[:n]
                m = x[n:].reshape(n, k)
                q, _ = np.linalg.qr(m)
                return pl.AffinePlane(base, q[:, :k])

            def fun(x):
                try:
                    return beta_inf_V(s, unpack(x))
                except Exception:
                    return 1e6

            cands = [pca] + [pl.AffinePlane(pca.base + 0.1 * s.diam * rng.normal(size=n),
                                            np.linalg.qr(pca.basis + 0.3 * rng.normal(size=(n, k)))[0][:, :k])
                             for _ in range(max(0, starts - 1))]
            for cand in cands:
                x0 = np.concatenate([cand.base, cand.basis.ravel()])
                res = minimize(fun, x0, method="Nelder-Mead",
                               options={"maxiter": 200 * len(x0), "fatol": 1e-12})
                plane = unpack(res.x)
                val = beta_inf_V(s, plane)
                if val < best_val:
                    best_plane, best_val = plane, val
        for cand in extra_planes:
            val = beta_inf_V(s, cand)
            if val < best_val:
                best_plane, best_val = cand, val
        return CoefficientRecord(cube_id, "beta_inf", np.inf, best_val,
                                 best_plane, "exact_pairs", 0, seed,
                                 s.diam_method)

    n = s.metric.n
    rng = np.random.default_rng(seed)
    dim = 2 * n

    if k == 1:
        # exact per-point line distances make the objective cheap
        def line_value(base, direction):
            return float(np.max(pl.heis_line_distances(s.points, base,
                                                       direction))) / s.diam

        def fun(x):
            nrm = np.linalg.norm(x[dim + 1:])
            if nrm < 1e-12:
                return 1e6
            return line_value(x[:dim + 1], x[dim + 1:] / nrm)

        centroid = np.concatenate([(s.weights @ s.points[:, :-1]) / s.mass,
                                   [float(np.median(s.points[:, -1]))]])
        hor = s.points[:, :-1] - centroid[:-1]
        cov = hor.T @ hor
        _, vecs = np.linalg.eigh(cov)
        cands = [(cand.base, cand.basis[:, 0]) for cand in extra_planes]
        cands.append((centroid, vecs[:, -1]))
        for _ in range(max(1, starts - 1)):
            cands.append((centroid + 0.1 * s.diam * rng.normal(size=dim + 1),
                          rng.normal(size=dim)))
        best_plane, best_val = None, np.inf
        for base0, d0 in cands:
            x0 = np.concatenate([base0, np.asarray(d0, dtype=float).ravel()])
            val0 = fun(x0)
            res = minimize(fun, x0, method="Nelder-Mead",
                           options={"maxiter": 40 * len(x0), "fatol": 1e-14,
                                    "xatol": 1e-10})
            xbest, val = (res.x, res.fun) if res.fun <= val0 else (x0, val0)
            if val < best_val:
                direction = xbest[dim + 1:] / np.linalg.norm(xbest[dim + 1:])
                best_plane = pl.HorizontalPlane(xbest[:dim + 1],
                                                direction[:, None])
                best_val = val
        return CoefficientRecord(cube_id, "beta_inf", np.inf, best_val,
                                 best_plane, "exact_pairs", 0, seed,
                                 s.diam_method)

    def unpack(x):
        base = x[:dim + 1]
        m = x[dim + 1:].reshape(dim, k)
        basis = pl.isotropize(m, reference=np.eye(dim))[:, :k]
        return pl.HorizontalPlane(base, basis)

    def fun(x):
        try:
            return beta_inf_V(s, unpack(x))
        except Exception:
            return 1e6

    centroid = np.concatenate([(s.weights @ s.points[:, :-1]) / s.mass,
                               [float(np.median(s.points[:, -1]))]])
    best_plane, best_val = None, np.inf
    cands = []
    for cand in extra_planes:
        cands.append((cand.base, cand.basis))
    for _ in range(max(1, starts)):
        cands.append((centroid + 0.1 * s.diam * rng.normal(size=dim + 1),
                      rng.normal(size=(dim, k))))
    for base0, m0 in cands:
        x0 = np.concatenate([base0, np.asarray(m0, dtype=float).ravel()])
        val0 = fun(x0)
        res = minimize(fun, x0, method="Nelder-Mead",
                       options={"maxiter": 60 * len(x0), "fatol": 1e-12})
        xbest = res.x if res.fun <= val0 else x0
        try:
            plane = unpack(xbest)
        except Exception:
            continue
        val = beta_inf_V(s, plane)
        if val < best_val:
            best_plane, best_val = plane, val
    return CoefficientRecord(cube_id, "beta_inf", np.inf, best_val,
                             best_plane, "exact_pairs", 0, seed, s.diam_method)


def _min_width_line(points):
    """Exact minimal-width strip midline in R^2 via the convex hull."""
    from scipy.spatial import ConvexHull, QhullError
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    try:
        hull = ConvexHull(pts)
        hp = pts[hull.vertices]
    except QhullError:
        # collinear input: the spanning direction is exact
        rel = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(rel, full_matrices=False)
        return pl.AffinePlane(pts.mean(axis=0), vt[:1].T)
    best = (np.inf, None)
    m = len(hp)
    for i in range(m):
        edge = hp[(i + 1) % m] - hp[i]
        nrm = np.linalg.norm(edge)
        if nrm == 0:
            continue
        direction = edge / nrm
        normal = np.array([-direction[1], direction[0]])
        offs = (hp - hp[i]) @ normal
        width = offs.max() - offs.min()
        if width < best[0]:
            mid = hp[i] + normal * (offs.max() + offs.min()) / 2.0
            best = (width, pl.AffinePlane(mid, direction[:, None]))
    return best[1]


def _direction_objective(s, p, pair_budget, seed):
    """Returns (evaluate(basis) -> float, estimator, pairs) with a fixed
    pair sample shared by all candidate directions."""
    n = len(s)
    if n * n <= pair_budget:
        amb = _pairwise_ambient(s)
        w_outer = np.outer(s.weights, s.weights)
        coords_all = s.points[:, :-1] if s.metric.is_heisenberg else s.points

        def evaluate(basis):
            proj = coords_all @ basis
            pr = cdist(proj, proj)
            term = (np.abs(amb - pr) / s.diam) ** p
            return float((np.sum(w_outer * term) / s.mass ** 2) ** (1.0 / p))

        return evaluate, "exact_pairs", n * n
    rng = np.random.default_rng(seed)
    m = int(pair_budget)
    prob = s.weights / s.mass
    ii = rng.choice(n, size=m, p=prob)
    jj = rng.choice(n, size=m, p=prob)
    amb = geo.dist(s.metric, s.points[ii], s.points[jj])
    coords_all = s.points[:, :-1] if s.metric.is_heisenberg else s.points
    di = coords_all[ii] - coords_all[jj]

    def evaluate(basis):
        pr = np.linalg.norm(di @ basis, axis=1)
        term = (np.abs(amb - pr) / s.diam) ** p
        return float(np.mean(term) ** (1.0 / p))

    return evaluate, "sampled", m


def iota_p(s: WeightedSet, k, p, starts=8, seed=0,
           pair_budget=DEFAULT_PAIR_BUDGET, opt_pair_budget=None,
           descent_iters=24, cube_id=None) -> CoefficientRecord:
    """Upper bound on the infimum of iota_{p,V} over the plane family.

    Only the direction subspace is optimized (translation cancels);
    multi-start local descent on the Grassmannian initialized at the
    beta-optimal direction, with random geodesic perturbations of
    shrinking scale.  Candidate directions share one pair sample (of
    size opt_pair_budget) so the search is stable; the best direction
    is then re-evaluated with the standard estimator at pair_budget.
    """
    s.guard()
    if len(s) < k + 1:
        raise TooFewPoints(f"need {k + 1} points for a {k}-plane")
    if opt_pair_budget is None:
        opt_pair_budget = pair_budget
    rng = np.random.default_rng(seed)
    heis = s.metric.is_heisenberg
    dim = 2 * s.metric.n if heis else s.points.shape[1]

    def sanitize(m):
        if heis:
            basis = pl.isotropize(m, reference=np.eye(dim))
            if basis.shape[1] < k:
                raise pl.NonIsotropicPlane("rank collapse")
            return basis[:, :k]
        q, _ = np.linalg.qr(m)
        return q[:, :k]

    beta_rec = beta_p(s, k, max(p, 1.0), starts=max(2, starts // 2), seed=seed)
    init = beta_rec.plane.basis
    if 2.0 * beta_rec.value < 1e-8:
        # flat set: iota <= 2 beta already below noise, skip the search
        plane = (pl.HorizontalPlane(s.points[0], init) if heis
                 else pl.AffinePlane(s.points[0], init))
        rec = iota_p_V(s, plane, p, pair_budget=pair_budget, seed=seed + 1,
                       cube_id=cube_id)
        rec.extra["beta_init_value"] = beta_rec.value
        return rec
    evaluate, estimator, pairs = _direction_objective(
        s, p, min(opt_pair_budget, pair_budget), seed)

    frames = [init]
    for _ in range(max(0, starts - 1)):
        try:
            frames.append(sanitize(rng.normal(size=(dim, k))))
        except pl.NonIsotropicPlane:
            continue
    best_basis, best_val = None, np.inf
    for frame in frames:
        basis = frame
        val = evaluate(basis)
        scale = 0.5
        for _ in range(descent_iters):
            try:
                cand = sanitize(basis + scale * rng.normal(size=(dim, k)))
            except pl.NonIsotropicPlane:
                scale *= 0.7
                continue
            cval = evaluate(cand)
            if cval < val:
                basis, val = cand, cval
            else:
                scale *= 0.7
        if val < best_val:
            best_basis, best_val = basis, val

    if heis:
        plane = pl.HorizontalPlane(s.points[0], best_basis)
    else:
        plane = pl.AffinePlane(s.points[0], best_basis)
    rec = iota_p_V(s, plane, p, pair_budget=pair_budget, seed=seed + 1,
                   cube_id=cube_id)
    rec.kind = "iota_p"
    rec.extra["beta_init_value"] = beta_rec.value
    return rec


# ---------------------------------------------------------------------------
# free-map relaxation (stress majorization)

def iota_map_eucl(s: WeightedSet, k, p=2.0, iters=200, seed=0,
                  cube_id=None) -> CoefficientRecord:
    """Upper bound on the pairwise-distortion coefficient over arbitrary
    maps f: S -> R^k, by stress-majorization descent initialized at the
    plane-optimal projection (so the value never exceeds the iota_p
    record).  p = 2 uses the closed-form update for product weights;
    other p wrap it in IRLS.  The best iterate (including the start) is
    returned.
    """
    if s.metric.is_heisenberg:
        raise MetricUnsupported("free-map descent is Euclidean-only")
    s.guard()
    base_rec = iota_p(s, k, p, starts=4, seed=seed)
    basis = base_rec.plane.basis
    x = s.points @ basis
    n = len(s)
    if n * n > DEFAULT_PAIR_BUDGET:
        raise TooFewPoints("free-map descent needs the exact pair matrix")
    delta = squareform(pdist(s.points))
    w = s.weights
    mu = s.mass
    w_outer = np.outer(w, w)

    def objective(xc):
        d = squareform(pdist(xc))
        return float((np.sum(w_outer * (np.abs(delta - d) / s.diam) ** p)
                      / mu ** 2) ** (1.0 / p))

    def guttman(xc, v):
        # minimizes sum v_ij (delta_ij - d_ij(x))^2 via one majorization step
        d = squareform(pdist(xc))
        np.fill_diagonal(d, 1.0)
        b = -v * delta / d
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        rhs = b @ xc
        lap_diag = v.sum(axis=1)
        if np.allclose(v, w_outer):
            out = rhs / (mu * w)[:, None]
        else:
            from scipy.sparse.linalg import LinearOperator, cg
            lap = LinearOperator((n, n), matvec=lambda z: lap_diag * z - v @ z)
            out = np.empty_like(xc)
            for col in range(xc.shape[1]):
                sol, _ = cg(lap + LinearOperator((n, n), matvec=lambda z: np.full(n, z.sum() / n)),
                            rhs[:, col], rtol=1e-10, maxiter=200)
                out[:, col] = sol
        return out

    best_x, best_obj = x.copy(), objective(x)
    cur = x.copy()
    for it in range(iters):
        if p == 2.0:
            v = w_outer
        else:
            d = squareform(pdist(cur))
            resid = np.maximum(np.abs(delta - d), 1e-9 * s.diam)
            v = w_outer * resid ** (p - 2.0)
            np.fill_diagonal(v, 0.0)
        cur = guttman(cur, v)
        obj = objective(cur)
        if obj < best_obj:
            best_obj, best_x = obj, cur.copy()
    return CoefficientRecord(cube_id, "iota_map", p, best_obj, None,
                             "exact_pairs", n * n, seed, s.diam_method,
                             {"iters": iters,
                              "plane_value": base_rec.value})


# ---------------------------------------------------------------------------
# the triangle-inequality bound iota <= 2 beta

def random_instance(rng, heisenberg=False):
    """One seeded (S, V, p) instance for the exact-inequality check."""
    p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
    m = int(rng.integers(24, 96))
    if not heisenberg:
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n))
        metric = geo.euclidean(n)
        q, _ = np.linalg.qr(rng.normal(size=(n, k)))
        plane = pl.AffinePlane(rng.normal(size=n), q[:, :k])
        spread = rng.uniform(0.5, 2.0)
        on_plane = plane.base + rng.normal(size=(m, k)) * spread @ plane.basis.T
        pts = on_plane + rng.normal(size=(m, n)) * rng.uniform(0.0, 0.5) * spread
    else:
        n = int(rng.integers(1, 3))
        k = int(rng.integers(1, n + 1))
        metric = geo.heisenberg(n)
        base = geo.heis_point(rng.normal(size=2 * n), rng.normal())
        plane = pl.random_isotropic(n, k, rng, base=base)
        spread = rng.uniform(0.5, 2.0)
        anchors = plane.point_at(rng.normal(size=(m, k)) * spread)
        sigma = rng.uniform(0.0, 0.5) * spread
        offs = geo.heis_point(rng.normal(size=(m, 2 * n)) * sigma,
                              rng.normal(size=m) * sigma ** 2)
        pts = geo.heis_mul(anchors, offs)
    weights = rng.uniform(0.5, 2.0, size=m)
    s = WeightedSet.from_arrays(metric, pts, weights)
    return s, plane, p


def easy_inequality_check(instances=1000, seed=0, rel_tol=1e-9):
    """Exact evaluation of iota_{p,V} <= 2 beta_{p,V} on seeded random
    instances across both geometries."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst = {"margin": -np.inf}
    for t in range(instances):
        s, plane, p = random_instance(rng, heisenberg=bool(t % 2))
        beta = beta_p_V(s, plane, p)
        iota = iota_p_V(s, plane, p).value
        margin = iota - 2.0 * beta * (1.0 + rel_tol)
        if margin > worst["margin"]:
            worst = {"margin": float(margin), "trial": t, "p": p,
                     "beta": beta, "iota": iota}
        if margin > 0:
            violations += 1
    return pl.VerificationReport("iota_le_2beta", instances, violations,
                                 0.0, worst)


# ---------------------------------------------------------------------------
# record serialization

def records_to_csv(records, path, plane_sidecar=None):
    with open(path, "w") as fh:
        fh.write("cube_id,kind,p,value,estimator,pairs,seed,diam_method\n")
        for rec in records:
            fh.write(f"{rec.cube_id},{rec.kind},{rec.p:.17g},{rec.value:.17g},"
                     f"{rec.estimator},{rec.pairs},{rec.seed},{rec.diam_method}\n")
    if plane_sidecar is not None:
        payload = {str(rec.cube_id): pl.plane_to_json(rec.plane)
                   for rec in records if rec.plane is not None}
        with open(plane_sidecar, "w") as fh:
            json.dump(payload, fh)
