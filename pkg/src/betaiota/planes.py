"""Plane families, projections, and angles for both ambient geometries.

Euclidean side: affine k-planes with orthogonal projections, the
sin-of-largest-principal-angle distance between equal-dimensional
subspaces, weighted plane fitting, simplex volumes from squared
pairwise distances, and the small-angle criterion.

Heisenberg side: affine horizontal k-planes q.(V' x {0}) with V' an
isotropic subspace of R^{2n} (omega vanishes on V'), the group-
translated projection onto them, and the minimal-distance bracket

    2^(-5/4) d(p, P(p)) <= d(p, plane) <= d(p, P(p)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import (DegenerateCube, DegenerateSimplex, DimensionMismatch,
                     InvalidParameter, NonIsotropicPlane,
                     PointsNotIndependent, TooFewPoints)

ORTHO_TOL = 1e-10
PROJ_BRACKET = 2.0 ** (-1.25)


# ---------------------------------------------------------------------------
# plane types

class AffinePlane:
    """Affine k-plane in R^n: base point plus orthonormal direction basis
    (basis columns)."""

    def __init__(self, base, basis):
        self.base = np.asarray(base, dtype=float)
        self.basis = np.atleast_2d(np.asarray(basis, dtype=float))
        if self.basis.ndim != 2 or self.basis.shape[0] != self.base.shape[0]:
            raise DimensionMismatch("basis columns must match base dimension")
        k = self.basis.shape[1]
        if not (1 <= k < self.basis.shape[0]):
            raise DimensionMismatch("need 1 <= k < n")
        gram = self.basis.T @ self.basis
        if np.max(np.abs(gram - np.eye(k))) > ORTHO_TOL:
            raise DimensionMismatch("basis is not orthonormal")

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return self.base.shape[0]

    def project(self, x):
        """Orthogonal projection (idempotent, 1-Lipschitz); batched."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionMismatch("point dimension does not match plane")
        rel = x - self.base
        return self.base + (rel @ self.basis) @ self.basis.T

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def coords(self, x):
        """Coordinates of the projection in the basis frame."""
        return (np.asarray(x, dtype=float) - self.base) @ self.basis


def symplectic_rotate(x):
    """The complex structure J on R^{2n}: (a, b) -> (-b, a); omega(x, y)
    equals <J x, y> / 2."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return np.concatenate([-x[..., n:], x[..., :n]], axis=-1)


def isotropy_defect(basis) -> float:
    """max |omega(b_i, b_j)| over basis column pairs."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    k = basis.shape[1]
    worst = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            worst = max(worst, abs(float(geo.omega(basis[:, i], basis[:, j]))))
    return worst


class HorizontalPlane:
    """Affine horizontal k-plane q . (V' x {0}) in H^n.

    base is the full (2n+1)-coordinate anchor point q; basis holds k
    orthonormal columns spanning the isotropic direction subspace V'.
    """

    def __init__(self, base, basis):
        self.base = np.asarray(base, dtype=float)
        self.basis = np.atleast_2d(np.asarray(basis, dtype=float))
        if self.base.shape[-1] % 2 == 0 or self.base.shape[-1] < 3:
            raise DimensionMismatch("base point needs 2n+1 coordinates")
        two_n = self.base.shape[-1] - 1
        if self.basis.shape[0] != two_n:
            raise DimensionMismatch("directions must live in R^{2n}")
        k = self.basis.shape[1]
        if not (1 <= k <= two_n // 2):
            raise DimensionMismatch("need 1 <= k <= n")
        gram = self.basis.T @ self.basis
        if np.max(np.abs(gram - np.eye(k))) > ORTHO_TOL:
            raise NonIsotropicPlane("direction basis is not orthonormal")
        if isotropy_defect(self.basis) > ORTHO_TOL:
            raise NonIsotropicPlane("direction subspace is not isotropic")

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return (self.base.shape[-1] - 1) // 2

    def point_at(self, v):
        """Plane point q . (B v, 0) for parameter vectors v (batched)."""
        v = np.asarray(v, dtype=float)
        hor = self.base[:-1] + v @ self.basis.T
        t = self.base[-1] + geo.omega(np.broadcast_to(self.base[:-1], hor.shape),
                                      hor - self.base[:-1])
        return geo.heis_point(hor, t)

    def project(self, p):
        """Group-translated horizontal projection P(p); batched."""
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.base.shape[-1]:
            raise DimensionMismatch("point does not match plane ambient space")
        v = (p[..., :-1] - self.base[:-1]) @ self.basis
        return self.point_at(v)

    def projected_coords(self, p):
        """Euclidean coordinates of the projected horizontal part; pairwise
        distances of projections equal pairwise distances of these."""
        p = np.asarray(p, dtype=float)
        return (p[..., :-1] - self.base[:-1]) @ self.basis


def horiz_project(plane: HorizontalPlane, p):
    return plane.project(p)


# ---------------------------------------------------------------------------
# angles

def _direction_matrix(obj):
    if isinstance(obj, AffinePlane) or isinstance(obj, HorizontalPlane):
        return obj.basis
    return np.atleast_2d(np.asarray(obj, dtype=float))


def angle_eucl(v1, v2) -> float:
    """Hausdorff distance of the unit balls of the two direction
    subspaces: the sine of the largest principal angle, in [0, 1]."""
    b1 = _direction_matrix(v1)
    b2 = _direction_matrix(v2)
    if b1.shape != b2.shape:
        raise DimensionMismatch("angle needs equal-dimensional subspaces")
    sig = np.linalg.svd(b1.T @ b2, compute_uv=False)
    smin = float(np.clip(sig.min(), 0.0, 1.0))
    return float(np.sqrt(max(0.0, 1.0 - smin * smin)))


def angle_heis(v1: HorizontalPlane, v2: HorizontalPlane) -> float:
    """Angle between affine horizontal planes: the Euclidean angle of
    their direction subspaces."""
    return angle_eucl(v1, v2)


def plane_angle(a, b) -> float:
    if isinstance(a, HorizontalPlane) != isinstance(b, HorizontalPlane):
        raise DimensionMismatch("cannot compare planes across geometries")
    return angle_eucl(a, b)


# ---------------------------------------------------------------------------
# fitting (Euclidean)

def weighted_pca_plane(points, weights, k) -> AffinePlane:
    """Exact minimizer of sum w_i d(x_i, V)^2 over affine k-planes."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if len(points) < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points to fit a {k}-plane")
    mu = weights.sum()
    centroid = (weights @ points) / mu
    rel = points - centroid
    cov = (rel * weights[:, None]).T @ rel
    eigval, eigvec = np.linalg.eigh(cov)
    basis = eigvec[:, ::-1][:, :k]
    return AffinePlane(centroid, basis)


def _beta_value(points, weights, plane, p, diam):
    d = plane.distance(points)
    mu = weights.sum()
    if np.isinf(p):
        return float(d.max() / diam)
    return float((np.sum(weights * (d / diam) ** p) / mu) ** (1.0 / p))


def fit_plane(points, weights, k, p=2.0, starts=8, seed=0, diam=None):
    """Best-fit affine k-plane for the weighted p-mean of distances.

    p = 2 is solved exactly by weighted PCA.  For p != 2 the PCA plane
    seeds an IRLS refinement with multi-start geodesic perturbations;
    the achieved value is an upper bound on the infimum and is
    monotone-nonincreasing in `starts`.  Returns (plane, value) where
    value is the achieved normalized coefficient.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if len(points) < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points")
    if diam is None:
        from .pointcloud import set_diameter
        diam, _ = set_diameter(geo.euclidean(points.shape[1]), points)
    base_plane = weighted_pca_plane(points, weights, k)
    if p == 2.0:
        return base_plane, _beta_value(points, weights, base_plane, p, diam)

    rng = np.random.default_rng(seed)
    floor = 1e-9 * diam
    best_plane, best_obj = base_plane, _beta_value(points, weights, base_plane, p, diam)

    def irls(plane):
        obj = _beta_value(points, weights, plane, p, diam)
        for _ in range(100):
            d = np.maximum(plane.distance(points), floor)
            w_eff = weights * d ** (p - 2.0)
            try:
                plane_new = weighted_pca_plane(points, w_eff, k)
            except np.linalg.LinAlgError:
                break
            obj_new = _beta_value(points, weights, plane_new, p, diam)
            if obj_new < obj:
                plane, improved = plane_new, obj - obj_new
                obj = obj_new
                if improved < 1e-8 * max(obj, 1e-300):
                    break
            else:
                break
        return plane, obj

    for s in range(starts):
        if s == 0:
            cand = base_plane
        else:
            scale = 0.5 / s
            cand = _perturb_plane(base_plane, scale, rng)
        plane, obj = irls(cand)
        if obj < best_obj:
            best_plane, best_obj = plane, obj
    return best_plane, best_obj


def _perturb_plane(plane, scale, rng):
    n, k = plane.n, plane.k
    m = plane.basis + scale * rng.normal(size=(n, k))
    q, _ = np.linalg.qr(m)
    base = plane.base + scale * 0.1 * rng.normal(size=n)
    return AffinePlane(base, q[:, :k])


# ---------------------------------------------------------------------------
# isotropic frames

def isotropize(directions, reference=None):
    """Orthonormalize `directions` (columns) into an isotropic frame by
    removing, for each new column, its components along the previous
    frame vectors and their J-images.  Columns that collapse are
    dropped; pass `reference` (2n, m) to top up from fallback columns."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    two_n = directions.shape[0]
    frame = []

    def try_add(col):
        d = col.astype(float).copy()
        for b in frame:
            d -= (d @ b) * b + (d @ symplectic_rotate(b)) * symplectic_rotate(b)
        nrm = np.linalg.norm(d)
        if nrm > 1e-8:
            frame.append(d / nrm)
            return True
        return False

    for j in range(directions.shape[1]):
        try_add(directions[:, j])
    if reference is not None:
        for j in range(reference.shape[1]):
            if len(frame) >= directions.shape[1]:
                break
            try_add(np.asarray(reference, dtype=float)[:, j])
    if not frame:
        raise NonIsotropicPlane("no isotropic directions could be extracted")
    return np.column_stack(frame)


def random_unitary_action(n, rng):
    """Random U(n) element acting on R^{2n} ~ C^n; preserves omega and
    the Euclidean structure."""
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))

    def act(x):
        x = np.asarray(x, dtype=float)
        zx = x[..., :n] + 1j * x[..., n:]
        out = zx @ q.T
        return np.concatenate([out.real, out.imag], axis=-1)

    return act


def random_isotropic(n, k, seed_or_rng=0, base=None) -> HorizontalPlane:
    """Random horizontal k-plane through `base`: a random unitary applied
    to the model isotropic frame e_1..e_k, so isotropy holds exactly up
    to roundoff."""
    if not (1 <= k <= n):
        raise InvalidParameter("k", f"need 1 <= k <= n, got k={k}, n={n}")
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    act = random_unitary_action(n, rng)
    model = np.zeros((2 * n, k))
    for i in range(k):
        model[i, i] = 1.0
    basis = act(model.T).T
    if base is None:
        base = np.zeros(2 * n + 1)
    return HorizontalPlane(base, basis)


# ---------------------------------------------------------------------------
# minimal distance to a horizontal plane

@dataclass
class DistanceBracket:
    inf_estimate: np.ndarray
    bracket_low: np.ndarray
    bracket_high: np.ndarray


def heis_dist_to_plane(p, plane: HorizontalPlane, sweeps=32) -> DistanceBracket:
    """Distance from p (batched) to an affine horizontal plane.

    bracket_high is the distance to the horizontal projection,
    bracket_low = 2^(-5/4) * bracket_high, and inf_estimate comes from
    bounded coordinate descent over the plane parameters initialized at
    the projection.  Correctness is certified by the bracket: the true
    minimal distance and the estimate both lie inside it.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    if pts.shape[1] != plane.base.shape[-1]:
        raise DimensionMismatch("point does not match plane ambient space")
    k = plane.k

    def f(v):
        return geo.koranyi_dist(plane.point_at(v), pts)

    v = plane.projected_coords(pts)
    cur = f(v)
    high = cur.copy()
    eta = 0.5 * np.maximum(cur, 1e-12)
    for _ in range(sweeps):
        improved = np.zeros(len(pts), dtype=bool)
        for dim in range(k):
            for sign in (1.0, -1.0):
                trial = v.copy()
                trial[:, dim] += sign * eta
                val = f(trial)
                better = val < cur
                v[better] = trial[better]
                cur = np.where(better, val, cur)
                improved |= better
        eta = np.where(improved, eta, 0.5 * eta)
    low = PROJ_BRACKET * high
    if single:
        return DistanceBracket(float(cur[0]), float(low[0]), float(high[0]))
    return DistanceBracket(cur, low, high)


def heis_dist_to_plane_batch(points, bases, frames, sweeps=32):
    """Coordinate-descent distances for T independent (point, plane)
    problems at once: points (T, 2n+1), bases (T, 2n+1), frames
    (T, 2n, k).  Returns a DistanceBracket of (T,) arrays."""
    points = np.asarray(points, dtype=float)
    bases = np.asarray(bases, dtype=float)
    frames = np.asarray(frames, dtype=float)
    t_count, k = frames.shape[0], frames.shape[2]
    qh, qt = bases[:, :-1], bases[:, -1]

    def f(v):
        hor = qh + np.einsum("tnk,tk->tn", frames, v)
        tt = qt + geo.omega(qh, hor - qh)
        return geo.koranyi_dist(geo.heis_point(hor, tt), points)

    v = np.einsum("tn,tnk->tk", points[:, :-1] - qh, frames)
    cur = f(v)
    high = cur.copy()
    eta = 0.5 * np.maximum(cur, 1e-12)
    for _ in range(sweeps):
        improved = np.zeros(t_count, dtype=bool)
        for dim in range(k):
            for sign in (1.0, -1.0):
                trial = v.copy()
                trial[:, dim] += sign * eta
                val = f(trial)
                better = val < cur
                v[better] = trial[better]
                cur = np.where(better, val, cur)
                improved |= better
        eta = np.where(improved, eta, 0.5 * eta)
    return DistanceBracket(cur, PROJ_BRACKET * high, high)


def heis_line_distances(points, base, direction):
    """Exact Koranyi distances from points to the horizontal line
    base.(s*direction, 0), vectorized.

    With r = [p] - [base], a = <r, v>, c^2 = |r|^2 - a^2, b = omega(v, r)
    and tau0 the vertical part of base^(-1).p, the fourth power of the
    distance along the line is ((s-a)^2 + c^2)^2 + 16 (tau0 - b s)^2;
    its stationary points solve a cubic, so the minimum is exact up to
    root finding.  The projection parameter s = a is always included as
    a candidate, which keeps the result inside the distance bracket.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    base = np.asarray(base, dtype=float)
    v = np.asarray(direction, dtype=float).ravel()
    v = v / np.sqrt(v @ v)
    n = len(v) // 2
    r = points[:, :-1] - base[:-1]
    a = r @ v
    c_sq = np.maximum(np.einsum("ij,ij->i", r, r) - a * a, 0.0)
    b = 0.5 * (r[:, n:] @ v[:n] - r[:, :n] @ v[n:])
    bh = base[:-1]
    om_bp = 0.5 * (points[:, n:-1] @ bh[:n] - points[:, :n] @ bh[n:])
    tau0 = points[:, -1] - base[-1] - om_bp

    # 4(s-a)^3 + 4 c^2 (s-a) + 32 b^2 s - 32 b tau0 = 0
    c2 = -3.0 * a
    c1 = 3.0 * a * a + c_sq + 8.0 * b * b
    c0 = -(a ** 3 + a * c_sq + 8.0 * b * tau0)
    cands = _cubic_roots_real(c2, c1, c0, fallback=a)
    best = None
    for kk in range(cands.shape[1]):
        s_val = cands[:, kk]
        g = ((s_val - a) ** 2 + c_sq) ** 2 + 16.0 * (tau0 - b * s_val) ** 2
        best = g if best is None else np.minimum(best, g)
    g_proj = c_sq ** 2 + 16.0 * (tau0 - b * a) ** 2
    return np.minimum(best, g_proj) ** 0.25


def _cubic_roots_real(c2, c1, c0, fallback):
    """Real roots of s^3 + c2 s^2 + c1 s + c0 (vectorized Cardano);
    always returns 3 candidates per row, padding with `fallback` where
    fewer real roots exist or the formulas degenerate."""
    c2 = np.asarray(c2, dtype=float)
    fallback = np.asarray(fallback, dtype=float)
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    one = disc >= 0
    sq = np.sqrt(np.where(one, disc, 0.0))
    single = np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq) - shift
    mp3 = np.sqrt(np.maximum(-p / 3.0, 1e-300))
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.clip(3.0 * q / (2.0 * p) / mp3, -1.0, 1.0)
    arg = np.where(np.isfinite(arg), arg, 0.0)
    theta = np.arccos(arg)
    out = np.empty((len(c2), 3))
    for kk in range(3):
        triple = 2.0 * mp3 * np.cos(theta / 3.0 - 2.0 * np.pi * kk / 3.0) - shift
        root = np.where(one, single if kk == 0 else fallback, triple)
        out[:, kk] = root
    return out


def point_to_plane_distance(points, plane, metric=None, estimate="descent"):
    """Uniform distance helper: Euclidean exact, Heisenberg via the
    coordinate-descent estimate ('descent') or the projection distance
    ('projection')."""
    if isinstance(plane, AffinePlane):
        return plane.distance(points)
    if estimate == "projection":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return geo.koranyi_dist(plane.project(pts), pts)
    return np.atleast_1d(heis_dist_to_plane(points, plane).inf_estimate)


# ---------------------------------------------------------------------------
# simplex volumes (squared-distance form)

def simplex_volume(points=None, sq_dists=None) -> float:
    """k-volume of the simplex on k+1 points via the bordered determinant
    of squared pairwise distances; tiny negative roundoff clamps to 0.

    Accepts either coordinate points or the (k+1, k+1) squared-distance
    matrix directly.
    """
    if sq_dists is None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(pts) < 2:
            raise DimensionMismatch("a simplex needs at least 2 vertices")
        diff = pts[:, None, :] - pts[None, :, :]
        sq_dists = np.sum(diff * diff, axis=-1)
    else:
        sq_dists = np.asarray(sq_dists, dtype=float)
    m = sq_dists.shape[0]
    if sq_dists.shape != (m, m):
        raise DimensionMismatch("squared-distance matrix must be square")
    k = m - 1
    bordered = np.ones((m + 1, m + 1))
    bordered[0, 0] = 0.0
    bordered[1:, 1:] = sq_dists
    det = np.linalg.det(bordered)
    vol_sq = (-1.0) ** (k + 1) / (2.0 ** k * float(math.factorial(k)) ** 2) * det
    return float(np.sqrt(max(vol_sq, 0.0)))


def dist_via_volumes(z, simplex) -> float:
    """Distance from z to the affine span of a (d+1)-point simplex:
    (d+1) Vol_{d+1}(simplex, z) / Vol_d(simplex)."""
    simplex = np.atleast_2d(np.asarray(simplex, dtype=float))
    z = np.asarray(z, dtype=float)
    d = len(simplex) - 1
    vol_d = simplex_volume(simplex)
    scale = max(np.max(np.linalg.norm(simplex - simplex[0], axis=1)), 1e-300)
    if vol_d <= 1e-14 * scale ** d:
        raise DegenerateSimplex("base simplex has (numerically) zero volume")
    vol_d1 = simplex_volume(np.vstack([simplex, z[None, :]]))
    return float((d + 1) * vol_d1 / vol_d)


# ---------------------------------------------------------------------------
# independent points in a cube

def independent_points(tree, cube, k):
    """Greedy selection of k+1 well-spread member points of a cube.

    x_0 is the cube center; in Euclidean ambient space x_i maximizes the
    distance to the affine span of the previous picks, in Heisenberg
    space the (bracketed) Koranyi distance to the horizontal plane
    through them.  Returns (indices, certificate) where the certificate
    is simplex_volume / diam(Q)^k; below 1e-12 the cube is effectively
    lower-dimensional and DegenerateCube is raised.
    """
    cube_obj = cube if not isinstance(cube, int) else tree.cube(cube)
    members = cube_obj.member_indices
    if len(members) < k + 1:
        raise TooFewPoints(f"cube has {len(members)} points, need {k + 1}")
    metric = tree.cloud.metric
    pts = tree.cloud.points[members]
    diam = tree.cube_diam(cube_obj)
    if diam <= 0:
        raise DegenerateCube("cube has zero diameter")
    center_pos = int(np.flatnonzero(members == cube_obj.center_index)[0])
    chosen = [center_pos]

    if not metric.is_heisenberg:
        for _ in range(k):
            sel = pts[chosen]
            if len(chosen) == 1:
                d = np.linalg.norm(pts - sel[0], axis=1)
            else:
                basis, _ = np.linalg.qr((sel[1:] - sel[0]).T)
                rel = pts - sel[0]
                d = np.linalg.norm(rel - (rel @ basis) @ basis.T, axis=1)
            chosen.append(int(np.argmax(d)))
        vol = simplex_volume(pts[chosen])
    else:
        n = metric.n
        if k > n:
            raise InvalidParameter("k", "horizontal planes need k <= n")
        frame = None
        for _ in range(k):
            base = pts[chosen[0]]
            if frame is None:
                d = geo.koranyi_dist(pts, np.broadcast_to(base, pts.shape))
            else:
                plane = HorizontalPlane(base, frame)
                d = heis_dist_to_plane(pts, plane, sweeps=12).bracket_high
            nxt = int(np.argmax(d))
            chosen.append(nxt)
            new_dir = pts[nxt][:-1] - base[:-1]
            cols = [new_dir] if frame is None else [frame[:, j] for j in range(frame.shape[1])] + [new_dir]
            frame = isotropize(np.column_stack(cols))
        vol = simplex_volume(pts[chosen][:, :-1])
    cert = vol / diam ** k
    if cert < 1e-12:
        raise DegenerateCube(
            f"independence certificate {cert:g} below 1e-12")
    return members[np.array(chosen)], float(cert)


# ---------------------------------------------------------------------------
# small-angle criterion

@dataclass
class SmallAngleResult:
    epsilon_measured: float
    angle: float
    ratio: float


def small_angle_check(ys, v1: AffinePlane, v2: AffinePlane, c) -> SmallAngleResult:
    """Measure the smallest eps with |y_i-y_j|^2 <= (1+eps^2)|proj
    differences|^2 and compare the plane angle against it.

    Spread of the input frame is verified first: every vertex must be
    at least c*r from the affine span of the others (r the largest
    pairwise distance), else PointsNotIndependent.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    kk = len(ys) - 1
    diffs = ys[:, None, :] - ys[None, :, :]
    dists = np.linalg.norm(diffs, axis=-1)
    r = float(dists.max())
    if r <= 0:
        raise PointsNotIndependent("all frame points coincide")
    for i in range(len(ys)):
        others = np.delete(ys, i, axis=0)
        try:
            d_i = dist_via_volumes(ys[i], others)
        except DegenerateSimplex:
            raise PointsNotIndependent("frame spans fewer than k dimensions")
        if d_i <= c * r:
            raise PointsNotIndependent(
                f"vertex {i} is only {d_i:g} from the others' span (cr = {c * r:g})")
    proj = v2.project(ys)
    pdiffs = np.linalg.norm(proj[:, None, :] - proj[None, :, :], axis=-1)
    eps_sq = 0.0
    for i in range(kk + 1):
        for j in range(i + 1, kk + 1):
            if pdiffs[i, j] <= 0:
                eps_sq = np.inf
            else:
                eps_sq = max(eps_sq, dists[i, j] ** 2 / pdiffs[i, j] ** 2 - 1.0)
    eps = float(np.sqrt(max(eps_sq, 0.0)))
    ang = angle_eucl(v1, v2)
    if eps == 0.0:
        ratio = 0.0 if ang <= 1e-12 else np.inf
    else:
        ratio = ang / eps
    return SmallAngleResult(eps, ang, float(ratio))


# ---------------------------------------------------------------------------
# randomized inequality checks

@dataclass
class VerificationReport:
    suite: str
    trials: int
    violations: int
    fitted_constant: float
    worst_case: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _random_affine_plane(n, k, rng, spread=1.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, k)))
    return AffinePlane(rng.normal(size=n) * spread, q[:, :k])


def pythagoras_check(kind, trials=1000, seed=0, n=None, c_max=1.0,
                     tol=1e-12) -> VerificationReport:
    """Randomized checks of the two-point projection inequalities.

    kind='eucl_two_plane' is exact (no free constant): violations are
    counted against `tol` absolute slack.  The Heisenberg kinds report
    the minimal fitted constant making the inequality hold across all
    trials; they never count violations.
    """
    rng = np.random.default_rng(seed)
    if kind == "eucl_two_plane":
        n = 4 if n is None else n
        violations = 0
        worst = {"slack": -np.inf}
        for t in range(trials):
            k = int(rng.integers(1, n))
            v1 = _random_affine_plane(n, k, rng)
            v2 = _random_affine_plane(n, k, rng)
            x, y = rng.normal(size=n), rng.normal(size=n)
            ang = angle_eucl(v1, v2)
            lhs = np.sum((x - y) ** 2)
            proj = v2.project(np.vstack([x, y]))
            slack = lhs - (np.sum((proj[0] - proj[1]) ** 2)
                           + (np.sqrt(lhs) * ang + v1.distance(x) + v1.distance(y)) ** 2)
            if slack > worst["slack"]:
                worst = {"slack": float(slack), "trial": t, "k": k}
            if slack > tol:
                violations += 1
        return VerificationReport("eucl_two_plane", trials, violations, 0.0, worst)

    if kind not in ("heis_one_plane", "heis_two_plane"):
        raise InvalidParameter("kind", f"unknown suite {kind!r}")
    n = 2 if n is None else n
    two_plane = kind == "heis_two_plane"
    ks = rng.integers(1, n + 1, size=trials)
    fitted = 0.0
    worst = {}
    kept = 0
    for k in range(1, n + 1):
        sel = np.flatnonzero(ks == k)
        if len(sel) == 0:
            continue
        t_count = len(sel)
        bases = geo.heis_point(rng.normal(size=(t_count, 2 * n)) * 0.5,
                               rng.normal(size=t_count) * 0.5)
        frames = np.empty((t_count, 2 * n, k))
        frames_w = np.empty((t_count, 2 * n, k))
        bases_w = geo.heis_point(rng.normal(size=(t_count, 2 * n)) * 0.5,
                                 rng.normal(size=t_count) * 0.5)
        for i in range(t_count):
            frames[i] = random_isotropic(n, k, rng).basis
            frames_w[i] = random_isotropic(n, k, rng).basis
        spread = rng.uniform(0.5, 2.0, size=(t_count, 1))
        params = rng.normal(size=(2, t_count, k)) * spread[None, :, :]
        hor = bases[:, :-1][None] + np.einsum("tnk,stk->stn", frames, params)
        tt = bases[:, -1][None] + geo.omega(np.broadcast_to(bases[:, :-1], hor.shape),
                                            hor - bases[:, :-1][None])
        anchors = geo.heis_point(hor, tt)
        off_scale = rng.uniform(0.0, 0.6, size=(t_count, 1)) * spread
        offsets = geo.heis_point(rng.normal(size=(2, t_count, 2 * n)) * off_scale[None],
                                 rng.normal(size=(2, t_count)) * off_scale[None, :, 0] ** 2)
        p1 = geo.heis_mul(anchors[0], offsets[0])
        p2 = geo.heis_mul(anchors[1], offsets[1])
        d12 = geo.koranyi_dist(p1, p2)
        stacked = np.vstack([p1, p2])
        br = heis_dist_to_plane_batch(stacked, np.vstack([bases, bases]),
                                      np.vstack([frames, frames]))
        d1, d2 = br.inf_estimate[:t_count], br.inf_estimate[t_count:]
        ok = d12 > 1e-12
        c_pair = np.where(ok, np.maximum(d1, d2) / np.maximum(d12, 1e-300), np.inf)
        ok &= c_pair <= c_max
        pc1 = np.einsum("tn,tnk->tk", p1[:, :-1] - bases[:, :-1], frames)
        pc2 = np.einsum("tn,tnk->tk", p2[:, :-1] - bases[:, :-1], frames)
        dproj = np.linalg.norm(pc1 - pc2, axis=1)
        if not two_plane:
            denom = (1.0 + c_pair ** 2) * (d1 + d2) ** 2
            ok &= denom > 1e-14 * d12 ** 2
            vals = np.where(ok, np.maximum(0.0, d12 ** 2 - dproj ** 2)
                            / np.where(ok, denom, 1.0), -np.inf)
        else:
            oc1 = np.einsum("tn,tnk->tk", p1[:, :-1] - bases_w[:, :-1], frames_w)
            oc2 = np.einsum("tn,tnk->tk", p2[:, :-1] - bases_w[:, :-1], frames_w)
            dproj_w = np.linalg.norm(oc1 - oc2, axis=1)
            need = np.sqrt(np.maximum(0.0, d12 ** 2 - dproj_w ** 2)) / np.maximum(d12, 1e-300)
            prod = np.einsum("tnk,tnl->tkl", frames, frames_w)
            sig = np.linalg.svd(prod, compute_uv=False)
            ang = np.sqrt(np.maximum(0.0, 1.0 - np.clip(sig[:, -1], 0, 1) ** 2))
            denom = (1.0 + c_pair) * (d1 + d2) / np.maximum(d12, 1e-300)
            ok &= denom > 1e-14
            vals = np.where(ok, np.maximum(0.0, need - ang)
                            / np.where(ok, denom, 1.0), -np.inf)
        kept += int(np.sum(ok))
        if np.any(ok):
            imax = int(np.argmax(vals))
            if vals[imax] > fitted:
                fitted = float(vals[imax])
                worst = {"trial": int(sel[imax]), "value": fitted,
                         "c": float(c_pair[imax]), "d12": float(d12[imax]),
                         "k": k}
    return VerificationReport(kind, trials, 0, float(fitted), worst,
                              extra={"kept": kept})


def bracket_containment_check(trials=1000, seed=0, n=2, tol=1e-6) -> VerificationReport:
    """Random (point, horizontal plane) pairs: the descent estimate must
    land in [2^(-5/4) d(p, P p) - tol*scale, d(p, P p) + tol*scale]."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst = {"margin": -np.inf}
    for t in range(trials):
        k = int(rng.integers(1, n + 1))
        base = geo.heis_point(rng.normal(size=2 * n), rng.normal())
        plane = random_isotropic(n, k, rng, base=base)
        p = geo.heis_point(rng.normal(size=2 * n) * rng.uniform(0.1, 3.0),
                           rng.normal() * rng.uniform(0.1, 3.0))
        br = heis_dist_to_plane(p, plane)
        scale = max(1.0, br.bracket_high)
        low_margin = br.bracket_low - tol * scale - br.inf_estimate
        high_margin = br.inf_estimate - br.bracket_high - tol * scale
        margin = max(low_margin, high_margin)
        if margin > worst["margin"]:
            worst = {"margin": float(margin), "trial": t, "k": k,
                     "estimate": float(br.inf_estimate),
                     "bracket": [float(br.bracket_low), float(br.bracket_high)]}
        if margin > 0:
            violations += 1
    return VerificationReport("bracket", trials, violations, 0.0, worst)


def small_angle_suite(thetas=(0.01, 0.05, 0.1), trials=1000, seed=0, k=2,
                      n=4, c=0.3) -> VerificationReport:
    """Planted-rotation experiment: frames on a random k-plane, the
    second plane rotated by a known angle; the angle/epsilon ratio must
    stay bounded by a single fitted constant across all trials."""
    rng = np.random.default_rng(seed)
    fitted = 0.0
    worst = {}
    count = 0
    for theta in thetas:
        for t in range(trials):
            q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            v1 = AffinePlane(np.zeros(n), q[:, :k])
            # rotate one in-plane direction toward an orthogonal one
            mix = q[:, :k] @ _haar_rotation(k, rng)
            u, w = mix[:, 0], q[:, k]
            rot_first = np.cos(theta) * u + np.sin(theta) * w
            basis2 = np.column_stack([rot_first] + [mix[:, i] for i in range(1, k)])
            v2 = AffinePlane(np.zeros(n), basis2)
            frame = np.vstack([np.zeros(n),
                               (q[:, :k] @ _haar_rotation(k, rng)).T
                               * rng.uniform(0.6, 1.0, size=(k, 1)) / np.sqrt(2)])
            res = small_angle_check(frame, v1, v2, c)
            count += 1
            if res.ratio > fitted:
                fitted = res.ratio
                worst = {"theta": theta, "trial": t,
                         "epsilon": res.epsilon_measured, "angle": res.angle}
    return VerificationReport("small_angle", count, 0, float(fitted), worst)


def _haar_rotation(k, rng):
    q, r = np.linalg.qr(rng.normal(size=(k, k)))
    return q * np.sign(np.diagonal(r))


# ---------------------------------------------------------------------------
# JSON forms

def plane_to_json(plane):
    if isinstance(plane, AffinePlane):
        return {"base": plane.base.tolist(),
                "basis": plane.basis.T.tolist()}
    return {"base": plane.base[:-1].tolist(),
            "vertical": float(plane.base[-1]),
            "basis": plane.basis.T.tolist()}


def plane_from_json(payload):
    basis = np.array(payload["basis"], dtype=float).T
    if "vertical" in payload:
        base = np.concatenate([np.asarray(payload["base"], dtype=float),
                               [payload["vertical"]]])
        return HorizontalPlane(base, basis)  # isotropy re-validated here
    return AffinePlane(np.asarray(payload["base"], dtype=float), basis)
