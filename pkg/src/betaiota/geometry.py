"""Ambient-space primitives.

Two ambient geometries are supported:

* Euclidean space R^n with the usual distance.
* The n-th Heisenberg group H^n = R^{2n+1} with the left-invariant
  Koranyi metric.  A point is stored as a flat vector (x, t) with
  x in R^{2n} (the horizontal part) and t in R (the vertical
  coordinate).  The group product is

      (x, t) . (x', t') = (x + x', t + t' + omega(x, x')),

  where omega is the standard symplectic form on R^{2n}, and the
  Koranyi norm is ||(x, t)|| = (|x|^4 + 16 t^2)^(1/4).

All functions are pure and accept batched inputs (leading axes are
broadcast); everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch

EUCLIDEAN = "euclidean"
HEISENBERG = "heisenberg"


@dataclass(frozen=True)
class MetricSpec:
    """Which ambient space point coordinates live in.

    kind is 'euclidean' or 'heisenberg'; n is the Euclidean dimension
    (kind='euclidean') or the Heisenberg index (ambient coordinate
    dimension 2n+1).
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, HEISENBERG):
            raise DimensionMismatch(f"unknown metric kind {self.kind!r}")
        if self.n < 1:
            raise DimensionMismatch("metric index n must be >= 1")

    @property
    def dim(self) -> int:
        """Ambient coordinate dimension."""
        return self.n if self.kind == EUCLIDEAN else 2 * self.n + 1

    @property
    def is_heisenberg(self) -> bool:
        return self.kind == HEISENBERG

    def check_points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"points have {pts.shape[-1]} coordinates, metric needs {self.dim}")
        return pts


def euclidean(n: int) -> MetricSpec:
    return MetricSpec(EUCLIDEAN, n)


def heisenberg(n: int) -> MetricSpec:
    return MetricSpec(HEISENBERG, n)


# ---------------------------------------------------------------------------
# symplectic form and group operations

def omega(x, y) -> np.ndarray:
    """Symplectic form 1/2 * sum_i (x_i y_{n+i} - x_{n+i} y_i) on R^{2n}.

    Bilinear and antisymmetric; broadcasts over leading axes.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise DimensionMismatch("omega arguments must have equal length")
    if x.shape[-1] % 2 != 0 or x.shape[-1] == 0:
        raise DimensionMismatch("omega needs vectors of even positive length")
    n = x.shape[-1] // 2
    return 0.5 * (np.sum(x[..., :n] * y[..., n:], axis=-1)
                  - np.sum(x[..., n:] * y[..., :n], axis=-1))


def horizontal(p) -> np.ndarray:
    """First 2n coordinates of a Heisenberg point (batched)."""
    p = np.asarray(p, dtype=float)
    return p[..., :-1]


def vertical(p) -> np.ndarray:
    """Vertical (last) coordinate of a Heisenberg point (batched)."""
    p = np.asarray(p, dtype=float)
    return p[..., -1]


def heis_point(x, t) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.concatenate([x, np.expand_dims(t, -1)], axis=-1)


def _check_heis(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] % 2 == 0 or p.shape[-1] < 3:
        raise DimensionMismatch(
            f"Heisenberg point needs 2n+1 >= 3 coordinates, got {p.shape[-1]}")
    return p


def heis_mul(p, q) -> np.ndarray:
    """Group product p . q (batched)."""
    p = _check_heis(p)
    q = _check_heis(q)
    if p.shape[-1] != q.shape[-1]:
        raise DimensionMismatch("group product of points in different H^n")
    xp, xq = p[..., :-1], q[..., :-1]
    t = p[..., -1] + q[..., -1] + omega(xp, xq)
    return heis_point(xp + xq, t)


def heis_inv(p) -> np.ndarray:
    """Group inverse (-x, -t)."""
    p = _check_heis(p)
    return -p


def heis_dilate(p, lam: float) -> np.ndarray:
    """Heisenberg dilation (x, t) -> (lam x, lam^2 t)."""
    p = _check_heis(p)
    out = p * lam
    out[..., -1] = p[..., -1] * lam * lam
    return out


def koranyi_norm(p) -> np.ndarray:
    """Koranyi norm (|x|^4 + 16 t^2)^(1/4).

    Evaluated as sqrt(hypot(|x|^2, 4t)) which keeps the fourth powers
    out of the arithmetic.
    """
    p = _check_heis(p)
    a = np.sum(p[..., :-1] ** 2, axis=-1)
    return np.sqrt(np.hypot(a, 4.0 * p[..., -1]))


def koranyi_dist(p, q) -> np.ndarray:
    """Left-invariant distance ||p^{-1} . q|| (batched)."""
    p = _check_heis(p)
    q = _check_heis(q)
    if p.shape[-1] != q.shape[-1]:
        raise DimensionMismatch("distance between points in different H^n")
    dx = q[..., :-1] - p[..., :-1]
    dt = q[..., -1] - p[..., -1] - omega(p[..., :-1], q[..., :-1])
    a = np.sum(dx ** 2, axis=-1)
    return np.sqrt(np.hypot(a, 4.0 * dt))


# ---------------------------------------------------------------------------
# metric dispatch

def dist(metric: MetricSpec, p, q) -> np.ndarray:
    """Distance between points (batched) under the given metric."""
    p = metric.check_points(p)
    q = metric.check_points(q)
    if metric.is_heisenberg:
        return koranyi_dist(p, q)
    return np.linalg.norm(np.asarray(q) - np.asarray(p), axis=-1)


def pairwise_dist(metric: MetricSpec, a, b=None) -> np.ndarray:
    """Full (len(a), len(b)) distance matrix. b defaults to a."""
    a = np.atleast_2d(metric.check_points(a))
    b = a if b is None else np.atleast_2d(metric.check_points(b))
    if not metric.is_heisenberg:
        return cdist(a, b)
    n = metric.n
    ah, bh = a[:, :-1], b[:, :-1]
    dh2 = cdist(ah, bh, "sqeuclidean")
    # omega(a_h, b_h) for all pairs
    om = 0.5 * (ah[:, :n] @ bh[:, n:].T - ah[:, n:] @ bh[:, :n].T)
    dt = b[None, :, -1] - a[:, None, -1] - om
    return np.sqrt(np.hypot(dh2, 4.0 * dt))


def dist_to_point(metric: MetricSpec, points, q) -> np.ndarray:
    """Distances from every row of `points` to the single point `q`."""
    points = np.atleast_2d(metric.check_points(points))
    q = metric.check_points(q)
    return dist(metric, points, np.broadcast_to(q, points.shape))
