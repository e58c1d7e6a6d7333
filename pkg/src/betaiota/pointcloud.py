"""Weighted point clouds discretizing Ahlfors-regular sets.

A cloud is a finite sample of a set E together with positive weights
approximating the s-dimensional Hausdorff mass: curve/patch generators
assign (arc/area element) * h^s quadrature weights so that the total
weight approximates H^s(E).  The declared resolution h is the
inter-sample spacing; analysis below the scale 10*h is refused
everywhere because discretization noise dominates there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import geometry as geo
from .errors import (DegenerateDiameter, DimensionMismatch, InvalidParameter,
                     IsometryViolation, ParseError, SchemaError,
                     ScaleBelowResolution)

RESOLUTION_FACTOR = 10.0  # smallest usable analysis scale, in units of h
_EXACT_DIAM_LIMIT = 4096

GENERATOR_FAMILIES = (
    "segment", "kplane_patch", "circle", "parallel_lines",
    "lipschitz_graph", "turning_curve", "heis_horizontal_line", "heis_lift",
)


class WeightedPointCloud:
    """Finite weighted sample of an s-regular set.

    Attributes
    ----------
    metric : geometry.MetricSpec
    points : (N, D) float array, D = metric.dim
    weights : (N,) positive float array
    s : regularity exponent (= k for k-plane-like sets)
    h : resolution (inter-sample spacing)
    """

    def __init__(self, metric, points, weights, s, h, meta=None):
        self.metric = metric
        self.points = metric.check_points(np.atleast_2d(np.asarray(points, dtype=float)))
        self.weights = np.asarray(weights, dtype=float)
        self.s = float(s)
        self.h = float(h)
        self.meta = dict(meta or {})
        self._diam = None
        self._diam_method = None
        self.validate()

    def validate(self):
        if self.points.ndim != 2 or len(self.points) < 2:
            raise InvalidParameter("points", "need at least 2 points")
        if self.weights.shape != (len(self.points),):
            raise SchemaError("weights length does not match point count")
        if not np.all(self.weights > 0):
            raise InvalidParameter("weights", "must all be positive")
        if not (self.s > 0):
            raise InvalidParameter("s", "must be positive")
        if not (self.h > 0):
            raise InvalidParameter("h", "must be positive")

    def __len__(self):
        return len(self.points)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def diameter(self):
        """(diam, method): exact for N <= 4096, else farthest-point alternation."""
        if self._diam is None:
            self._diam, self._diam_method = set_diameter(
                self.metric, self.points)
            if self._diam <= self.h:
                raise InvalidParameter("h", "resolution exceeds cloud diameter")
        return self._diam, self._diam_method

    @property
    def diam(self) -> float:
        return self.diameter()[0]

    def ball(self, center, r, closed=True):
        """Indices of cloud points within distance r of `center`."""
        d = geo.dist_to_point(self.metric, self.points, np.asarray(center, dtype=float))
        return np.flatnonzero(d <= r if closed else d < r)

    def subset_mass(self, idx) -> float:
        return float(np.sum(self.weights[np.sort(np.asarray(idx))]))

    def rescaled(self, lam: float) -> "WeightedPointCloud":
        """Scale coordinates by lam (Heisenberg: dilation), weights by lam^s."""
        if self.metric.is_heisenberg:
            pts = geo.heis_dilate(self.points, lam)
        else:
            pts = self.points * lam
        return WeightedPointCloud(self.metric, pts,
                                  self.weights * lam ** self.s,
                                  self.s, self.h * lam,
                                  meta={**self.meta, "rescaled_by": lam})


def set_diameter(metric, points):
    """Diameter of a point set; exact up to 4096 points, else 4 rounds of
    farthest-point alternation (reported as 'approx')."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if n < 2:
        return 0.0, "exact"
    if n <= _EXACT_DIAM_LIMIT:
        if metric.is_heisenberg:
            best = 0.0
            step = max(1, _EXACT_DIAM_LIMIT // 8)
            for lo in range(0, n, step):
                block = geo.pairwise_dist(metric, points[lo:lo + step], points)
                best = max(best, float(block.max()))
            return best, "exact"
        return float(pdist(points).max()), "exact"
    i = 0
    best = 0.0
    for _ in range(4):
        d = geo.dist_to_point(metric, points, points[i])
        j = int(np.argmax(d))
        if d[j] <= best:
            break
        best = float(d[j])
        i = j
    return best, "approx"


# ---------------------------------------------------------------------------
# generators

@dataclass
class GeneratorSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0


def _require(cond, name, msg):
    if not cond:
        raise InvalidParameter(name, msg)


def _resample_polyline(vertices, h):
    """Resample a polyline at arclength spacing h. Returns (M, d) points."""
    vertices = np.asarray(vertices, dtype=float)
    seg = np.diff(vertices, axis=0)
    seglen = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    _require(total > 0, "h", "degenerate curve")
    m = max(2, int(round(total / h)) + 1)
    s = np.linspace(0.0, total, m)
    out = np.empty((m, vertices.shape[1]))
    for d in range(vertices.shape[1]):
        out[:, d] = np.interp(s, cum, vertices[:, d])
    return out


def _gen_segment(params, rng):
    length = float(params.get("length", 1.0))
    h = float(params["h"])
    n = int(params.get("n", 2))
    _require(length > 0, "length", "must be positive")
    _require(0 < h < length, "h", "must lie in (0, length)")
    m = int(round(length / h)) + 1
    pts = np.zeros((m, n))
    pts[:, 0] = np.linspace(0.0, length, m)
    w = np.full(m, h)
    return WeightedPointCloud(geo.euclidean(n), pts, w, s=1.0, h=h)


def _gen_kplane_patch(params, rng):
    k = int(params.get("k", 2))
    n = int(params.get("n", 3))
    side = float(params.get("side", 1.0))
    h = float(params["h"])
    _require(1 <= k < n, "k", "need 1 <= k < n")
    _require(0 < h < side, "h", "must lie in (0, side)")
    m = int(round(side / h)) + 1
    axes = [np.linspace(0.0, side, m)] * k
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.zeros((m ** k, n))
    for i in range(k):
        pts[:, i] = grid[i].ravel()
    w = np.full(len(pts), h ** k)
    return WeightedPointCloud(geo.euclidean(n), pts, w, s=float(k), h=h)


def _gen_circle(params, rng):
    r = float(params.get("r", 1.0))
    h = float(params["h"])
    _require(r > 0, "r", "must be positive")
    _require(0 < h < r, "h", "must lie in (0, r)")
    m = max(8, int(round(2 * np.pi * r / h)))
    theta = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    w = np.full(m, 2 * np.pi * r / m)
    return WeightedPointCloud(geo.euclidean(2), pts, w, s=1.0, h=2 * np.pi * r / m)


def _gen_parallel_lines(params, rng):
    eps = float(params["eps"])
    r = float(params.get("r", 1.0))
    h = float(params["h"])
    _require(0 < eps < 1, "eps", "must lie in (0, 1)")
    _require(r > 0, "r", "must be positive")
    _require(0 < h < r, "h", "must lie in (0, r)")
    m = int(round(2 * r / h)) + 1
    x = np.linspace(-r, r, m)
    lower = np.column_stack([x, np.zeros(m)])
    upper = np.column_stack([x, np.full(m, eps * r)])
    pts = np.vstack([lower, upper])
    w = np.full(len(pts), 2 * r / (m - 1))
    return WeightedPointCloud(geo.euclidean(2), pts, w, s=1.0, h=2 * r / (m - 1),
                              meta={"eps": eps, "r": r})


def _lipschitz_profile(L, rng, modes=6):
    """Random superposition of sines with derivative bound exactly L."""
    freqs = 2.0 ** np.arange(modes)
    phases = rng.uniform(0.0, 2 * np.pi, size=modes)
    signs = rng.choice([-1.0, 1.0], size=modes)
    # budget the slope equally across modes
    amps = signs * L / (modes * 2 * np.pi * freqs)

    def f(x):
        x = np.asarray(x, dtype=float)
        return sum(a * np.sin(2 * np.pi * fq * x + ph)
                   for a, fq, ph in zip(amps, freqs, phases))

    return f


def _gen_lipschitz_graph(params, rng):
    L = float(params.get("L", 0.2))
    h = float(params["h"])
    _require(L >= 0, "L", "must be nonnegative")
    _require(0 < h < 1, "h", "must lie in (0, 1)")
    f = _lipschitz_profile(L, rng, modes=int(params.get("modes", 6)))
    xs = np.linspace(0.0, 1.0, max(64, 4 * int(round(1.0 / h)) + 1))
    verts = np.column_stack([xs, f(xs)])
    pts = _resample_polyline(verts, h)
    w = np.full(len(pts), h)
    return WeightedPointCloud(geo.euclidean(2), pts, w, s=1.0, h=h,
                              meta={"L": L})


def turning_angles(c, p, generations):
    """Preset angle sequence alpha_g = c * g^(-1/p), g = 1..generations."""
    g = np.arange(1, generations + 1, dtype=float)
    return c * g ** (-1.0 / p)


def _gen_turning_curve(params, rng):
    c = float(params.get("c", 0.5))
    p = float(params.get("p", 2.0))
    generations = int(params.get("generations", 10))
    h = float(params["h"])
    _require(0 < c < 1.2, "c", "angle scale out of range")
    _require(p > 0, "p", "must be positive")
    _require(1 <= generations <= 16, "generations", "need 1..16")
    alphas = turning_angles(c, p, generations)
    _require(alphas[0] < np.pi / 3, "c", "first-generation angle too large")
    verts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for alpha in alphas:
        seg = verts[1:] - verts[:-1]
        mid = 0.5 * (verts[:-1] + verts[1:])
        normal = np.column_stack([-seg[:, 1], seg[:, 0]])
        apex = mid + 0.5 * np.tan(alpha) * normal
        out = np.empty((2 * len(seg) + 1, 2))
        out[0::2] = verts
        out[1::2] = apex
        verts = out
    pts = _resample_polyline(verts, h)
    w = np.full(len(pts), h)
    return WeightedPointCloud(geo.euclidean(2), pts, w, s=1.0, h=h,
                              meta={"angles": alphas.tolist()})


def _gen_heis_horizontal_line(params, rng):
    n = int(params.get("n", 1))
    h = float(params["h"])
    length = float(params.get("length", 1.0))
    _require(n >= 1, "n", "must be >= 1")
    _require(0 < h < length, "h", "must lie in (0, length)")
    from .planes import random_isotropic  # deferred: planes imports geometry only
    base = np.zeros(2 * n + 1)
    base[:2 * n] = rng.normal(size=2 * n) * float(params.get("base_scale", 0.0))
    plane = random_isotropic(n, 1, rng, base=base)
    v = plane.basis[:, 0]
    m = int(round(length / h)) + 1
    svals = np.linspace(0.0, length, m)
    hor = base[None, :2 * n] + svals[:, None] * v[None, :]
    t = base[-1] + geo.omega(np.broadcast_to(base[:2 * n], hor.shape), hor - base[None, :2 * n])
    pts = geo.heis_point(hor, t)
    w = np.full(m, length / (m - 1))
    return WeightedPointCloud(geo.heisenberg(n), pts, w, s=1.0, h=length / (m - 1))


def horizontal_lift(planar, t0=0.0):
    """Lift a planar polyline into H^1 with the area integral of omega.

    Uses the midpoint rule, which integrates the lift exactly on each
    straight segment, so consecutive lifted samples are connected by
    horizontal group elements up to roundoff.
    """
    planar = np.asarray(planar, dtype=float)
    if planar.ndim != 2 or planar.shape[1] != 2:
        raise DimensionMismatch("horizontal_lift needs an (N, 2) polyline")
    seg = np.diff(planar, axis=0)
    mid = 0.5 * (planar[:-1] + planar[1:])
    dt = geo.omega(mid, seg)
    t = np.concatenate([[t0], t0 + np.cumsum(dt)])
    return geo.heis_point(planar, t)


def _gen_heis_lift(params, rng):
    curve = params.get("curve", "circle")
    h = float(params["h"])
    n = int(params.get("n", 1))
    _require(n >= 1, "n", "must be >= 1")
    if curve == "circle":
        r = float(params.get("r", 1.0))
        _require(0 < h < r, "h", "must lie in (0, r)")
        m = max(16, int(round(2 * np.pi * r / h)) + 1)
        theta = np.linspace(0.0, 2 * np.pi, m)
        planar = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        h_eff = 2 * np.pi * r / (m - 1)
    elif curve == "segment":
        length = float(params.get("length", 1.0))
        _require(0 < h < length, "h", "must lie in (0, length)")
        m = int(round(length / h)) + 1
        planar = np.column_stack([np.linspace(0, length, m), np.zeros(m)])
        h_eff = length / (m - 1)
    else:
        raise InvalidParameter("curve", f"unknown planar curve {curve!r}")
    pts = horizontal_lift(planar, t0=float(params.get("t0", 0.0)))
    w = np.full(len(pts), h_eff)
    cloud = WeightedPointCloud(geo.heisenberg(1), pts, w, s=1.0, h=h_eff,
                               meta={"curve": curve})
    if n > 1:
        cloud = embed_iota1(cloud, n)
    return cloud


_GENERATORS = {
    "segment": _gen_segment,
    "kplane_patch": _gen_kplane_patch,
    "circle": _gen_circle,
    "parallel_lines": _gen_parallel_lines,
    "lipschitz_graph": _gen_lipschitz_graph,
    "turning_curve": _gen_turning_curve,
    "heis_horizontal_line": _gen_heis_horizontal_line,
    "heis_lift": _gen_heis_lift,
}


def generate(spec: GeneratorSpec) -> WeightedPointCloud:
    """Build the synthetic cloud described by `spec` (deterministic given seed)."""
    if spec.family not in _GENERATORS:
        raise InvalidParameter("family", f"unknown family {spec.family!r}")
    if "h" not in spec.params:
        raise InvalidParameter("h", "resolution h is required")
    rng = np.random.default_rng(spec.seed)
    cloud = _GENERATORS[spec.family](spec.params, rng)
    cloud.meta.setdefault("family", spec.family)
    cloud.meta.setdefault("seed", spec.seed)
    return cloud


# ---------------------------------------------------------------------------
# Ahlfors-regularity estimation

@dataclass
class RegularityReport:
    s: float
    c_lower: float
    c_upper: float
    samples: list
    flagged: bool
    spread_bound: float


def estimate_regularity(cloud, trials=200, seed=0, spread_bound=10.0,
                        r_min=None, r_max=None) -> RegularityReport:
    """Empirical min/max of mass(B_r(x)) / r^s over sampled centers and radii.

    Centers are drawn from the cloud weighted by mass; radii log-uniform in
    [10h, diam/2].  The report is flagged when the ratio spread exceeds
    `spread_bound`, which signals a mismatched regularity exponent.
    """
    if trials < 1:
        raise InvalidParameter("trials", "must be >= 1")
    diam, _ = cloud.diameter()
    lo = RESOLUTION_FACTOR * cloud.h if r_min is None else r_min
    hi = diam / 2 if r_max is None else r_max
    if lo < RESOLUTION_FACTOR * cloud.h:
        raise ScaleBelowResolution(
            f"requested radius {lo} below 10h = {RESOLUTION_FACTOR * cloud.h}")
    if hi <= lo:
        raise ScaleBelowResolution("no usable radii between 10h and diam/2")
    rng = np.random.default_rng(seed)
    prob = cloud.weights / cloud.total_mass
    centers = rng.choice(len(cloud), size=trials, p=prob)
    radii = np.exp(rng.uniform(np.log(lo), np.log(hi), size=trials))
    samples = []
    for i, r in zip(centers, radii):
        mass = cloud.subset_mass(cloud.ball(cloud.points[i], r))
        samples.append((int(i), float(r), mass / r ** cloud.s))
    ratios = np.array([s[2] for s in samples])
    c_lower, c_upper = float(ratios.min()), float(ratios.max())
    flagged = bool(c_upper > spread_bound * max(c_lower, 1e-300))
    return RegularityReport(cloud.s, c_lower, c_upper, samples, flagged,
                            spread_bound)


# ---------------------------------------------------------------------------
# isometric embeddings into H^n

def embed_iota1(cloud, n: int) -> WeightedPointCloud:
    """H^1 -> H^n, (x, y, t) -> (x, 0..0; y, 0..0; t). Pairwise Koranyi
    distances are preserved exactly."""
    if not (cloud.metric.is_heisenberg and cloud.metric.n == 1):
        raise DimensionMismatch("embed_iota1 needs a Heisenberg(1) cloud")
    if n <= 1:
        raise DimensionMismatch("target index must exceed 1")
    pts = np.zeros((len(cloud), 2 * n + 1))
    pts[:, 0] = cloud.points[:, 0]
    pts[:, n] = cloud.points[:, 1]
    pts[:, -1] = cloud.points[:, 2]
    return WeightedPointCloud(geo.heisenberg(n), pts, cloud.weights.copy(),
                              cloud.s, cloud.h, meta=dict(cloud.meta))


def embed_iota2(cloud, n: int) -> WeightedPointCloud:
    """R^2 -> H^n, (x1, x2) -> (x1, x2, 0..0; 0). Isometric only for n >= 2
    where the image plane is isotropic."""
    if cloud.metric.is_heisenberg or cloud.metric.n != 2:
        raise DimensionMismatch("embed_iota2 needs a Euclidean(2) cloud")
    if n < 2:
        raise IsometryViolation(
            "the coordinate 2-plane is not isotropic in H^1")
    pts = np.zeros((len(cloud), 2 * n + 1))
    pts[:, 0] = cloud.points[:, 0]
    pts[:, 1] = cloud.points[:, 1]
    return WeightedPointCloud(geo.heisenberg(n), pts, cloud.weights.copy(),
                              cloud.s, cloud.h, meta=dict(cloud.meta))


# ---------------------------------------------------------------------------
# file formats

def _metric_tokens(metric):
    return metric.kind, metric.n


def write_cloud(cloud, path):
    """Write a cloud as CSV (or JSON when the path ends in .json)."""
    path = str(path)
    if path.endswith(".json"):
        payload = {
            "metric": {"kind": cloud.metric.kind, "n": cloud.metric.n},
            "s": cloud.s,
            "h": cloud.h,
            "points": [[float(v) for v in row] for row in cloud.points],
            "weights": [float(w) for w in cloud.weights],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
        return
    kind, n = _metric_tokens(cloud.metric)
    dim = cloud.metric.dim
    with open(path, "w") as fh:
        fh.write(f"# metric,{kind},{n},s,{cloud.s:.17g},h,{cloud.h:.17g}\n")
        fh.write(",".join(f"c{i + 1}" for i in range(dim)) + ",weight\n")
        for row, w in zip(cloud.points, cloud.weights):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{w:.17g}\n")


def read_cloud(path) -> WeightedPointCloud:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        try:
            metric = geo.MetricSpec(payload["metric"]["kind"],
                                    int(payload["metric"]["n"]))
            cloud = WeightedPointCloud(metric, payload["points"],
                                       payload["weights"],
                                       payload["s"], payload["h"])
        except KeyError as exc:
            raise SchemaError(f"missing field {exc} in JSON cloud") from exc
        except DimensionMismatch as exc:
            raise SchemaError(str(exc)) from exc
        return cloud
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise SchemaError("first line must be the '# metric,...' header")
    tokens = [t.strip() for t in lines[0].lstrip("#").split(",")]
    if len(tokens) != 7 or tokens[0] != "metric" or tokens[3] != "s" or tokens[5] != "h":
        raise SchemaError(f"malformed metric header: {lines[0]!r}")
    kind, n = tokens[1], int(tokens[2])
    s_val, h_val = float(tokens[4]), float(tokens[6])
    try:
        metric = geo.MetricSpec(kind, n)
    except DimensionMismatch as exc:
        raise SchemaError(str(exc)) from exc
    if len(lines) < 2:
        raise SchemaError("missing column header row")
    cols = [c.strip() for c in lines[1].split(",")]
    if cols[-1] != "weight":
        raise SchemaError("missing weight column")
    if len(cols) - 1 != metric.dim:
        raise SchemaError(
            f"{len(cols) - 1} coordinate columns, metric needs {metric.dim}")
    pts, ws = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(cols):
            raise ParseError(lineno, f"expected {len(cols)} fields, got {len(parts)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
        pts.append(vals[:-1])
        ws.append(vals[-1])
    if len(pts) < 2:
        raise SchemaError("cloud needs at least 2 points")
    return WeightedPointCloud(metric, np.array(pts), np.array(ws), s_val, h_val)
