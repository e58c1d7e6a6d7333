"""Carleson-type geometric-lemma sums and the comparison experiments.

The central object is the packing sum

    S(Q0) = sum over built cubes Q inside Q0 of  h(2Q)^p mu(Q),

where h is a coefficient functional evaluated on the 2-enlargement of
each cube.  A set satisfies the p-geometric lemma for h when
S(Q0) <= M mu(Q0) uniformly over root cubes; the module reports
finite-depth estimates of M together with per-level partial sums so
divergence (a failing geometric lemma) is visible as ratios that grow
with depth.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coefficients as co
from . import cubes as cu
from . import geometry as geo
from . import planes as pl
from . import pointcloud as pc
from .errors import ScaleBelowResolution, TooFewPoints, UnknownCube


def parallel_map(fn, items, threads=None):
    """Ordered map over pure per-item work; results independent of the
    thread count."""
    items = list(items)
    if threads is None:
        threads = min(32, os.cpu_count() or 1)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _cube_seed(seed, cube_id):
    return int(np.random.SeedSequence([seed, cube_id]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# per-cube coefficient records

@dataclass
class RecordSet:
    kind: str
    p: float
    K: float
    records: dict          # cube_id -> CoefficientRecord
    skipped: dict          # cube_id -> reason
    seed: int = 0

    def value(self, cube_id):
        rec = self.records.get(cube_id)
        return 0.0 if rec is None else rec.value


def compute_records(tree, kind, p, k, K=2.0, starts=4, seed=0,
                    pair_budget=co.DEFAULT_PAIR_BUDGET,
                    opt_pair_budget=200_000, descent_iters=16,
                    threads=None, min_points=None) -> RecordSet:
    """Evaluate one coefficient for every cube of the tree on its
    K-enlargement.  Cubes whose enlargement has fewer than k+2 points
    or sits below the resolution scale are skipped and recorded."""
    if min_points is None:
        min_points = k + 2
    cubes_list = list(tree.all_cubes())

    def work(cube):
        idx = cu.enlarge(tree, cube, K)
        if len(idx) < min_points:
            return cube.id, None, "too_few_points"
        s = co.WeightedSet.from_tree(tree, idx)
        cseed = _cube_seed(seed, cube.id)
        try:
            if kind == "beta":
                rec = co.beta_p(s, k, p, starts=starts, seed=cseed,
                                cube_id=cube.id)
            elif kind == "iota":
                rec = co.iota_p(s, k, p, starts=starts, seed=cseed,
                                pair_budget=pair_budget,
                                opt_pair_budget=opt_pair_budget,
                                descent_iters=descent_iters, cube_id=cube.id)
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except ScaleBelowResolution:
            return cube.id, None, "below_resolution"
        except TooFewPoints:
            return cube.id, None, "too_few_points"
        return cube.id, rec, None

    out = parallel_map(work, cubes_list, threads)
    records, skipped = {}, {}
    for cid, rec, reason in out:
        if rec is None:
            skipped[cid] = reason
        else:
            records[cid] = rec
    return RecordSet(kind, p, K, records, skipped, seed)


# ---------------------------------------------------------------------------
# geometric-lemma sums

@dataclass
class CarlesonRow:
    root_id: int
    level: int
    sum: float
    mass: float
    ratio: float


@dataclass
class CarlesonReport:
    kind: str
    p: float
    rows: list
    M_estimate: float
    max_level: int
    skipped: dict
    per_level: dict = field(default_factory=dict)  # top roots: level -> increment
    meta: dict = field(default_factory=dict)

    def row(self, root_id):
        for r in self.rows:
            if r.root_id == root_id:
                return r
        raise UnknownCube(f"no row for root {root_id}")


def glem_sum(tree, record_set: RecordSet, p, root, max_level=None):
    """Exact packing sum over the built descendants of one root cube."""
    root = root if isinstance(root, cu.Cube) else tree.cube(root)
    if max_level is None:
        max_level = tree.deepest_level
    total = 0.0
    frontier = [root]
    per_level = {}
    while frontier:
        nxt = []
        for q in frontier:
            if q.level > max_level:
                continue
            term = record_set.value(q.id) ** p * q.mass
            total += term
            per_level[q.level] = per_level.get(q.level, 0.0) + term
            nxt.extend(tree.cubes[c] for c in q.children)
        frontier = nxt
    return CarlesonRow(root.id, root.level, total, root.mass,
                       total / root.mass), per_level


def glem_constant(tree, record_set: RecordSet, p, max_level=None) -> CarlesonReport:
    """Packing sums with every built cube as root (bottom-up dynamic
    program); M_estimate is the largest sum/mass ratio."""
    if max_level is None:
        max_level = tree.deepest_level
    sums = {}
    rows = []
    for j in range(max_level, -1, -1):
        for cid in tree.levels[j]:
            cube = tree.cubes[cid]
            term = record_set.value(cid) ** p * cube.mass
            s = term + sum(sums.get(c, 0.0) for c in cube.children)
            sums[cid] = s
            rows.append(CarlesonRow(cid, j, s, cube.mass, s / cube.mass))
    m_est = max((r.ratio for r in rows), default=0.0)
    per_level = {}
    for cid in tree.levels[0]:
        _, lv = glem_sum(tree, record_set, p, cid, max_level)
        per_level[cid] = lv
    return CarlesonReport(record_set.kind, p, rows, m_est, max_level,
                          record_set.skipped, per_level,
                          {"K": record_set.K, "seed": record_set.seed})


def report_to_csv(report: CarlesonReport, path, meta_path=None):
    with open(path, "w") as fh:
        fh.write("root_id,sum,mass,ratio\n")
        for r in report.rows:
            fh.write(f"{r.root_id},{r.sum:.17g},{r.mass:.17g},{r.ratio:.17g}\n")
    if meta_path is not None:
        meta = {"kind": report.kind, "p": report.p,
                "max_level": report.max_level,
                "M_estimate": report.M_estimate,
                "skipped": {str(k): v for k, v in report.skipped.items()},
                **report.meta}
        with open(meta_path, "w") as fh:
            json.dump(meta, fh)


# ---------------------------------------------------------------------------
# beta vs iota comparison

@dataclass
class ComparisonReport:
    rows: list                   # (cube_id, level, beta2, iota1)
    fitted_C: float              # max beta2^2 / iota1
    fitted_C_witness: int | None
    max_pointwise_ratio: float   # max iota1 / beta2^2
    ratio_witness: int | None
    M_beta: float
    M_iota: float
    skipped_flat: int
    infinite_fit: bool


def compare_beta_iota(tree, k=None, starts=4, seed=0,
                      pair_budget=co.DEFAULT_PAIR_BUDGET, threads=None,
                      floor=1e-12) -> ComparisonReport:
    """Per cube: beta_2(2Q) and iota_1(2Q) records, the fitted constant
    in beta^2 <= C iota, the worst pointwise ratio iota / beta^2, and
    both Carleson constants (GLem(beta_2, 2) vs GLem(iota_1, 1))."""
    if tree.cloud.metric.is_heisenberg:
        raise ValueError("comparison experiment is Euclidean-only")
    if k is None:
        k = max(1, int(round(tree.cloud.s)))
    beta_rs = compute_records(tree, "beta", 2.0, k, starts=starts,
                              seed=seed, threads=threads)
    iota_rs = compute_records(tree, "iota", 1.0, k, starts=starts,
                              seed=seed + 1, pair_budget=pair_budget,
                              threads=threads)
    rows = []
    fitted_c, fit_wit = 0.0, None
    max_ratio, ratio_wit = 0.0, None
    skipped_flat = 0
    infinite = False
    for cube in tree.all_cubes():
        if cube.id not in beta_rs.records or cube.id not in iota_rs.records:
            continue
        b = beta_rs.records[cube.id].value
        i = iota_rs.records[cube.id].value
        rows.append((cube.id, cube.level, b, i))
        if b * b <= floor and i <= floor:
            skipped_flat += 1
            continue
        if i <= floor:
            infinite = True
            continue
        if b * b / i > fitted_c:
            fitted_c, fit_wit = b * b / i, cube.id
        if b * b > floor and i / (b * b) > max_ratio:
            max_ratio, ratio_wit = i / (b * b), cube.id
    rep_b = glem_constant(tree, beta_rs, 2.0)
    rep_i = glem_constant(tree, iota_rs, 1.0)
    return ComparisonReport(rows, fitted_c, fit_wit, max_ratio, ratio_wit,
                            rep_b.M_estimate, rep_i.M_estimate,
                            skipped_flat, infinite)


# ---------------------------------------------------------------------------
# weighted packing inequality

@dataclass
class PackingResult:
    root_id: int
    lhs: float
    rhs_sum: float
    fitted_Cbar: float
    m: int
    K0: float
    flagged: bool
    per_depth_rhs: dict = field(default_factory=dict)


def weighted_packing_check(tree, root, p=1.0, k=None, K0=None,
                           beta_records: RecordSet = None, starts=4, seed=0,
                           pair_budget=co.DEFAULT_PAIR_BUDGET,
                           max_level=None, threads=None) -> PackingResult:
    """Compare mu(Q0) iota_p(2Q0)^p against the depth-weighted sum
    sum_i sum_j 2^(-s j) sum_{Q in F_j(Q0^i)} mu(Q) beta_{2p}(K0 Q)^{2p}
    over the same-level cover {Q0^i} of 2Q0."""
    root = root if isinstance(root, cu.Cube) else tree.cube(root)
    if k is None:
        k = max(1, int(round(tree.cloud.s)))
    s_exp = tree.cloud.s
    cover, local_k0 = cu.cover_of_enlargement(tree, root, K=2.0)
    if K0 is None:
        K0 = local_k0
    if beta_records is None:
        beta_records = compute_records(tree, "beta", 2.0 * p, k, K=K0,
                                       starts=starts, seed=seed,
                                       threads=threads)
    if max_level is None:
        max_level = tree.deepest_level
    idx = cu.enlarge(tree, root, 2.0)
    s2q = co.WeightedSet.from_tree(tree, idx)
    iota_rec = co.iota_p(s2q, k, p, starts=starts, seed=_cube_seed(seed, root.id),
                         pair_budget=pair_budget)
    lhs = root.mass * iota_rec.value ** p
    rhs = 0.0
    per_depth = {}
    for q0i in cover:
        for j in range(0, max_level - root.level + 1):
            weight = 2.0 ** (-s_exp * j)
            inc = 0.0
            for q in cu.descendants(tree, q0i, j):
                inc += q.mass * beta_records.value(q.id) ** (2.0 * p)
            rhs += weight * inc
            per_depth[j] = per_depth.get(j, 0.0) + weight * inc
    flagged = rhs == 0.0 and lhs > 0.0
    fitted = np.inf if flagged else (0.0 if lhs == 0.0 else lhs / rhs)
    return PackingResult(root.id, lhs, rhs, fitted, len(cover), K0, flagged,
                         per_depth)


# ---------------------------------------------------------------------------
# tilting of optimal planes

def tilting_check(tree, p=1.0, k=None, lambda0=2.0, lambda1=2.0,
                  beta_records: RecordSet = None, starts=4, seed=0,
                  threads=None, floor=1e-12) -> pl.VerificationReport:
    """Angle between achieved beta-optimal planes of nested cube pairs
    against lambda0^(k+1) (beta of the outer + beta of the inner).

    Pairs are parent/child plus same-level cubes whose enlargements
    nest; pairs whose denominator is below `floor` while the planes
    coincide are skipped, and pairs with a degenerate denominator but a
    genuine angle are reported separately, not fitted.
    """
    if k is None:
        k = max(1, int(round(tree.cloud.s)))
    if beta_records is None:
        beta_records = compute_records(tree, "beta", p, k, K=lambda0,
                                       starts=starts, seed=seed,
                                       threads=threads)
    enlarged = {}

    def members_of(cube, K):
        key = (cube.id, K)
        if key not in enlarged:
            enlarged[key] = cu.enlarge(tree, cube, K)
        return enlarged[key]

    pairs = []
    for cube in tree.all_cubes():
        for child_id in cube.children:
            pairs.append((tree.cubes[child_id], cube))
    for j in range(tree.depth):
        level = [tree.cubes[c] for c in tree.levels[j]]
        for q1 in level:
            for q0 in level:
                if q0.id == q1.id:
                    continue
                m1 = members_of(q1, lambda1)
                m0 = members_of(q0, lambda0)
                if np.all(np.isin(m1, m0, assume_unique=True)):
                    pairs.append((q1, q0))

    fitted, worst = 0.0, {}
    degenerate = []
    used = 0
    for q1, q0 in pairs:
        r1 = beta_records.records.get(q1.id)
        r0 = beta_records.records.get(q0.id)
        if r1 is None or r0 is None:
            continue
        m1 = members_of(q1, lambda1)
        m0 = members_of(q0, lambda0)
        if not np.all(np.isin(m1, m0, assume_unique=True)):
            continue
        ang = pl.plane_angle(r0.plane, r1.plane)
        denom = lambda0 ** (k + 1) * (r0.value + r1.value)
        if denom < floor:
            if ang < 1e-9:
                continue
            degenerate.append({"inner": q1.id, "outer": q0.id,
                               "angle": float(ang)})
            continue
        used += 1
        ratio = ang / denom
        if ratio > fitted:
            fitted = ratio
            worst = {"inner": q1.id, "outer": q0.id, "angle": float(ang),
                     "denominator": float(denom)}
    return pl.VerificationReport("tilting", used, 0, float(fitted), worst,
                                 extra={"degenerate_pairs": degenerate,
                                        "lambda0": lambda0,
                                        "lambda1": lambda1})


# ---------------------------------------------------------------------------
# sup-coefficient comparability under the standard embeddings

@dataclass
class EmbeddingReport:
    n: int
    rows: list                 # (source, value_before, value_after)
    fitted_h1: float           # max before/after over H^1 sets
    fitted_r2: float           # max before/after over R^2 sets
    exact_violations: int      # after > before beyond tolerance
    worst_exact_margin: float


def _embed_line_h1(plane: pl.HorizontalPlane, n):
    base = np.zeros(2 * n + 1)
    base[0], base[n], base[-1] = plane.base[0], plane.base[1], plane.base[2]
    direction = np.zeros((2 * n, 1))
    direction[0, 0], direction[n, 0] = plane.basis[0, 0], plane.basis[1, 0]
    return pl.HorizontalPlane(base, direction)


def _embed_line_r2(plane: pl.AffinePlane, n):
    base = np.zeros(2 * n + 1)
    base[0], base[1] = plane.base
    direction = np.zeros((2 * n, 1))
    direction[0, 0], direction[1, 0] = plane.basis[:, 0]
    return pl.HorizontalPlane(base, direction)


def embedding_check(n=3, num_sets=100, seed=0, points_per_set=36,
                    starts=5, tol=1e-12) -> EmbeddingReport:
    """Sup-coefficient over lines before vs after the isometric
    embeddings of H^1 and R^2 into H^n.

    The after-optimizer is seeded with the embedded optimal line, so
    value_after <= value_before must hold exactly (restricting the
    infimum to embedded lines); the reverse comparison is reported as a
    fitted constant per source geometry.
    """
    rng = np.random.default_rng(seed)
    rows = []
    fitted_h1, fitted_r2 = 0.0, 0.0
    violations = 0
    worst_margin = -np.inf
    for i in range(num_sets):
        from_h1 = i % 2 == 0
        m = points_per_set
        sigma = rng.uniform(0.05, 0.4)
        if from_h1:
            line = pl.random_isotropic(1, 1, rng,
                                       base=geo.heis_point(rng.normal(size=2),
                                                           rng.normal()))
            anchors = line.point_at(rng.uniform(-1, 1, size=(m, 1)))
            offs = geo.heis_point(rng.normal(size=(m, 2)) * sigma,
                                  rng.normal(size=m) * sigma ** 2)
            pts = geo.heis_mul(anchors, offs)
            s_before = co.WeightedSet.from_arrays(geo.heisenberg(1), pts,
                                                  np.ones(m))
            rec_before = co.beta_inf(s_before, 1, starts=starts,
                                     seed=_cube_seed(seed, 2 * i))
            embedded = _embed_line_h1(rec_before.plane, n)
            cloud = pc.WeightedPointCloud(geo.heisenberg(1), pts, np.ones(m),
                                          s=1.0, h=1e-3)
            target = pc.embed_iota1(cloud, n)
        else:
            theta = rng.uniform(0, np.pi)
            direction = np.array([np.cos(theta), np.sin(theta)])
            t_par = rng.uniform(-1, 1, size=m)
            pts = (rng.normal(size=2) + t_par[:, None] * direction
                   + rng.normal(size=(m, 2)) * sigma)
            s_before = co.WeightedSet.from_arrays(geo.euclidean(2), pts,
                                                  np.ones(m))
            rec_before = co.beta_inf(s_before, 1, starts=starts,
                                     seed=_cube_seed(seed, 2 * i))
            embedded = _embed_line_r2(rec_before.plane, n)
            cloud = pc.WeightedPointCloud(geo.euclidean(2), pts, np.ones(m),
                                          s=1.0, h=1e-3)
            target = pc.embed_iota2(cloud, n)
        s_after = co.WeightedSet.from_arrays(geo.heisenberg(n), target.points,
                                             np.ones(m))
        rec_after = co.beta_inf(s_after, 1, starts=starts,
                                seed=_cube_seed(seed, 2 * i + 1),
                                extra_planes=[embedded])
        before, after = rec_before.value, rec_after.value
        rows.append(("h1" if from_h1 else "r2", before, after))
        margin = after - before - tol
        worst_margin = max(worst_margin, margin)
        if margin > 0:
            violations += 1
        if after > 0:
            if from_h1:
                fitted_h1 = max(fitted_h1, before / after)
            else:
                fitted_r2 = max(fitted_r2, before / after)
    return EmbeddingReport(n, rows, fitted_h1, fitted_r2, violations,
                           float(worst_margin))


# ---------------------------------------------------------------------------
# the two-lines scaling law

def scaling_experiment(eps_list, q=1.0, pair_budget=co.DEFAULT_PAIR_BUDGET,
                       seed=0, h_over_eps=0.05, starts=4):
    """For each eps: the two-parallel-lines set clipped to the unit
    ball, coefficients at the lower line, and infimum estimates.

    Emits one row per eps with the normalizations that expose the
    scaling law: beta ~ eps while iota ~ eps^2 log(1/eps), so the
    pointwise ratio iota/beta^2 grows without bound as eps shrinks.
    """
    rows = []
    l0 = pl.AffinePlane(np.zeros(2), np.array([[1.0], [0.0]]))
    for i, eps in enumerate(eps_list):
        if not (0 < eps <= 0.2):
            from .errors import InvalidParameter
            raise InvalidParameter("eps", "need eps in (0, 0.2]")
        cloud = pc.generate(pc.GeneratorSpec(
            "parallel_lines", {"eps": eps, "r": 1.0, "h": eps * h_over_eps},
            seed=seed))
        idx = cloud.ball(np.zeros(2), 1.0)
        s = co.WeightedSet.from_arrays(cloud.metric, cloud.points[idx],
                                       cloud.weights[idx], h=cloud.h)
        beta_line = co.beta_p_V(s, l0, q)
        iota_rec = co.iota_p_V(s, l0, q, pair_budget=pair_budget,
                               seed=seed + i)
        beta_inf_rec = co.beta_p(s, 1, q, starts=starts, seed=seed + i)
        iota_inf_rec = co.iota_p(s, 1, q, starts=starts, seed=seed + i,
                                 pair_budget=pair_budget,
                                 opt_pair_budget=min(pair_budget, 200_000))
        rows.append({
            "eps": eps,
            "beta": beta_line,
            "iota": iota_rec.value,
            "iota_norm": iota_rec.value / (eps ** 2 * np.log(1.0 / eps)),
            "beta_norm": beta_line / eps,
            "beta_inf_est": beta_inf_rec.value,
            "iota_inf_est": iota_inf_rec.value,
            "ratio_iota_beta2": iota_rec.value / beta_line ** 2,
            "estimator": iota_rec.estimator,
        })
    return rows


def scaling_rows_to_csv(rows, path):
    cols = ["eps", "beta", "iota", "iota_norm", "beta_norm"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(f"{row[c]:.17g}" for c in cols) + "\n")
