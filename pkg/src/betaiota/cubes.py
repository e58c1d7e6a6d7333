"""Dyadic cube systems (Christ/David style) on weighted point clouds.

Construction: coordinates are first rescaled so the cloud diameter lies
in [1, 2) (top level j = 0, side lengths ell(Q) = 2^-j; `depth` counts
the levels built, j = 0..depth-1).  Per level j a greedy
2^(-j-2)-separated net is selected in farthest-point order with ties
broken by lowest point index; nets are nested across levels.  Cubes are
assigned top-down: at level 0 every point attaches to its nearest
level-0 net center, and at level j+1 to the nearest level-(j+1) net
center lying in its own level-j cube (ties by lowest index throughout).
Restricting the assignment to the parent cube rules out the cross-level
chain drift that a global nearest-center rule suffers on exactly
symmetric samples, so each net point keeps at least its
(separation/2)-ball inside its cube.  Partition and nesting hold
exactly by construction; the diameter and center-ball constants are
measured, never assumed.

Cube centers are re-selected after membership assignment: x_Q is the
member with the largest margin to points outside Q, so the measured
center-ball constant reflects the cube geometry rather than the
placement of net points near cube boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import (DegenerateDiameter, DepthExceeded, ScaleBelowResolution,
                     UnknownCube)
from .pointcloud import RESOLUTION_FACTOR, WeightedPointCloud, set_diameter

_CHUNK = 2048


@dataclass
class Cube:
    id: int
    level: int
    center_index: int
    member_indices: np.ndarray          # sorted cloud indices
    parent: int | None = None
    children: list = field(default_factory=list)
    mass: float = 0.0
    _diam: float | None = None
    _diam_method: str | None = None

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    def __len__(self):
        return len(self.member_indices)


class DyadicTree:
    def __init__(self, cloud, scale, depth, levels, cubes, net_levels):
        self.cloud = cloud              # rescaled copy used for all queries
        self.scale = scale              # rescale factor applied to the input
        self.depth = depth              # number of levels built (j = 0..depth-1)
        self.levels = levels            # list of lists of cube ids per level
        self.cubes = cubes              # id -> Cube
        self.net_levels = net_levels    # list of center index arrays per level
        self.measured_c0 = None

    @property
    def deepest_level(self) -> int:
        return self.depth - 1

    def cube(self, cube_id) -> Cube:
        try:
            return self.cubes[cube_id]
        except KeyError:
            raise UnknownCube(f"no cube with id {cube_id}") from None

    def roots(self):
        return [self.cubes[i] for i in self.levels[0]]

    def level_cubes(self, j):
        return [self.cubes[i] for i in self.levels[j]]

    def all_cubes(self):
        for level in self.levels:
            for cid in level:
                yield self.cubes[cid]

    def cube_diam(self, cube: Cube) -> float:
        if cube._diam is None:
            pts = self.cloud.points[cube.member_indices]
            cube._diam, cube._diam_method = set_diameter(self.cloud.metric, pts)
        return cube._diam

    def center_point(self, cube: Cube):
        return self.cloud.points[cube.center_index]


def _nearest_center(metric, points, center_indices, all_points, chunk=_CHUNK):
    """Index into center_indices of the nearest center for every row of
    `points`; ties resolve to the center with the lowest cloud index
    because `center_indices` is kept sorted."""
    centers = all_points[center_indices]
    out = np.empty(len(points), dtype=np.int64)
    for lo in range(0, len(points), chunk):
        block = points[lo:lo + chunk]
        d = geo.pairwise_dist(metric, block, centers)
        out[lo:lo + chunk] = np.argmin(d, axis=1)
    return out


def _fps_net(metric, points, sep, start_indices):
    """Extend `start_indices` to a maximal sep-separated net, adding points
    in farthest-point order (ties by lowest index)."""
    n = len(points)
    min_dist = np.full(n, np.inf)
    net = list(start_indices)
    for idx in net:
        d = geo.dist_to_point(metric, points, points[idx])
        np.minimum(min_dist, d, out=min_dist)
    while True:
        i = int(np.argmax(min_dist))
        if min_dist[i] < sep:
            break
        net.append(i)
        d = geo.dist_to_point(metric, points, points[i])
        np.minimum(min_dist, d, out=min_dist)
    return np.array(sorted(net), dtype=np.int64)


def build_tree(cloud: WeightedPointCloud, depth: int, seed: int = 0) -> DyadicTree:
    """Build the cube system with levels 0..depth-1.

    The seed is accepted for interface uniformity; the construction is
    deterministic for a given cloud.
    """
    if depth < 1:
        raise ScaleBelowResolution("depth must be >= 1")
    diam, _ = cloud.diameter()
    if diam <= 0:
        raise DegenerateDiameter("cloud has zero diameter")
    lam = 2.0 ** (-np.floor(np.log2(diam)))
    scaled = cloud.rescaled(lam)
    if 2.0 ** (-(depth - 1)) < RESOLUTION_FACTOR * scaled.h:
        raise ScaleBelowResolution(
            f"deepest level {depth - 1} side {2.0 ** (-(depth - 1)):g} below "
            f"10h = {RESOLUTION_FACTOR * scaled.h:g} after rescaling")
    metric = scaled.metric
    pts = scaled.points

    nets = []
    prev = np.array([], dtype=np.int64)
    for j in range(depth):
        prev = _fps_net(metric, pts, 2.0 ** (-j - 2), prev)
        nets.append(prev)

    levels = []
    cubes = {}
    next_id = 0
    for j in range(depth):
        net_j = nets[j]
        level_ids = []
        owner = np.empty(len(pts), dtype=np.int64)  # center cloud index per point
        if j == 0:
            pos = _nearest_center(metric, pts, net_j, pts)
            owner[:] = net_j[pos]
            groups = [(None, np.arange(len(pts)))]
        else:
            groups = []
            for cid in levels[j - 1]:
                groups.append((cid, cubes[cid].member_indices))
        if j > 0:
            in_net = np.zeros(len(pts), dtype=bool)
            in_net[net_j] = True
            for cid, members in groups:
                local_centers = members[in_net[members]]
                pos = _nearest_center(metric, pts[members], local_centers, pts)
                owner[members] = local_centers[pos]
        cube_of_center = {}
        for pid, members in groups:
            keys = owner[members]
            order = np.argsort(keys, kind="stable")
            sorted_keys = keys[order]
            uniq, starts = np.unique(sorted_keys, return_index=True)
            for u, lo, hi in zip(uniq, starts, list(starts[1:]) + [len(keys)]):
                mem = np.sort(members[order[lo:hi]])
                cube = Cube(id=next_id, level=j, center_index=int(u),
                            member_indices=mem, parent=pid,
                            mass=float(np.sum(scaled.weights[mem])))
                cubes[next_id] = cube
                if pid is not None:
                    cubes[pid].children.append(next_id)
                cube_of_center[int(u)] = next_id
                level_ids.append(next_id)
                next_id += 1
        levels.append(level_ids)

    tree = DyadicTree(scaled, lam, depth, levels, cubes, nets)
    _recenter(tree)
    tree.measured_c0 = _measure_c0(tree)
    return tree


_RECENTER_CAP = 0.35  # margin search radius in units of ell(Q)


def _recenter(tree):
    """Move each cube center to the member with the largest margin to
    foreign points (margins capped at 0.35 ell(Q) to bound the scan)."""
    pts = tree.cloud.points
    metric = tree.cloud.metric
    n = len(pts)
    for j, level in enumerate(tree.levels):
        cap = _RECENTER_CAP * 2.0 ** (-j)
        for cid in level:
            cube = tree.cubes[cid]
            if len(cube) == n or len(cube) == 1:
                continue
            d_center = geo.dist_to_point(metric, pts, pts[cube.center_index])
            rad = float(d_center[cube.member_indices].max())
            in_cube = np.zeros(n, dtype=bool)
            in_cube[cube.member_indices] = True
            foreign = np.flatnonzero(~in_cube & (d_center <= rad + cap))
            if len(foreign) == 0:
                continue
            margins = np.full(len(cube), cap)
            fpts = pts[foreign]
            members = cube.member_indices
            for lo in range(0, len(members), _CHUNK):
                block = pts[members[lo:lo + _CHUNK]]
                dmin = geo.pairwise_dist(metric, block, fpts).min(axis=1)
                margins[lo:lo + _CHUNK] = np.minimum(cap, dmin)
            cube.center_index = int(members[int(np.argmax(margins))])


def _measure_c0(tree) -> float:
    """Largest c0 for which diam(Q) <= ell(Q)/c0 and the center ball
    B(x_Q, c0 ell(Q)) stays inside Q, over all cubes (capped at 1)."""
    c0 = 1.0
    pts = tree.cloud.points
    n_pts = len(pts)
    for j, level in enumerate(tree.levels):
        side = 2.0 ** (-j)
        for cid in level:
            cube = tree.cubes[cid]
            if len(cube) > 1:
                d = tree.cube_diam(cube)
                if d > 0:
                    c0 = min(c0, side / d)
            if len(cube) < n_pts:
                mask = np.ones(n_pts, dtype=bool)
                mask[cube.member_indices] = False
                dists = geo.dist_to_point(tree.cloud.metric, pts[mask],
                                          pts[cube.center_index])
                c0 = min(c0, float(dists.min()) / side)
    return c0


def enlarge(tree: DyadicTree, cube_or_id, K: float) -> np.ndarray:
    """Member indices of KQ = {x in E : dist(x, Q) <= (K-1) diam(Q)},
    computed exactly by a (prefiltered) linear scan."""
    cube = cube_or_id if isinstance(cube_or_id, Cube) else tree.cube(cube_or_id)
    if cube.id not in tree.cubes:
        raise UnknownCube(f"cube {cube.id} does not belong to this tree")
    if K < 1:
        raise ScaleBelowResolution("K must be >= 1")
    if K == 1:
        return cube.member_indices
    reach = (K - 1) * tree.cube_diam(cube)
    if reach == 0:
        return cube.member_indices
    metric = tree.cloud.metric
    pts = tree.cloud.points
    center = pts[cube.center_index]
    d_center = geo.dist_to_point(metric, pts, center)
    rad = float(d_center[cube.member_indices].max())
    cand = np.flatnonzero(d_center <= rad + reach + 1e-12 * (rad + reach))
    members = pts[cube.member_indices]
    keep = []
    for lo in range(0, len(cand), _CHUNK):
        block = pts[cand[lo:lo + _CHUNK]]
        dmin = geo.pairwise_dist(metric, block, members).min(axis=1)
        keep.append(cand[lo:lo + _CHUNK][dmin <= reach * (1 + 1e-12)])
    return np.sort(np.concatenate(keep))


def descendants(tree: DyadicTree, cube_or_id, j: int):
    """F_j(Q): the level(Q)+j cubes contained in Q."""
    cube = cube_or_id if isinstance(cube_or_id, Cube) else tree.cube(cube_or_id)
    if cube.level + j > tree.deepest_level:
        raise DepthExceeded(
            f"level {cube.level}+{j} exceeds deepest built level "
            f"{tree.deepest_level}")
    frontier = [cube]
    for _ in range(j):
        frontier = [tree.cubes[c] for q in frontier for c in q.children]
    return frontier


def cover_of_enlargement(tree: DyadicTree, cube_or_id, K: float = 2.0):
    """Same-level cubes covering KQ, plus the local patch constant K0 such
    that their union sits inside K0 Q."""
    cube = cube_or_id if isinstance(cube_or_id, Cube) else tree.cube(cube_or_id)
    idx = enlarge(tree, cube, K)
    hit = sorted({_owner_cube_at_level(tree, i, cube.level) for i in idx})
    cover = [tree.cubes[c] for c in hit]
    diam = tree.cube_diam(cube)
    if diam == 0:
        return cover, 1.0
    members = tree.cloud.points[cube.member_indices]
    far = 0.0
    for cov in cover:
        pts = tree.cloud.points[cov.member_indices]
        d = geo.pairwise_dist(tree.cloud.metric, pts, members).min(axis=1)
        far = max(far, float(d.max()))
    return cover, 1.0 + far / diam


def _owner_cube_at_level(tree, point_index, j):
    for cid in tree.levels[j]:
        cube = tree.cubes[cid]
        lo = np.searchsorted(cube.member_indices, point_index)
        if lo < len(cube.member_indices) and cube.member_indices[lo] == point_index:
            return cid
    raise UnknownCube(f"point {point_index} missing from level {j}")


def patch_constants(tree: DyadicTree, K: float = 2.0):
    """Fitted (m, K0) for the same-level covering of KQ over all cubes."""
    m, k0 = 0, 1.0
    for cube in tree.all_cubes():
        cover, local = cover_of_enlargement(tree, cube, K)
        m = max(m, len(cover))
        k0 = max(k0, local)
    return m, k0


# ---------------------------------------------------------------------------
# axiom verification

@dataclass
class AxiomReport:
    partition_ok: bool
    nesting_ok: bool
    unique_ancestor_ok: bool
    sum_of_parts_exact: bool
    diam_bound_c0: float
    center_ball_c0: float
    measured_c0: float
    mass_bound_constant: float
    failures: list


def verify_axioms(tree: DyadicTree) -> AxiomReport:
    """Check the defining cube-system properties on a built tree.

    Partition, nesting and ancestor uniqueness are boolean and exact;
    the two c0-type constants are the largest values that make the
    diameter bound and the center-ball containment hold, and the mass
    bound constant is fitted against (c0 ell)^s <= mass <= (ell/c0)^s.
    """
    n = len(tree.cloud)
    failures = []

    partition_ok = True
    for j, level in enumerate(tree.levels):
        counts = np.zeros(n, dtype=np.int64)
        for cid in level:
            counts[tree.cubes[cid].member_indices] += 1
        if not np.all(counts == 1):
            partition_ok = False
            failures.append(f"level {j} does not partition the cloud")

    nesting_ok = True
    unique_ancestor_ok = True
    sum_exact = True
    for cube in tree.all_cubes():
        if cube.level == tree.deepest_level:
            continue
        if not cube.children:
            nesting_ok = False
            failures.append(f"cube {cube.id} has no children")
            continue
        child_members = np.sort(np.concatenate(
            [tree.cubes[c].member_indices for c in cube.children]))
        if len(child_members) != len(cube.member_indices) or \
                not np.array_equal(child_members, cube.member_indices):
            nesting_ok = False
            failures.append(f"children of cube {cube.id} do not tile it")
        for c in cube.children:
            ch = tree.cubes[c]
            if not np.all(np.isin(ch.member_indices, cube.member_indices)):
                nesting_ok = False
                failures.append(f"cube {c} escapes its parent {cube.id}")
            if ch.parent != cube.id:
                unique_ancestor_ok = False
                failures.append(f"cube {c} has inconsistent parent link")
        # identical sorted index sequences sum bit-identically
        lhs = float(np.sum(tree.cloud.weights[cube.member_indices]))
        rhs = float(np.sum(tree.cloud.weights[child_members])) \
            if len(child_members) == len(cube.member_indices) else np.nan
        if lhs != rhs:
            sum_exact = False
            failures.append(f"mass of cube {cube.id} differs from children sum")

    diam_c0 = 1.0
    ball_c0 = 1.0
    pts = tree.cloud.points
    for j, level in enumerate(tree.levels):
        side = 2.0 ** (-j)
        for cid in level:
            cube = tree.cubes[cid]
            if len(cube) > 1:
                d = tree.cube_diam(cube)
                if d > 0:
                    diam_c0 = min(diam_c0, side / d)
            if len(cube) < n:
                mask = np.ones(n, dtype=bool)
                mask[cube.member_indices] = False
                dmin = geo.dist_to_point(tree.cloud.metric, pts[mask],
                                         pts[cube.center_index]).min()
                ball_c0 = min(ball_c0, float(dmin) / side)

    measured_c0 = min(diam_c0, ball_c0)
    mass_c = 1.0
    if measured_c0 > 0:
        s = tree.cloud.s
        for cube in tree.all_cubes():
            side = cube.side
            mass_c = max(mass_c,
                         (measured_c0 * side) ** s / cube.mass,
                         cube.mass / (side / measured_c0) ** s)

    return AxiomReport(partition_ok, nesting_ok, unique_ancestor_ok,
                       sum_exact, diam_c0, ball_c0, measured_c0, mass_c,
                       failures)


# ---------------------------------------------------------------------------
# export

def tree_to_json(tree: DyadicTree, path=None):
    payload = {
        "measured_c0": tree.measured_c0,
        "scale": tree.scale,
        "levels": [
            {
                "j": j,
                "cubes": [
                    {
                        "id": tree.cubes[cid].id,
                        "center": int(tree.cubes[cid].center_index),
                        "parent": tree.cubes[cid].parent,
                        "members": [int(i) for i in tree.cubes[cid].member_indices],
                        "mass": tree.cubes[cid].mass,
                    }
                    for cid in level
                ],
            }
            for j, level in enumerate(tree.levels)
        ],
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(payload, fh)
    return payload
