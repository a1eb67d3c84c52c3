"""Bounding cone queries for nonlocal causality.

Every front facet owns an influence cone in spacetime: the union of upward
cones of slope ``sigma_f`` with apexes on the lifted facet.  A pitch at a
vertex p must not push the tentpole top into any *remote* cone (one whose
facet is outside p's star), and the conservative slope available to a pitch
is capped by the slopes of the remote cones the tentpole does enter.

Two interchangeable index structures answer those queries:

* :class:`ExhaustiveCones` scans every facet (the reference oracle).
* :class:`ConeHierarchy` is a balanced binary tree over the facets (ordered
  along the line in 1D, by Morton code of centroids in 2D).  Each node keeps
  the spatial bounding box, minimum vertex time, and minimum slope of its
  subtree; ``node_tmin + node_slope * dist(x, bbox)`` then lower-bounds every
  entry time in the subtree, which prunes traversal.

Both structures run the same entry-time kernel, and min / lexicographic-min
combinators are order independent, so their answers agree bit for bit; the
tree only changes how much work is done (see the visit counters in
:class:`ConeStats`).

Entry-time kernel.  The time at which facet f's cone reaches a point x is
``min_y (t_f(y) + sigma_f |x - y|)`` over the facet.  On segments the
minimum sits at an endpoint (the time function is linear with slope within
``sigma_f``).  On triangles it sits at a vertex or on an edge, where the
one-dimensional convex problem has the closed form below; an interior
minimum would need the facet gradient to reach ``sigma_f`` exactly, in which
case the same value is attained on the boundary.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .constraints import ConstraintConfig
from .errors import InvalidArgument, NotFound
from .fields import SlopeField, sampled_min_simplices
from .mesh import SpaceMesh

_EDGE_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class ConeStats:
    """Work counters; totals since construction."""

    entry_queries: int = 0
    slope_queries: int = 0
    nodes_visited: int = 0
    leaves_evaluated: int = 0

    def as_dict(self) -> dict:
        return {
            "cone_entry_queries": self.entry_queries,
            "cone_slope_queries": self.slope_queries,
            "cone_nodes_visited": self.nodes_visited,
            "cone_leaves_evaluated": self.leaves_evaluated,
        }


def entry_times(mesh: SpaceMesh, times: np.ndarray, slopes: np.ndarray,
                x: np.ndarray, fids: np.ndarray) -> np.ndarray:
    """Cone entry times at point ``x`` for the given facets (vectorized).

    This is the single kernel both index structures use; see the module
    docstring for the math.
    """
    fids = np.atleast_1d(np.asarray(fids, dtype=np.int64))
    rows = mesh.simplices[fids]          # (F, k)
    pts = mesh.vertices[rows]            # (F, k, d)
    T = times[rows]                      # (F, k)
    sig = slopes[fids]                   # (F,)

    diff = pts - x[None, None, :]
    vert_dist = np.sqrt((diff * diff).sum(axis=2))      # (F, k)
    best = (T + sig[:, None] * vert_dist).min(axis=1)   # vertex candidates

    if mesh.dim == 2:
        for i, j in _EDGE_PAIRS:
            A, B = pts[:, i, :], pts[:, j, :]
            tA, tB = T[:, i], T[:, j]
            e = B - A
            L2 = (e * e).sum(axis=1)
            w = x[None, :] - A
            u = (w * e).sum(axis=1) / L2
            dperp2 = np.maximum(0.0, (w * w).sum(axis=1) - u * u * L2)
            dt = tB - tA
            disc = sig * sig * L2 - dt * dt
            safe = np.where(disc > 0.0, disc, 1.0)
            v = np.where(
                disc > 0.0,
                dt * np.sqrt(dperp2) / np.sqrt(L2 * safe),
                np.where(dt > 0.0, np.inf, -np.inf),
            )
            s = np.clip(u - v, 0.0, 1.0)
            y = A + s[:, None] * e
            dy = x[None, :] - y
            val = tA + s * dt + sig * np.sqrt((dy * dy).sum(axis=1))
            best = np.minimum(best, val)
    return best


class _ConesBase:
    """Shared state: the mutable slope store, the current front, counters."""

    def __init__(self, mesh: SpaceMesh, front, slopes: np.ndarray):
        self.mesh = mesh
        self.front = front
        self.slopes = slopes
        self.stats = ConeStats()

    def set_front(self, front) -> None:
        """Point the index at the current front (call after every pitch)."""
        self.front = front

    def _check_fid(self, fid: int) -> None:
        if not 0 <= fid < self.mesh.n_simplices:
            raise NotFound(f"facet {fid} does not exist")

    def update_leaf(self, fid: int, slope: float) -> None:
        raise NotImplementedError

    def ray_shoot(self, p: int) -> tuple[float, int | None]:
        raise NotImplementedError

    def min_slope_intersecting(self, p: int, t_top: float) -> float:
        raise NotImplementedError


class ExhaustiveCones(_ConesBase):
    """Reference implementation: scan all facets for every query."""

    def update_leaf(self, fid: int, slope: float) -> None:
        self._check_fid(fid)
        if slope <= 0.0:
            raise InvalidArgument(f"slope must be positive, got {slope}")
        self.slopes[fid] = slope

    def _remote_mask(self, p: int) -> np.ndarray:
        mask = np.ones(self.mesh.n_simplices, dtype=bool)
        mask[self.mesh.stars[p]] = False
        return mask

    def ray_shoot(self, p: int) -> tuple[float, int | None]:
        """Earliest remote cone above vertex p: (entry time, facet id).

        Ties resolve to the smallest facet id; (inf, None) when p's star
        covers the whole mesh.
        """
        self.stats.entry_queries += 1
        remote = np.flatnonzero(self._remote_mask(p))
        self.stats.nodes_visited += len(remote)
        self.stats.leaves_evaluated += len(remote)
        if remote.size == 0:
            return math.inf, None
        vals = entry_times(self.mesh, self.front.times, self.slopes,
                           self.mesh.vertices[p], remote)
        k = int(np.argmin(vals))  # first minimum = smallest facet id
        return float(vals[k]), int(remote[k])

    def min_slope_intersecting(self, p: int, t_top: float) -> float:
        """Smallest slope among remote cones entered by the tentpole at p.

        A cone counts as intersecting when its entry time at p is <= t_top.
        Returns +inf when the tentpole stays clear of all remote cones.
        """
        self.stats.slope_queries += 1
        remote = np.flatnonzero(self._remote_mask(p))
        self.stats.nodes_visited += len(remote)
        self.stats.leaves_evaluated += len(remote)
        if remote.size == 0:
            return math.inf
        vals = entry_times(self.mesh, self.front.times, self.slopes,
                           self.mesh.vertices[p], remote)
        hit = vals <= t_top
        if not hit.any():
            return math.inf
        return float(self.slopes[remote[hit]].min())


def _morton_order(centroids: np.ndarray) -> np.ndarray:
    """Facet order along a Morton (Z-order) curve of the centroids."""
    lo = centroids.min(axis=0)
    span = centroids.max(axis=0) - lo
    span[span == 0.0] = 1.0
    scaled = ((centroids - lo) / span * 0xFFFF).astype(np.uint64)

    def spread(bits):
        bits = (bits | (bits << 8)) & np.uint64(0x00FF00FF)
        bits = (bits | (bits << 4)) & np.uint64(0x0F0F0F0F)
        bits = (bits | (bits << 2)) & np.uint64(0x33333333)
        bits = (bits | (bits << 1)) & np.uint64(0x55555555)
        return bits

    key = spread(scaled[:, 0]) | (spread(scaled[:, 1]) << np.uint64(1))
    return np.argsort(key, kind="stable")


class ConeHierarchy(_ConesBase):
    """Balanced binary tree over facet cones; see the module docstring."""

    def __init__(self, mesh: SpaceMesh, front, slopes: np.ndarray):
        super().__init__(mesh, front, slopes)
        if mesh.dim == 1:
            order = np.argsort(mesh.centroids[:, 0], kind="stable")
        else:
            order = _morton_order(mesh.centroids)

        m = mesh.n_simplices
        n_nodes = 2 * m - 1
        self.left = np.full(n_nodes, -1, dtype=np.int64)
        self.right = np.full(n_nodes, -1, dtype=np.int64)
        self.parent = np.full(n_nodes, -1, dtype=np.int64)
        self.leaf_fid = np.full(n_nodes, -1, dtype=np.int64)
        self.bbox_lo = np.empty((n_nodes, mesh.dim))
        self.bbox_hi = np.empty((n_nodes, mesh.dim))
        self.node_tmin = np.empty(n_nodes)
        self.node_smin = np.empty(n_nodes)
        self.leaf_of_fid = np.full(m, -1, dtype=np.int64)

        facet_pts = mesh.vertices[mesh.simplices]  # (m, k, d)
        self._facet_lo = facet_pts.min(axis=1)
        self._facet_hi = facet_pts.max(axis=1)

        self._next = 0

        def build_range(lo: int, hi: int) -> int:
            node = self._next
            self._next += 1
            if hi - lo == 1:
                fid = int(order[lo])
                self.leaf_fid[node] = fid
                self.leaf_of_fid[fid] = node
                self.bbox_lo[node] = self._facet_lo[fid]
                self.bbox_hi[node] = self._facet_hi[fid]
            else:
                mid = (lo + hi) // 2
                a = build_range(lo, mid)
                b = build_range(mid, hi)
                self.left[node], self.right[node] = a, b
                self.parent[a] = self.parent[b] = node
                self.bbox_lo[node] = np.minimum(self.bbox_lo[a], self.bbox_lo[b])
                self.bbox_hi[node] = np.maximum(self.bbox_hi[a], self.bbox_hi[b])
            return node

        build_range(0, m)
        self.root = 0
        self._refresh_all_bounds()

    # -- bound maintenance --------------------------------------------------

    def _leaf_bounds(self, node: int) -> tuple[float, float]:
        fid = int(self.leaf_fid[node])
        tmin = float(self.front.times[self.mesh.simplices[fid]].min())
        return tmin, float(self.slopes[fid])

    def _refresh_all_bounds(self) -> None:
        # Nodes are allocated parent-before-child, so a reverse sweep sees
        # children first.
        for node in range(self._next - 1, -1, -1):
            if self.leaf_fid[node] >= 0:
                self.node_tmin[node], self.node_smin[node] = self._leaf_bounds(node)
            else:
                a, b = self.left[node], self.right[node]
                self.node_tmin[node] = min(self.node_tmin[a], self.node_tmin[b])
                self.node_smin[node] = min(self.node_smin[a], self.node_smin[b])

    def update_leaf(self, fid: int, slope: float) -> None:
        """Refresh one facet's slope and time bound, repairing the root path."""
        self._check_fid(fid)
        if slope <= 0.0:
            raise InvalidArgument(f"slope must be positive, got {slope}")
        self.slopes[fid] = slope
        node = int(self.leaf_of_fid[fid])
        self.node_tmin[node], self.node_smin[node] = self._leaf_bounds(node)
        node = int(self.parent[node])
        while node >= 0:
            a, b = self.left[node], self.right[node]
            self.node_tmin[node] = min(self.node_tmin[a], self.node_tmin[b])
            self.node_smin[node] = min(self.node_smin[a], self.node_smin[b])
            node = int(self.parent[node])

    def set_front(self, front) -> None:
        """Rebind the front; callers must update_leaf the facets that moved."""
        self.front = front

    # -- queries ------------------------------------------------------------

    def _node_lb(self, node: int, x: np.ndarray) -> float:
        gap = np.maximum(0.0, np.maximum(self.bbox_lo[node] - x,
                                         x - self.bbox_hi[node]))
        dist = math.sqrt(float((gap * gap).sum()))
        return float(self.node_tmin[node]) + float(self.node_smin[node]) * dist

    def ray_shoot(self, p: int) -> tuple[float, int | None]:
        """Same contract as :meth:`ExhaustiveCones.ray_shoot`."""
        self.stats.entry_queries += 1
        x = self.mesh.vertices[p]
        star = set(int(s) for s in self.mesh.stars[p])
        best_T = math.inf
        best_fid: int | None = None
        heap: list[tuple[float, int]] = [(self._node_lb(self.root, x), self.root)]
        while heap and heap[0][0] <= best_T:
            lb, node = heapq.heappop(heap)
            self.stats.nodes_visited += 1
            fid = int(self.leaf_fid[node])
            if fid >= 0:
                if fid in star:
                    continue
                self.stats.leaves_evaluated += 1
                T = float(entry_times(self.mesh, self.front.times, self.slopes,
                                      x, np.array([fid]))[0])
                if T < best_T or (T == best_T and
                                  (best_fid is None or fid < best_fid)):
                    best_T, best_fid = T, fid
            else:
                for child in (int(self.left[node]), int(self.right[node])):
                    clb = self._node_lb(child, x)
                    if clb <= best_T:
                        heapq.heappush(heap, (clb, child))
        return best_T, best_fid

    def min_slope_intersecting(self, p: int, t_top: float) -> float:
        """Same contract as :meth:`ExhaustiveCones.min_slope_intersecting`."""
        self.stats.slope_queries += 1
        x = self.mesh.vertices[p]
        star = set(int(s) for s in self.mesh.stars[p])
        best = math.inf
        stack = [self.root]
        while stack:
            node = stack.pop()
            self.stats.nodes_visited += 1
            if self.node_smin[node] >= best:
                continue  # nothing below can lower the running minimum
            if self._node_lb(node, x) > t_top:
                continue  # no cone in this subtree reaches the tentpole
            fid = int(self.leaf_fid[node])
            if fid >= 0:
                if fid in star:
                    continue
                self.stats.leaves_evaluated += 1
                T = float(entry_times(self.mesh, self.front.times, self.slopes,
                                      x, np.array([fid]))[0])
                if T <= t_top:
                    best = min(best, float(self.slopes[fid]))
            else:
                # Left subtree on top of the stack so it is explored first.
                stack.append(int(self.right[node]))
                stack.append(int(self.left[node]))
        return best


def build(mesh: SpaceMesh, front, field: SlopeField,
          config: ConstraintConfig | None = None,
          use_hierarchy: bool = True) -> _ConesBase:
    """Create the cone index with initial per-facet slopes from the field.

    Initial slopes are the conservative sampled minima over each facet at the
    front's current times; thereafter the driver refreshes them through
    :meth:`update_leaf` with the solver's outflow values, so both index
    flavors always read the same store.
    """
    if config is None:
        config = ConstraintConfig.for_problem(mesh, field)
    slopes = sampled_min_simplices(
        field,
        mesh.vertices[mesh.simplices],
        front.times[mesh.simplices],
        config.slope_samples,
        elements=np.arange(mesh.n_simplices),
    ).copy()
    cls = ConeHierarchy if use_hierarchy else ExhaustiveCones
    return cls(mesh, front, slopes)


def update_leaf(index: _ConesBase, fid: int, slope: float) -> None:
    index.update_leaf(fid, slope)


def ray_shoot(index: _ConesBase, p: int) -> tuple[float, int | None]:
    return index.ray_shoot(p)


def min_slope_intersecting(index: _ConesBase, p: int, t_top: float) -> float:
    return index.min_slope_intersecting(p, t_top)
