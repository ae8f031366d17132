"""Per-camera 2-D rope trace extraction.

Pipeline: refine the segmentation mask, sample its boundary, skeletonize via
the Voronoi diagram of the boundary samples, prune the graph to the mask
interior, reduce it to the single longest path, and back-project the surviving
vertices to a camera-frame 3-D polyline.

Pixel coordinates are (u, v) = (column, row) with subpixel precision for
skeleton vertices; mask indexing is bits[v, u].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import Voronoi, QhullError

from .errors import DegenerateContour, EmptyMask, EmptyTrace
from .geometry import CameraIntrinsics
from .imaging import BinaryMask, DepthMap, GrayImage


@dataclass(frozen=True, eq=False)
class ContourSet:
    """Ordered boundary samples, one (u, v) row per point, grouped by loop."""

    points: np.ndarray                 # (N, 2) float64
    loop_ids: np.ndarray = field(default=None)  # (N,) int, which boundary loop

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if self.loop_ids is None:
            object.__setattr__(self, "loop_ids", np.zeros(len(pts), dtype=np.intp))


@dataclass(frozen=True, eq=False)
class SkeletonGraph:
    """Undirected graph of subpixel 2-D vertices; no self-loops or duplicate edges."""

    vertices: np.ndarray  # (N, 2) float64
    edges: np.ndarray     # (M, 2) intp, each row i < j

    def __post_init__(self):
        object.__setattr__(self, "vertices",
                           np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2))
        e = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        object.__setattr__(self, "edges", e)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=np.intp)
        np.add.at(deg, self.edges.ravel(), 1)
        return deg

    def terminal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.degrees() == 1)


def otsu_mask(img: GrayImage) -> BinaryMask:
    """Threshold at the maximizer of between-class variance; pixels > t are true.

    A constant image has no separable classes and yields an all-false mask.
    """
    data = img.data
    if data.size == 0:
        raise ValueError("empty image")
    if data.min() == data.max():
        return BinaryMask(np.zeros(data.shape, dtype=bool))
    hist = np.bincount(data.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)                      # count <= t
    m0 = np.cumsum(hist * np.arange(256))     # intensity mass <= t
    w1 = total - w0
    mu0 = np.divide(m0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(m0[-1] - m0, w1, out=np.zeros(256), where=w1 > 0)
    var_between = w0 * w1 * (mu0 - mu1) ** 2
    threshold = int(np.argmax(var_between))
    return BinaryMask(data > threshold)


def refine_mask(seg: BinaryMask, aux: BinaryMask) -> BinaryMask:
    """Pixel-wise AND of the primary segmentation and the auxiliary mask."""
    if seg.bits.shape != aux.bits.shape:
        raise ValueError(f"mask shapes differ: {seg.bits.shape} vs {aux.bits.shape}")
    return BinaryMask(seg.bits & aux.bits)


def _boundary_pixels(bits: np.ndarray) -> np.ndarray:
    """True where a foreground pixel has at least one false 4-neighbor
    (out-of-image counts as false)."""
    padded = np.pad(bits, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return bits & ~interior


# Moore neighborhood in clockwise order starting east: (du, dv).
_MOORE = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def _trace_loop(boundary: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor tracing of one 8-connected boundary loop."""
    h, w = boundary.shape
    su, sv = start
    loop = [(su, sv)]
    # Enter as if arriving from the west.
    prev_dir = 4
    cu, cv = su, sv
    while True:
        found = False
        for k in range(8):
            d = (prev_dir + 1 + k) % 8
            du, dv = _MOORE[d]
            nu, nv = cu + du, cv + dv
            if 0 <= nu < w and 0 <= nv < h and boundary[nv, nu]:
                if (nu, nv) == (su, sv) and len(loop) > 1:
                    return loop
                loop.append((nu, nv))
                cu, cv = nu, nv
                prev_dir = (d + 4) % 8  # direction back to the previous pixel
                found = True
                break
        if not found:
            return loop  # isolated pixel or open 1-px filament end
        if len(loop) > 4 * boundary.size:
            return loop  # defensive; cannot happen on a finite grid


def _ordered_boundary_loops(bits: np.ndarray) -> list[np.ndarray]:
    """All boundary loops as ordered (u, v) pixel sequences."""
    boundary = _boundary_pixels(bits)
    visited = np.zeros_like(boundary)
    loops = []
    vs, us = np.nonzero(boundary)
    for v, u in zip(vs, us):
        if visited[v, u]:
            continue
        loop = _trace_loop(boundary, (u, v))
        arr = np.array(loop, dtype=np.float64)
        # A thin filament is traced out and back; keep every boundary pixel once.
        uniq, idx = np.unique(arr, axis=0, return_index=True)
        arr = arr[np.sort(idx)]
        for pu, pv in arr.astype(int):
            visited[pv, pu] = True
        loops.append(arr)
    return loops


def sample_contour(mask: BinaryMask, stride: int = 2) -> ContourSet:
    """Subsample the mask boundary so retained samples along each loop are
    between stride/2 and 2*stride apart; every returned point is a boundary pixel.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if mask.count() == 0:
        raise EmptyMask("mask has no foreground pixels")
    loops = _ordered_boundary_loops(mask.bits)
    points, loop_ids = [], []
    for li, loop in enumerate(loops):
        n = len(loop)
        count = max(1, int(round(n / stride)))
        idx = (np.arange(count) * n) // count
        points.append(loop[idx])
        loop_ids.append(np.full(count, li, dtype=np.intp))
    return ContourSet(np.vstack(points), np.concatenate(loop_ids))


def _strictly_inside(bits: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """A point is strictly inside when its pixel and all 4-neighbors are true."""
    h, w = bits.shape
    u = np.floor(pts[:, 0]).astype(np.intp)
    v = np.floor(pts[:, 1]).astype(np.intp)
    ok = (u >= 1) & (u < w - 1) & (v >= 1) & (v < h - 1)
    uc = np.clip(u, 1, w - 2)
    vc = np.clip(v, 1, h - 2)
    inside = (bits[vc, uc] & bits[vc - 1, uc] & bits[vc + 1, uc]
              & bits[vc, uc - 1] & bits[vc, uc + 1])
    return ok & inside


def _site_jitter(n: int) -> np.ndarray:
    """Deterministic per-index jitter of magnitude <= 1e-9 px to break
    exact cocircularity of grid-aligned sites."""
    idx = np.arange(n, dtype=np.uint64)
    fu = ((idx * np.uint64(2654435761)) % np.uint64(2**32)).astype(np.float64)
    fv = ((idx * np.uint64(2246822519) + np.uint64(97)) % np.uint64(2**32)).astype(np.float64)
    return np.column_stack([fu, fv]) / 2**32 * 2e-9 - 1e-9


def voronoi_skeleton(contour: ContourSet, mask: BinaryMask) -> SkeletonGraph:
    """Pruned Voronoi graph of the contour sites.

    Unbounded edges are discarded; a vertex survives only if strictly inside
    the mask, an edge only if its endpoints and 1-px-spaced interior samples
    all lie strictly inside. The result is restricted to its largest connected
    component.
    """
    sites = contour.points
    if len(sites) < 4:
        raise DegenerateContour(f"need at least 4 contour sites, got {len(sites)}")
    try:
        vor = Voronoi(sites + _site_jitter(len(sites)))
    except (QhullError, ValueError) as exc:
        raise DegenerateContour(f"degenerate contour sites: {exc}") from exc

    verts = vor.vertices
    ridge = np.asarray(vor.ridge_vertices, dtype=np.intp)
    bounded = np.all(ridge >= 0, axis=1) if len(ridge) else np.zeros(0, dtype=bool)
    edges = ridge[bounded]

    bits = mask.bits
    v_ok = _strictly_inside(bits, verts) if len(verts) else np.zeros(0, dtype=bool)
    keep_edge = v_ok[edges[:, 0]] & v_ok[edges[:, 1]] if len(edges) else np.zeros(0, dtype=bool)
    edges = edges[keep_edge]

    if len(edges):
        p0 = verts[edges[:, 0]]
        p1 = verts[edges[:, 1]]
        lengths = np.linalg.norm(p1 - p0, axis=1)
        nsamp = np.maximum(np.ceil(lengths).astype(int) - 1, 0)
        ok = np.ones(len(edges), dtype=bool)
        for k in range(1, nsamp.max() + 1 if len(nsamp) else 0):
            sel = nsamp >= k
            t = (k / (nsamp[sel] + 1.0))[:, None]
            samples = p0[sel] * (1.0 - t) + p1[sel] * t
            good = _strictly_inside(bits, samples)
            idx = np.flatnonzero(sel)
            ok[idx[~good]] = False
        edges = edges[ok]

    if len(edges) == 0:
        return SkeletonGraph(np.zeros((0, 2)), np.zeros((0, 2), dtype=np.intp))

    # Drop self-loops and duplicates, reindex to used vertices.
    edges = np.sort(edges, axis=1)
    edges = np.unique(edges[edges[:, 0] != edges[:, 1]], axis=0)
    used = np.unique(edges)
    remap = np.full(len(verts), -1, dtype=np.intp)
    remap[used] = np.arange(len(used))
    graph = SkeletonGraph(verts[used], remap[edges])
    return _largest_component(graph)


def _largest_component(g: SkeletonGraph) -> SkeletonGraph:
    n = len(g.vertices)
    if n == 0:
        return g
    adj = coo_matrix((np.ones(len(g.edges)), (g.edges[:, 0], g.edges[:, 1])),
                     shape=(n, n))
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp <= 1:
        return g
    best = np.argmax(np.bincount(labels))
    keep = labels == best
    remap = np.full(n, -1, dtype=np.intp)
    remap[keep] = np.arange(keep.sum())
    e = g.edges[keep[g.edges[:, 0]] & keep[g.edges[:, 1]]]
    return SkeletonGraph(g.vertices[keep], remap[e])


def _edge_weights(g: SkeletonGraph) -> np.ndarray:
    return np.linalg.norm(g.vertices[g.edges[:, 0]] - g.vertices[g.edges[:, 1]], axis=1)


def _csgraph(g: SkeletonGraph):
    w = _edge_weights(g)
    n = len(g.vertices)
    return coo_matrix((np.concatenate([w, w]),
                       (np.concatenate([g.edges[:, 0], g.edges[:, 1]]),
                        np.concatenate([g.edges[:, 1], g.edges[:, 0]]))),
                      shape=(n, n)).tocsr()


def extract_trace(g: SkeletonGraph) -> SkeletonGraph:
    """Reduce a connected skeleton to the single path between the endpoint
    pair with the maximum edge-length-weighted geodesic distance.

    On an acyclic skeleton this equals iteratively pruning every terminal
    branch that is not on the retained endpoint path; ties between endpoint
    pairs go to the lexicographically smallest vertex-index pair.
    """
    n = len(g.vertices)
    if n < 2:
        raise ValueError("trace extraction needs a connected graph with >= 2 vertices")
    mat = _csgraph(g)
    ncomp, _ = connected_components(mat, directed=False)
    if ncomp != 1:
        raise ValueError("graph must be connected; pass the largest component")

    sources = np.flatnonzero(g.degrees() == 1)
    if len(sources) == 0:
        sources = np.array([0], dtype=np.intp)  # pure cycle: arbitrary anchor
    dist = dijkstra(mat, directed=False, indices=sources)
    flat = np.where(np.isfinite(dist), dist, -np.inf)
    best = None
    for si, s in enumerate(sources):
        t = int(np.argmax(flat[si]))
        d = flat[si, t]
        pair = (min(int(s), t), max(int(s), t))
        if best is None or d > best[0] + 1e-12 or (abs(d - best[0]) <= 1e-12 and pair < best[1]):
            best = (d, pair)
    src, dst = best[1]

    _, predecessors = dijkstra(mat, directed=False, indices=src,
                               return_predecessors=True)
    path = [dst]
    while path[-1] != src:
        p = predecessors[path[-1]]
        if p < 0:
            raise ValueError("no path between selected endpoints")
        path.append(int(p))
    path.reverse()

    order = np.array(path, dtype=np.intp)
    new_edges = np.column_stack([np.arange(len(order) - 1),
                                 np.arange(1, len(order))]).astype(np.intp)
    return SkeletonGraph(g.vertices[order], new_edges)


def back_project(trace: SkeletonGraph, depth: DepthMap,
                 intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole back-projection of trace vertices with valid depth.

    Returns an (N, 3) array of camera-frame points in path order; vertices with
    zero depth are skipped.
    """
    if len(trace.vertices) == 0:
        raise EmptyTrace("trace has no vertices")
    u = trace.vertices[:, 0]
    v = trace.vertices[:, 1]
    ui = np.clip(np.round(u).astype(np.intp), 0, depth.width - 1)
    vi = np.clip(np.round(v).astype(np.intp), 0, depth.height - 1)
    z = depth.depths[vi, ui]
    valid = z > 0
    if not np.any(valid):
        raise EmptyTrace("no trace vertex has a valid depth")
    u, v, z = u[valid], v[valid], z[valid]
    return np.column_stack([(u - intrinsics.cx) * z / intrinsics.fx,
                            (v - intrinsics.cy) * z / intrinsics.fy,
                            z])


def extract_camera_points(seg: BinaryMask, aux: BinaryMask | None,
                          depth: DepthMap, intrinsics: CameraIntrinsics,
                          stride: int = 2) -> np.ndarray:
    """Full single-camera pipeline: refine, sample, skeletonize, trace,
    back-project. Returns (N, 3) camera-frame points (possibly empty when the
    mask is degenerate)."""
    mask = refine_mask(seg, aux) if aux is not None else seg
    try:
        contour = sample_contour(mask, stride)
        skeleton = voronoi_skeleton(contour, mask)
        if len(skeleton.vertices) < 2:
            return np.zeros((0, 3))
        trace = extract_trace(skeleton)
        return back_project(trace, depth, intrinsics)
    except (EmptyMask, DegenerateContour, EmptyTrace):
        return np.zeros((0, 3))
