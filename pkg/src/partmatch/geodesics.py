"""Geodesic distances on triangle meshes by the Fast Marching Method.

Front propagation uses the planar-unfolding triangle update for acute (and
right) angles at the updated vertex; obtuse corners, and configurations that
fail the upwind acceptance test, fall back to Dijkstra-style edge updates.
Rows of the all-pairs matrix are independent and computed in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .storage import load_npz, save_npz


class NonManifoldError(RuntimeError):
    """Front propagation reached a vertex on an edge shared by >2 faces."""

    def __init__(self, vertex):
        super().__init__(f"non-manifold fan at vertex {vertex}")
        self.vertex = int(vertex)


@dataclass(frozen=True)
class GeodesicMatrix:
    """Dense symmetric inter-geodesic distances, stored in float32."""

    distances: np.ndarray  # (n, n) float32, zero diagonal
    source_mesh_hash: str
    max_asymmetry: float       # max |D_ij - D_ji| before symmetrization
    has_unreachable: bool      # mesh is disconnected; +inf entries present

    @property
    def n(self):
        return int(self.distances.shape[0])


def _vertex_triangle_csr(mesh):
    """CSR adjacency vertex -> incident triangle ids."""
    faces = mesh.faces
    n = mesh.num_vertices
    flat = faces.ravel()  # corner p belongs to triangle p // 3
    order = np.argsort(flat, kind="stable")
    items = (order // 3).astype(np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat, minlength=n), out=offsets[1:])
    return offsets, items


@njit(cache=True)
def _sift_up(hd, hv, i):
    while i > 0:
        parent = (i - 1) // 2
        if hd[i] < hd[parent]:
            hd[i], hd[parent] = hd[parent], hd[i]
            hv[i], hv[parent] = hv[parent], hv[i]
            i = parent
        else:
            break


@njit(cache=True)
def _sift_down(hd, hv, size):
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        smallest = i
        if l < size and hd[l] < hd[smallest]:
            smallest = l
        if r < size and hd[r] < hd[smallest]:
            smallest = r
        if smallest == i:
            break
        hd[i], hd[smallest] = hd[smallest], hd[i]
        hv[i], hv[smallest] = hv[smallest], hv[i]
        i = smallest


@njit(cache=True)
def _edge_len(verts, i, j):
    dx = verts[i, 0] - verts[j, 0]
    dy = verts[i, 1] - verts[j, 1]
    dz = verts[i, 2] - verts[j, 2]
    return np.sqrt(dx * dx + dy * dy + dz * dz)


@njit(cache=True)
def _candidate(verts, u, p, q, tp, tq):
    """Distance candidate for vertex u from triangle (u, p, q) values tp, tq.

    Unfolds the triangle into the plane, recovers the virtual source from the
    two known values by circle intersection, and measures the straight-line
    distance to u -- exact on flat regions. The update is accepted only when
    the straight path crosses the shared edge (upwind condition) and the
    corner at u is acute; otherwise the Dijkstra edge bound stands.
    """
    b = _edge_len(verts, u, p)
    cand = tp + b
    if not np.isfinite(tq):
        return cand
    a = _edge_len(verts, u, q)
    if tq + a < cand:
        cand = tq + a
    c = _edge_len(verts, p, q)
    # obtuse (or right) corner at u: keep the edge fallback
    if b * b + a * a - c * c <= 0.0:
        return cand
    # planar layout: p at the origin, q at (c, 0), u above the axis
    ux = (b * b + c * c - a * a) / (2.0 * c)
    uy2 = b * b - ux * ux
    if uy2 <= 0.0:
        return cand
    uy = np.sqrt(uy2)
    # virtual source below the axis with |s - p| = tp, |s - q| = tq
    sx = (tp * tp + c * c - tq * tq) / (2.0 * c)
    sy2 = tp * tp - sx * sx
    if sy2 < 0.0:
        return cand  # inconsistent front values, no planar source exists
    sy = -np.sqrt(sy2)
    dy = uy - sy
    if dy <= 0.0:
        return cand
    xcross = sx + (ux - sx) * (-sy) / dy
    eps = 1e-12 * c
    if xcross < -eps or xcross > c + eps:
        return cand
    dx = ux - sx
    t = np.sqrt(dx * dx + dy * dy)
    if t < tp or t < tq:
        return cand  # causality: u cannot precede its parents
    if t < cand:
        cand = t
    return cand


@njit(cache=True)
def _fmm_single(verts, faces, voff, vtri, source, nm_mask):
    n = verts.shape[0]
    dist = np.full(n, np.inf)
    state = np.zeros(n, dtype=np.uint8)  # 0 far, 1 trial, 2 alive
    cap = 8 * n + 16
    hd = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    hs = 0

    dist[source] = 0.0
    hd[0] = 0.0
    hv[0] = source
    hs = 1
    while hs > 0:
        d0 = hd[0]
        v = hv[0]
        hs -= 1
        hd[0] = hd[hs]
        hv[0] = hv[hs]
        _sift_down(hd, hv, hs)
        if state[v] == 2 or d0 > dist[v]:
            continue
        if nm_mask[v]:
            return dist, v
        state[v] = 2
        for ti in range(voff[v], voff[v + 1]):
            t = vtri[ti]
            i0 = faces[t, 0]
            i1 = faces[t, 1]
            i2 = faces[t, 2]
            if i0 == v:
                o1, o2 = i1, i2
            elif i1 == v:
                o1, o2 = i0, i2
            else:
                o1, o2 = i0, i1
            for rep in range(2):
                if rep == 0:
                    u, w = o1, o2
                else:
                    u, w = o2, o1
                if state[u] == 2:
                    continue
                cand = _candidate(verts, u, v, w, dist[v], dist[w])
                if cand < dist[u]:
                    dist[u] = cand
                    state[u] = 1
                    if hs >= hd.shape[0]:
                        nhd = np.empty(2 * hd.shape[0], dtype=np.float64)
                        nhv = np.empty(2 * hv.shape[0], dtype=np.int64)
                        nhd[:hs] = hd[:hs]
                        nhv[:hs] = hv[:hs]
                        hd, hv = nhd, nhv
                    hd[hs] = cand
                    hv[hs] = u
                    hs += 1
                    _sift_up(hd, hv, hs - 1)
    return dist, -1


@njit(cache=True, parallel=True)
def _fmm_all(verts, faces, voff, vtri, nm_mask, out):
    n = verts.shape[0]
    errs = np.full(n, -1, dtype=np.int64)
    for s in prange(n):
        d, err = _fmm_single(verts, faces, voff, vtri, s, nm_mask)
        errs[s] = err
        for j in range(n):
            out[s, j] = d[j]
    return errs


def _kernel_inputs(mesh):
    voff, vtri = _vertex_triangle_csr(mesh)
    nm_mask = np.zeros(mesh.num_vertices, dtype=np.bool_)
    nm_mask[mesh.nonmanifold_vertices] = True
    return (np.ascontiguousarray(mesh.vertices), np.ascontiguousarray(mesh.faces),
            voff, vtri, nm_mask)


def fmm_from_source(mesh, source):
    """Geodesic distances from one vertex; +inf where unreachable."""
    n = mesh.num_vertices
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside [0, {n})")
    verts, faces, voff, vtri, nm_mask = _kernel_inputs(mesh)
    dist, err = _fmm_single(verts, faces, voff, vtri, np.int64(source), nm_mask)
    if err >= 0:
        raise NonManifoldError(err)
    return dist


def geodesic_matrix(mesh):
    """All-pairs geodesics, symmetrized by averaging with the transpose."""
    n = mesh.num_vertices
    verts, faces, voff, vtri, nm_mask = _kernel_inputs(mesh)
    raw = np.empty((n, n), dtype=np.float64)
    errs = _fmm_all(verts, faces, voff, vtri, nm_mask, raw)
    if np.any(errs >= 0):
        raise NonManifoldError(int(errs[errs >= 0][0]))
    unreachable = ~np.isfinite(raw)
    has_unreachable = bool(unreachable.any())
    finite = np.where(unreachable, 0.0, raw)
    asym = float(np.abs(finite - finite.T).max())
    sym = (finite + finite.T) * 0.5
    sym[unreachable | unreachable.T] = np.inf
    np.fill_diagonal(sym, 0.0)
    return GeodesicMatrix(
        distances=sym.astype(np.float32),
        source_mesh_hash=mesh.content_hash(),
        max_asymmetry=asym,
        has_unreachable=has_unreachable)


def save_geodesic_matrix(gm, path):
    save_npz(path, {
        "distances": gm.distances,
        "n": np.int64(gm.n),
        "mesh_hash": np.bytes_(gm.source_mesh_hash.encode()),
        "max_asymmetry": np.float64(gm.max_asymmetry),
        "has_unreachable": np.bool_(gm.has_unreachable),
    })


def load_geodesic_matrix(path):
    data = load_npz(path)
    return GeodesicMatrix(
        distances=data["distances"],
        source_mesh_hash=bytes(data["mesh_hash"]).decode(),
        max_asymmetry=float(data["max_asymmetry"]),
        has_unreachable=bool(data["has_unreachable"]))
