"""Procedural test meshes: planar grids, spheres, and bumpy blob shapes.

These stand in for scanned shapes in tests and demos; none of them ship any
external dataset geometry.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def single_triangle():
    """Unit right triangle in the z=0 plane, area 1/2."""
    verts = [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
    return TriangleMesh.build(verts, [(0, 1, 2)])


def equilateral_triangle(edge=1.0):
    verts = [(0.0, 0.0, 0.0), (edge, 0.0, 0.0), (edge / 2, edge * np.sqrt(3) / 2, 0.0)]
    return TriangleMesh.build(verts, [(0, 1, 2)])


def tetrahedron(edge=1.0):
    """Regular tetrahedron with the given edge length (closed surface)."""
    verts = np.array([
        (1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)])
    verts *= edge / np.sqrt(8.0)  # raw edge length is 2*sqrt(2)
    faces = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    return TriangleMesh.build(verts, faces)


def triangle_strip(num_faces=2):
    """Planar strip of right triangles; even vertices on y=0, odd on y=1."""
    verts = [((i + 1) // 2 * 1.0, float(i % 2), 0.0) for i in range(num_faces + 2)]
    faces = []
    for i in range(num_faces):
        if i % 2 == 0:
            faces.append((i, i + 1, i + 2))
        else:
            faces.append((i + 1, i, i + 2))
    return TriangleMesh.build(verts, faces)


def grid_mesh(nx=10, ny=10, width=1.0, height=1.0):
    """Planar rectangle triangulated as nx*ny quads, each split into two."""
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    faces = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return TriangleMesh.build(verts, faces)


def icosphere(subdivisions=2, radius=1.0):
    """Geodesic sphere from a subdivided icosahedron (12, 42, 162, 642, ... verts)."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = np.asarray(verts[i]) + np.asarray(verts[j])
                p /= np.linalg.norm(p)
                cache[key] = len(verts)
                verts.append(tuple(p))
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh.build(np.asarray(verts) * radius, faces)


def quad_sphere(m=10, radius=1.0):
    """Sphere from a cube with m*m quads per side projected radially.

    6*m*m + 2 vertices; avoids the pole clustering of latitude/longitude
    spheres, which matters for front-propagation geodesics.
    """
    key_to_id = {}
    verts = []

    def vid(p):
        key = (round(p[0], 12), round(p[1], 12), round(p[2], 12))
        if key not in key_to_id:
            key_to_id[key] = len(verts)
            verts.append(p)
        return key_to_id[key]

    faces = []
    axes = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    for ax, au, av in axes:
        for sign in (-1.0, 1.0):
            grid = np.empty((m + 1, m + 1), dtype=np.int64)
            for i in range(m + 1):
                for j in range(m + 1):
                    p = [0.0, 0.0, 0.0]
                    p[ax] = sign
                    p[au] = 2.0 * i / m - 1.0
                    p[av] = (2.0 * j / m - 1.0) * sign
                    grid[i, j] = vid(tuple(p))
            for i in range(m):
                for j in range(m):
                    a, b = grid[i, j], grid[i + 1, j]
                    c, d = grid[i + 1, j + 1], grid[i, j + 1]
                    faces.append((a, b, c))
                    faces.append((a, c, d))
    verts = np.asarray(verts)
    verts = verts / np.linalg.norm(verts, axis=1)[:, None] * radius
    return TriangleMesh.build(verts, faces)


def _bump_field(directions, centers, heights, widths):
    rho = np.ones(directions.shape[0])
    for c, h, w in zip(centers, heights, widths):
        d2 = np.sum((directions - c) ** 2, axis=1)
        rho += h * np.exp(-d2 / (2.0 * w * w))
    return rho


def blob(seed=0, resolution=10, num_bumps=6, bump_height=0.25, bump_width=0.45):
    """Smooth asymmetric blob: a quad sphere with seeded radial bumps.

    The random bumps break all mesh symmetries, which keeps Laplacian
    spectra simple (no repeated eigenvalues) — convenient for spectral tests.
    """
    rng = np.random.default_rng(seed)
    base = quad_sphere(resolution)
    dirs = base.vertices / np.linalg.norm(base.vertices, axis=1)[:, None]
    centers = rng.normal(size=(num_bumps, 3))
    centers /= np.linalg.norm(centers, axis=1)[:, None]
    heights = rng.uniform(0.3, 1.0, num_bumps) * bump_height
    widths = rng.uniform(0.7, 1.3, num_bumps) * bump_width
    rho = _bump_field(dirs, centers, heights, widths)
    return TriangleMesh.build(dirs * rho[:, None], base.faces)


def limb_blob(seed=0, resolution=13):
    """Blob with five long protrusions, a crude stand-in for an articulated body."""
    rng = np.random.default_rng(seed)
    base = quad_sphere(resolution)
    dirs = base.vertices / np.linalg.norm(base.vertices, axis=1)[:, None]
    limbs = np.array([
        (0.0, 1.0, 0.1), (0.7, -0.7, 0.1), (-0.7, -0.7, -0.1),
        (0.9, 0.5, -0.2), (-0.9, 0.5, 0.2)])
    limbs = limbs + rng.normal(scale=0.08, size=limbs.shape)
    limbs /= np.linalg.norm(limbs, axis=1)[:, None]
    heights = 0.9 + rng.uniform(-0.15, 0.25, len(limbs))
    widths = 0.30 + rng.uniform(-0.05, 0.05, len(limbs))
    rho = _bump_field(dirs, limbs, heights, widths)
    return TriangleMesh.build(dirs * rho[:, None], base.faces)
