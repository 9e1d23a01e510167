"""Partial-shape generation with exported ground truth.

Hole carving removes geodesic balls around seeded random vertices and keeps
the largest connected component; plane cutting keeps one side of a plane.
Radii are meant for meshes normalized to unit square-root area. Both
generators return the part plus the injective map of its vertices into the
full mesh.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geodesics import fmm_from_source
from .mesh import (MeshError, TriangleMesh, VertexSubset, connected_components,
                   extract_submesh, load_mesh, save_mesh)


@dataclass(frozen=True)
class HolesRecipe:
    m: int                      # number of seed vertices
    r: float                    # geodesic removal radius (normalized units)
    seed: int = 0
    area_weighted: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.r <= 0:
            raise ValueError("r must be positive")


@dataclass(frozen=True)
class PlaneCutRecipe:
    normal: np.ndarray
    offset: float
    seed: int = 0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / norm)


def _keep_to_part(mesh, keep_mask, context):
    keep_idx = np.nonzero(keep_mask)[0]
    if keep_idx.size == 0:
        raise MeshError(f"{context}: nothing remains")
    try:
        sub, kept = extract_submesh(mesh, VertexSubset(mesh.num_vertices, keep_idx))
    except MeshError as exc:
        raise MeshError(f"{context}: {exc}") from exc
    largest = connected_components(sub)[0]
    part, kept_local = extract_submesh(sub, largest)
    gt = VertexSubset(mesh.num_vertices, kept.indices[kept_local.indices])
    return part, gt


def carve_holes(mesh, recipe):
    """Remove geodesic balls of radius r around m seeded vertices.

    Vertices strictly inside the radius are removed; the largest surviving
    component becomes the part.
    """
    if len(connected_components(mesh)) != 1:
        raise MeshError("hole carving expects a connected mesh")
    rng = np.random.default_rng(recipe.seed)
    n = mesh.num_vertices
    p = mesh.vertex_areas / mesh.total_area if recipe.area_weighted else None
    seeds = rng.choice(n, size=recipe.m, replace=False, p=p)
    removed = np.zeros(n, dtype=bool)
    for s in seeds:
        removed |= fmm_from_source(mesh, int(s)) < recipe.r
    return _keep_to_part(mesh, ~removed, f"carve_holes(m={recipe.m}, r={recipe.r})")


def plane_cut(mesh, recipe):
    """Keep vertices with <v, normal> >= offset (largest component)."""
    side = mesh.vertices @ recipe.normal >= recipe.offset
    return _keep_to_part(mesh, side, f"plane_cut(offset={recipe.offset})")


def plane_offset_for_fraction(mesh, normal, keep_area_fraction):
    """Offset whose half-space keeps roughly the requested area fraction."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    proj = mesh.vertices @ n
    order = np.argsort(proj)[::-1]  # larger projections are kept first
    cum = np.cumsum(mesh.vertex_areas[order]) / mesh.total_area
    stop = int(np.searchsorted(cum, keep_area_fraction))
    stop = min(stop, proj.size - 1)
    return float(proj[order][stop])


def part_area_fraction(full, gt):
    """Kept fraction of the full shape's area (1 - missing fraction)."""
    return float(full.vertex_areas[gt.indices].sum() / full.total_area)


def export_pair(full, part, gt, out_dir, recipe=None, extra_metadata=None):
    """Write full.off, part.off, gt.txt (one full index per part vertex) and
    metadata.json; everything is text, so identical inputs give identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if len(gt) != part.num_vertices:
        raise MeshError("ground-truth length does not match the part")
    save_mesh(full, out / "full.off")
    save_mesh(part, out / "part.off")
    with open(out / "gt.txt", "w") as fh:
        for idx in gt.indices:
            fh.write(f"{int(idx)}\n")
    meta = {
        "full_vertices": full.num_vertices,
        "part_vertices": part.num_vertices,
        "area_fraction": part_area_fraction(full, gt),
    }
    if recipe is not None:
        if isinstance(recipe, HolesRecipe):
            meta["recipe"] = {"kind": "holes", "m": recipe.m, "r": recipe.r,
                              "seed": recipe.seed,
                              "area_weighted": recipe.area_weighted}
        elif isinstance(recipe, PlaneCutRecipe):
            meta["recipe"] = {"kind": "plane_cut",
                              "normal": [float(x) for x in recipe.normal],
                              "offset": recipe.offset, "seed": recipe.seed}
    if extra_metadata:
        meta.update(extra_metadata)
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {name: out / name for name in ("full.off", "part.off", "gt.txt",
                                          "metadata.json")}


def load_pair(pair_dir):
    """Read back an exported pair: (full, part, gt, metadata)."""
    d = Path(pair_dir)
    full = load_mesh(d / "full.off")
    part = load_mesh(d / "part.off")
    with open(d / "gt.txt") as fh:
        idx = np.asarray([int(line) for line in fh if line.strip()], dtype=np.int64)
    gt = VertexSubset(full.num_vertices, idx)
    meta = {}
    meta_path = d / "metadata.json"
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
    return full, part, gt, meta
