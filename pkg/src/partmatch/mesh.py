"""Triangle meshes: construction, file I/O, submeshes, connectivity.

Vertex areas are barycentric (one third of the incident face areas) and
vertex normals are angle-weighted averages of face normals. Meshes are
immutable after construction: all arrays are frozen, and every operation
returns a new mesh.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class MeshError(ValueError):
    """Invalid mesh data."""


class MeshFormatError(MeshError):
    """Unparseable or unsupported mesh file content.

    Carries the file path and the 1-based line number (ascii formats) or
    byte offset (binary formats) where parsing failed.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        loc = ""
        if path is not None:
            loc += f" [{path}"
            if line is not None:
                loc += f":{line}"
            if offset is not None:
                loc += f" @byte {offset}"
            loc += "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line
        self.offset = offset


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class VertexSubset:
    """Sorted, distinct vertex indices into a parent mesh."""

    parent_size: int
    indices: np.ndarray  # (m,) int64, strictly increasing

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise MeshError("subset indices must be a 1-d array")
        if idx.size and (np.any(np.diff(idx) <= 0)):
            raise MeshError("subset indices must be strictly increasing")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.parent_size):
            raise MeshError("subset index out of range")
        object.__setattr__(self, "indices", _frozen(idx))

    @classmethod
    def from_indices(cls, parent_size, indices):
        """Build a subset from an unordered index collection (sorted, deduped)."""
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        return cls(parent_size, idx)

    @classmethod
    def all_of(cls, parent_size):
        return cls(parent_size, np.arange(parent_size, dtype=np.int64))

    def complement(self):
        mask = np.ones(self.parent_size, dtype=bool)
        mask[self.indices] = False
        return VertexSubset(self.parent_size, np.nonzero(mask)[0].astype(np.int64))

    def __len__(self):
        return int(self.indices.size)


def _face_geometry(vertices, faces):
    """Per-face unit normals and areas. Raises on degenerate (zero-area) faces."""
    p0 = vertices[faces[:, 0]]
    p1 = vertices[faces[:, 1]]
    p2 = vertices[faces[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(cross, axis=1)
    if np.any(norms <= 0.0) or not np.all(np.isfinite(norms)):
        bad = int(np.argmin(np.where(np.isfinite(norms), norms, -1.0)))
        raise MeshError(f"degenerate face {bad}: zero or non-finite area")
    return cross / norms[:, None], 0.5 * norms


def _angle_weighted_normals(vertices, faces, face_normals):
    n = vertices.shape[0]
    acc = np.zeros((n, 3))
    corners = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    for c, a, b in corners:
        u = vertices[faces[:, a]] - vertices[faces[:, c]]
        v = vertices[faces[:, b]] - vertices[faces[:, c]]
        cosang = np.einsum("ij,ij->i", u, v)
        cosang /= np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(acc, faces[:, c], ang[:, None] * face_normals)
    norms = np.linalg.norm(acc, axis=1)
    # degenerate fans can cancel; fall back to an arbitrary unit vector
    bad = norms < 1e-12
    if np.any(bad):
        acc[bad] = (0.0, 0.0, 1.0)
        norms[bad] = 1.0
    return acc / norms[:, None]


def _edge_array(faces):
    """All face edges as sorted vertex pairs, one row per half-edge."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    return np.sort(e, axis=1)


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangle mesh with per-vertex barycentric areas and normals."""

    vertices: np.ndarray        # (n, 3) float64
    faces: np.ndarray           # (m, 3) int64
    vertex_areas: np.ndarray    # (n,) float64, > 0
    vertex_normals: np.ndarray  # (n, 3) float64, unit
    is_edge_manifold: bool = True
    nonmanifold_vertices: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))

    @classmethod
    def build(cls, vertices, faces):
        """Validate connectivity and compute vertex areas and normals.

        Every face must have three distinct in-range indices and nonzero
        area, and every vertex must belong to at least one face.
        """
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        n = vertices.shape[0]
        if faces.shape[0] == 0:
            raise MeshError("mesh has no faces")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("non-finite vertex coordinates")
        if faces.min() < 0 or faces.max() >= n:
            bad = int(np.nonzero((faces < 0) | (faces >= n))[0][0])
            raise MeshError(f"face {bad} has out-of-range vertex index")
        same = ((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2]))
        if np.any(same):
            raise MeshError(f"face {int(np.nonzero(same)[0][0])} has repeated vertex indices")

        face_normals, face_areas = _face_geometry(vertices, faces)
        vertex_areas = np.bincount(
            faces.ravel(), weights=np.repeat(face_areas / 3.0, 3), minlength=n)
        if np.any(vertex_areas <= 0.0):
            bad = int(np.nonzero(vertex_areas <= 0.0)[0][0])
            raise MeshError(f"vertex {bad} is not referenced by any face")
        normals = _angle_weighted_normals(vertices, faces, face_normals)

        edges = _edge_array(faces)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        over = uniq[counts > 2]
        manifold = over.size == 0
        nm_vertices = np.unique(over).astype(np.int64)
        if not manifold:
            warnings.warn(
                f"mesh is not edge-manifold ({over.shape[0]} edges shared by >2 faces); "
                "geodesic propagation will refuse to traverse these regions",
                stacklevel=2)
        return cls(_frozen(vertices), _frozen(faces), _frozen(vertex_areas),
                   _frozen(normals), manifold, _frozen(nm_vertices))

    @property
    def num_vertices(self):
        return int(self.vertices.shape[0])

    @property
    def num_faces(self):
        return int(self.faces.shape[0])

    @property
    def total_area(self):
        return float(self.vertex_areas.sum())

    def face_areas(self):
        return _face_geometry(self.vertices, self.faces)[1]

    def content_hash(self):
        """Hex digest of the exact vertex and face bytes; keys disk caches."""
        h = hashlib.sha256()
        h.update(self.vertices.tobytes())
        h.update(self.faces.tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# operations


def normalize_area(mesh):
    """Uniformly rescale so the total surface area is one.

    The square root of the area becomes the length unit; geodesic distances
    and eigenvalues computed afterwards are in these normalized units.
    """
    area = mesh.total_area
    if not np.isfinite(area) or area <= 0.0:
        raise MeshError("cannot normalize a zero-area mesh")
    scale = 1.0 / np.sqrt(area)
    return TriangleMesh.build(mesh.vertices * scale, mesh.faces)


def extract_submesh(mesh, keep):
    """Induced submesh over the faces whose three vertices are all kept.

    Vertices kept but left without any surviving face are dropped. The
    submesh vertex order follows the sorted order of ``keep``; the returned
    subset maps submesh vertices back into the parent.
    """
    if len(keep) == 0:
        raise MeshError("keep set is empty")
    if keep.parent_size != mesh.num_vertices:
        raise MeshError("subset parent size does not match mesh")
    mask = np.zeros(mesh.num_vertices, dtype=bool)
    mask[keep.indices] = True
    fmask = mask[mesh.faces].all(axis=1)
    kept_faces = mesh.faces[fmask]
    if kept_faces.shape[0] == 0:
        raise MeshError("no face survives the vertex selection")
    used = np.unique(kept_faces)
    new_index = np.full(mesh.num_vertices, -1, dtype=np.int64)
    new_index[used] = np.arange(used.size)
    sub = TriangleMesh.build(mesh.vertices[used].copy(), new_index[kept_faces])
    return sub, VertexSubset(mesh.num_vertices, used)


def connected_components(mesh):
    """Vertex partition by edge connectivity, largest component first."""
    e = _edge_array(mesh.faces)
    n = mesh.num_vertices
    g = sparse.coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, labels = csgraph.connected_components(g, directed=False)
    comps = [np.nonzero(labels == c)[0].astype(np.int64) for c in range(ncomp)]
    comps.sort(key=lambda idx: (-idx.size, int(idx[0])))
    return [VertexSubset(n, idx) for idx in comps]


def disjoint_union(mesh_a, mesh_b):
    """Single mesh containing both inputs, A's vertices first."""
    verts = np.vstack([mesh_a.vertices, mesh_b.vertices])
    faces = np.vstack([mesh_a.faces, mesh_b.faces + mesh_a.num_vertices])
    return TriangleMesh.build(verts, faces)


# ---------------------------------------------------------------------------
# file I/O: OFF, OBJ (v/f lines only), PLY ascii + binary_little_endian


_FORMATS = ("off", "obj", "ply")


def _infer_format(path):
    suffix = str(path).rsplit(".", 1)[-1].lower()
    if suffix not in _FORMATS:
        raise MeshFormatError(f"cannot infer mesh format from extension '.{suffix}'",
                              path=path)
    return suffix


def load_mesh(path, format=None):
    """Read an indexed triangle mesh from an OFF, OBJ, or PLY file."""
    fmt = format.lower() if format else _infer_format(path)
    if fmt == "off":
        verts, faces = _read_off(path)
    elif fmt == "obj":
        verts, faces = _read_obj(path)
    elif fmt == "ply":
        verts, faces = _read_ply(path)
    else:
        raise MeshFormatError(f"unsupported format '{fmt}'", path=path)
    try:
        return TriangleMesh.build(verts, faces)
    except MeshError as exc:
        raise MeshFormatError(str(exc), path=path) from exc


def save_mesh(mesh, path, format=None, binary=False):
    """Write a mesh; positions are preserved to full float64 precision."""
    fmt = format.lower() if format else _infer_format(path)
    if fmt == "off":
        _write_off(mesh, path)
    elif fmt == "obj":
        _write_obj(mesh, path)
    elif fmt == "ply":
        _write_ply(mesh, path, binary=binary)
    else:
        raise MeshFormatError(f"unsupported format '{fmt}'", path=path)


def _data_lines(path):
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def _read_off(path):
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MeshFormatError("empty OFF file", path=path) from None
    counts = None
    if header.upper().startswith("OFF"):
        rest = header[3:].strip()
        if rest:
            counts = rest.split()
    else:
        raise MeshFormatError("missing OFF header", path=path, line=lineno)
    if counts is None:
        lineno, line = next(lines, (None, None))
        if line is None:
            raise MeshFormatError("missing OFF count line", path=path)
        counts = line.split()
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise MeshFormatError("bad OFF count line", path=path, line=lineno) from None

    verts = np.empty((nv, 3))
    for i in range(nv):
        lineno, line = next(lines, (None, None))
        if line is None:
            raise MeshFormatError(f"unexpected end of file reading vertex {i}", path=path)
        parts = line.split()
        try:
            verts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        except (ValueError, IndexError):
            raise MeshFormatError(f"bad vertex line", path=path, line=lineno) from None
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        lineno, line = next(lines, (None, None))
        if line is None:
            raise MeshFormatError(f"unexpected end of file reading face {i}", path=path)
        parts = line.split()
        try:
            cnt = int(parts[0])
            idx = [int(p) for p in parts[1:1 + cnt]]
        except (ValueError, IndexError):
            raise MeshFormatError("bad face line", path=path, line=lineno) from None
        if cnt != 3 or len(idx) != 3:
            raise MeshFormatError(f"non-triangle face with {cnt} vertices",
                                  path=path, line=lineno)
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshFormatError("face index out of range", path=path, line=lineno)
        faces[i] = idx
    return verts, faces


def _write_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_faces} 0\n")
        for v in mesh.vertices:
            fh.write("%.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            fh.write("3 %d %d %d\n" % (f[0], f[1], f[2]))


def _read_obj(path):
    verts = []
    faces = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if parts[0] == "v":
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except (ValueError, IndexError):
                raise MeshFormatError("bad vertex line", path=path, line=lineno) from None
        elif parts[0] == "f":
            refs = parts[1:]
            if len(refs) != 3:
                raise MeshFormatError(f"non-triangle face with {len(refs)} vertices",
                                      path=path, line=lineno)
            idx = []
            for ref in refs:
                head = ref.split("/", 1)[0]
                try:
                    v = int(head)
                except ValueError:
                    raise MeshFormatError("bad face reference", path=path,
                                          line=lineno) from None
                if v <= 0:
                    raise MeshFormatError("only positive OBJ indices are supported",
                                          path=path, line=lineno)
                idx.append(v - 1)
            faces.append(idx)
        # all other line kinds (vn, vt, usemtl, ...) are ignored
    if not verts:
        raise MeshFormatError("no vertices found", path=path)
    verts = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and faces.max() >= len(verts):
        raise MeshFormatError("face index out of range", path=path)
    return verts, faces


def _write_obj(mesh, path):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write("v %.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        for f in mesh.faces:
            fh.write("f %d %d %d\n" % (f[0] + 1, f[1] + 1, f[2] + 1))


_PLY_SCALARS = {
    "char": "b", "int8": "b", "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h", "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i", "uint": "I", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def _read_ply(path):
    with open(path, "rb") as fh:
        data = fh.read()
    # header is ascii up to "end_header"
    end = data.find(b"end_header")
    if end < 0:
        raise MeshFormatError("missing PLY end_header", path=path)
    nl = data.find(b"\n", end)
    header = data[:nl].decode("ascii", errors="replace").splitlines()
    body = data[nl + 1:]

    fmt = None
    elements = []  # (name, count, [(proptype, name) or ("list", counttype, itemtype, name)])
    for lineno, line in enumerate(header, start=1):
        parts = line.strip().split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "ply":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError("property before element", path=path, line=lineno)
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[2], parts[3], parts[4]))
            else:
                elements[-1][2].append((parts[1], parts[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshFormatError(f"unsupported PLY format '{fmt}'", path=path)

    verts = None
    faces = None
    if fmt == "ascii":
        tokens = body.split()
        pos = 0
        for name, count, props in elements:
            if name == "vertex":
                cols = [p[1] for p in props]
                if not {"x", "y", "z"} <= set(cols):
                    raise MeshFormatError("PLY vertex element lacks x/y/z", path=path)
                width = len(props)
                arr = np.array(tokens[pos:pos + count * width], dtype=np.float64)
                pos += count * width
                arr = arr.reshape(count, width)
                verts = arr[:, [cols.index("x"), cols.index("y"), cols.index("z")]]
            elif name == "face":
                faces = np.empty((count, 3), dtype=np.int64)
                for i in range(count):
                    cnt = int(tokens[pos]); pos += 1
                    if cnt != 3:
                        raise MeshFormatError(
                            f"non-triangle face with {cnt} vertices (face {i})", path=path)
                    faces[i] = [int(tokens[pos]), int(tokens[pos + 1]), int(tokens[pos + 2])]
                    pos += 3
            else:
                for _ in range(count):  # skip unknown fixed-width elements
                    pos += len(props)
    else:
        offset = 0
        for name, count, props in elements:
            if name == "vertex":
                if any(p[0] == "list" for p in props):
                    raise MeshFormatError("list property on vertex element", path=path)
                codes = []
                for ptype, pname in props:
                    if ptype not in _PLY_SCALARS:
                        raise MeshFormatError(f"unsupported property type '{ptype}'",
                                              path=path)
                    codes.append((_PLY_SCALARS[ptype], pname))
                dt = np.dtype([(pname, "<" + code) for code, pname in codes])
                arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
                offset += dt.itemsize * count
                try:
                    verts = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
                except KeyError:
                    raise MeshFormatError("PLY vertex element lacks x/y/z",
                                          path=path) from None
            elif name == "face":
                if len(props) != 1 or props[0][0] != "list":
                    raise MeshFormatError("face element must hold a single list property",
                                          path=path)
                _, ctype, itype, _ = props[0]
                cfmt = "<" + _PLY_SCALARS[ctype]
                ifmt = "<" + _PLY_SCALARS[itype]
                csize = struct.calcsize(cfmt)
                isize = struct.calcsize(ifmt)
                faces = np.empty((count, 3), dtype=np.int64)
                for i in range(count):
                    (cnt,) = struct.unpack_from(cfmt, body, offset)
                    offset += csize
                    if cnt != 3:
                        raise MeshFormatError(
                            f"non-triangle face with {cnt} vertices (face {i})",
                            path=path, offset=offset)
                    faces[i] = struct.unpack_from("<3" + ifmt[-1], body, offset)
                    offset += 3 * isize
            else:
                width = 0
                for ptype, *_ in props:
                    if ptype == "list":
                        raise MeshFormatError("cannot skip binary list element", path=path)
                    width += struct.calcsize(_PLY_SCALARS[ptype])
                offset += width * count
    if verts is None or faces is None:
        raise MeshFormatError("PLY file lacks vertex or face element", path=path)
    return verts, faces


def _write_ply(mesh, path, binary=False):
    n, m = mesh.num_vertices, mesh.num_faces
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {n}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {m}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n")
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
            rec = np.empty(m, dtype=np.dtype([("c", "u1"), ("idx", "<i4", (3,))]))
            rec["c"] = 3
            rec["idx"] = mesh.faces
            fh.write(rec.tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(header)
            for v in mesh.vertices:
                fh.write("%.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
            for f in mesh.faces:
                fh.write("3 %d %d %d\n" % (f[0], f[1], f[2]))
