"""Laplace-Beltrami spectra: cotangent stiffness matrix, lumped mass matrix,
truncated generalized eigenbasis, and spectral projection / low-pass filtering.

The generalized problem L psi = lambda A psi (A the diagonal barycentric mass
matrix) is reduced by the A^{-1/2} similarity to an ordinary symmetric
problem, solved densely at small scale and by shift-invert Lanczos otherwise.
Boundary edges contribute a single cotangent, i.e. natural Neumann conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh

from .storage import load_npz, save_npz

# above this vertex count (and for small enough k) the Lanczos path is used
_DENSE_LIMIT = 1200


class EigensolverError(RuntimeError):
    """Eigendecomposition failed or missed the residual contract."""


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated LBO eigenbasis with its lumped mass matrix.

    Eigenvectors are A-orthonormal columns sorted by ascending eigenvalue;
    each column's sign is fixed so its first entry of magnitude > 1e-8 is
    positive.
    """

    k: int
    eigenvalues: np.ndarray   # (k,) ascending, >= 0, units 1/length^2
    eigenvectors: np.ndarray  # (n, k)
    mass_diag: np.ndarray     # (n,) > 0

    @property
    def num_vertices(self):
        return int(self.eigenvectors.shape[0])


@dataclass(frozen=True)
class SpectralCoefficients:
    coeffs: np.ndarray  # (k, d)


def cotangent_laplacian(mesh):
    """Symmetric PSD stiffness matrix; off-diagonals -(cot a + cot b)/2.

    Boundary edges see only their single incident triangle. Raises on
    triangles whose cotangents are not finite.
    """
    verts = mesh.vertices
    faces = mesh.faces
    n = mesh.num_vertices

    rows, cols, vals = [], [], []
    # corner c faces the edge (a, b); its cotangent weights that edge
    for c, a, b in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        u = verts[faces[:, a]] - verts[faces[:, c]]
        v = verts[faces[:, b]] - verts[faces[:, c]]
        cos = np.einsum("ij,ij->i", u, v)
        sin = np.linalg.norm(np.cross(u, v), axis=1)
        with np.errstate(divide="raise", invalid="raise"):
            try:
                cot = cos / sin
            except FloatingPointError:
                bad = int(np.nonzero(sin == 0.0)[0][0])
                raise EigensolverError(
                    f"degenerate face {bad} produces a non-finite cotangent") from None
        if not np.all(np.isfinite(cot)):
            bad = int(np.nonzero(~np.isfinite(cot))[0][0])
            raise EigensolverError(f"degenerate face {bad} produces a non-finite cotangent")
        w = 0.5 * cot
        rows += [faces[:, a], faces[:, b]]
        cols += [faces[:, b], faces[:, a]]
        vals += [-w, -w]

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    L = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(L.sum(axis=1)).ravel()
    L = L + sparse.diags(diag)
    return ((L + L.T) * 0.5).tocsr()


def _fix_signs(vecs):
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.nonzero(np.abs(col) > 1e-8)[0]
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    return vecs


def eigenbasis(mesh, k):
    """Solve L psi = lambda A psi for the k smallest eigenvalues.

    Guarantees the per-mode residual ||L psi - lambda A psi|| <= 1e-6 ||A psi||
    or raises EigensolverError with the attained residual.
    """
    n = mesh.num_vertices
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    L = cotangent_laplacian(mesh)
    a = mesh.vertex_areas
    inv_sqrt = 1.0 / np.sqrt(a)

    if n <= _DENSE_LIMIT or k > n // 3:
        B = L.toarray() * inv_sqrt[:, None] * inv_sqrt[None, :]
        B = (B + B.T) * 0.5
        vals, vecs = eigh(B, subset_by_index=(0, k - 1))
    else:
        B = L.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :]).tocsc()
        B = ((B + B.T) * 0.5).tocsc()
        try:
            vals, vecs = eigsh(B, k=k, sigma=-0.01, which="LM")
        except Exception as exc:  # ArpackError, factorization failure
            raise EigensolverError(f"sparse eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals = vals[order]
        vecs = vecs[:, order]

    # clamp the numerically-negative kernel modes
    floor = -1e-8 * max(1.0, float(np.abs(vals).max()))
    if vals.min() < floor:
        raise EigensolverError(f"negative eigenvalue {vals.min():.3e} from a PSD pencil")
    vals = np.maximum(vals, 0.0)
    psi = _fix_signs(vecs * inv_sqrt[:, None])

    Apsi = a[:, None] * psi
    resid = L @ psi - Apsi * vals[None, :]
    resid_norm = np.linalg.norm(resid, axis=0)
    bound = 1e-6 * np.linalg.norm(Apsi, axis=0)
    if np.any(resid_norm > bound):
        worst = int(np.argmax(resid_norm - bound))
        raise EigensolverError(
            f"eigenpair {worst} residual {resid_norm[worst]:.3e} exceeds "
            f"{bound[worst]:.3e}")
    return SpectralBasis(k=k, eigenvalues=vals, eigenvectors=psi, mass_diag=a.copy())


def project(basis, functions):
    """Spectral coefficients Psi^T A f of per-vertex functions (columns)."""
    f = np.atleast_2d(np.asarray(functions, dtype=np.float64))
    if f.shape[0] != basis.num_vertices:
        f = f.T
    if f.shape[0] != basis.num_vertices:
        raise ValueError("function row count does not match basis")
    return SpectralCoefficients(basis.eigenvectors.T @ (basis.mass_diag[:, None] * f))


def reconstruct(basis, coeffs):
    c = coeffs.coeffs if isinstance(coeffs, SpectralCoefficients) else np.asarray(coeffs)
    return basis.eigenvectors @ c


def low_pass(basis, functions):
    """Geometric low-pass filter Psi Psi^T A applied to per-vertex functions."""
    return reconstruct(basis, project(basis, functions))


def effective_basis_size(k, num_vertices):
    """Requested truncation capped at n-1 (tiny partial shapes)."""
    return min(k, num_vertices - 1)


# ---------------------------------------------------------------------------
# disk container, keyed by mesh content hash and k


def save_basis(basis, path, mesh_hash=""):
    save_npz(path, {
        "eigenvalues": basis.eigenvalues,
        "eigenvectors": basis.eigenvectors,
        "mass_diag": basis.mass_diag,
        "k": np.int64(basis.k),
        "mesh_hash": np.bytes_(mesh_hash.encode()),
    })


def load_basis(path):
    data = load_npz(path)
    basis = SpectralBasis(
        k=int(data["k"]),
        eigenvalues=data["eigenvalues"],
        eigenvectors=data["eigenvectors"],
        mass_diag=data["mass_diag"])
    return basis, bytes(data["mesh_hash"]).decode()
