"""Functional maps: least-squares estimation from features, conversions to and
from soft correspondences, and the split of the estimated map into the part
carried by the matched region and the part injected by the missing region.

Conventions. The least-squares map from features has shape k_x x k_y and
sends Y-coefficients to X-coefficients; maps extracted from correspondence
matrices have shape k_y x k_x and send X-coefficients to Y-coefficients.
Each FunctionalMap records its direction as (input space, output space).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .descriptors import FeatureMatrix, restrict_features
from .mesh import VertexSubset, disjoint_union, extract_submesh
from .spectral import eigenbasis, project

_SOLVE_RTOL = 1e-8


class SingularSystemError(np.linalg.LinAlgError):
    """Feature Gram matrix is singular and no regularization was requested."""

    def __init__(self, smallest_singular_value):
        super().__init__(
            "feature Gram matrix is singular "
            f"(smallest singular value {smallest_singular_value:.3e}); "
            "increase the feature rank or pass a positive regularization")
        self.smallest_singular_value = float(smallest_singular_value)


@dataclass(frozen=True)
class FunctionalMap:
    matrix: np.ndarray
    direction: tuple  # (input space id, output space id)
    basis_sizes: tuple  # (rows, cols) = (output k, input k)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if not np.all(np.isfinite(m)):
            raise ValueError("functional map has non-finite entries")
        if m.shape != tuple(self.basis_sizes):
            raise ValueError("functional map shape does not match declared basis sizes")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class FmDecomposition:
    """total = ideal_part + error_part, entrywise."""

    total: FunctionalMap
    ideal_part: FunctionalMap
    error_part: FunctionalMap
    missing_area_fraction: float
    error_norm: float


def _solve_gram_right(B, Q, regularization):
    """C = B (Q + reg I)^-1 by Cholesky, verified to a per-column residual."""
    k = Q.shape[0]
    Qr = Q + regularization * np.eye(k)
    if regularization == 0.0:
        ev = np.linalg.eigvalsh(Qr)
        if ev[0] <= 1e-12 * max(ev[-1], 1e-300):
            raise SingularSystemError(max(ev[0], 0.0))
    try:
        cho = linalg.cho_factor(Qr, lower=True)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(Qr)
        raise SingularSystemError(max(ev[0], 0.0)) from None
    rhs = B.T  # solve Qr Z = B^T, C = Z^T
    Z = linalg.cho_solve(cho, rhs)
    resid = Qr @ Z - rhs
    # one round of iterative refinement if any column misses the contract
    bnorm = np.linalg.norm(rhs, axis=0)
    rnorm = np.linalg.norm(resid, axis=0)
    if np.any(rnorm > _SOLVE_RTOL * np.maximum(bnorm, 1e-300)):
        Z = Z - linalg.cho_solve(cho, resid)
        resid = Qr @ Z - rhs
        rnorm = np.linalg.norm(resid, axis=0)
        if np.any(rnorm > _SOLVE_RTOL * np.maximum(bnorm, 1e-300)):
            worst = int(np.argmax(rnorm / np.maximum(bnorm, 1e-300)))
            raise SingularSystemError(np.linalg.eigvalsh(Qr)[0]) from None
    return Z.T


def fm_layer(basis_x, basis_y, feats_x, feats_y, regularization=0.0):
    """Least-squares spectral map from projected features.

    Solves for the k_x x k_y matrix minimizing the coefficient-space
    mismatch; with zero regularization this is the exact pseudo-inverse
    solution Fx_hat Fy_hat^T (Fy_hat Fy_hat^T)^-1.
    """
    if feats_x.d != feats_y.d:
        raise ValueError("feature dimensions differ")
    Fx_hat = project(basis_x, feats_x.values).coeffs
    Fy_hat = project(basis_y, feats_y.values).coeffs
    B = Fx_hat @ Fy_hat.T
    Q = Fy_hat @ Fy_hat.T
    C = _solve_gram_right(B, Q, regularization)
    return FunctionalMap(C, direction=("y", "x"), basis_sizes=(basis_x.k, basis_y.k))


def fm_layer_masked(basis_x, basis_y, feats_x, feats_y, mu=1e-2):
    """Least-squares map with a spectral-compatibility penalty.

    Adds mu * W_ij C_ij^2 to the objective, where W is the normalized squared
    eigenvalue difference between row (X) and column (Y) modes; rows decouple
    into independent diagonal-shifted Gram solves.
    """
    if feats_x.d != feats_y.d:
        raise ValueError("feature dimensions differ")
    Fx_hat = project(basis_x, feats_x.values).coeffs
    Fy_hat = project(basis_y, feats_y.values).coeffs
    B = Fx_hat @ Fy_hat.T
    Q = Fy_hat @ Fy_hat.T
    lx, ly = basis_x.eigenvalues, basis_y.eigenvalues
    scale = max(lx[-1], ly[-1], 1e-300)
    W = np.square((lx[:, None] - ly[None, :]) / scale)
    C = np.empty_like(B)
    for i in range(B.shape[0]):
        C[i] = linalg.solve(Q + mu * np.diag(W[i]), B[i], assume_a="pos")
    return FunctionalMap(C, direction=("y", "x"), basis_sizes=(basis_x.k, basis_y.k))


def _split_product(psi_x, mass_x, feats_x_values, rows):
    """(Psi_x^T A_x F_x) restricted to a vertex subset of X's rows."""
    sub = mass_x[rows, None] * feats_x_values[rows]
    return psi_x[rows].T @ sub


def fm_decompose(mesh_x, part_y, basis_x, basis_y, feats_x, feats_y,
                 regularization=0.0):
    """Split the least-squares map by where on X its integrand lives.

    The rows of X are partitioned into the matched region (part_y) and the
    missing remainder; the two resulting terms share the trailing Gram solve,
    so their sum reproduces fm_layer to machine accuracy.
    """
    if part_y.parent_size != mesh_x.num_vertices:
        raise ValueError("part subset does not index mesh_x")
    yi = part_y.indices
    zi = part_y.complement().indices
    mass_x = mesh_x.vertex_areas

    Fy_hat = project(basis_y, feats_y.values).coeffs
    Q = Fy_hat @ Fy_hat.T
    # trailing factor Fy_hat^T Q^-1 shared by every term (d x k_y)
    Gt = _solve_gram_right(Fy_hat.T, Q, regularization)

    psi_x = basis_x.eigenvectors
    total_lead = psi_x.T @ (mass_x[:, None] * feats_x.values)
    ideal_lead = _split_product(psi_x, mass_x, feats_x.values, yi)
    error_lead = _split_product(psi_x, mass_x, feats_x.values, zi) if zi.size else \
        np.zeros_like(total_lead)

    sizes = (basis_x.k, basis_y.k)
    total = FunctionalMap(total_lead @ Gt, ("y", "x"), sizes)
    ideal = FunctionalMap(ideal_lead @ Gt, ("y", "x"), sizes)
    error = FunctionalMap(error_lead @ Gt, ("y", "x"), sizes)
    frac = float(mass_x[zi].sum() / mass_x.sum()) if zi.size else 0.0
    return FmDecomposition(
        total=total, ideal_part=ideal, error_part=error,
        missing_area_fraction=frac,
        error_norm=float(np.linalg.norm(error.matrix)))


def ideal_map_from_correspondence(basis_x, basis_y, correspondence, mass_x=None):
    """Spectral map of a known injective part-to-full vertex assignment.

    correspondence[i] is the X vertex matching Y vertex i; the result is
    Psi_x^T A_x Pi Psi_y for the corresponding inclusion matrix Pi.
    """
    idx = correspondence.indices if isinstance(correspondence, VertexSubset) \
        else np.asarray(correspondence, dtype=np.int64)
    if np.unique(idx).size != idx.size:
        raise ValueError("correspondence is not injective")
    if idx.size != basis_y.num_vertices:
        raise ValueError("correspondence length does not match basis_y")
    a = basis_x.mass_diag if mass_x is None else np.asarray(mass_x)
    lead = (a[idx, None] * basis_x.eigenvectors[idx]).T  # (k_x, n_y)
    return FunctionalMap(lead @ basis_y.eigenvectors, ("y", "x"),
                         (basis_x.k, basis_y.k))


def map_from_soft_correspondence(P, basis_x, basis_y, mass_y=None):
    """Psi_y^T A_y P Psi_x: the spectral map induced by a correspondence matrix."""
    mat = P.matrix if hasattr(P, "matrix") else np.asarray(P, dtype=np.float64)
    if mat.shape != (basis_y.num_vertices, basis_x.num_vertices):
        raise ValueError("correspondence shape does not match the bases")
    a = basis_y.mass_diag if mass_y is None else np.asarray(mass_y)
    C = basis_y.eigenvectors.T @ (a[:, None] * (mat @ basis_x.eigenvectors))
    return FunctionalMap(C, ("x", "y"), (basis_y.k, basis_x.k))


def correspondence_from_map(C, basis_x, basis_y):
    """Dense unnormalized correspondence reconstructed from a spectral map.

    For a k_y x k_x map this is Psi_y C Psi_x^T A_x, the adjoint-inclusion
    reconstruction; rows are not stochastic and the caller is expected to
    renormalize or take argmaxes.
    """
    mat = C.matrix if isinstance(C, FunctionalMap) else np.asarray(C)
    if mat.shape != (basis_y.k, basis_x.k):
        raise ValueError("map shape does not match the bases")
    recon = basis_y.eigenvectors @ mat @ (basis_x.mass_diag[:, None]
                                          * basis_x.eigenvectors).T
    return recon


@dataclass(frozen=True)
class DisconnectedAnalysis:
    """Decomposition of the two-component construction, modes sorted Y-first."""

    decomposition: FmDecomposition
    y_modes: np.ndarray          # positions (after reorder) supported on Y
    z_modes: np.ndarray
    ambiguous_modes: np.ndarray  # mixed support; excluded from structure checks
    eigenvalues: np.ndarray      # reordered to match the mode order
    cstar: FunctionalMap         # ideal map from the ground-truth inclusion
    y_energy_fraction: np.ndarray


def disconnected_analysis(mesh_y, mesh_z, k, feats_y, feats_z,
                          support_threshold=0.99):
    """Assemble X as the disjoint union of Y and Z and decompose its map to Y.

    X's eigenvectors split into Y-supported and Z-supported families
    (classified by the A-weighted energy fraction on Y; mixed modes are
    reported and excluded). Columns are reordered Y-first so the ideal part
    should line up with the rectangular partial identity.
    """
    ny = mesh_y.num_vertices
    if k > min(ny, mesh_z.num_vertices):
        raise ValueError("k exceeds a component's vertex count")
    mesh_x = disjoint_union(mesh_y, mesh_z)
    basis_x = eigenbasis(mesh_x, k)
    basis_y = eigenbasis(mesh_y, k)

    energy_y = np.sum(basis_x.mass_diag[:ny, None]
                      * np.square(basis_x.eigenvectors[:ny]), axis=0)
    y_modes = np.nonzero(energy_y > support_threshold)[0]
    z_modes = np.nonzero(energy_y < 1.0 - support_threshold)[0]
    ambiguous = np.setdiff1d(np.arange(k), np.concatenate([y_modes, z_modes]))

    order = np.concatenate([y_modes, z_modes, ambiguous]).astype(np.int64)
    psi = basis_x.eigenvectors[:, order]
    lam = basis_x.eigenvalues[order]
    reordered = type(basis_x)(
        k=k, eigenvalues=lam, eigenvectors=psi, mass_diag=basis_x.mass_diag)

    F_x = FeatureMatrix(np.vstack([feats_y.values, feats_z.values]),
                        provenance=feats_y.provenance)
    part = VertexSubset(mesh_x.num_vertices, np.arange(ny, dtype=np.int64))
    deco = fm_decompose(mesh_x, part, reordered, basis_y, F_x, feats_y)
    cstar = ideal_map_from_correspondence(reordered, basis_y,
                                          np.arange(ny, dtype=np.int64))
    npos = len(y_modes)
    return DisconnectedAnalysis(
        decomposition=deco,
        y_modes=np.arange(npos, dtype=np.int64),
        z_modes=np.arange(npos, npos + len(z_modes), dtype=np.int64),
        ambiguous_modes=np.arange(npos + len(z_modes), k, dtype=np.int64),
        eigenvalues=lam,
        cstar=cstar,
        y_energy_fraction=energy_y[order])


@dataclass(frozen=True)
class SweepRow:
    missing_area_fraction: float
    relative_error: float  # ||C_error||_F / ||C_total||_F
    error_norm: float
    ideal_norm: float


def error_vs_area_sweep(mesh_x, parts, feature_fn, k, regularization=0.0):
    """One decomposition per part, reported as relative error vs missing area.

    feature_fn maps a mesh to a FeatureMatrix; features on each part are the
    full-shape features restricted to it (a partiality-robust extractor).
    Rows come back sorted by missing-area fraction.
    """
    feats_x = feature_fn(mesh_x) if callable(feature_fn) else feature_fn
    basis_x = eigenbasis(mesh_x, k)
    rows = []
    for part in parts:
        sub, kept = extract_submesh(mesh_x, part)
        k_y = min(k, kept.indices.size - 1) if kept.indices.size > k else k
        basis_y = eigenbasis(sub, k_y)
        feats_y = restrict_features(feats_x, kept)
        deco = fm_decompose(mesh_x, kept, basis_x, basis_y, feats_x, feats_y,
                            regularization)
        total_norm = float(np.linalg.norm(deco.total.matrix))
        rows.append(SweepRow(
            missing_area_fraction=deco.missing_area_fraction,
            relative_error=deco.error_norm / max(total_norm, 1e-300),
            error_norm=deco.error_norm,
            ideal_norm=float(np.linalg.norm(deco.ideal_part.matrix))))
    rows.sort(key=lambda r: r.missing_area_fraction)
    return rows
