"""Unsupervised matching losses and their gradients with respect to features.

Everything differentiates through cosine normalization -> temperature softmax
-> soft correspondence -> loss, in closed form; no autodiff is involved. The
orthogonality regularizer builds its spectral map directly from the soft
correspondence (a plain matrix product), never from a least-squares solve.

Shape convention: the correspondence P is n_y x n_x, so the pulled-back
geodesic matrix is P D_x P^T (an n_y x n_y object comparable with D_y).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class LossBreakdown:
    gromov: float
    orth: float
    lpf: float
    total: float
    weights: tuple  # (lambda_orth, lambda_lpf)


@dataclass(frozen=True)
class TruncationSelector:
    """Number of Y modes whose eigenvalue stays below X's largest eigenvalue."""

    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be at least 1")


def select_r(basis_x, basis_y):
    lam_max = float(basis_x.eigenvalues[-1])
    return TruncationSelector(int(np.sum(basis_y.eigenvalues <= lam_max)))


def _corr(P):
    return P.matrix if hasattr(P, "matrix") else np.asarray(P, dtype=np.float64)


def _dist(D):
    arr = D.distances if hasattr(D, "distances") else np.asarray(D)
    return np.asarray(arr, dtype=np.float64)


def _rank(r):
    return r.r if isinstance(r, TruncationSelector) else int(r)


def gromov_loss(P, dist_x, dist_y, mass_y):
    """|| A_y^1/2 (P D_x P^T - D_y) A_y^1/2 ||_F^2."""
    Pm = _corr(P)
    Dx = _dist(dist_x)
    Dy = _dist(dist_y)
    if not (np.all(np.isfinite(Dx)) and np.all(np.isfinite(Dy))):
        raise ValueError("infinite geodesic entries (disconnected mesh); "
                         "restrict to a connected component first")
    a = np.asarray(mass_y, dtype=np.float64)
    R = Pm @ Dx @ Pm.T - Dy
    W = a[:, None] * a[None, :]
    return float(np.sum(W * R * R))


def orth_loss(C, r):
    """|| C C^T - J_r ||_F^2 with J_r the partial identity of rank r."""
    Cm = C.matrix if hasattr(C, "matrix") else np.asarray(C, dtype=np.float64)
    rr = _rank(r)
    if rr > Cm.shape[0]:
        raise ValueError(f"r={rr} exceeds the map's {Cm.shape[0]} rows")
    E = Cm @ Cm.T
    E[np.arange(rr), np.arange(rr)] -= 1.0
    return float(np.sum(E * E))


def lpf_loss(P, basis_x, basis_y, r, mass_y=None):
    """|| P Psi_x Psi_x^T P^T - Psi~_y Psi~_y^T ||^2 in the A_y-weighted norm.

    Evaluated through k-sized Gram factors; no dense n_y x n_y matrix is
    formed. Psi~_y keeps the first r columns of Psi_y.
    """
    Pm = _corr(P)
    a = basis_y.mass_diag if mass_y is None else np.asarray(mass_y)
    rr = _rank(r)
    if rr > basis_y.k:
        raise ValueError(f"r={rr} exceeds basis_y size {basis_y.k}")
    T = Pm @ basis_x.eigenvectors        # (n_y, k_x)
    V = a[:, None] * T
    M = T.T @ V                          # Gram of the pulled-back modes
    psit = basis_y.eigenvectors[:, :rr]
    U = psit.T @ V
    return float(np.sum(M * M) - 2.0 * np.sum(U * U) + rr)


@dataclass(frozen=True)
class PairContext:
    """Everything a loss evaluation needs for one (partial, full) pair."""

    basis_x: object
    basis_y: object
    dist_x: np.ndarray
    dist_y: np.ndarray
    mass_x: np.ndarray
    mass_y: np.ndarray
    tau: float
    mode: str = "orth"  # "orth" | "lpf"
    lambda_orth: float = 1e-3
    lambda_lpf: float = 0.02
    r: TruncationSelector = field(default=None)
    gromov_rows: np.ndarray = None  # optional row subsample for the Gromov term

    def with_mode(self, mode):
        return replace(self, mode=mode)


def make_pair_context(basis_x, basis_y, dist_x, dist_y, tau=0.01, mode="orth",
                      lambda_orth=1e-3, lambda_lpf=0.02,
                      subsample_threshold=1500, subsample_size=1000, seed=0):
    """Assemble a PairContext; picks r and the seeded Gromov row subsample."""
    Dx = _dist(dist_x)
    Dy = _dist(dist_y)
    if not (np.all(np.isfinite(Dx)) and np.all(np.isfinite(Dy))):
        raise ValueError("geodesic matrices contain infinities; "
                         "restrict to a connected component first")
    if mode not in ("orth", "lpf"):
        raise ValueError(f"unknown mode '{mode}'")
    n_y = basis_y.num_vertices
    rows = None
    if n_y > subsample_threshold:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n_y, size=subsample_size, replace=False))
    return PairContext(
        basis_x=basis_x, basis_y=basis_y, dist_x=Dx, dist_y=Dy,
        mass_x=basis_x.mass_diag, mass_y=basis_y.mass_diag,
        tau=float(tau), mode=mode, lambda_orth=float(lambda_orth),
        lambda_lpf=float(lambda_lpf), r=select_r(basis_x, basis_y),
        gromov_rows=rows)


def _values(feats):
    return feats.values if hasattr(feats, "values") else np.asarray(feats, np.float64)


def loss_and_gradient(feats_y, feats_x, ctx):
    """Total loss with dTotal/dF_y and dTotal/dF_x.

    Returns (LossBreakdown, grad_y, grad_x). In 'orth' mode the total is
    L_G + lambda_orth * L_orth with the map taken straight from the soft
    correspondence; in 'lpf' mode it is L_G + lambda_lpf * L_lpf.
    """
    Fy = _values(feats_y)
    Fx = _values(feats_x)
    ny, nx = Fy.shape[0], Fx.shape[0]

    norm_y = np.linalg.norm(Fy, axis=1)
    norm_x = np.linalg.norm(Fx, axis=1)
    if np.any(norm_y == 0.0) or np.any(norm_x == 0.0):
        raise ValueError("zero-norm feature row")
    Fyh = Fy / norm_y[:, None]
    Fxh = Fx / norm_x[:, None]

    Z = (Fyh @ Fxh.T) / ctx.tau
    Z -= Z.max(axis=1, keepdims=True)
    P = np.exp(Z)
    P /= P.sum(axis=1, keepdims=True)

    GP = np.zeros((ny, nx))

    # Gromov distortion
    if ctx.gromov_rows is None:
        Psub, ay, Dy = P, ctx.mass_y, ctx.dist_y
    else:
        rows = ctx.gromov_rows
        Psub = P[rows]
        ay = ctx.mass_y[rows]
        Dy = ctx.dist_y[np.ix_(rows, rows)]
    PD = Psub @ ctx.dist_x
    R = PD @ Psub.T - Dy
    WR = (ay[:, None] * ay[None, :]) * R
    gromov = float(np.sum(WR * R))
    if not np.isfinite(gromov):
        raise FloatingPointError("non-finite value in the Gromov term")
    dPsub = 4.0 * (WR @ PD)
    if ctx.gromov_rows is None:
        GP += dPsub
    else:
        GP[ctx.gromov_rows] += dPsub

    orth = 0.0
    lpf = 0.0
    rr = ctx.r.r
    psi_x = ctx.basis_x.eigenvectors
    psi_y = ctx.basis_y.eigenvectors
    if ctx.mode == "orth":
        ay_psi = ctx.mass_y[:, None] * psi_y
        C = ay_psi.T @ (P @ psi_x)
        E = C @ C.T
        E[np.arange(rr), np.arange(rr)] -= 1.0
        orth = float(np.sum(E * E))
        if not np.isfinite(orth):
            raise FloatingPointError("non-finite value in the orthogonality term")
        GP += ctx.lambda_orth * (ay_psi @ (4.0 * E @ C) @ psi_x.T)
    else:
        T = P @ psi_x
        V = ctx.mass_y[:, None] * T
        M = T.T @ V
        psit = psi_y[:, :rr]
        U = psit.T @ V
        lpf = float(np.sum(M * M) - 2.0 * np.sum(U * U) + rr)
        if not np.isfinite(lpf):
            raise FloatingPointError("non-finite value in the low-pass term")
        BV = T @ M - psit @ U
        GP += ctx.lambda_lpf * 4.0 * ((ctx.mass_y[:, None] * BV) @ psi_x.T)

    total = gromov + ctx.lambda_orth * orth if ctx.mode == "orth" \
        else gromov + ctx.lambda_lpf * lpf
    breakdown = LossBreakdown(gromov=gromov, orth=orth, lpf=lpf, total=total,
                              weights=(ctx.lambda_orth, ctx.lambda_lpf))

    # backward: softmax rows, then cosine normalization
    GZ = P * (GP - np.sum(GP * P, axis=1, keepdims=True))
    GS = GZ / ctx.tau
    GFyh = GS @ Fxh
    GFxh = GS.T @ Fyh
    grad_y = (GFyh - np.sum(GFyh * Fyh, axis=1, keepdims=True) * Fyh) / norm_y[:, None]
    grad_x = (GFxh - np.sum(GFxh * Fxh, axis=1, keepdims=True) * Fxh) / norm_x[:, None]
    return breakdown, grad_y, grad_x
