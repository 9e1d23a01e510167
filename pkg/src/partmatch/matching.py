"""Direct feature matching: cosine similarity, temperature softmax, and
point-to-point extraction with spectral smoothing.

Only the part-to-full direction exists; every row of the correspondence lives
on the partial shape and distributes mass over the full shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

NEAREST_NEIGHBOR = "nearest_neighbor"
SPECTRALLY_SMOOTHED = "spectrally_smoothed"


@dataclass(frozen=True)
class SoftCorrespondence:
    matrix: np.ndarray  # (n_y, n_x), nonnegative
    temperature: float
    row_stochastic: bool = True


@dataclass(frozen=True)
class PointMap:
    assignment: np.ndarray  # (n_y,) indices into X
    method: str = NEAREST_NEIGHBOR

    def __post_init__(self):
        object.__setattr__(self, "assignment",
                           np.asarray(self.assignment, dtype=np.int64))


def _normalize_rows(values, label):
    norms = np.linalg.norm(values, axis=1)
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise ValueError(f"zero-norm feature row for vertex {int(bad[0])} of {label}")
    return values / norms[:, None]


def cosine_similarity(feats_y, feats_x):
    """S[i, j] = <f_i / |f_i|, f_j / |f_j|>, in [-1, 1]."""
    fy = feats_y.values if hasattr(feats_y, "values") else np.asarray(feats_y)
    fx = feats_x.values if hasattr(feats_x, "values") else np.asarray(feats_x)
    if fy.shape[1] != fx.shape[1]:
        raise ValueError("feature dimensions differ")
    return _normalize_rows(fy, "Y") @ _normalize_rows(fx, "X").T


def soft_correspondence(feats_y, feats_x, tau):
    """Row softmax of similarity / tau; rows sum to one."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    S = cosine_similarity(feats_y, feats_x)
    if not np.all(np.isfinite(S)):
        raise ValueError("non-finite similarity")
    Z = S / tau
    Z -= Z.max(axis=1, keepdims=True)
    P = np.exp(Z)
    P /= P.sum(axis=1, keepdims=True)
    return SoftCorrespondence(P, temperature=float(tau), row_stochastic=True)


def nearest_neighbor_map(feats_y, feats_x):
    """Per-row cosine argmax; ties resolve to the lowest index."""
    S = cosine_similarity(feats_y, feats_x)
    return PointMap(np.argmax(S, axis=1), method=NEAREST_NEIGHBOR)


def spectrally_smoothed_map(pi, basis_x, basis_y, mass_x=None, mass_y=None,
                            row_block=2048):
    """Smooth a point map through both spectral projectors and re-argmax.

    Scores are Psi_y (Psi_y^T A_y Pi A_x Psi_x) Psi_x^T, evaluated in row
    blocks so the dense n_y x n_x score matrix never materializes at once.
    """
    assignment = pi.assignment if isinstance(pi, PointMap) else np.asarray(pi)
    ax = basis_x.mass_diag if mass_x is None else np.asarray(mass_x)
    ay = basis_y.mass_diag if mass_y is None else np.asarray(mass_y)
    if assignment.size != basis_y.num_vertices:
        raise ValueError("point map length does not match basis_y")
    if assignment.min() < 0 or assignment.max() >= basis_x.num_vertices:
        raise ValueError("point map index outside X")

    # inner k_y x k_x factor: Psi_y^T A_y Pi A_x Psi_x
    gathered = ax[assignment, None] * basis_x.eigenvectors[assignment]
    inner = (ay[:, None] * basis_y.eigenvectors).T @ gathered
    right = inner @ basis_x.eigenvectors.T  # (k_y, n_x)

    n_y = basis_y.num_vertices
    out = np.empty(n_y, dtype=np.int64)
    for start in range(0, n_y, row_block):
        stop = min(start + row_block, n_y)
        scores = basis_y.eigenvectors[start:stop] @ right
        out[start:stop] = np.argmax(scores, axis=1)
    return PointMap(out, method=SPECTRALLY_SMOOTHED)


def save_point_map(pm, path, metadata=None):
    """One X index per line; optional sidecar JSON with run metadata."""
    with open(path, "w") as fh:
        for idx in pm.assignment:
            fh.write(f"{int(idx)}\n")
    if metadata is not None:
        side = dict(metadata)
        side["method"] = pm.method
        side["length"] = int(pm.assignment.size)
        with open(str(path) + ".json", "w") as fh:
            json.dump(side, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_point_map(path, method=NEAREST_NEIGHBOR):
    with open(path) as fh:
        idx = [int(line) for line in fh if line.strip()]
    return PointMap(np.asarray(idx, dtype=np.int64), method=method)
