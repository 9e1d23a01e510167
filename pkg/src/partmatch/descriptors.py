"""Pointwise descriptors used to initialize the feature optimization.

Positions+normals mirror the raw inputs of learned pipelines and are not
isometry invariant; heat and wave kernel signatures are spectral, hence
invariant to rigid motion, and make better starting points for pose pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import project
from .storage import load_npz, save_npz

XYZ_NORMALS = "xyz_normals"
HKS = "hks"
WKS = "wks"
OPTIMIZED = "optimized"
LOADED = "loaded"


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d pointwise descriptor matrix with a provenance tag."""

    values: np.ndarray
    provenance: str = LOADED

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("feature matrix must be 2-d")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return int(self.values.shape[0])

    @property
    def d(self):
        return int(self.values.shape[1])


def xyz_normal_features(mesh):
    """Columns 0-2 vertex positions, 3-5 unit normals (d=6)."""
    vals = np.hstack([mesh.vertices, mesh.vertex_normals])
    return FeatureMatrix(vals, provenance=XYZ_NORMALS)


def default_hks_times(basis, n_times):
    """Log-spaced times spanning [4 ln10 / lambda_k, 4 ln10 / lambda_2]."""
    lam = basis.eigenvalues
    positive = lam[lam > 1e-8 * max(1.0, lam[-1])]
    if positive.size < 2:
        raise ValueError("basis has too few positive eigenvalues for a time range")
    return np.geomspace(4 * np.log(10) / positive[-1], 4 * np.log(10) / positive[0],
                        n_times)


def heat_kernel_signature(basis, times=None, n_times=16):
    """HKS(i, t) = sum_j exp(-lambda_j t) psi_j(i)^2, one column per time."""
    if times is None:
        times = default_hks_times(basis, n_times)
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0:
        raise ValueError("empty time list")
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    decay = np.exp(-np.outer(basis.eigenvalues, times))  # (k, n_times)
    vals = np.square(basis.eigenvectors) @ decay
    return FeatureMatrix(vals, provenance=HKS)


def wks_energy_grid(basis, n_energies=128, sigma_factor=7.0):
    lam = basis.eigenvalues
    positive = lam[lam > 1e-8 * max(1.0, lam[-1])]
    if positive.size < 2:
        raise ValueError("basis has too few positive eigenvalues for an energy range")
    lo, hi = np.log(positive[0]), np.log(positive[-1])
    sigma = sigma_factor * (hi - lo) / n_energies
    return np.linspace(lo + 2 * sigma, hi - 2 * sigma, n_energies), sigma


def wave_kernel_signature(basis, energies=None, sigma=None, n_energies=128):
    """Band-pass spectral signature over log-energy bins (Gaussian windows)."""
    if energies is None:
        energies, sigma = wks_energy_grid(basis, n_energies)
    energies = np.asarray(energies, dtype=np.float64)
    lam = basis.eigenvalues
    keep = lam > 1e-8 * max(1.0, lam[-1])
    log_lam = np.log(lam[keep])
    weights = np.exp(-np.square(energies[None, :] - log_lam[:, None])
                     / (2.0 * sigma * sigma))  # (k+, e)
    vals = np.square(basis.eigenvectors[:, keep]) @ weights
    norm = weights.sum(axis=0)
    norm[norm == 0.0] = 1.0
    return FeatureMatrix(vals / norm[None, :], provenance=WKS)


def shared_wks(basis_a, basis_b, n_energies=128, sigma_factor=7.0):
    """WKS for two shapes on one energy grid so their columns are comparable.

    The grid spans the intersection of the two spectral ranges; matching
    descriptors across shapes requires identical bins.
    """
    ga, sa = wks_energy_grid(basis_a, n_energies, sigma_factor)
    gb, sb = wks_energy_grid(basis_b, n_energies, sigma_factor)
    lo = max(ga[0], gb[0])
    hi = min(ga[-1], gb[-1])
    if hi <= lo:
        raise ValueError("spectral ranges do not overlap")
    grid = np.linspace(lo, hi, n_energies)
    sigma = max(sa, sb)
    return (wave_kernel_signature(basis_a, grid, sigma),
            wave_kernel_signature(basis_b, grid, sigma))


def restrict_features(features, subset):
    """Row-select features onto a vertex subset (submesh ordering)."""
    if subset.parent_size != features.n:
        raise ValueError("subset parent size does not match feature rows")
    return FeatureMatrix(features.values[subset.indices].copy(),
                         provenance=features.provenance)


def pad_to_dim(features, d, mode="tile"):
    """Widen a descriptor to d columns by tiling or zero-padding."""
    vals = features.values
    if vals.shape[1] >= d:
        return FeatureMatrix(vals[:, :d].copy(), provenance=features.provenance)
    if mode == "tile":
        reps = int(np.ceil(d / vals.shape[1]))
        out = np.tile(vals, (1, reps))[:, :d]
    elif mode == "zero":
        out = np.zeros((vals.shape[0], d))
        out[:, :vals.shape[1]] = vals
    else:
        raise ValueError(f"unknown pad mode '{mode}'")
    return FeatureMatrix(out, provenance=features.provenance)


def save_features(features, path):
    save_npz(path, {
        "values": features.values,
        "provenance": np.bytes_(features.provenance.encode()),
    })


def load_features(path):
    data = load_npz(path)
    return FeatureMatrix(data["values"], provenance=bytes(data["provenance"]).decode())
