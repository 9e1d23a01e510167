"""Partial-to-full non-rigid shape correspondence by direct feature matching.

Pipeline: triangle meshes -> LBO spectral bases and FMM geodesic matrices ->
pointwise descriptors -> softmax soft correspondence -> Gromov distortion
loss with a spectral regularizer -> per-pair feature optimization ->
point-to-point extraction and geodesic-error evaluation. A functional-map
module provides the least-squares map and its partiality error split for
analysis.
"""

__version__ = "0.1.0"

from .descriptors import (FeatureMatrix, heat_kernel_signature, pad_to_dim,
                          restrict_features, shared_wks, wave_kernel_signature,
                          xyz_normal_features)
from .evaluation import EvalReport, emit_pck_csv, evaluate
from .fmaps import (DisconnectedAnalysis, FmDecomposition, FunctionalMap,
                    correspondence_from_map, disconnected_analysis,
                    error_vs_area_sweep, fm_decompose, fm_layer,
                    fm_layer_masked, ideal_map_from_correspondence,
                    map_from_soft_correspondence)
from .geodesics import (GeodesicMatrix, fmm_from_source, geodesic_matrix,
                        load_geodesic_matrix, save_geodesic_matrix)
from .losses import (LossBreakdown, PairContext, TruncationSelector,
                     gromov_loss, loss_and_gradient, lpf_loss,
                     make_pair_context, orth_loss, select_r)
from .matching import (PointMap, SoftCorrespondence, cosine_similarity,
                       nearest_neighbor_map, soft_correspondence,
                       spectrally_smoothed_map)
from .mesh import (MeshError, MeshFormatError, TriangleMesh, VertexSubset,
                   connected_components, disjoint_union, extract_submesh,
                   load_mesh, normalize_area, save_mesh)
from .optimize import (BatchReport, OptimizationConfig, PairTask, RunReport,
                       batch_train, optimize_pair, refinement_config)
from .partialgen import (HolesRecipe, PlaneCutRecipe, carve_holes,
                         export_pair, load_pair, plane_cut,
                         plane_offset_for_fraction)
from .spectral import (SpectralBasis, SpectralCoefficients, cotangent_laplacian,
                       effective_basis_size, eigenbasis, load_basis, low_pass,
                       project, reconstruct, save_basis)
