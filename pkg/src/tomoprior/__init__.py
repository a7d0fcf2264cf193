"""Sparse-view tomographic reconstruction with a global eigenspace (PCA) prior."""

from .dct import DctBasis, analyze, synthesize
from .fbp import FbpConfig, apply_projection_filter, fbp_reconstruct
from .grid import (AngleSet, CoefVector, Image, InvalidArgument, NumericalFailure, Sinogram,
                   image_linf_diff, make_uniform_angles)
from .metrics import MetricReport, relative_mse, ssim
from .patch_dictionary import (KsvdConfig, PatchDictionary, PatchGeometry, assemble_patches,
                               extract_patches, ksvd_train, load_dictionary, omp_encode,
                               save_dictionary, solve_with_patch_prior)
from .pca_prior import EigenPrior, TemplateSet, build_prior, project_alpha, reconstruct_from_alpha
from .projector import RadonOperator, adjoint, forward, operator_norm_estimate
from .solver import SolveConfig, SolveResult, objective_value, solve_plain_cs, solve_with_prior

__version__ = "0.1.0"
