"""Differentially private synthetic databases for smooth queries.

Releases a synthetic database whose answers approximate the private
database's answers on every query with bounded partial derivatives.  The
release path is: Chebyshev-product moments, Laplace noise, lattice
rounding, an L1 fit over the discretized cube (optionally restricted to a
private-PCA grid subset), then i.i.d. sampling from the fitted
distribution.
"""

from .basis import (BasisSet, DesignMatrix, MomentVector, build_design_matrix,
                    cheb_eval, compute_moments, enumerate_basis,
                    round_moment_vector, round_to_lattice)
from .core import (ChebGrid, Dataset, Lattice, MechanismParams, PrivacyBudget,
                   derive_params, derive_params_approx, derive_params_pure,
                   discretize, grid_points, normalize_dataset)
from .harness import ExperimentConfig, load_csv, run_experiment
from .lpsolve import (L1FitResult, ProbabilityVector, StandardLP,
                      solve_l1_fit, solve_standard_form, to_standard_form)
from .mechanism import (DiagnosticsReport, FeasibilityError, SyntheticDatabase,
                        error_diagnostics, run_accelerated, run_full,
                        sample_synthetic)
from .noise import (NoiseSpec, epsilon_audit, laplace_sample, laplace_vector,
                    moment_noise_scale, privatize_moments, rng_stream)
from .pca import (CovarianceMatrix, EllipsoidSubset, PrivateSubspace,
                  covariance, exact_eigenvalues, gram_schmidt, private_mean,
                  psi, psi_noise_scale, sample_ellipsoid, subspace_iteration,
                  uniform_hypercube_subset)
from .queries import (ErrorReport, GaussianKernelQuery, error_metrics,
                      evaluate_query, knorm_estimate, load_queries,
                      random_queries, save_queries)

__version__ = "0.1.0"
