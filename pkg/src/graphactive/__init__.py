"""Graph-based semi-supervised active learning.

Build a similarity graph over feature vectors, place a Gaussian prior with
the regularized graph Laplacian as precision, compute Gaussian / harmonic /
probit posteriors, and choose label queries with variance-, risk-, margin-,
and model-change-based acquisition functions driven by rank-one look-ahead
updates.
"""

from .acquisition import (
    AcquisitionScores,
    compute_scores,
    mbr_scores,
    mc_scores,
    random_scores,
    select_query,
    sigmaopt_scores,
    uncertainty_scores,
    vopt_scores,
)
from .data import Dataset, checkerboard, export_csv, initial_labels, mnist_load, mnist_subset
from .errors import (
    ComponentWithoutLabelError,
    ConvergenceError,
    EmptyPoolError,
    GraphActiveError,
    IdxFormatError,
    InvalidParameterError,
    InvalidQueryError,
    ResourceLimitError,
)
from .graphs import (
    DENSE_CAP,
    Laplacian,
    PriorPrecision,
    SimilarityGraph,
    build_full_graph,
    build_knn_graph,
    laplacian,
    regularized_precision,
)
from .lookahead import (
    LookaheadResult,
    apply_label,
    gr_lookahead,
    hf_lookahead,
    newton_cov_update,
    newton_mean_update,
    probit_lookahead,
    retrain_lookahead,
)
from .models import (
    LabeledSet,
    NewtonConfig,
    NoiseModel,
    Posterior,
    gr_posterior,
    hf_posterior,
    predict,
    probit_curvature,
    probit_grad,
    probit_laplace,
    probit_map,
    probit_objective,
    quadratic_loss,
)

__version__ = "0.1.0"
