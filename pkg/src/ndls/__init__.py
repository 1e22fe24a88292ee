"""Node-dependent local smoothing for graph learning.

Per-node smoothing iterations are chosen by distance to the stationary
limit of the normalized adjacency operator, then applied to input features
(pre-processing) and to predicted soft labels (post-processing) around a
plain feature-based predictor.
"""

from .errors import ConfigError, DataError, NdlsError, NumericalError
from .graph import (
    Graph,
    build_graph,
    connected_components,
    load_graph,
    read_edge_list,
)
from .propagation import (
    PropagationOperator,
    StationaryModel,
    build_operator,
    extreme_eigenvalues,
    propagate,
    second_eigenvalue,
    stationary_matrix,
    stationary_model,
    stationary_row,
)
from .lsi import (
    BoundReport,
    InfluenceRow,
    LsiStats,
    LsiVector,
    check_bounds,
    compute_lsi,
    compute_lsi_exact,
    compute_lsi_grid,
    compute_lsi_sketch,
    influence_row,
    lsi_statistics,
    spectral_upper_bound,
    spectral_upper_bounds,
)
from .smoothing import (
    MWeights,
    SmoothedMatrix,
    apply_m_weights,
    build_m_weights,
    ndls_smooth,
    ndls_smooth_labels,
    s2gc_smooth,
    sgc_smooth,
)
from .model import (
    GridCell,
    GridSearchResult,
    HyperGrid,
    MlpModel,
    SplitMasks,
    TrainParams,
    evaluate_accuracy,
    gradient_check,
    grid_search,
    predict_soft,
    train_mlp,
)
from .pipeline import (
    PipelineConfig,
    PipelineData,
    RunReport,
    export_reports,
    load_pipeline_inputs,
    mask_features,
    model_cell_seed,
    run_pipeline,
    run_pipeline_data,
    run_sparsity_suite,
    sparsify_edges,
    subsample_labels,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
