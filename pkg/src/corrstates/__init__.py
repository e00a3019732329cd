"""Market states from coarse-grained rolling correlation matrices."""

__version__ = "0.1.0"

from .coarse import (
    CGMatrix,
    Partition,
    block_average,
    ecg_elements,
    ecg_partition,
    random_partition_ensemble,
    sectorial_partition,
)
from .dynamics import (
    TransMatrix,
    equilibrium,
    forbidden_transition_check,
    markovianity_gap,
    transition_matrix,
    tridiagonal_mass,
)
from .errors import DataError, NumericalError, PipelineError, ValidationError
from .ingest import (
    SECTOR_CODES,
    PriceTable,
    SectorMap,
    filter_stocks,
    load_price_table,
    load_sector_map,
)
from .returns import (
    CorrMatrix,
    ReturnsTable,
    log_returns,
    pearson_matrix,
    rolling_correlations,
)
from .states import (
    SimMatrix,
    StateSequence,
    cluster_epochs,
    compare_labelings,
    kmeans,
    order_states,
    similarity_matrix,
    state_mean_matrices,
    vectorize,
)
from .stats import (
    EpochSeries,
    average_correlation,
    eigenvalues_2x2,
    eigenvalues_sym,
    element_moments,
    series_pearson,
)
from .synthetic import Regime, RegimeSpec, generate_prices, inject_gaps

__all__ = [
    "CGMatrix",
    "CorrMatrix",
    "DataError",
    "EpochSeries",
    "NumericalError",
    "Partition",
    "PipelineError",
    "PriceTable",
    "Regime",
    "RegimeSpec",
    "ReturnsTable",
    "SECTOR_CODES",
    "SectorMap",
    "SimMatrix",
    "StateSequence",
    "TransMatrix",
    "ValidationError",
    "average_correlation",
    "block_average",
    "cluster_epochs",
    "compare_labelings",
    "ecg_elements",
    "ecg_partition",
    "eigenvalues_2x2",
    "eigenvalues_sym",
    "element_moments",
    "equilibrium",
    "filter_stocks",
    "forbidden_transition_check",
    "generate_prices",
    "inject_gaps",
    "kmeans",
    "load_price_table",
    "load_sector_map",
    "log_returns",
    "markovianity_gap",
    "order_states",
    "pearson_matrix",
    "random_partition_ensemble",
    "rolling_correlations",
    "sectorial_partition",
    "series_pearson",
    "similarity_matrix",
    "state_mean_matrices",
    "transition_matrix",
    "tridiagonal_mass",
    "vectorize",
]
