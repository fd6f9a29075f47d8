"""Turing pattern simulation, resistance distance histograms and parameter regression."""

from ._core import (
    DegenerateFeatureError,
    DomainError,
    FormatError,
    GmParams,
    Model,
    Pattern,
    ShapeError,
    SimulationFailure,
    TrainingError,
    TuringError,
    chi2_distance,
    cluster_patterns,
    coefficient_of_variation,
    connected_components_high,
    dispersion,
    embed_2d,
    equilibrium,
    histogram,
    kernel,
    load_model,
    load_pattern,
    maximal_concentration,
    quantile,
    rdh,
    resistances,
    save_pattern,
    simulate,
    turing_check,
    wasserstein_sq,
)

__all__ = [name for name in dir() if not name.startswith("_")]
