//! Random interaction parameters and the degenerate configurations in which
//! a fixed energy survives every realization.

pub mod degenerate;
pub mod ensemble;
pub mod montecarlo;

pub use degenerate::{
    construct_degenerate, find_class_point, zeros_of_eigenfunction, DegenerateConstruction,
    DegenerateOptions,
};
pub use ensemble::{site_rng, Ensemble, SiteDistribution, Target};
pub use montecarlo::{monte_carlo, HistogramBin, MonteCarloReport, QUANTILE_LEVELS};
