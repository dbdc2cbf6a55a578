//! Monte Carlo oracle: path ensembles, binning and empirical curves.

pub mod analytic;
pub mod bins;
pub mod dump;
pub mod generate;
pub mod oracle;
pub mod report;
pub mod study;

pub use analytic::analytic_curve;
pub use bins::{density_power_cuts, BinGrid, Stat, DEFAULT_ALPHA, DEFAULT_KAPPA};
pub use generate::{
    fourier_paths, generate_paths, pin_to_close, simulate_summaries, stream_blocks, Block, ExtremaMode, GridSpec, PathEnsemble,
    PathSummary, SimConfig, BLOCK_PATHS, DEFAULT_MEMORY_BUDGET,
};
pub use report::{compare_to_analytic, empirical_curves, worst_quantiles, BinComparison, BinCurve, CurveAccumulator, EnsembleVarianceReport, ReportOptions};
pub use study::{run_study, table2, Conditioning, StudyConfig, Table2Row, TABLE2_TARGETS};
pub use oracle::{mixture_check, MixtureCheck};
