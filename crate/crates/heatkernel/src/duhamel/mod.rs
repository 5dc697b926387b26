//! Kernel of Δ + a^αΔ^{α/2} + b·∇ by the Duhamel series around the free
//! kernel, on a space-time grid, plus Chapman–Kolmogorov extension past
//! the short-time window.

mod extend;
mod grid;
mod kernels;
mod residual;
mod series;

pub use extend::{anchor_nodes, ck_residual, compose, extend_chapman_kolmogorov, AnchorSet, ExtensionReport};
pub use grid::{SpaceTimeGrid, Source};
pub use residual::{duhamel_residual, generator_residual, GeneratorReport, ResidualReport};
pub use series::{
    build_table_p0, estimate_tstar, picard_step, sum_series, HeatKernelTable, Layer, PicardEngine, SeriesDiagnostics,
    SeriesOptions, TStarEstimate, TSTAR_RATIO,
};
