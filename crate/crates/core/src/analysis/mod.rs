//! Figures of merit built on the scattering matrix: fidelities, dB metrics
//! and bandwidths, bias optimisation, the junction-spread study and
//! saturation.

pub mod fidelity;
pub mod optimize;
pub mod saturation;
pub mod sweep;

pub use fidelity::{
    circulation_fidelities, longest_band, loss_db, performance_db, Direction, FidelityReport,
    PerformanceReport,
};
pub use optimize::{optimize_bias, BiasOptimizer, OptimizationResult, OptimizerConfig, SearchBounds};
pub use saturation::{power_sweep, saturation_estimate, SaturationReport};
pub use sweep::{fidelity_sweep, fidelity_vs_spread_sweep, frequency_grid, linspace, smatrix_sweep, spread_params, SpreadRow, MAX_SPREAD};
