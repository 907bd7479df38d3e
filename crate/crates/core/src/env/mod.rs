//! Lazy 2-GREM environment: energies, extremes, scaling and bin statistics.

mod bins;
mod extremes;
mod io;
pub mod normal;
mod oracle;
mod params;

pub use bins::{bin_scan, binned_top_k, largest_bin_maxima, BinGrid, BinMax, BinStats};
pub use extremes::{
    gamma_weight, level_sums, log_level_sum, log_level_sums, top_k, top_k_filtered, u_scale,
    u_scale_at, u_unscale, w_statistic, ExtremeRecord, GammaWeight, LogSumExp,
};
pub use io::{read_records_csv, write_bins_csv, write_records_csv};
pub use oracle::{DenseLandscape, EnergyOracle, EnvHook, Landscape};
pub use params::{beta_star, derive, kappa, DerivedParams, ModelParams, MAX_N};
