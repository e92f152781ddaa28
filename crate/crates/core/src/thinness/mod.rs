//! Thinness test battery: moment reports of the exploration observable,
//! cell-mass decay statistics, the exceedance machinery, the Gaussian tail
//! inequality, and exact checks for deterministic sets.

mod cells;
mod deterministic;
mod gaussian;
mod moments;

pub use cells::{
    cell_correlation, exceedance_stats, indicator_sum, lattice_kappa, paper_kappa,
    sup_cell_statistic, sup_cell_statistic_sampled, Exceedance, ThresholdSpec,
};
pub use deterministic::{
    bridge_report, deterministic_thin_report, union_bound_holds, BridgeRow, ThinRow,
};
pub use gaussian::{
    gaussian_bound_check, tail_second_moment, BivariateCheck, GaussianBound, TailRatio,
};
pub use moments::{
    moment_report, non_thin_verdict, MomentReport, MomentRow, NonThinVerdict, ReplicaTrace,
};
