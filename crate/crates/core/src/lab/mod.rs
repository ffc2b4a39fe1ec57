//! Exact and Monte Carlo analysis of i-SIR on finite state spaces.

pub mod analysis;
pub mod bounds;
pub mod experiments;
pub mod family;
mod model;
pub mod peskun;
pub mod spectral;
pub mod transition;

pub use analysis::{
    analysis_report, analysis_table, AnalysisRow, AnalysisTable, ReportRow, TestFunctionSet,
};
pub use family::{psi_curve, rejection_curve, KernelFamily, RejectionPoint, Route};
pub use model::{split_lambda, DiscreteConfig, DiscreteModel, LambdaGrid};
pub use spectral::{spectral_asvar, SpectralKernel};
pub use transition::{
    enumerate_kernel, exact_transition_matrix, mc_transition_and_rejection, quadrature_kernel,
    IntegerKernel,
};
