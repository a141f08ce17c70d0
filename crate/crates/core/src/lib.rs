//! Relative-entropy diagnostics for translation-invariant lattice spin
//! dynamics on small tori.
//!
//! Measures on a torus are stored densely over all `q^{|Λ|}` configurations,
//! so every quantity is computed exactly: relative entropies and their
//! densities, discrete and continuous entropy loss (with the
//! conditional-probability representation and the energy pairing), DLR
//! residuals, non-nullness and martingale diagnostics. Gillespie and PCA
//! samplers cover larger systems.

pub mod codec;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod measure;
pub mod par;
pub mod potential;
pub mod rng;

pub use diagnostics::{
    dlr_residual, martingale_diagnostic, potential_distance, trajectory_report, two_site_from_single,
    uniform_martingale_over_trajectory, DlrResidualReport, EntropyTrace, MartingaleDiagnostic, TraceRow,
};
pub use dynamics::{Dynamics, IpsRates, PcaKernel};
pub use entropy::{
    continuous_loss_direct, discrete_loss_gp, entropy_density, entropy_production_rep, local_relative_entropy,
    loss_decomposition, pairing_l, pressure_decomposition_check, LossReport,
};
pub use error::{Error, Result};
pub use lattice::{ConfigIndex, Shape, SpinConfig, TorusGeometry};
pub use measure::{Assignment, CylinderMeasure, ExactMeasure, SampleEnsemble};
pub use potential::{gibbs_measure, hamiltonian, norm_phi, norm_phi_zero, pressure, specification, Potential};
