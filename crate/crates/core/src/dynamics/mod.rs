//! Lattice dynamics: PCA kernels, IPS generators, exact evolution on small
//! tori and kinetic Monte Carlo at scale.

pub mod ips;
pub mod kmc;
pub mod models;
pub mod pca;

pub use ips::{
    build_generator, generator_apply, semigroup_evolve, Evolver, GeneratorMatrix, IpsRates, RateTerm,
};
pub use kmc::{gillespie_run, gillespie_snapshots, pca_snapshots, Event, Trajectory};
pub use models::{builtin_model, glauber, inf_temp_flip, majority_eps, site_jump, ModelParams};
pub use pca::{pca_pushforward, pca_step_sample, PcaKernel};

/// Either kind of dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Pca(PcaKernel),
    Ips(IpsRates),
}

impl Dynamics {
    pub fn is_discrete(&self) -> bool {
        matches!(self, Dynamics::Pca(_))
    }
}
