//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use crate::dynamics::ips::IpsRates;
use crate::dynamics::models::{builtin_model, ModelParams};
use crate::dynamics::pca::PcaKernel;
use crate::dynamics::Dynamics;
use crate::error::{invalid, Result};
use crate::lattice::{Shape, SpinConfig, TorusGeometry};
use crate::measure::ExactMeasure;
use crate::potential::{gibbs_measure, Potential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub offsets: Vec<Vec<i64>>,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Ising {
        beta: f64,
        #[serde(default)]
        h: f64,
    },
    Terms { terms: Vec<TermSpec> },
}

impl PotentialSpec {
    pub fn build(&self, d: usize, q: usize) -> Result<Potential> {
        match self {
            PotentialSpec::Zero => Ok(Potential::zero(d, q)),
            PotentialSpec::Ising { beta, h } => {
                if q != 2 {
                    return Err(invalid("the ising preset needs q = 2"));
                }
                Ok(Potential::ising(d, *beta, *h))
            }
            PotentialSpec::Terms { terms } => {
                let mut phi = Potential::zero(d, q);
                for t in terms {
                    phi.add_term(t.offsets.clone(), t.table.clone())?;
                }
                Ok(phi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTermSpec {
    pub update: Vec<Vec<i64>>,
    pub support: Vec<Vec<i64>>,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DynamicsSpec {
    /// Heat-bath rates for the configured potential.
    Glauber,
    InfTempFlip {
        #[serde(default)]
        rate: Option<f64>,
    },
    PcaMajorityEps { eps: f64 },
    #[serde(rename = "site-jump-M")]
    SiteJump { matrix: Vec<Vec<f64>> },
    CustomIps { terms: Vec<RateTermSpec> },
    CustomPca { neighborhood: Vec<Vec<i64>>, table: Vec<f64> },
}

impl DynamicsSpec {
    pub fn build(&self, d: usize, q: usize, phi: &Potential) -> Result<Dynamics> {
        let mut p = ModelParams { d, q, potential: Some(phi), ..Default::default() };
        let name = match self {
            DynamicsSpec::Glauber => "glauber",
            DynamicsSpec::InfTempFlip { rate } => {
                p.rate = *rate;
                "inf-temp-flip"
            }
            DynamicsSpec::PcaMajorityEps { eps } => {
                if q != 2 {
                    return Err(invalid("pca-majority-eps needs q = 2"));
                }
                p.eps = Some(*eps);
                "pca-majority-eps"
            }
            DynamicsSpec::SiteJump { matrix } => {
                if matrix.len() != q {
                    return Err(invalid("site-jump matrix must be q x q"));
                }
                p.matrix = Some(matrix.clone());
                "site-jump-M"
            }
            DynamicsSpec::CustomIps { terms } => {
                let mut r = IpsRates::new(d, q);
                for t in terms {
                    r.add_term(t.update.clone(), t.support.clone(), t.table.clone())?;
                }
                return Ok(Dynamics::Ips(r));
            }
            DynamicsSpec::CustomPca { neighborhood, table } => {
                return Ok(Dynamics::Pca(PcaKernel::new(q, Shape::new(d, neighborhood.clone())?, table.clone())?));
            }
        };
        builtin_model(name, &p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Either a full configuration or a constant state.
    PointMass {
        #[serde(default)]
        config: Option<Vec<u8>>,
        #[serde(default)]
        state: Option<u8>,
    },
    Product { p: Vec<f64> },
    /// Torus Gibbs measure; the configured potential when omitted.
    Gibbs {
        #[serde(default)]
        potential: Option<PotentialSpec>,
    },
    Table { probs: Vec<f64> },
}

impl InitialSpec {
    pub fn build(&self, geom: &TorusGeometry, phi: &Potential) -> Result<ExactMeasure> {
        match self {
            InitialSpec::PointMass { .. } => ExactMeasure::point_mass(geom, &self.point_config(geom)?.expect("point mass")),
            InitialSpec::Product { p } => ExactMeasure::product(geom, p),
            InitialSpec::Gibbs { potential } => match potential {
                Some(spec) => gibbs_measure(&spec.build(geom.d(), geom.q())?, geom),
                None => gibbs_measure(phi, geom),
            },
            InitialSpec::Table { probs } => ExactMeasure::new(geom.clone(), probs.clone()),
        }
    }

    /// The starting configuration of a point mass, `None` for other kinds.
    pub fn point_config(&self, geom: &TorusGeometry) -> Result<Option<SpinConfig>> {
        match self {
            InitialSpec::PointMass { config: Some(c), state: None } => Ok(Some(SpinConfig::new(geom, c.clone())?)),
            InitialSpec::PointMass { config: None, state } => {
                Ok(Some(SpinConfig::uniform_state(geom, state.unwrap_or(0))?))
            }
            InitialSpec::PointMass { .. } => Err(invalid("point-mass takes either config or state")),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub chains: usize,
    #[serde(default)]
    pub dump_events: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: TorusGeometry,
    pub potential: PotentialSpec,
    pub dynamics: DynamicsSpec,
    pub initial: InitialSpec,
    /// Reference measure, as a torus Gibbs potential; the configured potential when omitted.
    #[serde(default)]
    pub reference: Option<PotentialSpec>,
    pub times: Vec<f64>,
    /// Box side lengths, one list per volume.
    pub volumes: Vec<Vec<usize>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloSpec>,
    #[serde(default)]
    pub output: Option<String>,
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub potential: Potential,
    pub dynamics: Dynamics,
    pub initial: ExactMeasure,
    pub reference: ExactMeasure,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds every object and checks caps and schedules.
    pub fn prepare(&self) -> Result<Experiment> {
        let geom = &self.geometry;
        geom.state_count()?;
        let (d, q) = (geom.d(), geom.q());
        let potential = self.potential.build(d, q)?;
        potential.check_geometry(geom)?;
        let dynamics = self.dynamics.build(d, q, &potential)?;
        if self.times.is_empty() {
            return Err(invalid("time grid is empty"));
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("time grid must be finite, nonnegative and non-decreasing"));
        }
        if dynamics.is_discrete() && self.times.iter().any(|t| t.fract() != 0.0) {
            return Err(invalid("PCA time grids must be integers"));
        }
        if self.volumes.is_empty() {
            return Err(invalid("volume schedule is empty"));
        }
        for v in &self.volumes {
            if v.is_empty() || v.len() > d || v.iter().zip(geom.sides()).any(|(&l, &side)| l == 0 || l > side) {
                return Err(invalid(format!("volume {v:?} does not fit the torus")));
            }
        }
        if let Some(mc) = &self.monte_carlo {
            if self.seed.is_none() {
                return Err(invalid("monte_carlo runs need a seed"));
            }
            if mc.chains == 0 {
                return Err(invalid("monte_carlo.chains must be positive"));
            }
            if self.initial.point_config(geom)?.is_none() {
                return Err(invalid("monte_carlo runs start from a point mass"));
            }
        }
        let initial = self.initial.build(geom, &potential)?;
        let reference = match &self.reference {
            Some(spec) => gibbs_measure(&spec.build(d, q)?, geom)?,
            None => gibbs_measure(&potential, geom)?,
        };
        Ok(Experiment { config: self.clone(), potential, dynamics, initial, reference })
    }
}
