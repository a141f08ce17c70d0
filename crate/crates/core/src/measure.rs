//! Probability measures on torus configuration spaces.
//!
//! [`ExactMeasure`] stores the full probability vector over all `q^{|Λ|}`
//! configurations and is the exact oracle representation used throughout the
//! crate. [`SampleEnsemble`] is its Monte Carlo surrogate. Conditionals on
//! events of zero probability are a hard error; `0 log 0 = 0` everywhere.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{
    all_translations, checked_states, digit, local_index, translation_permutation, ConfigIndex,
    SpinConfig, TorusGeometry,
};
use crate::par;

/// Normalization tolerance accepted by constructors.
pub const NORM_TOL: f64 = 1e-10;

/// Partial assignment of states to a list of distinct sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub sites: Vec<usize>,
    pub values: Vec<usize>,
}

impl Assignment {
    pub fn new(sites: Vec<usize>, values: Vec<usize>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(invalid("assignment sites and values differ in length"));
        }
        let mut s = sites.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("assignment has repeated sites"));
        }
        Ok(Assignment { sites, values })
    }

    pub fn empty() -> Self {
        Assignment { sites: vec![], values: vec![] }
    }

    /// Restriction of a configuration to `sites`.
    pub fn of(cfg: &SpinConfig, sites: &[usize]) -> Self {
        Assignment { sites: sites.to_vec(), values: sites.iter().map(|&s| cfg.get(s)).collect() }
    }

    fn matches(&self, idx: usize, places: &[usize], q: usize) -> bool {
        self.sites.iter().zip(&self.values).all(|(&s, &v)| digit(idx, places[s], q) == v)
    }
}

/// Distribution of the states on a finite list of sites; local index has
/// the first listed site least significant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderMeasure {
    pub sites: Vec<usize>,
    pub q: usize,
    pub probs: Vec<f64>,
}

impl CylinderMeasure {
    pub fn prob(&self, values: &[usize]) -> f64 {
        let idx = values.iter().rev().fold(0, |acc, &v| acc * self.q + v);
        self.probs[idx]
    }

    pub fn values_of(&self, local: usize) -> Vec<usize> {
        let mut rest = local;
        self.sites
            .iter()
            .map(|_| {
                let v = rest % self.q;
                rest /= self.q;
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMeasure {
    geom: TorusGeometry,
    probs: Vec<f64>,
}

impl ExactMeasure {
    /// Validates nonnegativity and normalization (within [`NORM_TOL`]), then
    /// renormalizes exactly.
    pub fn new(geom: TorusGeometry, probs: Vec<f64>) -> Result<Self> {
        let n = geom.state_count()?;
        if probs.len() != n {
            return Err(invalid(format!("expected {n} probabilities, got {}", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ExactMeasure { geom, probs: probs.into_iter().map(|p| p / total).collect() })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(geom: TorusGeometry, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid("weights must have positive finite total"));
        }
        Self::new(geom, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(geom: &TorusGeometry) -> Result<Self> {
        let n = geom.state_count()?;
        Ok(ExactMeasure { geom: geom.clone(), probs: vec![1.0 / n as f64; n] })
    }

    pub fn point_mass(geom: &TorusGeometry, cfg: &SpinConfig) -> Result<Self> {
        let n = geom.state_count()?;
        let mut probs = vec![0.0; n];
        probs[ConfigIndex::encode(geom, cfg)?.0] = 1.0;
        Ok(ExactMeasure { geom: geom.clone(), probs })
    }

    /// I.i.d. product measure with single-site law `site_law`.
    pub fn product(geom: &TorusGeometry, site_law: &[f64]) -> Result<Self> {
        if site_law.len() != geom.q() {
            return Err(invalid("site law must have q entries"));
        }
        Self::product_sites(geom, &vec![site_law.to_vec(); geom.volume()])
    }

    /// Independent sites with per-site laws.
    pub fn product_sites(geom: &TorusGeometry, laws: &[Vec<f64>]) -> Result<Self> {
        geom.state_count()?;
        let mut probs = vec![1.0];
        for law in laws {
            probs = expand_product(&probs, law);
        }
        Self::new(geom.clone(), probs)
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, cfg: &SpinConfig) -> Result<f64> {
        Ok(self.probs[ConfigIndex::encode(&self.geom, cfg)?.0])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn translate(&self, v: &[i64]) -> Result<Self> {
        let perm = translation_permutation(&self.geom, v)?;
        let mut out = vec![0.0; self.probs.len()];
        for (i, &p) in self.probs.iter().enumerate() {
            out[perm[i]] = p;
        }
        Ok(ExactMeasure { geom: self.geom.clone(), probs: out })
    }

    /// Average over all torus translations; the result is translation invariant.
    pub fn symmetrized(&self) -> Result<Self> {
        let shifts = all_translations(&self.geom);
        let mut out = vec![0.0; self.probs.len()];
        for v in &shifts {
            let perm = translation_permutation(&self.geom, v)?;
            for (i, &p) in self.probs.iter().enumerate() {
                out[perm[i]] += p;
            }
        }
        let k = shifts.len() as f64;
        Ok(ExactMeasure { geom: self.geom.clone(), probs: out.into_iter().map(|p| p / k).collect() })
    }

    pub fn is_translation_invariant(&self, tol: f64) -> Result<bool> {
        for v in all_translations(&self.geom) {
            let t = self.translate(&v)?;
            if self.tv_distance(&t)? > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn tv_distance(&self, other: &ExactMeasure) -> Result<f64> {
        self.same_space(other)?;
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    pub(crate) fn same_space(&self, other: &ExactMeasure) -> Result<()> {
        if self.geom != other.geom {
            return Err(invalid("measures live on different geometries"));
        }
        Ok(())
    }

    /// Exact marginal on `sites`.
    pub fn marginal(&self, sites: &[usize]) -> Result<CylinderMeasure> {
        let q = self.geom.q();
        let m = checked_states(q, sites.len())?;
        if sites.iter().any(|&s| s >= self.geom.volume()) {
            return Err(invalid("marginal site outside torus"));
        }
        let places = self.geom.place_values();
        let mut probs = vec![0.0; m];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                probs[local_index(idx, sites, &places, q)] += p;
            }
        }
        Ok(CylinderMeasure { sites: sites.to_vec(), q, probs })
    }

    pub fn cylinder_prob(&self, a: &Assignment) -> f64 {
        let places = self.geom.place_values();
        let q = self.geom.q();
        self.probs
            .iter()
            .enumerate()
            .filter(|(idx, _)| a.matches(*idx, &places, q))
            .map(|(_, p)| p)
            .sum()
    }

    /// `ν(ξ_Δ | η_S) = ν(ξ_Δ ∧ η_S) / ν(η_S)`.
    pub fn conditional(&self, xi: &Assignment, eta: &Assignment) -> Result<f64> {
        if xi.sites.iter().any(|s| eta.sites.contains(s)) {
            return Err(invalid("conditioned and conditioning sites overlap"));
        }
        let places = self.geom.place_values();
        let q = self.geom.q();
        let (mut joint, mut base) = (0.0, 0.0);
        for (idx, &p) in self.probs.iter().enumerate() {
            if p > 0.0 && eta.matches(idx, &places, q) {
                base += p;
                if xi.matches(idx, &places, q) {
                    joint += p;
                }
            }
        }
        if base <= 0.0 {
            return Err(Error::ZeroConditioning);
        }
        Ok(joint / base)
    }

    /// `ν(η_s = a | η_{Λ∖s})` evaluated at configuration index `idx`.
    /// `None` when the conditioning event is null.
    pub(crate) fn site_conditional(&self, idx: usize, place: usize, a: usize) -> Option<f64> {
        let q = self.geom.q();
        let cur = digit(idx, place, q);
        let stem = idx - cur * place;
        let z: f64 = (0..q).map(|b| self.probs[stem + b * place]).sum();
        (z > 0.0).then(|| self.probs[stem + a * place] / z)
    }

    /// Single-site conditional of a configuration.
    pub fn single_site_conditional(&self, cfg: &SpinConfig, site: usize, a: usize) -> Result<f64> {
        let idx = ConfigIndex::encode(&self.geom, cfg)?.0;
        let place = self.geom.place_values()[site];
        self.site_conditional(idx, place, a).ok_or(Error::ZeroConditioning)
    }

    /// Smallest single-site conditional probability over the support.
    pub fn nonnullness(&self) -> NonNullReport {
        let q = self.geom.q();
        let n = self.geom.volume();
        let places = self.geom.place_values();
        // negate so the deterministic argmax finds the minimum
        let best = par::argmax_range(self.probs.len(), |idx| {
            if self.probs[idx] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let mut worst = f64::INFINITY;
            for &place in places.iter().take(n) {
                let cur = digit(idx, place, q);
                let stem = idx - cur * place;
                let z: f64 = (0..q).map(|b| self.probs[stem + b * place]).sum();
                for b in 0..q {
                    worst = worst.min(self.probs[stem + b * place] / z);
                }
            }
            -worst
        });
        let (idx, neg) = best.expect("measure has nonempty support");
        // recover the witness site and value
        let mut witness = (0, 0);
        let mut delta = f64::INFINITY;
        for (s, &place) in places.iter().enumerate().take(n) {
            for a in 0..q {
                if let Some(c) = self.site_conditional(idx, place, a) {
                    if c < delta {
                        delta = c;
                        witness = (s, a);
                    }
                }
            }
        }
        debug_assert!((delta + neg).abs() < 1e-15);
        NonNullReport {
            delta,
            config: ConfigIndex(idx).decode(&self.geom),
            site: witness.0,
            value: witness.1,
        }
    }

    /// Smallest block conditional `ν(ξ_Δ | η_{Λ∖Δ})` over supported boundaries
    /// and all `ξ_Δ`.
    pub fn min_block_conditional(&self, block: &[usize]) -> Result<f64> {
        let q = self.geom.q();
        let places = self.geom.place_values();
        let offsets = block_offsets(block, &places, q)?;
        let mut worst = f64::INFINITY;
        for (idx, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let stem = idx - block_local(idx, block, &places, q);
            let z: f64 = offsets.iter().map(|&o| self.probs[stem + o]).sum();
            for &o in &offsets {
                worst = worst.min(self.probs[stem + o] / z);
            }
        }
        Ok(worst)
    }

    /// Checks `ν(ξ_Δ | η_{Λ∖Δ}) ≥ δ^{|Δ|}` for the non-nullness constant δ.
    pub fn chain_rule_bound_check(&self, block: &[usize]) -> Result<bool> {
        let report = self.nonnullness();
        if report.delta <= 0.0 {
            return Err(Error::NonNullViolation { site: report.site });
        }
        let bound = report.delta.powi(block.len() as i32);
        Ok(self.min_block_conditional(block)? >= bound * (1.0 - 1e-12))
    }
}

/// Offsets in configuration-index space of every assignment on `block`,
/// listed in local-index order.
pub(crate) fn block_offsets(block: &[usize], places: &[usize], q: usize) -> Result<Vec<usize>> {
    let m = checked_states(q, block.len())?;
    Ok((0..m)
        .map(|mut local| {
            block
                .iter()
                .map(|&s| {
                    let v = local % q;
                    local /= q;
                    v * places[s]
                })
                .sum()
        })
        .collect())
}

/// Offset contributed by the block digits of `idx`.
#[inline]
pub(crate) fn block_local(
    idx: usize,
    block: &[usize],
    places: &[usize],
    q: usize,
) -> usize {
    block.iter().map(|&s| digit(idx, places[s], q) * places[s]).sum()
}

pub(crate) fn expand_product(probs: &[f64], law: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(probs.len() * law.len());
    for &w in law {
        out.extend(probs.iter().map(|p| p * w));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonNullReport {
    pub delta: f64,
    pub config: SpinConfig,
    pub site: usize,
    pub value: usize,
}

/// Monte Carlo samples of torus configurations, optionally weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    pub geom: TorusGeometry,
    pub samples: Vec<SpinConfig>,
    pub weights: Option<Vec<f64>>,
}

/// Minimum cylinder count below which empirical conditionals are not reported.
pub const DEFAULT_MIN_COUNT: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMarginal {
    pub sites: Vec<usize>,
    pub probs: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub effective_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EmpiricalConditional {
    Value { prob: f64, std_error: f64, count: usize },
    InsufficientData { count: usize },
}

pub fn empirical_measure(geom: &TorusGeometry, samples: Vec<SpinConfig>) -> Result<SampleEnsemble> {
    SampleEnsemble::new(geom.clone(), samples, None)
}

impl SampleEnsemble {
    pub fn new(
        geom: TorusGeometry,
        samples: Vec<SpinConfig>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if samples.iter().any(|s| s.len() != geom.volume()) {
            return Err(invalid("sample does not match the torus"));
        }
        if let Some(w) = &weights {
            if w.len() != samples.len() {
                return Err(invalid("weight count differs from sample count"));
            }
            if w.iter().any(|x| !(*x >= 0.0)) {
                return Err(invalid("weights must be nonnegative"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > NORM_TOL {
                return Err(invalid("weights must sum to 1"));
            }
        }
        Ok(SampleEnsemble { geom, samples, weights })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.samples.len() as f64,
        }
    }

    /// Kish effective sample size `1 / Σ w_i^2`.
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            Some(w) => 1.0 / w.iter().map(|x| x * x).sum::<f64>(),
            None => self.samples.len() as f64,
        }
    }

    /// Cylinder frequencies on `sites` with binomial standard errors.
    pub fn estimate_marginal(&self, sites: &[usize]) -> Result<EmpiricalMarginal> {
        let q = self.geom.q();
        let m = checked_states(q, sites.len())?;
        let mut probs = vec![0.0; m];
        for (i, s) in self.samples.iter().enumerate() {
            let local = sites.iter().rev().fold(0, |acc, &site| acc * q + s.get(site));
            probs[local] += self.weight(i);
        }
        let n = self.effective_size();
        let std_errors = probs.iter().map(|p| (p * (1.0 - p) / n).max(0.0).sqrt()).collect();
        Ok(EmpiricalMarginal { sites: sites.to_vec(), probs, std_errors, effective_size: n })
    }

    /// Frequency ratio estimate of `ν(ξ | η)`; reports insufficient data when
    /// fewer than `min_count` samples fall in the conditioning cylinder.
    pub fn estimate_conditional(
        &self,
        xi: &Assignment,
        eta: &Assignment,
        min_count: usize,
    ) -> EmpiricalConditional {
        let hit = |s: &SpinConfig, a: &Assignment| {
            a.sites.iter().zip(&a.values).all(|(&site, &v)| s.get(site) == v)
        };
        let (mut count, mut base, mut joint) = (0usize, 0.0, 0.0);
        for (i, s) in self.samples.iter().enumerate() {
            if hit(s, eta) {
                count += 1;
                base += self.weight(i);
                if hit(s, xi) {
                    joint += self.weight(i);
                }
            }
        }
        if count < min_count || base <= 0.0 {
            return EmpiricalConditional::InsufficientData { count };
        }
        let prob = joint / base;
        let std_error = (prob * (1.0 - prob) / count as f64).sqrt();
        EmpiricalConditional::Value { prob, std_error, count }
    }
}

/// Writes a marginal report as CSV rows `values..., prob` (plus `std_error`
/// for empirical marginals).
pub fn write_marginal_csv<W: std::io::Write>(m: &CylinderMeasure, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = m.sites.iter().map(|s| format!("site_{s}")).collect();
    header.push("prob".into());
    out.write_record(&header)?;
    for (local, p) in m.probs.iter().enumerate() {
        let mut row: Vec<String> = m.values_of(local).iter().map(|v| v.to_string()).collect();
        row.push(p.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_empirical_csv<W: std::io::Write>(m: &EmpiricalMarginal, q: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = m.sites.iter().map(|s| format!("site_{s}")).collect();
    header.extend(["prob".into(), "std_error".into()]);
    out.write_record(&header)?;
    for (local, (p, se)) in m.probs.iter().zip(&m.std_errors).enumerate() {
        let mut rest = local;
        let mut row: Vec<String> = m
            .sites
            .iter()
            .map(|_| {
                let v = rest % q;
                rest /= q;
                v.to_string()
            })
            .collect();
        row.push(p.to_string());
        row.push(se.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
