//! Strict probabilistic cellular automata: every site is resampled
//! independently and simultaneously from a rule that reads a finite
//! neighbourhood of the previous configuration.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::lattice::{checked_states, local_index, Shape, SpinConfig, TorusGeometry};
use crate::measure::ExactMeasure;
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaKernel {
    q: usize,
    neighborhood: Shape,
    /// `table[nbr * q + a] = P_i(a | neighbourhood assignment nbr)`.
    table: Vec<f64>,
}

impl PcaKernel {
    pub fn new(q: usize, neighborhood: Shape, table: Vec<f64>) -> Result<Self> {
        let rows = checked_states(q, neighborhood.len())?;
        if table.len() != rows * q {
            return Err(invalid(format!("PCA table needs {} entries, got {}", rows * q, table.len())));
        }
        for row in table.chunks(q) {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(invalid("PCA probabilities must be nonnegative"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("PCA rule row sums to {s}")));
            }
        }
        Ok(PcaKernel { q, neighborhood, table })
    }

    /// Builds the table from a rule on neighbourhood values (in shape order).
    pub fn from_fn(q: usize, neighborhood: Shape, rule: impl Fn(&[usize]) -> Vec<f64>) -> Result<Self> {
        let rows = checked_states(q, neighborhood.len())?;
        let mut table = Vec::with_capacity(rows * q);
        let mut vals = vec![0; neighborhood.len()];
        for r in 0..rows {
            let mut rest = r;
            for v in vals.iter_mut() {
                *v = rest % q;
                rest /= q;
            }
            let row = rule(&vals);
            if row.len() != q {
                return Err(invalid("PCA rule must return q probabilities"));
            }
            table.extend(row);
        }
        Self::new(q, neighborhood, table)
    }

    /// Every site keeps its state.
    pub fn identity(d: usize, q: usize) -> Self {
        Self::from_fn(q, Shape::origin(d), |v| {
            let mut row = vec![0.0; q];
            row[v[0]] = 1.0;
            row
        })
        .expect("identity kernel")
    }

    /// Every site is resampled uniformly.
    pub fn uniform(d: usize, q: usize) -> Self {
        Self::from_fn(q, Shape::origin(d), |_| vec![1.0 / q as f64; q]).expect("uniform kernel")
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn neighborhood(&self) -> &Shape {
        &self.neighborhood
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn rule(&self, nbr: usize) -> &[f64] {
        &self.table[nbr * self.q..(nbr + 1) * self.q]
    }

    fn check(&self, geom: &TorusGeometry) -> Result<Vec<Vec<usize>>> {
        if geom.q() != self.q || geom.d() != self.neighborhood.dim() {
            return Err(invalid("PCA kernel does not match the torus"));
        }
        self.neighborhood.check_fits(geom)?;
        Ok((0..geom.volume()).map(|i| self.neighborhood.sites_at(geom, i)).collect())
    }
}

/// Exact pushforward `(Pν)(η) = Σ_σ ν(σ) Π_i P_i(η_i | σ)`.
pub fn pca_pushforward(kernel: &PcaKernel, nu: &ExactMeasure) -> Result<ExactMeasure> {
    let geom = nu.geom();
    let nbrs = kernel.check(geom)?;
    let n = nu.len();
    let q = geom.q();
    let places = geom.place_values();
    let probs = nu.probs();
    let out = par::accumulate_range(n, n, |sigma, acc| {
        let w = probs[sigma];
        if w == 0.0 {
            return;
        }
        // product law over sites, site 0 least significant
        let mut cur = vec![w];
        let mut next = Vec::with_capacity(n);
        for sites in &nbrs {
            let law = kernel.rule(local_index(sigma, sites, &places, q));
            next.clear();
            for &p in law {
                next.extend(cur.iter().map(|c| c * p));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c;
        }
    });
    ExactMeasure::from_weights(geom.clone(), out)
}

/// One synchronous update of every site.
pub fn pca_step_sample<R: Rng + ?Sized>(
    kernel: &PcaKernel,
    geom: &TorusGeometry,
    sigma: &SpinConfig,
    rng: &mut R,
) -> Result<SpinConfig> {
    let nbrs = kernel.check(geom)?;
    let q = geom.q();
    let states = nbrs
        .iter()
        .map(|sites| {
            let nbr = sites.iter().rev().fold(0, |acc, &s| acc * q + sigma.get(s));
            sample_index(kernel.rule(nbr), rng) as u8
        })
        .collect();
    Ok(SpinConfig(states))
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    // rounding: fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
