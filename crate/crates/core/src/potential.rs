//! Finite-range translation-invariant potentials.
//!
//! A [`Potential`] holds one term per translation class of interaction sets.
//! Each class is stored through its anchored representative: the shape is
//! shifted so its lexicographically smallest offset is the origin. Sums over
//! "all sets `A ∋ 0`" therefore visit every re-centering of every stored term.
//!
//! Spins for the Ising preset are `+1` for state 0 ("up") and `-1` for state 1.

use crate::error::{invalid, Result};
use crate::lattice::{local_index, Shape, SpinConfig, TorusGeometry};
use crate::measure::{CylinderMeasure, ExactMeasure};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTerm {
    shape: Shape,
    /// Values on the `q^{|A|}` assignments of `shape`, first offset least significant.
    table: Vec<f64>,
}

impl PotentialTerm {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn sup(&self) -> f64 {
        self.table.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    d: usize,
    q: usize,
    terms: Vec<PotentialTerm>,
}

/// Spin value `+1/-1` of an Ising state.
pub fn ising_spin(state: usize) -> f64 {
    1.0 - 2.0 * state as f64
}

impl Potential {
    pub fn zero(d: usize, q: usize) -> Self {
        Potential { d, q, terms: vec![] }
    }

    /// Nearest-neighbour Ising potential `Φ_{i,j} = -β σ_i σ_j`, `Φ_{i} = -h σ_i`.
    pub fn ising(d: usize, beta: f64, h: f64) -> Self {
        let mut phi = Potential::zero(d, 2);
        for k in 0..d {
            let mut e = vec![0; d];
            e[k] = 1;
            let table = (0..4)
                .map(|local| -beta * ising_spin(local % 2) * ising_spin(local / 2))
                .collect();
            phi.add_term(vec![vec![0; d], e], table).expect("valid ising term");
        }
        if h != 0.0 {
            let table = (0..2).map(|s| -h * ising_spin(s)).collect();
            phi.add_term(vec![vec![0; d]], table).expect("valid field term");
        }
        phi
    }

    /// Adds one translation class. `table` is indexed by the assignment on
    /// `offsets` in the order given (first offset least significant). The
    /// offsets need not contain the origin; the class is re-anchored.
    pub fn add_term(&mut self, offsets: Vec<Vec<i64>>, table: Vec<f64>) -> Result<()> {
        if offsets.is_empty() || offsets.iter().any(|o| o.len() != self.d) {
            return Err(invalid(format!("term offsets must be nonempty {}-vectors", self.d)));
        }
        let size = crate::lattice::checked_states(self.q, offsets.len())?;
        if table.len() != size {
            return Err(invalid(format!("term table needs {size} entries, got {}", table.len())));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(invalid("potential values must be finite"));
        }
        let mut sorted = offsets.clone();
        sorted.sort();
        let anchor = sorted[0].clone();
        let shifted: Vec<Vec<i64>> = offsets
            .iter()
            .map(|o| o.iter().zip(&anchor).map(|(a, b)| a - b).collect())
            .collect();
        let (shape, perm) = Shape::with_permutation(self.d, shifted)?;
        let q = self.q;
        let k = shape.len();
        let mut reordered = vec![0.0; size];
        for (given, &v) in table.iter().enumerate() {
            let mut rest = given;
            let mut sorted_idx = 0;
            let mut places = vec![0usize; k];
            let mut acc = 1;
            for p in places.iter_mut() {
                *p = acc;
                acc *= q;
            }
            for &pos in &perm {
                sorted_idx += (rest % q) * places[pos];
                rest /= q;
            }
            reordered[sorted_idx] = v;
        }
        match self.terms.iter_mut().find(|t| t.shape == shape) {
            Some(t) => t.table.iter_mut().zip(reordered).for_each(|(a, b)| *a += b),
            None => self.terms.push(PotentialTerm { shape, table: reordered }),
        }
        self.terms.sort_by(|a, b| a.shape.cmp(&b.shape));
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.sup() == 0.0)
    }

    /// Sup-norm interaction range over all anchored sets `A ∋ 0`.
    pub fn range(&self) -> usize {
        self.terms
            .iter()
            .map(|t| {
                (0..t.shape.len())
                    .flat_map(|p| t.shape.recentered(p))
                    .flat_map(|o| o.into_iter().map(|x| x.unsigned_abs() as usize))
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn sum(&self, other: &Potential) -> Result<Potential> {
        if (self.d, self.q) != (other.d, other.q) {
            return Err(invalid("potentials live on different spaces"));
        }
        let mut out = self.clone();
        for t in &other.terms {
            out.add_term(t.shape.offsets().to_vec(), t.table.clone())?;
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Potential {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.table.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    pub(crate) fn check_geometry(&self, geom: &TorusGeometry) -> Result<()> {
        if geom.d() != self.d || geom.q() != self.q {
            return Err(invalid(format!(
                "potential is for d={}, q={} but torus has d={}, q={}",
                self.d,
                self.q,
                geom.d(),
                geom.q()
            )));
        }
        for t in &self.terms {
            t.shape.check_fits(geom)?;
        }
        Ok(())
    }
}

/// `‖Φ‖ = Σ_{A∋0} ‖Φ_A‖_∞`: each class contributes once per site it covers.
pub fn norm_phi(phi: &Potential) -> f64 {
    phi.terms.iter().map(|t| t.shape.len() as f64 * t.sup()).sum()
}

/// `‖Φ‖_0 = Σ_{A∋0} |A|^{-1} ‖Φ_A‖_∞`.
pub fn norm_phi_zero(phi: &Potential) -> f64 {
    phi.terms.iter().map(|t| t.sup()).sum()
}

/// Every translate of every term on a torus, indexed by the sites it touches.
pub(crate) struct PotentialLayout<'a> {
    phi: &'a Potential,
    q: usize,
    pub(crate) places: Vec<usize>,
    /// (term, sites) for each translate `A + i`.
    translates: Vec<(usize, Vec<usize>)>,
    by_site: Vec<Vec<usize>>,
}

impl<'a> PotentialLayout<'a> {
    pub(crate) fn new(phi: &'a Potential, geom: &TorusGeometry) -> Result<Self> {
        phi.check_geometry(geom)?;
        let mut translates = Vec::new();
        let mut by_site = vec![Vec::new(); geom.volume()];
        for (ti, t) in phi.terms.iter().enumerate() {
            for base in 0..geom.volume() {
                let sites = t.shape.sites_at(geom, base);
                let k = translates.len();
                let mut touched = sites.clone();
                touched.sort_unstable();
                touched.dedup();
                for &s in &touched {
                    by_site[s].push(k);
                }
                translates.push((ti, sites));
            }
        }
        Ok(PotentialLayout { phi, q: geom.q(), places: geom.place_values(), translates, by_site })
    }

    #[inline]
    fn eval(&self, k: usize, idx: usize) -> f64 {
        let (ti, sites) = &self.translates[k];
        self.phi.terms[*ti].table[local_index(idx, sites, &self.places, self.q)]
    }

    /// Translates meeting `region`, sorted.
    pub(crate) fn meeting(&self, region: &[usize]) -> Vec<usize> {
        let mut ks: Vec<usize> = region.iter().flat_map(|&s| self.by_site[s].iter().copied()).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// `Σ_k Φ(translate k)` over a precomputed translate list.
    #[inline]
    pub(crate) fn energy_of(&self, ks: &[usize], idx: usize) -> f64 {
        ks.iter().map(|&k| self.eval(k, idx)).sum()
    }

    /// Periodic Hamiltonian `H^{per}` at configuration index `idx`.
    pub(crate) fn periodic_energy(&self, idx: usize) -> f64 {
        (0..self.translates.len()).map(|k| self.eval(k, idx)).sum()
    }
}

/// Boundary condition for [`hamiltonian`].
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// `interior` is a full torus configuration read periodically.
    Periodic,
    /// States outside the volume are taken from this configuration.
    Fixed(&'a SpinConfig),
}

/// `H_Λ(ω_Λ ξ_{Λ^c})`: sum of `Φ_{A+i}` over translates meeting `volume`.
/// With [`Boundary::Periodic`] and the whole torus as volume this is `H^{per}`.
pub fn hamiltonian(
    phi: &Potential,
    geom: &TorusGeometry,
    volume: &[usize],
    interior: &SpinConfig,
    boundary: Boundary<'_>,
) -> Result<f64> {
    phi.check_geometry(geom)?;
    if interior.len() != geom.volume() {
        return Err(invalid("interior must be given as a full torus configuration"));
    }
    let cfg = match boundary {
        Boundary::Periodic => interior.clone(),
        Boundary::Fixed(b) => {
            let values: Vec<usize> = volume.iter().map(|&s| interior.get(s)).collect();
            crate::lattice::patch(geom, b, volume, &values)?
        }
    };
    let mut in_volume = vec![false; geom.volume()];
    for &s in volume {
        in_volume[s] = true;
    }
    let q = geom.q();
    let mut h = 0.0;
    for t in &phi.terms {
        for base in 0..geom.volume() {
            let sites = t.shape.sites_at(geom, base);
            if sites.iter().any(|&s| in_volume[s]) {
                let local = sites.iter().rev().fold(0, |acc, &s| acc * q + cfg.get(s));
                h += t.table[local];
            }
        }
    }
    Ok(h)
}

/// `γ_Δ^Φ(ξ_Δ | η) ∝ exp(-H_Δ(ξ_Δ η_{Δ^c}))`.
pub fn specification(
    phi: &Potential,
    geom: &TorusGeometry,
    region: &[usize],
    boundary: &SpinConfig,
) -> Result<CylinderMeasure> {
    let layout = PotentialLayout::new(phi, geom)?;
    let offsets = crate::measure::block_offsets(region, &layout.places, geom.q())?;
    let idx = crate::lattice::ConfigIndex::encode(geom, boundary)?.0;
    let stem = idx - crate::measure::block_local(idx, region, &layout.places, geom.q());
    Ok(CylinderMeasure {
        sites: region.to_vec(),
        q: geom.q(),
        probs: local_specification(&layout, region, stem, &offsets),
    })
}

/// Specification probabilities on `region` for boundary `stem` (region digits zeroed).
pub(crate) fn local_specification(
    layout: &PotentialLayout<'_>,
    region: &[usize],
    stem: usize,
    offsets: &[usize],
) -> Vec<f64> {
    let ks = layout.meeting(region);
    let energies: Vec<f64> = offsets.iter().map(|&o| layout.energy_of(&ks, stem + o)).collect();
    softmin(&energies)
}

/// `exp(-E_k) / Σ exp(-E_j)`, computed stably.
pub(crate) fn softmin(energies: &[f64]) -> Vec<f64> {
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - min)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Periodic energies of every configuration.
pub(crate) fn periodic_energies(phi: &Potential, geom: &TorusGeometry) -> Result<Vec<f64>> {
    let n = geom.state_count()?;
    let layout = PotentialLayout::new(phi, geom)?;
    Ok(par::map_range(n, |idx| layout.periodic_energy(idx)))
}

fn log_sum_exp_neg(energies: &[f64]) -> f64 {
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let s = par::sum_range(energies.len(), |i| (-(energies[i] - min)).exp());
    -min + s.ln()
}

/// Torus Gibbs measure `μ_Λ(ω) ∝ exp(-H^{per}(ω))`.
pub fn gibbs_measure(phi: &Potential, geom: &TorusGeometry) -> Result<ExactMeasure> {
    let e = periodic_energies(phi, geom)?;
    let lz = log_sum_exp_neg(&e);
    let probs = par::map_range(e.len(), |i| (-e[i] - lz).exp());
    ExactMeasure::from_weights(geom.clone(), probs)
}

/// Finite-volume pressure `|Λ|^{-1} log Σ_ω exp(-H^{per}(ω))`.
pub fn pressure(phi: &Potential, geom: &TorusGeometry) -> Result<f64> {
    let e = periodic_energies(phi, geom)?;
    Ok(log_sum_exp_neg(&e) / geom.volume() as f64)
}

/// Anchored energy density `f_Φ(η) = Σ_{A∋site} |A|^{-1} Φ_A(η)` at a site.
pub(crate) fn energy_density_at(
    phi: &Potential,
    geom: &TorusGeometry,
    places: &[usize],
    site: usize,
    idx: usize,
) -> f64 {
    let q = geom.q();
    let mut f = 0.0;
    for t in &phi.terms {
        let w = 1.0 / t.shape.len() as f64;
        for pos in 0..t.shape.len() {
            // the set whose `pos`-th offset sits at `site`
            let base = geom.shift(site, &t.shape.offsets()[pos].iter().map(|x| -x).collect::<Vec<_>>());
            let sites = t.shape.sites_at(geom, base);
            f += w * t.table[local_index(idx, &sites, places, q)];
        }
    }
    f
}

/// Specific energy `⟨ν, Φ⟩ = ν(f_Φ)`, averaged over the sites of the torus
/// (identical to the origin value for translation-invariant `ν`).
pub fn specific_energy(nu: &ExactMeasure, phi: &Potential) -> Result<f64> {
    let geom = nu.geom();
    phi.check_geometry(geom)?;
    let places = geom.place_values();
    let n = geom.volume();
    let probs = nu.probs();
    let total = par::sum_range(probs.len(), |idx| {
        let p = probs[idx];
        if p == 0.0 {
            return 0.0;
        }
        p * (0..n).map(|s| energy_density_at(phi, geom, &places, s, idx)).sum::<f64>()
    });
    Ok(total / n as f64)
}

/// Rejects a potential whose range does not leave room on the torus.
pub fn check_range(phi: &Potential, geom: &TorusGeometry) -> Result<()> {
    phi.check_geometry(geom)
}
