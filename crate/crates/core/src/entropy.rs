//! Relative-entropy functionals on finite tori.
//!
//! All relative entropies are stored as nonnegative numbers (`+∞` when
//! absolute continuity fails); the negative `-h(ν|u)` terms that appear in
//! decompositions are formed at the call site. Per-site densities always
//! carry the volume they were computed on.
//!
//! The continuous-time loss is available through two independent routes:
//! [`continuous_loss_direct`] differentiates `h_Λ(P_t ν | μ)` through the
//! generator, while [`entropy_production_rep`] and [`pairing_l`] evaluate the
//! single-site conditional representation and the energy pairing jump by jump.

use serde::Serialize;

use crate::dynamics::ips::{build_generator, GeneratorMatrix, IpsRates};
use crate::dynamics::pca::{pca_pushforward, PcaKernel};
use crate::error::{invalid, Error, Result};
use crate::lattice::digit;
use crate::measure::{block_offsets, ExactMeasure};
use crate::par;
use crate::potential::{pressure, specific_energy, Potential, PotentialLayout};

/// `Σ p log(p / r)` with `0 log 0 = 0`; `+∞` if `p > 0 = r` somewhere.
pub fn kl_divergence(p: &[f64], r: &[f64]) -> f64 {
    let mut h = 0.0;
    for (&a, &b) in p.iter().zip(r) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            h += a * (a / b).ln();
        }
    }
    h.max(0.0)
}

/// `h_Λ(ν|μ) = Σ_{ω_Λ} ν(ω_Λ) log(ν(ω_Λ)/μ(ω_Λ))`.
pub fn local_relative_entropy(nu: &ExactMeasure, mu: &ExactMeasure, region: &[usize]) -> Result<f64> {
    nu.same_space(mu)?;
    if region.len() == nu.geom().volume() {
        let mut sorted = region.to_vec();
        sorted.sort_unstable();
        if sorted.iter().enumerate().all(|(i, &s)| i == s) {
            return Ok(kl_divergence(nu.probs(), mu.probs()));
        }
    }
    Ok(kl_divergence(&nu.marginal(region)?.probs, &mu.marginal(region)?.probs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyDensityEstimate {
    /// `(|Λ_k|, h_{Λ_k} / |Λ_k|)`.
    pub values: Vec<(usize, f64)>,
    /// Extrapolated value and the method that produced it.
    pub extrapolation: Option<(f64, String)>,
}

/// Per-site relative entropies over strictly growing volumes. With
/// `extrapolate`, the last two points are Richardson-extrapolated in `1/L`
/// where `L = |Λ|^{1/d}`.
pub fn entropy_density(
    nu: &ExactMeasure,
    mu: &ExactMeasure,
    schedule: &[Vec<usize>],
    extrapolate: bool,
) -> Result<EntropyDensityEstimate> {
    if schedule.windows(2).any(|w| w[1].len() <= w[0].len()) {
        return Err(invalid("volume schedule must be strictly increasing"));
    }
    let values = par::map_slice(schedule, |region| {
        local_relative_entropy(nu, mu, region).map(|h| (region.len(), h / region.len() as f64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let extrapolation = if extrapolate && values.len() >= 2 {
        let d = nu.geom().d() as f64;
        let (n1, v1) = values[values.len() - 2];
        let (n2, v2) = values[values.len() - 1];
        let (l1, l2) = ((n1 as f64).powf(1.0 / d), (n2 as f64).powf(1.0 / d));
        Some(((l2 * v2 - l1 * v1) / (l2 - l1), "richardson-1/L".to_string()))
    } else {
        None
    };
    Ok(EntropyDensityEstimate { values, extrapolation })
}

fn difference(after: f64, before: f64) -> Result<f64> {
    if after.is_infinite() && before.is_infinite() {
        return Err(Error::PositivityError("both relative entropies are infinite".into()));
    }
    Ok(after - before)
}

/// `g_P = (h_Λ(Pν|μ) - h_Λ(ν|μ)) / |Λ|` with the exact torus pushforward.
pub fn discrete_loss_gp(
    kernel: &PcaKernel,
    nu: &ExactMeasure,
    mu: &ExactMeasure,
    region: &[usize],
) -> Result<f64> {
    let pushed = pca_pushforward(kernel, nu)?;
    let after = local_relative_entropy(&pushed, mu, region)?;
    let before = local_relative_entropy(nu, mu, region)?;
    Ok(difference(after, before)? / region.len() as f64)
}

/// `|Λ|^{-1} d/dt h_Λ(P_t ν | μ)` at `t = 0`:
/// `|Λ|^{-1} Σ_{ω_Λ} ν(L1_{ω_Λ}) [log ν(ω_Λ) - log μ(ω_Λ)]`.
pub fn continuous_loss_direct(
    rates: &IpsRates,
    nu: &ExactMeasure,
    mu: &ExactMeasure,
    region: &[usize],
) -> Result<f64> {
    let gen = build_generator(rates, nu.geom())?;
    continuous_loss_direct_with(&gen, nu, mu, region)
}

/// As [`continuous_loss_direct`] with a prebuilt generator.
pub fn continuous_loss_direct_with(
    gen: &GeneratorMatrix,
    nu: &ExactMeasure,
    mu: &ExactMeasure,
    region: &[usize],
) -> Result<f64> {
    nu.same_space(mu)?;
    let flow = gen.left_mul(nu.probs());
    let geom = nu.geom();
    let q = geom.q();
    let places = geom.place_values();
    let (dnu, nu_m, mu_m) = if region.len() == geom.volume() {
        (flow, nu.probs().to_vec(), mu.probs().to_vec())
    } else {
        let m = crate::lattice::checked_states(q, region.len())?;
        let mut d = vec![0.0; m];
        for (idx, &f) in flow.iter().enumerate() {
            d[crate::lattice::local_index(idx, region, &places, q)] += f;
        }
        (d, nu.marginal(region)?.probs, mu.marginal(region)?.probs)
    };
    let mut g = 0.0;
    for ((&dv, &a), &b) in dnu.iter().zip(&nu_m).zip(&mu_m) {
        if dv == 0.0 {
            continue;
        }
        if a <= 0.0 {
            return Err(Error::PositivityError("ν vanishes on a cylinder the dynamics enters".into()));
        }
        if b <= 0.0 {
            return Err(Error::PositivityError("μ vanishes on a cylinder ν charges".into()));
        }
        g += dv * (a.ln() - b.ln());
    }
    Ok(g / region.len() as f64)
}

/// Rate translates whose update region contains each site.
fn covering(layout: &crate::dynamics::ips::RateLayout<'_>, sites: usize) -> Vec<Vec<usize>> {
    let mut cover = vec![Vec::new(); sites];
    for (k, tr) in layout.translates.iter().enumerate() {
        for &s in &tr.update {
            cover[s].push(k);
        }
    }
    cover
}

/// Energy pairing `⟨ν,Φ⟩_L` evaluated at one site:
/// `∫ν(dη) Σ_{Δ∋site} |Δ|^{-1} Σ_ζ c_Δ(η,ζ) Σ_{A∩Δ≠∅}[Φ_A(ζ_Δ η_{Δ^c}) - Φ_A(η)]`.
pub fn pairing_l_at_site(nu: &ExactMeasure, phi: &Potential, rates: &IpsRates, site: usize) -> Result<f64> {
    let geom = nu.geom();
    let layout = rates.layout(geom)?;
    let pl = PotentialLayout::new(phi, geom)?;
    let cover = covering(&layout, geom.volume());
    let meets: Vec<Vec<usize>> = layout.translates.iter().map(|tr| pl.meeting(&tr.update)).collect();
    let q = geom.q();
    let probs = nu.probs();
    let mine = &cover[site];
    Ok(par::sum_range(probs.len(), |idx| {
        let p = probs[idx];
        if p == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for &k in mine {
            let tr = &layout.translates[k];
            let w = 1.0 / tr.update.len() as f64;
            let here = pl.energy_of(&meets[k], idx);
            let (row, cur) = layout.row_with(k, |x| digit(idx, layout.places[x], q));
            let stem: usize = idx - tr.update.iter().map(|&x| digit(idx, layout.places[x], q) * layout.places[x]).sum::<usize>();
            for (t, &c) in row.iter().enumerate() {
                if t == cur || c == 0.0 {
                    continue;
                }
                let target = stem + target_offset(t, &tr.update, &layout.places, q);
                s += w * c * (pl.energy_of(&meets[k], target) - here);
            }
        }
        p * s
    }))
}

#[inline]
fn target_offset(mut t: usize, update: &[usize], places: &[usize], q: usize) -> usize {
    let mut off = 0;
    for &s in update {
        off += (t % q) * places[s];
        t /= q;
    }
    off
}

/// `⟨ν,Φ⟩_L` averaged over the torus sites.
pub fn pairing_l(nu: &ExactMeasure, phi: &Potential, rates: &IpsRates) -> Result<f64> {
    let n = nu.geom().volume();
    let mut total = 0.0;
    for site in 0..n {
        total += pairing_l_at_site(nu, phi, rates, site)?;
    }
    Ok(total / n as f64)
}

/// Entropy production `g_L(ν)` at one site through block conditionals:
/// `∫ν(dη) Σ_{Δ∋site} Σ_ξ c(η,ξ_Δ) |Δ|^{-1} log[ν(ξ_Δ|η_{Λ∖Δ}) / ν(η_Δ|η_{Λ∖Δ})]`.
pub fn entropy_production_rep_at_site(nu: &ExactMeasure, rates: &IpsRates, site: usize) -> Result<f64> {
    let report = nu.nonnullness();
    if report.delta <= 0.0 {
        return Err(Error::NonNullViolation { site: report.site });
    }
    let geom = nu.geom();
    let layout = rates.layout(geom)?;
    let cover = covering(&layout, geom.volume());
    let q = geom.q();
    let places = &layout.places;
    let blocks: Vec<Vec<usize>> = layout
        .translates
        .iter()
        .map(|tr| block_offsets(&tr.update, places, q))
        .collect::<Result<_>>()?;
    let probs = nu.probs();
    let mine = &cover[site];
    Ok(par::sum_range(probs.len(), |idx| {
        let p = probs[idx];
        if p == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for &k in mine {
            let tr = &layout.translates[k];
            let stem = idx - tr.update.iter().map(|&x| digit(idx, places[x], q) * places[x]).sum::<usize>();
            let z: f64 = blocks[k].iter().map(|&o| probs[stem + o]).sum();
            let current = probs[idx] / z;
            let (row, cur) = layout.row_with(k, |x| digit(idx, places[x], q));
            let w = 1.0 / tr.update.len() as f64;
            for (t, &c) in row.iter().enumerate() {
                if t == cur || c == 0.0 {
                    continue;
                }
                let proposed = probs[stem + blocks[k][t]] / z;
                s += w * c * (proposed / current).ln();
            }
        }
        p * s
    }))
}

/// Finite-volume `g_L(ν)`, averaged over the torus sites. Requires `ν` non-null.
pub fn entropy_production_rep(nu: &ExactMeasure, rates: &IpsRates) -> Result<f64> {
    let n = nu.geom().volume();
    let mut total = 0.0;
    for site in 0..n {
        total += entropy_production_rep_at_site(nu, rates, site)?;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub g_direct: f64,
    pub g_representation: f64,
    pub pairing: f64,
    /// `|g_direct - (g_representation + pairing)|`.
    pub discrepancy: f64,
}

/// Compares the direct loss `g_L(ν|μ)` on the whole torus with `g_L(ν) + ⟨ν,Φ⟩_L`.
pub fn loss_decomposition(
    nu: &ExactMeasure,
    mu: &ExactMeasure,
    phi: &Potential,
    rates: &IpsRates,
) -> Result<LossReport> {
    let all = nu.geom().all_sites();
    let g_direct = continuous_loss_direct(rates, nu, mu, &all)?;
    let g_representation = entropy_production_rep(nu, rates)?;
    let pairing = pairing_l(nu, phi, rates)?;
    Ok(LossReport {
        g_direct,
        g_representation,
        pairing,
        discrepancy: (g_direct - (g_representation + pairing)).abs(),
    })
}

/// Residual of `h(ν|μ) = p(Φ) + ⟨ν,Φ⟩ - (log q - h(ν|u))` per site on the
/// whole torus, `μ` being the periodic Gibbs measure of `Φ`.
pub fn pressure_decomposition_check(nu: &ExactMeasure, mu: &ExactMeasure, phi: &Potential) -> Result<f64> {
    let geom = nu.geom();
    let n = geom.volume() as f64;
    let all = geom.all_sites();
    let lhs = local_relative_entropy(nu, mu, &all)? / n;
    let u = ExactMeasure::uniform(geom)?;
    let h_u = local_relative_entropy(nu, &u, &all)? / n;
    let rhs = pressure(phi, geom)? + specific_energy(nu, phi)? + (h_u - (geom.q() as f64).ln());
    Ok((lhs - rhs).abs())
}
