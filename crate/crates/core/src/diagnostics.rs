//! Gibbsianness and regularity diagnostics on exact torus measures, and the
//! trajectory orchestration that records them over time.
//!
//! On a torus the full complement `0^c` is proxied by `Λ_max ∖ {0}` with
//! `Λ_max` the whole torus, so the martingale diagnostic measures convergence
//! between growing annuli and the largest observable one.

use serde::Serialize;

use crate::dynamics::ips::Evolver;
use crate::dynamics::pca::pca_pushforward;
use crate::dynamics::Dynamics;
use crate::entropy::{continuous_loss_direct_with, entropy_production_rep, local_relative_entropy, pairing_l};
use crate::error::{invalid, Error, Result};
use crate::lattice::{digit, local_index, ConfigIndex, SpinConfig, TorusGeometry};
use crate::measure::{ExactMeasure, NonNullReport};
use crate::par;
use crate::potential::{local_specification, Potential, PotentialLayout};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlrWitness {
    pub site: usize,
    pub boundary: SpinConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlrResidualReport {
    pub max_residual: f64,
    /// Largest residual at each site.
    pub per_site: Vec<f64>,
    pub witness: Option<DlrWitness>,
}

/// `max |ν(a | η_{Λ∖s}) - γ_s^Φ(a | η)|` over sites, supported boundaries and states.
pub fn dlr_residual(nu: &ExactMeasure, phi: &Potential) -> Result<DlrResidualReport> {
    let geom = nu.geom();
    let layout = PotentialLayout::new(phi, geom)?;
    let q = geom.q();
    let places = geom.place_values();
    let probs = nu.probs();
    let per: Vec<(f64, Option<usize>)> = par::map_range(geom.volume(), |s| {
        let place = places[s];
        let offsets: Vec<usize> = (0..q).map(|a| a * place).collect();
        let mut best: (f64, Option<usize>) = (-1.0, None);
        for stem in 0..probs.len() {
            if digit(stem, place, q) != 0 {
                continue;
            }
            let z: f64 = offsets.iter().map(|&o| probs[stem + o]).sum();
            if z <= 0.0 {
                continue;
            }
            let gamma = local_specification(&layout, &[s], stem, &offsets);
            for (a, &o) in offsets.iter().enumerate() {
                let r = (probs[stem + o] / z - gamma[a]).abs();
                if r > best.0 {
                    best = (r, Some(stem));
                }
            }
        }
        best
    });
    let mut report = DlrResidualReport { max_residual: 0.0, per_site: Vec::with_capacity(per.len()), witness: None };
    let mut top = -1.0;
    for (s, &(r, stem)) in per.iter().enumerate() {
        report.per_site.push(r.max(0.0));
        if let (Some(stem), true) = (stem, r > top) {
            top = r;
            report.max_residual = r;
            report.witness = Some(DlrWitness { site: s, boundary: ConfigIndex(stem).decode(geom) });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleRow {
    /// `|Λ_k ∖ {0}|`.
    pub annulus_size: usize,
    pub value: f64,
    /// `E_ν|ν(ξ_0|η_{Λ_k∖0}) - ν(ξ_0|η_{Λ_max∖0})|` for each `ξ_0`.
    pub per_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleDiagnostic {
    pub rows: Vec<MartingaleRow>,
}

/// Rows for each region of `schedule` (each must contain site 0), followed by
/// the full torus row, which is 0.
pub fn martingale_diagnostic(nu: &ExactMeasure, schedule: &[Vec<usize>]) -> Result<MartingaleDiagnostic> {
    let report = nu.nonnullness();
    if report.delta <= 0.0 {
        return Err(Error::NonNullViolation { site: report.site });
    }
    let geom = nu.geom();
    let mut rows = Vec::with_capacity(schedule.len() + 1);
    for region in schedule {
        if !region.contains(&0) {
            return Err(invalid("martingale regions must contain the origin"));
        }
        rows.push(martingale_row(nu, region)?);
    }
    rows.push(MartingaleRow {
        annulus_size: geom.volume() - 1,
        value: 0.0,
        per_state: vec![0.0; geom.q()],
    });
    Ok(MartingaleDiagnostic { rows })
}

fn martingale_row(nu: &ExactMeasure, region: &[usize]) -> Result<MartingaleRow> {
    let geom = nu.geom();
    let q = geom.q();
    let places = geom.place_values();
    let mut sites = region.to_vec();
    sites.sort_unstable();
    sites.dedup();
    // site 0 is the least significant local digit
    let marg = nu.marginal(&sites)?;
    let pos0 = sites.iter().position(|&s| s == 0).expect("origin in region");
    let local_place = q.pow(pos0 as u32);
    let probs = nu.probs();
    let per_state = par::accumulate_range(probs.len(), q, |idx, acc| {
        let p = probs[idx];
        if p == 0.0 {
            return;
        }
        let li = local_index(idx, &sites, &places, q);
        let lstem = li - digit(li, local_place, q) * local_place;
        let zl: f64 = (0..q).map(|b| marg.probs[lstem + b * local_place]).sum();
        let stem = idx - digit(idx, places[0], q) * places[0];
        let zf: f64 = (0..q).map(|b| probs[stem + b * places[0]]).sum();
        for (a, slot) in acc.iter_mut().enumerate() {
            let local = marg.probs[lstem + a * local_place] / zl;
            let full = probs[stem + a * places[0]] / zf;
            *slot += p * (local - full).abs();
        }
    });
    Ok(MartingaleRow {
        annulus_size: sites.len() - 1,
        value: per_state.iter().sum(),
        per_state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTable {
    pub times: Vec<f64>,
    pub annulus_sizes: Vec<usize>,
    /// `values[t][k]`.
    pub values: Vec<Vec<f64>>,
    /// `sup_t values[t][k]`.
    pub column_sup: Vec<f64>,
    /// Smallest non-nullness constant along the trajectory.
    pub delta_floor: f64,
    /// Whether every column sup shrinks by `decay_factor` each time the annulus
    /// size at least doubles (columns already at 0 count as decayed).
    pub decays: bool,
}

/// Martingale diagnostic at each time of a trajectory.
pub fn uniform_martingale_over_trajectory(
    traj: &[(f64, ExactMeasure)],
    schedule: &[Vec<usize>],
    decay_factor: f64,
) -> Result<MartingaleTable> {
    let mut values = Vec::with_capacity(traj.len());
    let mut delta_floor = f64::INFINITY;
    let mut sizes = Vec::new();
    for (t, nu) in traj {
        let at = |e: Error| Error::AtTime { t: *t, source: Box::new(e) };
        delta_floor = delta_floor.min(nu.nonnullness().delta);
        let diag = martingale_diagnostic(nu, schedule).map_err(at)?;
        sizes = diag.rows.iter().map(|r| r.annulus_size).collect();
        values.push(diag.rows.iter().map(|r| r.value).collect::<Vec<f64>>());
    }
    let cols = sizes.len();
    let column_sup: Vec<f64> = (0..cols)
        .map(|k| values.iter().map(|row: &Vec<f64>| row[k]).fold(0.0, f64::max))
        .collect();
    let mut decays = true;
    let mut anchor = 0;
    for k in 1..cols {
        if sizes[k] >= 2 * sizes[anchor].max(1) {
            let bound = decay_factor * column_sup[anchor];
            if column_sup[k] > bound && column_sup[k] > 1e-14 {
                decays = false;
            }
            anchor = k;
        }
    }
    Ok(MartingaleTable {
        times: traj.iter().map(|(t, _)| *t).collect(),
        annulus_sizes: sizes,
        values,
        column_sup,
        delta_floor: if traj.is_empty() { 0.0 } else { delta_floor },
        decays,
    })
}

/// Rebuilds `ν(ξ_1 ξ_2 | rest)` from the single-site families
/// `a(σ_1|σ_2) = ν(σ_1 | σ_2, rest)` and `b(σ_2|σ_1) = ν(σ_2 | σ_1, rest)` as
/// `a(ξ_1|ξ_2) / Σ_{σ_1} a(σ_1|ξ_2) / b(ξ_2|σ_1)` and returns the largest
/// deviation from the direct two-site conditional. With `conditioning`
/// only that boundary is tested, otherwise every boundary.
pub fn two_site_from_single(
    nu: &ExactMeasure,
    sites: (usize, usize),
    conditioning: Option<&SpinConfig>,
) -> Result<f64> {
    let report = nu.nonnullness();
    if report.delta <= 0.0 {
        return Err(Error::NonNullViolation { site: report.site });
    }
    let geom = nu.geom();
    let (s1, s2) = sites;
    if s1 == s2 || s1 >= geom.volume() || s2 >= geom.volume() {
        return Err(invalid("two distinct torus sites are required"));
    }
    let q = geom.q();
    let places = geom.place_values();
    let (p1, p2) = (places[s1], places[s2]);
    let probs = nu.probs();
    let strip = |idx: usize| idx - digit(idx, p1, q) * p1 - digit(idx, p2, q) * p2;
    let stems: Vec<usize> = match conditioning {
        Some(cfg) => vec![strip(ConfigIndex::encode(geom, cfg)?.0)],
        None => (0..probs.len()).filter(|&i| strip(i) == i).collect(),
    };
    let errs = par::map_slice(&stems, |&stem| {
        let cell = |x1: usize, x2: usize| stem + x1 * p1 + x2 * p2;
        // a[x1][x2] = ν(x1 | x2, rest), b[x2][x1] = ν(x2 | x1, rest)
        let a = |x1: usize, x2: usize| {
            probs[cell(x1, x2)] / (0..q).map(|y| probs[cell(y, x2)]).sum::<f64>()
        };
        let b = |x2: usize, x1: usize| {
            probs[cell(x1, x2)] / (0..q).map(|y| probs[cell(x1, y)]).sum::<f64>()
        };
        let z: f64 = (0..q * q).map(|k| probs[cell(k % q, k / q)]).sum();
        let mut worst: f64 = 0.0;
        for x2 in 0..q {
            let denom: f64 = (0..q).map(|s| a(s, x2) / b(x2, s)).sum();
            for x1 in 0..q {
                let rebuilt = a(x1, x2) / denom;
                worst = worst.max((rebuilt - probs[cell(x1, x2)] / z).abs());
            }
        }
        worst
    });
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// `|Λ|^{-1} (max - min) / 2` of `log(ν_1(ω_Λ) / ν_2(ω_Λ))`.
pub fn potential_distance(nu1: &ExactMeasure, nu2: &ExactMeasure, region: &[usize]) -> Result<f64> {
    nu1.same_space(nu2)?;
    let m1 = nu1.marginal(region)?;
    let m2 = nu2.marginal(region)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&a, &b) in m1.probs.iter().zip(&m2.probs) {
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::PositivityError("cylinder with zero probability".into()));
        }
        let r = a.ln() - b.ln();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((hi - lo) / 2.0 / region.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub volume: usize,
    pub h_density: f64,
    pub g_direct: f64,
    pub g_rep: f64,
    pub pairing: f64,
    pub delta: f64,
    pub dlr_residual: f64,
    pub martingale_diag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub t: f64,
    pub volume: Option<usize>,
    pub column: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub rows: Vec<TraceRow>,
    pub errors: Vec<RowError>,
    /// `(t_k, TV between torus marginals at t_{k-1} and t_k)`.
    pub weak_distances: Vec<(f64, f64)>,
    /// DLR witness at each time.
    pub dlr_witnesses: Vec<(f64, Option<DlrWitness>)>,
    /// Total variation to `μ` on the torus at each time.
    pub tv_to_mu: Vec<(f64, f64)>,
    /// Smallest single-site conditional and where it occurs, at each time.
    pub nonnull: Vec<(f64, NonNullReport)>,
    /// Law of the state at site 0 at each time.
    pub origin_marginals: Vec<(f64, Vec<f64>)>,
}

pub const TRACE_HEADER: [&str; 9] =
    ["t", "volume", "h_density", "g_direct", "g_rep", "pairing", "delta", "dlr_residual", "martingale_diag"];

/// Boxes (given by side lengths) centred at the origin.
pub fn volume_regions(geom: &TorusGeometry, volumes: &[Vec<usize>]) -> Vec<Vec<usize>> {
    volumes.iter().map(|sides| geom.centered_box(0, sides)).collect()
}

/// Evolves `ν0` along `times` and evaluates every diagnostic at each time
/// and volume. Failures of individual quantities become `NaN` entries and
/// are recorded in `errors`.
pub fn trajectory_report(
    model: &Dynamics,
    nu0: &ExactMeasure,
    mu: &ExactMeasure,
    phi: &Potential,
    times: &[f64],
    volumes: &[Vec<usize>],
) -> Result<EntropyTrace> {
    nu0.same_space(mu)?;
    let geom = nu0.geom().clone();
    phi.check_geometry(&geom)?;
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("time grid must be finite, nonnegative and non-decreasing"));
    }
    if model.is_discrete() && times.iter().any(|t| t.fract() != 0.0) {
        return Err(invalid("PCA time grids must be integers"));
    }
    let regions = volume_regions(&geom, volumes);
    let evolver = match model {
        Dynamics::Ips(rates) => Some(Evolver::from_rates(rates, &geom)?),
        Dynamics::Pca(k) => {
            if k.q() != geom.q() {
                return Err(invalid("PCA kernel does not match the torus"));
            }
            None
        }
    };
    let mut trace = EntropyTrace {
        rows: Vec::new(),
        errors: Vec::new(),
        weak_distances: Vec::new(),
        dlr_witnesses: Vec::new(),
        tv_to_mu: Vec::new(),
        nonnull: Vec::new(),
        origin_marginals: Vec::new(),
    };
    let mut nu = nu0.clone();
    let mut now = 0.0;
    let mut prev: Option<ExactMeasure> = None;
    for &t in times {
        nu = match model {
            Dynamics::Ips(_) => evolver.as_ref().expect("ips evolver").evolve(&nu, t - now)?,
            Dynamics::Pca(k) => {
                let mut cur = nu;
                for _ in 0..(t - now).round() as u64 {
                    cur = pca_pushforward(k, &cur)?;
                }
                cur
            }
        };
        now = t;
        if let Some(p) = &prev {
            trace.weak_distances.push((t, p.tv_distance(&nu)?));
        }
        trace.tv_to_mu.push((t, nu.tv_distance(mu)?));
        trace.origin_marginals.push((t, nu.marginal(&[0])?.probs));
        let report = nu.nonnullness();
        let delta = report.delta;
        trace.nonnull.push((t, report));
        let mut record = |volume: Option<usize>, column: &str, e: Error| {
            trace.errors.push(RowError { t, volume, column: column.to_string(), message: e.to_string() });
            f64::NAN
        };
        let dlr = match dlr_residual(&nu, phi) {
            Ok(r) => {
                trace.dlr_witnesses.push((t, r.witness.clone()));
                r.max_residual
            }
            Err(e) => record(None, "dlr_residual", e),
        };
        let (g_rep, pairing) = match model {
            Dynamics::Ips(rates) => (
                entropy_production_rep(&nu, rates).unwrap_or_else(|e| record(None, "g_rep", e)),
                pairing_l(&nu, phi, rates).unwrap_or_else(|e| record(None, "pairing", e)),
            ),
            Dynamics::Pca(_) => (f64::NAN, f64::NAN),
        };
        let pushed = match model {
            Dynamics::Pca(k) => match pca_pushforward(k, &nu) {
                Ok(m) => Some(m),
                Err(e) => {
                    record(None, "g_direct", e);
                    None
                }
            },
            Dynamics::Ips(_) => None,
        };
        for region in &regions {
            let vol = Some(region.len());
            let n = region.len() as f64;
            let h = local_relative_entropy(&nu, mu, region).map(|h| h / n);
            let h_density = h.as_ref().copied().unwrap_or(f64::NAN);
            if let Err(e) = h {
                record(vol, "h_density", e);
            }
            let g_direct = match (model, &pushed) {
                (Dynamics::Ips(_), _) => {
                    let gen = evolver.as_ref().expect("ips evolver").generator();
                    continuous_loss_direct_with(gen, &nu, mu, region).unwrap_or_else(|e| record(vol, "g_direct", e))
                }
                (Dynamics::Pca(_), Some(next)) => discrete_gp(next, &nu, mu, region, h_density * n)
                    .unwrap_or_else(|e| record(vol, "g_direct", e)),
                (Dynamics::Pca(_), None) => f64::NAN,
            };
            let mart = match martingale_diagnostic(&nu, std::slice::from_ref(region)) {
                Ok(m) => m.rows[0].value,
                Err(e) => record(vol, "martingale_diag", e),
            };
            trace.rows.push(TraceRow {
                t,
                volume: region.len(),
                h_density,
                g_direct,
                g_rep,
                pairing,
                delta,
                dlr_residual: dlr,
                martingale_diag: mart,
            });
        }
        prev = Some(nu.clone());
    }
    Ok(trace)
}

fn discrete_gp(next: &ExactMeasure, nu: &ExactMeasure, mu: &ExactMeasure, region: &[usize], before: f64) -> Result<f64> {
    let after = local_relative_entropy(next, mu, region)?;
    let before = if before.is_nan() { local_relative_entropy(nu, mu, region)? } else { before };
    if after.is_infinite() && before.is_infinite() {
        return Err(Error::PositivityError("both relative entropies are infinite".into()));
    }
    Ok((after - before) / region.len() as f64)
}

/// Writes the trace rows as CSV with [`TRACE_HEADER`].
pub fn write_trace_csv<W: std::io::Write>(trace: &EntropyTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        out.write_record([
            r.t.to_string(),
            r.volume.to_string(),
            r.h_density.to_string(),
            r.g_direct.to_string(),
            r.g_rep.to_string(),
            r.pairing.to_string(),
            r.delta.to_string(),
            r.dlr_residual.to_string(),
            r.martingale_diag.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::models::{glauber, inf_temp_flip, majority_eps};
    use crate::potential::gibbs_measure;

    fn chain(l: usize) -> TorusGeometry {
        TorusGeometry::chain(l, 2).unwrap()
    }

    #[test]
    fn dlr_cases() {
        let g = chain(5);
        let phi = Potential::ising(1, 1.0, 0.0);
        let mu = gibbs_measure(&phi, &g).unwrap();
        assert!(dlr_residual(&mu, &phi).unwrap().max_residual < 1e-12);
        let u = ExactMeasure::uniform(&g).unwrap();
        let r = dlr_residual(&u, &phi).unwrap();
        let e = 4f64.exp();
        assert!((r.max_residual - (0.5 - e / (e + 1.0)).abs()).abs() < 1e-12);
        let w = r.witness.unwrap();
        let (l, rr) = (g.shift(w.site, &[-1]), g.shift(w.site, &[1]));
        assert_eq!(w.boundary.get(l), w.boundary.get(rr));
        let other = gibbs_measure(&Potential::ising(1, 0.4, 0.0), &g).unwrap();
        assert!(dlr_residual(&other, &phi).unwrap().max_residual > 1e-3);
    }

    #[test]
    fn martingale_cases() {
        let g = chain(7);
        let prod = ExactMeasure::product(&g, &[0.3, 0.7]).unwrap();
        let sched: Vec<Vec<usize>> = (0..3).map(|r| g.ball(0, r)).collect();
        let d = martingale_diagnostic(&prod, &sched).unwrap();
        assert!(d.rows.iter().all(|r| r.value.abs() < 1e-15));
        let mu = gibbs_measure(&Potential::ising(1, 0.8, 0.2), &g).unwrap();
        let d = martingale_diagnostic(&mu, &sched).unwrap();
        assert!(d.rows[0].value > 1e-3);
        assert!(d.rows[1].value < 1e-14 && d.rows[2].value < 1e-14);
        assert_eq!(d.rows.last().unwrap().value, 0.0);
        let pm = ExactMeasure::point_mass(&g, &SpinConfig(vec![0; 7])).unwrap();
        assert!(matches!(martingale_diagnostic(&pm, &sched), Err(Error::NonNullViolation { .. })));
    }

    #[test]
    fn flip_trajectory_bound() {
        let g = chain(5);
        let rates = inf_temp_flip(1, 2, 1.0).unwrap();
        let ev = Evolver::from_rates(&rates, &g).unwrap();
        let pm = ExactMeasure::point_mass(&g, &SpinConfig(vec![0; 5])).unwrap();
        let traj: Vec<(f64, ExactMeasure)> = [0.5, 1.0, 2.0].iter().map(|&t| (t, ev.evolve(&pm, t).unwrap())).collect();
        let sched: Vec<Vec<usize>> = (0..2).map(|r| g.ball(0, r)).collect();
        let table = uniform_martingale_over_trajectory(&traj, &sched, 0.5).unwrap();
        assert!(table.column_sup.iter().all(|&v| v <= (-1f64).exp()));
        assert!((table.delta_floor - 0.5 * (1.0 - (-1f64).exp())).abs() < 1e-9);
        let bad = vec![(0.0, pm)];
        assert!(matches!(
            uniform_martingale_over_trajectory(&bad, &sched, 0.5),
            Err(Error::AtTime { t, .. }) if t == 0.0
        ));
    }

    #[test]
    fn two_site_cases() {
        let g = chain(5);
        let prod = ExactMeasure::product(&g, &[0.2, 0.8]).unwrap();
        assert!(two_site_from_single(&prod, (0, 1), None).unwrap() < 1e-15);
        let mu = gibbs_measure(&Potential::ising(1, 1.0, 0.0), &g).unwrap();
        assert!(two_site_from_single(&mu, (0, 1), None).unwrap() < 1e-10);
        assert!(two_site_from_single(&mu, (1, 3), Some(&SpinConfig(vec![0, 1, 0, 1, 1]))).unwrap() < 1e-10);
        assert_eq!(two_site_from_single(&ExactMeasure::uniform(&g).unwrap(), (2, 4), None).unwrap(), 0.0);
        assert!(two_site_from_single(&mu, (2, 2), None).is_err());
    }

    #[test]
    fn potential_distance_cases() {
        let g = chain(8);
        let phi = Potential::ising(1, 0.5, 0.0);
        let a = gibbs_measure(&phi, &g).unwrap();
        let b = gibbs_measure(&Potential::ising(1, 0.8, 0.0), &g).unwrap();
        let all = g.all_sites();
        assert_eq!(potential_distance(&a, &a, &all).unwrap(), 0.0);
        assert!(potential_distance(&a, &b, &all).unwrap() > 0.0);
        let u = ExactMeasure::uniform(&g).unwrap();
        // ν2 = uniform: (max H - min H) / 2 / |Λ| = (8β - (-8β)) / 2 / 8 = β
        assert!((potential_distance(&a, &u, &all).unwrap() - 0.5).abs() < 1e-12);
        let pm = ExactMeasure::point_mass(&g, &SpinConfig(vec![0; 8])).unwrap();
        assert!(matches!(potential_distance(&pm, &u, &all), Err(Error::PositivityError(_))));
    }

    #[test]
    fn trace_of_stationary_start_is_flat() {
        let g = chain(5);
        let phi = Potential::ising(1, 0.7, 0.0);
        let mu = gibbs_measure(&phi, &g).unwrap();
        let model = Dynamics::Ips(glauber(&phi).unwrap());
        let tr = trajectory_report(&model, &mu, &mu, &phi, &[0.0, 1.0, 2.0], &[vec![3], vec![5]]).unwrap();
        assert!(tr.errors.is_empty());
        for r in &tr.rows {
            assert!(r.h_density.abs() < 1e-12 && r.g_direct.abs() < 1e-12 && r.dlr_residual < 1e-12);
            assert!((r.g_rep + r.pairing).abs() < 1e-12);
        }
        assert_eq!(tr.rows.len(), 6);
    }

    #[test]
    fn trace_records_errors_without_aborting() {
        let g = chain(4);
        let phi = Potential::zero(1, 2);
        let u = ExactMeasure::uniform(&g).unwrap();
        let pm = ExactMeasure::point_mass(&g, &SpinConfig(vec![0; 4])).unwrap();
        let model = Dynamics::Ips(inf_temp_flip(1, 2, 1.0).unwrap());
        let tr = trajectory_report(&model, &pm, &u, &phi, &[0.0, 1.0], &[vec![4]]).unwrap();
        assert_eq!(tr.rows.len(), 2);
        assert!(tr.rows[0].g_rep.is_nan() && !tr.errors.is_empty());
        let p = (1.0 + (-2f64).exp()) / 2.0;
        let expect = p * (2.0 * p).ln() + (1.0 - p) * (2.0 * (1.0 - p)).ln();
        assert!((tr.rows[1].h_density - expect).abs() < 1e-10);
        let mut buf = Vec::new();
        write_trace_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,volume,h_density,g_direct,g_rep,pairing,delta,dlr_residual,martingale_diag"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn pca_trace_uses_discrete_loss() {
        let g = chain(5);
        let phi = Potential::zero(1, 2);
        let u = ExactMeasure::uniform(&g).unwrap();
        let nu0 = ExactMeasure::product(&g, &[0.9, 0.1]).unwrap();
        let model = Dynamics::Pca(majority_eps(1, 0.5).unwrap());
        let tr = trajectory_report(&model, &nu0, &u, &phi, &[0.0, 1.0], &[vec![5]]).unwrap();
        assert!(tr.rows[0].g_direct < 0.0 && tr.rows[0].g_rep.is_nan());
        assert!(tr.rows[1].h_density.abs() < 1e-12);
        assert!(trajectory_report(&model, &nu0, &u, &phi, &[0.5], &[vec![5]]).is_err());
    }
}
