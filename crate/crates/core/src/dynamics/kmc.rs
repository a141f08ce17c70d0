//! Kinetic Monte Carlo: exact continuous-time sample paths (Gillespie) and
//! independent-chain ensembles for both IPS and PCA dynamics.

use rand::Rng;

use super::ips::IpsRates;
use super::pca::{pca_step_sample, sample_index, PcaKernel};
use crate::error::{invalid, Result};
use crate::lattice::{SpinConfig, TorusGeometry};
use crate::measure::SampleEnsemble;
use crate::par;
use crate::rng::chain_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub sites: Vec<usize>,
    pub values: Vec<u8>,
}

/// Piecewise-constant path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: SpinConfig,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn jump_count(&self) -> usize {
        self.events.len()
    }

    /// Configuration at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> SpinConfig {
        let mut s = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            for (&site, &v) in e.sites.iter().zip(&e.values) {
                s.0[site] = v;
            }
        }
        s
    }

    pub fn final_state(&self) -> SpinConfig {
        self.state_at(self.horizon)
    }
}

/// Exponential holding times at the total rate, jumps chosen in proportion
/// to their rates. Only the translates whose support meets a changed site are
/// re-evaluated after each jump.
pub fn gillespie_run<R: Rng + ?Sized>(
    rates: &IpsRates,
    geom: &TorusGeometry,
    initial: &SpinConfig,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon must be finite and nonnegative"));
    }
    if initial.len() != geom.volume() {
        return Err(invalid("initial configuration does not match the torus"));
    }
    let layout = rates.layout(geom)?;
    let q = geom.q();
    let mut dependents = vec![Vec::new(); geom.volume()];
    for (k, tr) in layout.translates.iter().enumerate() {
        let mut s = tr.support.clone();
        s.sort_unstable();
        s.dedup();
        for site in s {
            dependents[site].push(k);
        }
    }
    let mut state = initial.clone();
    let exit = |k: usize, state: &SpinConfig| {
        let (row, cur) = layout.row_with(k, |s| state.get(s));
        row.iter().enumerate().filter(|&(t, _)| t != cur).map(|(_, c)| c).sum::<f64>()
    };
    let mut totals: Vec<f64> = (0..layout.translates.len()).map(|k| exit(k, &state)).collect();
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        let total: f64 = totals.iter().sum();
        if total <= 0.0 {
            break;
        }
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if t > horizon {
            break;
        }
        let k = sample_index(&totals, rng);
        let (row, cur) = layout.row_with(k, |s| state.get(s));
        let mut weights = row.to_vec();
        weights[cur] = 0.0;
        let mut target = sample_index(&weights, rng);
        let tr = &layout.translates[k];
        let mut values = Vec::with_capacity(tr.update.len());
        for &site in &tr.update {
            let v = (target % q) as u8;
            target /= q;
            state.0[site] = v;
            values.push(v);
        }
        let mut touched: Vec<usize> = tr.update.iter().flat_map(|&s| dependents[s].iter().copied()).collect();
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            totals[j] = exit(j, &state);
        }
        events.push(Event { time: t, sites: tr.update.clone(), values });
    }
    Ok(Trajectory { initial: initial.clone(), events, horizon })
}

/// Runs `chains` independent Gillespie paths (chain `c` uses stream
/// `(seed, c)`) and returns one ensemble per requested time.
pub fn gillespie_snapshots(
    rates: &IpsRates,
    geom: &TorusGeometry,
    initial: &SpinConfig,
    times: &[f64],
    chains: usize,
    seed: u64,
) -> Result<Vec<SampleEnsemble>> {
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let paths = par::map_range(chains, |c| {
        let mut rng = chain_rng(seed, c as u64);
        gillespie_run(rates, geom, initial, horizon, &mut rng)
            .map(|tr| times.iter().map(|&t| tr.state_at(t)).collect::<Vec<_>>())
    });
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    (0..times.len())
        .map(|k| SampleEnsemble::new(geom.clone(), paths.iter().map(|p| p[k].clone()).collect(), None))
        .collect()
}

/// Independent PCA chains sampled after the requested numbers of steps.
pub fn pca_snapshots(
    kernel: &PcaKernel,
    geom: &TorusGeometry,
    initial: &SpinConfig,
    steps: &[usize],
    chains: usize,
    seed: u64,
) -> Result<Vec<SampleEnsemble>> {
    let last = steps.iter().copied().max().unwrap_or(0);
    let paths = par::map_range(chains, |c| -> Result<Vec<SpinConfig>> {
        let mut rng = chain_rng(seed, c as u64);
        let mut s = initial.clone();
        let mut snaps = vec![None; steps.len()];
        for n in 0..=last {
            for (k, &want) in steps.iter().enumerate() {
                if want == n {
                    snaps[k] = Some(s.clone());
                }
            }
            if n < last {
                s = pca_step_sample(kernel, geom, &s, &mut rng)?;
            }
        }
        Ok(snaps.into_iter().map(|x| x.expect("every step visited")).collect())
    });
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    (0..steps.len())
        .map(|k| SampleEnsemble::new(geom.clone(), paths.iter().map(|p| p[k].clone()).collect(), None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flips(rate: f64) -> IpsRates {
        let mut r = IpsRates::new(1, 2);
        r.add_term(vec![vec![0]], vec![vec![0]], vec![0.0, rate, rate, 0.0]).unwrap();
        r
    }

    #[test]
    fn zero_rates_give_constant_path() {
        let g = TorusGeometry::chain(5, 2).unwrap();
        let s = SpinConfig(vec![0, 1, 0, 1, 1]);
        let tr = gillespie_run(&flips(0.0), &g, &s, 10.0, &mut chain_rng(0, 0)).unwrap();
        assert_eq!(tr.jump_count(), 0);
        assert_eq!(tr.final_state(), s);
    }

    #[test]
    fn poisson_jump_count() {
        let g = TorusGeometry::chain(1, 2).unwrap();
        let s = SpinConfig(vec![0]);
        let (n, horizon) = (4000usize, 3.0);
        let mean = (0..n)
            .map(|c| gillespie_run(&flips(1.0), &g, &s, horizon, &mut chain_rng(11, c as u64)).unwrap().jump_count())
            .sum::<usize>() as f64
            / n as f64;
        assert!((mean - horizon).abs() < 3.0 * horizon.sqrt() / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn events_are_time_ordered_and_change_state() {
        let g = TorusGeometry::chain(4, 2).unwrap();
        let tr = gillespie_run(&flips(2.0), &g, &SpinConfig(vec![0; 4]), 5.0, &mut chain_rng(2, 0)).unwrap();
        assert!(tr.events.windows(2).all(|w| w[0].time <= w[1].time));
        let mut s = tr.initial.clone();
        for e in &tr.events {
            assert_ne!(s.get(e.sites[0]) as u8, e.values[0]);
            s.0[e.sites[0]] = e.values[0];
        }
    }
}
