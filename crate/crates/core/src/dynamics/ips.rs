//! Continuous-time interacting particle systems on a torus.
//!
//! Rates are given per translation class: an update shape `Δ` (the sites that
//! change), a support shape `S ⊇ Δ` (the sites the rate reads), and a table
//! `c_Δ(η_S, ζ_Δ)`. Null jumps (`ζ_Δ = η_Δ`) never change the configuration
//! and are skipped by every operation, though they do count towards the
//! sup-rate `c_Δ = sup_η Σ_ζ c_Δ(η, ζ)`.

use crate::error::{invalid, Result};
use crate::lattice::{checked_states, digit, local_index, Shape, TorusGeometry};
use crate::measure::{Assignment, ExactMeasure};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct RateTerm {
    update: Shape,
    support: Shape,
    /// Positions of the update offsets inside `support`.
    update_pos: Vec<usize>,
    /// `table[support_local * q^{|Δ|} + target_local]`.
    table: Vec<f64>,
}

impl RateTerm {
    pub fn update(&self) -> &Shape {
        &self.update
    }

    pub fn support(&self) -> &Shape {
        &self.support
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `sup_η Σ_{ζ_Δ} c_Δ(η, ζ_Δ)`.
    pub fn sup_rate(&self, q: usize) -> f64 {
        let k = q.pow(self.update.len() as u32);
        self.table.chunks(k).map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpsRates {
    d: usize,
    q: usize,
    terms: Vec<RateTerm>,
}

impl IpsRates {
    pub fn new(d: usize, q: usize) -> Self {
        IpsRates { d, q, terms: vec![] }
    }

    /// Adds a rate family. `support` must contain every update offset, and
    /// `table` is indexed by the support assignment (support order as given,
    /// first offset least significant) times `q^{|Δ|}` plus the target on the
    /// update offsets (update order as given).
    pub fn add_term(
        &mut self,
        update: Vec<Vec<i64>>,
        support: Vec<Vec<i64>>,
        table: Vec<f64>,
    ) -> Result<()> {
        let q = self.q;
        let su = checked_states(q, support.len())?;
        let tu = checked_states(q, update.len())?;
        if table.len() != su * tu {
            return Err(invalid(format!("rate table needs {} entries, got {}", su * tu, table.len())));
        }
        if table.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(invalid("rates must be finite and nonnegative"));
        }
        let (ushape, uperm) = Shape::with_permutation(self.d, update.clone())?;
        let (sshape, sperm) = Shape::with_permutation(self.d, support.clone())?;
        let update_pos = ushape
            .offsets()
            .iter()
            .map(|o| {
                sshape
                    .offsets()
                    .iter()
                    .position(|s| s == o)
                    .ok_or_else(|| invalid("rate support must contain the update shape"))
            })
            .collect::<Result<Vec<_>>>()?;
        let reindex = |given: usize, perm: &[usize]| {
            let mut rest = given;
            perm.iter().fold(0, |acc, &pos| {
                let v = rest % q;
                rest /= q;
                acc + v * q.pow(pos as u32)
            })
        };
        let mut sorted = vec![0.0; table.len()];
        for (i, &c) in table.iter().enumerate() {
            let (s, t) = (i / tu, i % tu);
            sorted[reindex(s, &sperm) * tu + reindex(t, &uperm)] = c;
        }
        self.terms.push(RateTerm { update: ushape, support: sshape, update_pos, table: sorted });
        Ok(())
    }

    /// Builds a term from a rate function on (support values, target values),
    /// both in sorted shape order.
    pub fn add_term_fn(
        &mut self,
        update: Shape,
        support: Shape,
        rate: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<()> {
        let q = self.q;
        let su = checked_states(q, support.len())?;
        let tu = checked_states(q, update.len())?;
        let decode = |mut x: usize, k: usize| {
            (0..k)
                .map(|_| {
                    let v = x % q;
                    x /= q;
                    v
                })
                .collect::<Vec<_>>()
        };
        let mut table = Vec::with_capacity(su * tu);
        for s in 0..su {
            let sv = decode(s, support.len());
            for t in 0..tu {
                table.push(rate(&sv, &decode(t, update.len())));
            }
        }
        self.add_term(update.offsets().to_vec(), support.offsets().to_vec(), table)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn terms(&self) -> &[RateTerm] {
        &self.terms
    }

    /// `Σ_{Δ∋0} c_Δ`: each class appears once per site of its update shape.
    pub fn rate_mass(&self) -> f64 {
        self.terms.iter().map(|t| t.update.len() as f64 * t.sup_rate(self.q)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.table.iter().all(|&c| c == 0.0))
    }

    pub(crate) fn layout(&self, geom: &TorusGeometry) -> Result<RateLayout<'_>> {
        RateLayout::new(self, geom)
    }
}

/// One translate `Δ + i` of a rate term.
#[derive(Debug, Clone)]
pub(crate) struct RateTranslate {
    pub term: usize,
    pub support: Vec<usize>,
    pub update: Vec<usize>,
}

pub(crate) struct RateLayout<'a> {
    pub rates: &'a IpsRates,
    pub q: usize,
    pub places: Vec<usize>,
    pub translates: Vec<RateTranslate>,
}

impl<'a> RateLayout<'a> {
    fn new(rates: &'a IpsRates, geom: &TorusGeometry) -> Result<Self> {
        if geom.d() != rates.d || geom.q() != rates.q {
            return Err(invalid("rates do not match the torus"));
        }
        let mut translates = Vec::new();
        for (ti, t) in rates.terms.iter().enumerate() {
            t.support.check_fits(geom)?;
            for base in 0..geom.volume() {
                let support = t.support.sites_at(geom, base);
                let update = t.update_pos.iter().map(|&p| support[p]).collect();
                translates.push(RateTranslate { term: ti, support, update });
            }
        }
        Ok(RateLayout { rates, q: geom.q(), places: geom.place_values(), translates })
    }

    /// Rate row `c(η_S, ·)` of translate `k` for the state read off a lookup.
    #[inline]
    pub fn row_with(&self, k: usize, state: impl Fn(usize) -> usize) -> (&[f64], usize) {
        let tr = &self.translates[k];
        let term = &self.rates.terms[tr.term];
        let q = self.q;
        let sidx = tr.support.iter().rev().fold(0, |acc, &s| acc * q + state(s));
        let cur = tr.update.iter().rev().fold(0, |acc, &s| acc * q + state(s));
        let tu = q.pow(tr.update.len() as u32);
        (&term.table[sidx * tu..(sidx + 1) * tu], cur)
    }

    /// Calls `f(target_idx, rate, translate)` for every non-null jump out of `idx`.
    #[inline]
    pub fn for_each_jump(&self, idx: usize, mut f: impl FnMut(usize, f64, usize)) {
        let q = self.q;
        for (k, tr) in self.translates.iter().enumerate() {
            let term = &self.rates.terms[tr.term];
            let sidx = local_index(idx, &tr.support, &self.places, q);
            let tu = q.pow(tr.update.len() as u32);
            let row = &term.table[sidx * tu..(sidx + 1) * tu];
            let cur = local_index(idx, &tr.update, &self.places, q);
            let stem = idx - tr.update.iter().map(|&s| digit(idx, self.places[s], q) * self.places[s]).sum::<usize>();
            for (t, &c) in row.iter().enumerate() {
                if t == cur || c == 0.0 {
                    continue;
                }
                let mut rest = t;
                let mut target = stem;
                for &s in &tr.update {
                    target += (rest % q) * self.places[s];
                    rest /= q;
                }
                f(target, c, k);
            }
        }
    }
}

/// Sparse generator `Q` of the finite-volume Markov chain, stored both by
/// outgoing rows and by incoming columns.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    n: usize,
    diag: Vec<f64>,
    out_ptr: Vec<usize>,
    out_idx: Vec<usize>,
    out_val: Vec<f64>,
    in_ptr: Vec<usize>,
    in_idx: Vec<usize>,
    in_val: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal entries of row `i` as `(column, rate)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.out_ptr[i]..self.out_ptr[i + 1];
        self.out_idx[r.clone()].iter().copied().zip(self.out_val[r].iter().copied())
    }

    /// `Q[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// Largest absolute row sum (0 for a valid generator).
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.diag[i] + self.row(i).map(|(_, v)| v).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector product `x Q`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        par::map_range(self.n, |j| {
            let r = self.in_ptr[j]..self.in_ptr[j + 1];
            let mut s = x[j] * self.diag[j];
            for (&i, &v) in self.in_idx[r.clone()].iter().zip(&self.in_val[r]) {
                s += x[i] * v;
            }
            s
        })
    }

    /// Column vector product `Q f`.
    pub fn right_mul(&self, f: &[f64]) -> Vec<f64> {
        par::map_range(self.n, |i| {
            let mut s = self.diag[i] * f[i];
            for (j, v) in self.row(i) {
                s += v * f[j];
            }
            s
        })
    }
}

/// `Q[σ→σ'] = Σ c_{Δ+i}(σ, ζ)` over translates and targets reaching `σ'`.
pub fn build_generator(rates: &IpsRates, geom: &TorusGeometry) -> Result<GeneratorMatrix> {
    let n = geom.state_count()?;
    let layout = rates.layout(geom)?;
    let rows: Vec<Vec<(usize, f64)>> = par::map_range(n, |i| {
        let mut row: Vec<(usize, f64)> = Vec::new();
        layout.for_each_jump(i, |j, c, _| row.push((j, c)));
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (j, c) in row {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        merged
    });
    let mut out_ptr = Vec::with_capacity(n + 1);
    let (mut out_idx, mut out_val) = (Vec::new(), Vec::new());
    let mut diag = vec![0.0; n];
    let mut counts = vec![0usize; n];
    out_ptr.push(0);
    for (i, row) in rows.iter().enumerate() {
        for &(j, c) in row {
            out_idx.push(j);
            out_val.push(c);
            diag[i] -= c;
            counts[j] += 1;
        }
        out_ptr.push(out_idx.len());
    }
    let mut in_ptr = vec![0usize; n + 1];
    for j in 0..n {
        in_ptr[j + 1] = in_ptr[j] + counts[j];
    }
    let mut fill = in_ptr.clone();
    let mut in_idx = vec![0usize; out_idx.len()];
    let mut in_val = vec![0.0; out_idx.len()];
    for (i, row) in rows.iter().enumerate() {
        for &(j, c) in row {
            in_idx[fill[j]] = i;
            in_val[fill[j]] = c;
            fill[j] += 1;
        }
    }
    Ok(GeneratorMatrix { n, diag, out_ptr, out_idx, out_val, in_ptr, in_idx, in_val })
}

/// `ν(L 1_ω) = Σ_σ ν(σ) Σ_jumps c (1_ω(σ') - 1_ω(σ))`, computed from the
/// rates without assembling `Q`.
pub fn generator_apply(rates: &IpsRates, nu: &ExactMeasure, cylinder: &Assignment) -> Result<f64> {
    let geom = nu.geom();
    let layout = rates.layout(geom)?;
    let places = geom.place_values();
    let q = geom.q();
    let inside = |idx: usize| {
        cylinder.sites.iter().zip(&cylinder.values).all(|(&s, &v)| digit(idx, places[s], q) == v)
    };
    let probs = nu.probs();
    Ok(par::sum_range(probs.len(), |i| {
        let p = probs[i];
        if p == 0.0 {
            return 0.0;
        }
        let here = inside(i) as u8 as f64;
        let mut s = 0.0;
        layout.for_each_jump(i, |j, c, _| s += c * (inside(j) as u8 as f64 - here));
        p * s
    }))
}

/// Poisson tail mass allowed per uniformization segment.
const POISSON_TAIL: f64 = 1e-13;
/// Largest `λ t` handled in one uniformization segment.
const SEGMENT_MASS: f64 = 32.0;

/// Transient distributions `ν e^{tQ}` by uniformization.
#[derive(Debug, Clone)]
pub struct Evolver {
    generator: GeneratorMatrix,
    lambda: f64,
}

impl Evolver {
    pub fn new(generator: GeneratorMatrix) -> Self {
        let lambda = generator.max_exit_rate();
        Evolver { generator, lambda }
    }

    pub fn from_rates(rates: &IpsRates, geom: &TorusGeometry) -> Result<Self> {
        Ok(Self::new(build_generator(rates, geom)?))
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    /// Evolves by time `t`; truncation error in total variation stays below
    /// `1e-13` per segment of mass `λt ≤ 32`.
    pub fn evolve(&self, nu: &ExactMeasure, t: f64) -> Result<ExactMeasure> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("evolution time must be finite and nonnegative, got {t}")));
        }
        if nu.len() != self.generator.n {
            return Err(invalid("measure does not match the generator"));
        }
        if t == 0.0 || self.lambda == 0.0 {
            return Ok(nu.clone());
        }
        let segments = (self.lambda * t / SEGMENT_MASS).ceil().max(1.0) as usize;
        let dt = t / segments as f64;
        let mut x = nu.probs().to_vec();
        for _ in 0..segments {
            x = self.segment(&x, dt);
        }
        ExactMeasure::from_weights(nu.geom().clone(), x.into_iter().map(|p| p.max(0.0)).collect())
    }

    fn segment(&self, x: &[f64], dt: f64) -> Vec<f64> {
        let m = self.lambda * dt;
        let mut weight = (-m).exp();
        let mut cumulative = weight;
        let mut term = x.to_vec();
        let mut acc: Vec<f64> = term.iter().map(|v| v * weight).collect();
        let mut k = 0usize;
        while 1.0 - cumulative > POISSON_TAIL && k < 10_000 {
            k += 1;
            // term <- term (I + Q/λ)
            let qx = self.generator.left_mul(&term);
            for (t, d) in term.iter_mut().zip(&qx) {
                *t += d / self.lambda;
            }
            weight *= m / k as f64;
            cumulative += weight;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += weight * t;
            }
        }
        acc
    }
}

/// `ν_t = ν e^{tQ}` for the torus generator of `rates`.
pub fn semigroup_evolve(rates: &IpsRates, nu: &ExactMeasure, t: f64) -> Result<ExactMeasure> {
    Evolver::from_rates(rates, nu.geom())?.evolve(nu, t)
}
