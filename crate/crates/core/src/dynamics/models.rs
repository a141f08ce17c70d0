//! Built-in dynamics.

use super::ips::IpsRates;
use super::pca::PcaKernel;
use super::Dynamics;
use crate::error::{invalid, Error, Result};
use crate::lattice::Shape;
use crate::potential::{softmin, Potential};

/// Parameters consumed by [`builtin_model`]; unused fields are ignored.
#[derive(Debug, Clone, Default)]
pub struct ModelParams<'a> {
    pub d: usize,
    pub q: usize,
    /// Flip rate for `inf-temp-flip` (default 1).
    pub rate: Option<f64>,
    /// Potential whose heat-bath rates `glauber` uses.
    pub potential: Option<&'a Potential>,
    /// Noise level for `pca-majority-eps`.
    pub eps: Option<f64>,
    /// Intensity matrix for `site-jump-M`.
    pub matrix: Option<Vec<Vec<f64>>>,
}

pub const BUILTIN_NAMES: [&str; 4] = ["inf-temp-flip", "glauber", "pca-majority-eps", "site-jump-M"];

pub fn builtin_model(name: &str, p: &ModelParams<'_>) -> Result<Dynamics> {
    match name {
        "inf-temp-flip" => Ok(Dynamics::Ips(inf_temp_flip(p.d, p.q, p.rate.unwrap_or(1.0))?)),
        "glauber" => {
            let phi = p.potential.ok_or_else(|| invalid("glauber needs a potential"))?;
            Ok(Dynamics::Ips(glauber(phi)?))
        }
        "pca-majority-eps" => {
            let eps = p.eps.ok_or_else(|| invalid("pca-majority-eps needs eps"))?;
            Ok(Dynamics::Pca(majority_eps(p.d, eps)?))
        }
        "site-jump-M" => {
            let m = p.matrix.as_ref().ok_or_else(|| invalid("site-jump-M needs a matrix"))?;
            Ok(Dynamics::Ips(site_jump(p.d, m)?))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Each site jumps to every other state at `rate`, independently.
pub fn inf_temp_flip(d: usize, q: usize, rate: f64) -> Result<IpsRates> {
    if !(rate >= 0.0) {
        return Err(invalid("flip rate must be nonnegative"));
    }
    let mut r = IpsRates::new(d, q);
    r.add_term_fn(Shape::origin(d), Shape::origin(d), |s, t| if s[0] != t[0] { rate } else { 0.0 })?;
    Ok(r)
}

/// Sitewise independent jumps with intensity matrix `m` (off-diagonal rates).
pub fn site_jump(d: usize, m: &[Vec<f64>]) -> Result<IpsRates> {
    let q = m.len();
    if q < 2 || m.iter().any(|row| row.len() != q) {
        return Err(invalid("intensity matrix must be square with q >= 2"));
    }
    for (a, row) in m.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if a != b && !(c >= 0.0) {
                return Err(invalid("off-diagonal intensities must be nonnegative"));
            }
        }
    }
    if !irreducible(m) {
        return Err(invalid("intensity matrix is not irreducible"));
    }
    let mut r = IpsRates::new(d, q);
    r.add_term_fn(Shape::origin(d), Shape::origin(d), |s, t| if s[0] != t[0] { m[s[0]][t[0]] } else { 0.0 })?;
    Ok(r)
}

fn irreducible(m: &[Vec<f64>]) -> bool {
    let q = m.len();
    (0..q).all(|start| {
        let mut seen = vec![false; q];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(a) = stack.pop() {
            for b in 0..q {
                if !seen[b] && a != b && m[a][b] > 0.0 {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|x| x)
    })
}

/// Heat-bath rates `c_{i}(η, a) = γ_{i}^Φ(a | η)` (null jump included in the
/// table, so the sup-rate is exactly 1). Reversible for the torus Gibbs measure.
pub fn glauber(phi: &Potential) -> Result<IpsRates> {
    let d = phi.d();
    let q = phi.q();
    // every set A ∋ 0, as offsets relative to the origin
    let mut sets: Vec<(usize, Vec<Vec<i64>>)> = Vec::new();
    for (ti, t) in phi.terms().iter().enumerate() {
        for pos in 0..t.shape().len() {
            sets.push((ti, t.shape().recentered(pos)));
        }
    }
    let mut support: Vec<Vec<i64>> = vec![vec![0; d]];
    for (_, offs) in &sets {
        support.extend(offs.iter().cloned());
    }
    support.sort();
    support.dedup();
    let support = Shape::new(d, support)?;
    let locate = |o: &Vec<i64>| support.offsets().iter().position(|s| s == o).expect("in support");
    let resolved: Vec<(usize, Vec<usize>)> =
        sets.iter().map(|(ti, offs)| (*ti, offs.iter().map(locate).collect())).collect();
    let origin = support.origin_position();
    let terms = phi.terms();
    let mut r = IpsRates::new(d, q);
    r.add_term_fn(Shape::origin(d), support.clone(), |sv, target| {
        let energies: Vec<f64> = (0..q)
            .map(|a| {
                resolved
                    .iter()
                    .map(|(ti, pos)| {
                        let local = pos.iter().rev().fold(0, |acc, &p| {
                            acc * q + if p == origin { a } else { sv[p] }
                        });
                        terms[*ti].table()[local]
                    })
                    .sum()
            })
            .collect();
        softmin(&energies)[target[0]]
    })?;
    Ok(r)
}

/// Synchronous noisy majority on the `2d+1` site von Neumann neighbourhood
/// (q = 2): each site adopts the majority with probability `1 - eps`.
pub fn majority_eps(d: usize, eps: f64) -> Result<PcaKernel> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid("eps must lie in [0, 1]"));
    }
    let mut offs = vec![vec![0; d]];
    for k in 0..d {
        for s in [-1, 1] {
            let mut e = vec![0; d];
            e[k] = s;
            offs.push(e);
        }
    }
    let nbh = Shape::new(d, offs)?;
    let half = nbh.len() / 2;
    PcaKernel::from_fn(2, nbh, |v| {
        let ones = v.iter().filter(|&&x| x == 1).count();
        let maj = usize::from(ones > half);
        let mut row = vec![eps; 2];
        row[maj] = 1.0 - eps;
        row
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ips::build_generator;
    use crate::lattice::TorusGeometry;
    use crate::potential::gibbs_measure;

    #[test]
    fn unknown_model() {
        let p = ModelParams { d: 1, q: 2, ..Default::default() };
        assert!(matches!(builtin_model("voter", &p), Err(Error::UnknownModel(_))));
        assert!(builtin_model("inf-temp-flip", &p).is_ok());
    }

    #[test]
    fn glauber_is_reversible_and_stationary() {
        let g = TorusGeometry::chain(5, 2).unwrap();
        let phi = Potential::ising(1, 0.8, 0.3);
        let mu = gibbs_measure(&phi, &g).unwrap();
        let q = build_generator(&glauber(&phi).unwrap(), &g).unwrap();
        let m = mu.probs();
        for i in 0..32 {
            for (j, v) in q.row(i) {
                assert!((m[i] * v - m[j] * q.entry(j, i)).abs() < 1e-10);
            }
        }
        assert!(q.left_mul(m).iter().all(|x| x.abs() < 1e-10));
        assert!((glauber(&phi).unwrap().rate_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn majority_with_maximal_noise_is_uniform() {
        let k = majority_eps(1, 0.5).unwrap();
        assert!(k.table().iter().all(|&p| p == 0.5));
        assert!(majority_eps(1, 1.5).is_err());
    }

    #[test]
    fn site_jump_requires_irreducible() {
        assert!(site_jump(1, &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).is_ok());
        assert!(site_jump(1, &[vec![0.0, 1.0], vec![0.0, 0.0]]).is_err());
    }
}
