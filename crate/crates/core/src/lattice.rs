//! Finite periodic lattices, spin configurations and their enumeration.
//!
//! A torus `Z_{L_1} x ... x Z_{L_d}` with local states `{0, .., q-1}` stands in
//! for the infinite lattice. Sites are numbered row-major with axis 1 fastest,
//! and a configuration is encoded as the base-q number whose digit `s` is the
//! state at site `s` (site 0 least significant).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default enumeration cap in bits; `ENTROFLOW_CAP_BITS` overrides it.
pub const DEFAULT_CAP_BITS: u32 = 24;

pub fn cap_bits() -> u32 {
    std::env::var("ENTROFLOW_CAP_BITS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP_BITS)
        .min(40)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct TorusGeometry {
    d: usize,
    sides: Vec<usize>,
    q: usize,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    d: usize,
    sides: Vec<usize>,
    q: usize,
}

impl TryFrom<GeometryRepr> for TorusGeometry {
    type Error = Error;
    fn try_from(r: GeometryRepr) -> Result<Self> {
        if r.d != r.sides.len() {
            return Err(invalid(format!("d = {} but {} sides given", r.d, r.sides.len())));
        }
        TorusGeometry::new(r.sides, r.q)
    }
}

impl From<TorusGeometry> for GeometryRepr {
    fn from(g: TorusGeometry) -> Self {
        GeometryRepr { d: g.d, sides: g.sides, q: g.q }
    }
}

impl TorusGeometry {
    pub fn new(sides: Vec<usize>, q: usize) -> Result<Self> {
        if sides.is_empty() {
            return Err(invalid("geometry needs at least one axis"));
        }
        if sides.iter().any(|&l| l == 0) {
            return Err(invalid("torus sides must be positive"));
        }
        if !(2..=256).contains(&q) {
            return Err(invalid(format!("q must lie in 2..=256, got {q}")));
        }
        Ok(TorusGeometry { d: sides.len(), sides, q })
    }

    pub fn chain(len: usize, q: usize) -> Result<Self> {
        Self::new(vec![len], q)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of sites `|Λ|`.
    pub fn volume(&self) -> usize {
        self.sides.iter().product()
    }

    /// `q^{|Λ|}`, or `CapExceeded` when it is over the enumeration cap.
    pub fn state_count(&self) -> Result<usize> {
        checked_states(self.q, self.volume())
    }

    /// `q^s` for every site `s`. Only meaningful within the enumeration cap.
    pub fn place_values(&self) -> Vec<usize> {
        let mut p = Vec::with_capacity(self.volume());
        let mut acc = 1usize;
        for _ in 0..self.volume() {
            p.push(acc);
            acc = acc.saturating_mul(self.q);
        }
        p
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        self.sides
            .iter()
            .map(|&l| {
                let c = rest % l;
                rest /= l;
                c
            })
            .collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.sides)
            .rev()
            .fold(0, |acc, (&c, &l)| acc * l + c % l)
    }

    /// Site reached from `site` by adding `offset`, wrapping periodically.
    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        let mut rest = site;
        let mut out = 0;
        let mut stride = 1;
        for (k, &l) in self.sides.iter().enumerate() {
            let c = (rest % l) as i64;
            rest /= l;
            let o = offset.get(k).copied().unwrap_or(0);
            let w = (c + o).rem_euclid(l as i64) as usize;
            out += w * stride;
            stride *= l;
        }
        out
    }

    pub fn all_sites(&self) -> Vec<usize> {
        (0..self.volume()).collect()
    }

    /// Sites of the box `[0, l_1) x ... x [0, l_d)` anchored at the origin.
    /// Each side is clipped to the torus side.
    pub fn box_sites(&self, lens: &[usize]) -> Vec<usize> {
        let lens: Vec<usize> = (0..self.d)
            .map(|k| lens.get(k).or(lens.last()).copied().unwrap_or(1).clamp(1, self.sides[k]))
            .collect();
        let count: usize = lens.iter().product();
        let mut out: Vec<usize> = (0..count)
            .map(|mut r| {
                let c: Vec<usize> = lens
                    .iter()
                    .map(|&l| {
                        let x = r % l;
                        r /= l;
                        x
                    })
                    .collect();
                self.site(&c)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Box with sides `lens` around `center`, covering offsets
    /// `-⌊(l-1)/2⌋ ..= l-1-⌊(l-1)/2⌋` on each axis (clipped to the torus side).
    pub fn centered_box(&self, center: usize, lens: &[usize]) -> Vec<usize> {
        let lens: Vec<usize> = (0..self.d)
            .map(|k| lens.get(k).or(lens.last()).copied().unwrap_or(1).clamp(1, self.sides[k]))
            .collect();
        let count: usize = lens.iter().product();
        let mut out: Vec<usize> = (0..count)
            .map(|mut r| {
                let off: Vec<i64> = lens
                    .iter()
                    .map(|&l| {
                        let x = (r % l) as i64 - ((l - 1) / 2) as i64;
                        r /= l;
                        x
                    })
                    .collect();
                self.shift(center, &off)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Sites within sup-distance `radius` of `center` (deduplicated on small tori).
    pub fn ball(&self, center: usize, radius: usize) -> Vec<usize> {
        let r = radius as i64;
        let span = 2 * radius + 1;
        let count = span.pow(self.d as u32);
        let mut out: Vec<usize> = (0..count)
            .map(|mut k| {
                let off: Vec<i64> = (0..self.d)
                    .map(|_| {
                        let x = (k % span) as i64 - r;
                        k /= span;
                        x
                    })
                    .collect();
                self.shift(center, &off)
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub(crate) fn checked_states(q: usize, sites: usize) -> Result<usize> {
    let cap = cap_bits();
    let bits = sites as f64 * (q as f64).log2();
    let limit = 1u64 << cap;
    let mut acc: u64 = 1;
    for _ in 0..sites {
        acc = match acc.checked_mul(q as u64) {
            Some(v) if v <= limit => v,
            _ => {
                return Err(Error::CapExceeded { states: format!("{q}^{sites}"), bits, cap });
            }
        };
    }
    Ok(acc as usize)
}

/// A configuration on a torus, one state per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfig(pub Vec<u8>);

impl SpinConfig {
    pub fn new(geom: &TorusGeometry, states: Vec<u8>) -> Result<Self> {
        if states.len() != geom.volume() {
            return Err(invalid(format!(
                "config has {} entries, torus has {} sites",
                states.len(),
                geom.volume()
            )));
        }
        if let Some(&bad) = states.iter().find(|&&s| s as usize >= geom.q()) {
            return Err(Error::BadValue { value: bad as usize, q: geom.q() });
        }
        Ok(SpinConfig(states))
    }

    pub fn uniform_state(geom: &TorusGeometry, state: u8) -> Result<Self> {
        Self::new(geom, vec![state; geom.volume()])
    }

    pub fn states(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, site: usize) -> usize {
        self.0[site] as usize
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Enumeration key of a configuration: base-q little-endian digits in site order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigIndex(pub usize);

impl ConfigIndex {
    pub fn encode(geom: &TorusGeometry, cfg: &SpinConfig) -> Result<Self> {
        geom.state_count()?;
        let q = geom.q();
        Ok(ConfigIndex(cfg.0.iter().rev().fold(0, |acc, &s| acc * q + s as usize)))
    }

    pub fn decode(self, geom: &TorusGeometry) -> SpinConfig {
        let q = geom.q();
        let mut rest = self.0;
        SpinConfig(
            (0..geom.volume())
                .map(|_| {
                    let s = rest % q;
                    rest /= q;
                    s as u8
                })
                .collect(),
        )
    }
}

/// Digit of `idx` at a site with place value `place`.
#[inline]
pub(crate) fn digit(idx: usize, place: usize, q: usize) -> usize {
    (idx / place) % q
}

/// Local index of the states at `sites` (first site least significant).
#[inline]
pub(crate) fn local_index(idx: usize, sites: &[usize], places: &[usize], q: usize) -> usize {
    sites.iter().rev().fold(0, |acc, &s| acc * q + digit(idx, places[s], q))
}

/// All configurations in `ConfigIndex` order.
pub fn enumerate_configs(geom: &TorusGeometry) -> Result<impl Iterator<Item = SpinConfig> + '_> {
    let n = geom.state_count()?;
    Ok((0..n).map(move |i| ConfigIndex(i).decode(geom)))
}

/// `(translate(cfg, v))(i) = cfg(i - v)`.
pub fn translate(geom: &TorusGeometry, cfg: &SpinConfig, v: &[i64]) -> SpinConfig {
    let mut out = vec![0u8; cfg.len()];
    for (i, &s) in cfg.0.iter().enumerate() {
        out[geom.shift(i, v)] = s;
    }
    SpinConfig(out)
}

/// Permutation of configuration indices induced by translating by `v`.
pub(crate) fn translation_permutation(geom: &TorusGeometry, v: &[i64]) -> Result<Vec<usize>> {
    let n = geom.state_count()?;
    let q = geom.q();
    let places = geom.place_values();
    let target: Vec<usize> = (0..geom.volume()).map(|i| places[geom.shift(i, v)]).collect();
    Ok((0..n)
        .map(|idx| {
            let mut rest = idx;
            let mut out = 0;
            for &p in &target {
                out += (rest % q) * p;
                rest /= q;
            }
            out
        })
        .collect())
}

/// Unit translations generating the torus translation group.
pub(crate) fn all_translations(geom: &TorusGeometry) -> Vec<Vec<i64>> {
    (0..geom.volume())
        .map(|site| geom.coords(site).into_iter().map(|c| c as i64).collect())
        .collect()
}

/// Replace the states on `region` by `values`, keeping `cfg` elsewhere.
pub fn patch(
    geom: &TorusGeometry,
    cfg: &SpinConfig,
    region: &[usize],
    values: &[usize],
) -> Result<SpinConfig> {
    if region.len() != values.len() {
        return Err(invalid("patch region and values differ in length"));
    }
    let mut out = cfg.clone();
    for (&site, &v) in region.iter().zip(values) {
        if v >= geom.q() {
            return Err(Error::BadValue { value: v, q: geom.q() });
        }
        if site >= geom.volume() {
            return Err(invalid(format!("site {site} outside torus")));
        }
        out.0[site] = v as u8;
    }
    Ok(out)
}

/// A finite set of lattice offsets containing the origin, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shape {
    offsets: Vec<Vec<i64>>,
}

impl Shape {
    /// Build from offsets in any order. Returns the shape together with the
    /// permutation `perm` such that sorted position `perm[j]` holds input offset `j`.
    pub fn with_permutation(d: usize, offsets: Vec<Vec<i64>>) -> Result<(Self, Vec<usize>)> {
        if offsets.is_empty() {
            return Err(invalid("shape must be nonempty"));
        }
        if offsets.iter().any(|o| o.len() != d) {
            return Err(invalid(format!("shape offsets must have dimension {d}")));
        }
        let mut order: Vec<usize> = (0..offsets.len()).collect();
        order.sort_by(|&a, &b| offsets[a].cmp(&offsets[b]));
        let sorted: Vec<Vec<i64>> = order.iter().map(|&j| offsets[j].clone()).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("shape has duplicate offsets"));
        }
        if !sorted.iter().any(|o| o.iter().all(|&x| x == 0)) {
            return Err(invalid("shape must contain the origin"));
        }
        let mut perm = vec![0; order.len()];
        for (pos, &j) in order.iter().enumerate() {
            perm[j] = pos;
        }
        Ok((Shape { offsets: sorted }, perm))
    }

    pub fn new(d: usize, offsets: Vec<Vec<i64>>) -> Result<Self> {
        Self::with_permutation(d, offsets).map(|(s, _)| s)
    }

    pub fn origin(d: usize) -> Self {
        Shape { offsets: vec![vec![0; d]] }
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.offsets[0].len()
    }

    /// Sup-norm of the largest offset.
    pub fn range(&self) -> usize {
        self.offsets
            .iter()
            .flat_map(|o| o.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// Position of the origin inside the sorted offsets.
    pub fn origin_position(&self) -> usize {
        self.offsets.iter().position(|o| o.iter().all(|&x| x == 0)).unwrap_or(0)
    }

    /// Shape translated by `-offsets[pos]`, so that offset `pos` becomes the origin.
    pub(crate) fn recentered(&self, pos: usize) -> Vec<Vec<i64>> {
        let base = &self.offsets[pos];
        self.offsets
            .iter()
            .map(|o| o.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// The union with another shape, and the positions of each operand inside it.
    pub fn union(&self, other: &Shape) -> (Shape, Vec<usize>, Vec<usize>) {
        let mut all = self.offsets.clone();
        all.extend(other.offsets.iter().cloned());
        all.sort();
        all.dedup();
        let pos = |s: &Shape| {
            s.offsets
                .iter()
                .map(|o| all.binary_search(o).expect("offset present"))
                .collect::<Vec<_>>()
        };
        let (a, b) = (pos(self), pos(other));
        (Shape { offsets: all }, a, b)
    }

    /// Per-axis extent must stay below the torus side so a translate never
    /// overlaps itself.
    pub fn check_fits(&self, geom: &TorusGeometry) -> Result<()> {
        if self.dim() != geom.d() {
            return Err(Error::RangeError(format!(
                "shape dimension {} differs from torus dimension {}",
                self.dim(),
                geom.d()
            )));
        }
        for (k, &l) in geom.sides().iter().enumerate() {
            let lo = self.offsets.iter().map(|o| o[k]).min().unwrap_or(0);
            let hi = self.offsets.iter().map(|o| o[k]).max().unwrap_or(0);
            if (hi - lo) as usize >= l {
                return Err(Error::RangeError(format!(
                    "shape spans {} sites on axis {} of a torus of side {l}",
                    hi - lo + 1,
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Sites of `base + shape` on the torus, in offset order.
    pub fn sites_at(&self, geom: &TorusGeometry, base: usize) -> Vec<usize> {
        self.offsets.iter().map(|o| geom.shift(base, o)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(sides: &[usize], q: usize) -> TorusGeometry {
        TorusGeometry::new(sides.to_vec(), q).unwrap()
    }

    #[test]
    fn enumeration_order_is_little_endian() {
        let geom = g(&[2], 2);
        let all: Vec<_> = enumerate_configs(&geom).unwrap().collect();
        let expect: Vec<SpinConfig> =
            [[0, 0], [1, 0], [0, 1], [1, 1]].iter().map(|s| SpinConfig(s.to_vec())).collect();
        assert_eq!(all, expect);
        assert_eq!(enumerate_configs(&g(&[1], 3)).unwrap().count(), 3);
    }

    #[test]
    fn decode_matches_div_mod_oracle() {
        let geom = g(&[2, 2], 2);
        assert_eq!(enumerate_configs(&geom).unwrap().count(), 16);
        // repeated div/mod by q
        let (mut rest, mut digits) = (5usize, vec![]);
        for _ in 0..4 {
            digits.push((rest % 2) as u8);
            rest /= 2;
        }
        assert_eq!(digits, vec![1, 0, 1, 0]);
        assert_eq!(ConfigIndex(5).decode(&geom).0, digits);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(g(&[25], 2).state_count(), Err(Error::CapExceeded { .. })));
        assert_eq!(g(&[24], 2).state_count().unwrap(), 1 << 24);
        assert!(matches!(g(&[16], 3).state_count(), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn translate_shifts_cyclically() {
        let geom = g(&[4], 2);
        let cfg = SpinConfig(vec![1, 0, 0, 0]);
        assert_eq!(translate(&geom, &cfg, &[0]), cfg);
        assert_eq!(translate(&geom, &cfg, &[1]).0, vec![0, 1, 0, 0]);
        let mut c = cfg.clone();
        for _ in 0..4 {
            c = translate(&geom, &c, &[1]);
        }
        assert_eq!(c, cfg);
    }

    #[test]
    fn translate_composes() {
        let geom = g(&[3, 2], 3);
        let cfg = SpinConfig(vec![0, 1, 2, 2, 1, 0]);
        let a = translate(&geom, &translate(&geom, &cfg, &[1, 0]), &[2, 1]);
        let b = translate(&geom, &cfg, &[3, 1]);
        assert_eq!(a, b);
    }

    #[test]
    fn patch_cases() {
        let geom = g(&[3], 2);
        let cfg = SpinConfig(vec![0, 0, 0]);
        assert_eq!(patch(&geom, &cfg, &[], &[]).unwrap(), cfg);
        assert_eq!(patch(&geom, &cfg, &[0, 1, 2], &[1, 0, 1]).unwrap().0, vec![1, 0, 1]);
        assert_eq!(patch(&geom, &cfg, &[1], &[1]).unwrap().0, vec![0, 1, 0]);
        assert!(matches!(patch(&geom, &cfg, &[1], &[2]), Err(Error::BadValue { .. })));
    }

    #[test]
    fn shape_canonical_and_checked() {
        let (s, perm) = Shape::with_permutation(1, vec![vec![1], vec![0], vec![-1]]).unwrap();
        assert_eq!(s.offsets(), &[vec![-1], vec![0], vec![1]]);
        assert_eq!(perm, vec![2, 1, 0]);
        assert!(Shape::new(1, vec![vec![1]]).is_err());
        assert!(Shape::new(1, vec![vec![0], vec![0]]).is_err());
        assert!(s.check_fits(&g(&[3], 2)).is_ok());
        assert!(matches!(s.check_fits(&g(&[2], 2)), Err(Error::RangeError(_))));
    }

    #[test]
    fn boxes_and_balls() {
        let geom = g(&[4, 3], 2);
        assert_eq!(geom.box_sites(&[2, 2]), vec![0, 1, 4, 5]);
        assert_eq!(geom.ball(0, 1).len(), 9);
        assert_eq!(g(&[2], 2).ball(0, 1), vec![0, 1]);
        assert_eq!(geom.site(&geom.coords(7)), 7);
    }
}
