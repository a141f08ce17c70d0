//! Binary formats for sample ensembles and Gillespie event logs.
//!
//! Ensemble (`EFENS001`): magic, `u32` dimension, `u32` sides, `u32` q,
//! `u64` sample count, `u8` weight flag, then every sample packed with
//! `ceil(log2 q)` bits per site (least significant bits first, each sample
//! padded to a whole byte), then `f64` weights if flagged.
//!
//! Event log (`EFEVT001`): magic, geometry as above, `f64` horizon, packed
//! initial configuration, `u64` event count, then per event `f64` time,
//! `u32` site count and `(u32 site, u8 value)` pairs. All integers and
//! floats are little-endian.

use std::io::{Read, Write};

use crate::dynamics::kmc::{Event, Trajectory};
use crate::error::{invalid, Result};
use crate::lattice::{SpinConfig, TorusGeometry};
use crate::measure::SampleEnsemble;

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"EFENS001";
pub const EVENTS_MAGIC: &[u8; 8] = b"EFEVT001";

/// Bits per packed state.
pub fn state_bits(q: usize) -> usize {
    (usize::BITS - (q.max(2) - 1).leading_zeros()) as usize
}

fn pack(cfg: &SpinConfig, bits: usize) -> Vec<u8> {
    let mut out = vec![0u8; (cfg.len() * bits).div_ceil(8)];
    for (i, &v) in cfg.states().iter().enumerate() {
        for b in 0..bits {
            if (v >> b) & 1 == 1 {
                let pos = i * bits + b;
                out[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    out
}

fn unpack(bytes: &[u8], sites: usize, bits: usize, q: usize) -> Result<SpinConfig> {
    let mut states = Vec::with_capacity(sites);
    for i in 0..sites {
        let mut v = 0usize;
        for b in 0..bits {
            let pos = i * bits + b;
            v |= (((bytes[pos / 8] >> (pos % 8)) & 1) as usize) << b;
        }
        if v >= q {
            return Err(crate::Error::BadValue { value: v, q });
        }
        states.push(v as u8);
    }
    Ok(SpinConfig(states))
}

fn write_geometry<W: Write>(w: &mut W, geom: &TorusGeometry) -> Result<()> {
    w.write_all(&(geom.d() as u32).to_le_bytes())?;
    for &s in geom.sides() {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    w.write_all(&(geom.q() as u32).to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_geometry<R: Read>(r: &mut R) -> Result<TorusGeometry> {
    let d = read_u32(r)? as usize;
    if d == 0 || d > 8 {
        return Err(invalid(format!("implausible dimension {d}")));
    }
    let sides = (0..d).map(|_| read_u32(r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
    let q = read_u32(r)? as usize;
    TorusGeometry::new(sides, q)
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(invalid("bad magic number"));
    }
    Ok(())
}

pub fn write_ensemble<W: Write>(ens: &SampleEnsemble, mut w: W) -> Result<()> {
    w.write_all(ENSEMBLE_MAGIC)?;
    write_geometry(&mut w, &ens.geom)?;
    w.write_all(&(ens.samples.len() as u64).to_le_bytes())?;
    w.write_all(&[ens.weights.is_some() as u8])?;
    let bits = state_bits(ens.geom.q());
    for s in &ens.samples {
        w.write_all(&pack(s, bits))?;
    }
    if let Some(ws) = &ens.weights {
        for x in ws {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ensemble<R: Read>(mut r: R) -> Result<SampleEnsemble> {
    check_magic(&mut r, ENSEMBLE_MAGIC)?;
    let geom = read_geometry(&mut r)?;
    let count = read_u64(&mut r)? as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let bits = state_bits(geom.q());
    let n = geom.volume();
    let mut buf = vec![0u8; (n * bits).div_ceil(8)];
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        samples.push(unpack(&buf, n, bits, geom.q())?);
    }
    let weights = match flag[0] {
        0 => None,
        1 => Some((0..count).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?),
        _ => return Err(invalid("bad weight flag")),
    };
    SampleEnsemble::new(geom, samples, weights)
}

pub fn write_events<W: Write>(geom: &TorusGeometry, traj: &Trajectory, mut w: W) -> Result<()> {
    w.write_all(EVENTS_MAGIC)?;
    write_geometry(&mut w, geom)?;
    w.write_all(&traj.horizon.to_le_bytes())?;
    w.write_all(&pack(&traj.initial, state_bits(geom.q())))?;
    w.write_all(&(traj.events.len() as u64).to_le_bytes())?;
    for e in &traj.events {
        w.write_all(&e.time.to_le_bytes())?;
        w.write_all(&(e.sites.len() as u32).to_le_bytes())?;
        for (&s, &v) in e.sites.iter().zip(&e.values) {
            w.write_all(&(s as u32).to_le_bytes())?;
            w.write_all(&[v])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(mut r: R) -> Result<(TorusGeometry, Trajectory)> {
    check_magic(&mut r, EVENTS_MAGIC)?;
    let geom = read_geometry(&mut r)?;
    let horizon = read_f64(&mut r)?;
    let bits = state_bits(geom.q());
    let mut buf = vec![0u8; (geom.volume() * bits).div_ceil(8)];
    r.read_exact(&mut buf)?;
    let initial = unpack(&buf, geom.volume(), bits, geom.q())?;
    let count = read_u64(&mut r)? as usize;
    let mut events = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let time = read_f64(&mut r)?;
        let k = read_u32(&mut r)? as usize;
        let mut sites = Vec::with_capacity(k);
        let mut values = Vec::with_capacity(k);
        for _ in 0..k {
            let s = read_u32(&mut r)? as usize;
            let mut v = [0u8; 1];
            r.read_exact(&mut v)?;
            if s >= geom.volume() || v[0] as usize >= geom.q() {
                return Err(invalid("event out of range"));
            }
            sites.push(s);
            values.push(v[0]);
        }
        events.push(Event { time, sites, values });
    }
    Ok((geom, Trajectory { initial, events, horizon }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::kmc::gillespie_run;
    use crate::dynamics::models::inf_temp_flip;
    use crate::rng::chain_rng;

    #[test]
    fn bits() {
        assert_eq!(state_bits(2), 1);
        assert_eq!(state_bits(3), 2);
        assert_eq!(state_bits(4), 2);
        assert_eq!(state_bits(5), 3);
        assert_eq!(state_bits(256), 8);
    }

    #[test]
    fn ensemble_round_trip() {
        let g = TorusGeometry::new(vec![3, 3], 3).unwrap();
        let samples: Vec<SpinConfig> = (0..7).map(|k| SpinConfig((0..9).map(|i| ((i * k + 1) % 3) as u8).collect())).collect();
        let plain = SampleEnsemble::new(g.clone(), samples.clone(), None).unwrap();
        let mut buf = Vec::new();
        write_ensemble(&plain, &mut buf).unwrap();
        assert_eq!(&buf[..8], ENSEMBLE_MAGIC);
        assert_eq!(read_ensemble(&buf[..]).unwrap(), plain);
        let w: Vec<f64> = (1..=7).map(|k| k as f64 / 28.0).collect();
        let weighted = SampleEnsemble::new(g, samples, Some(w)).unwrap();
        let mut buf = Vec::new();
        write_ensemble(&weighted, &mut buf).unwrap();
        assert_eq!(read_ensemble(&buf[..]).unwrap(), weighted);
        buf[0] = b'X';
        assert!(read_ensemble(&buf[..]).is_err());
    }

    #[test]
    fn event_round_trip() {
        let g = TorusGeometry::chain(6, 2).unwrap();
        let rates = inf_temp_flip(1, 2, 1.0).unwrap();
        let mut rng = chain_rng(3, 0);
        let traj = gillespie_run(&rates, &g, &SpinConfig(vec![0; 6]), 2.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_events(&g, &traj, &mut buf).unwrap();
        let (g2, t2) = read_events(&buf[..]).unwrap();
        assert_eq!(g2, g);
        assert_eq!(t2, traj);
        assert!(read_events(&buf[..buf.len() - 1]).is_err());
    }
}
