//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction here splits work into chunks whose boundaries depend only
//! on the input length, never on the thread count, and combines the chunk
//! results left to right. Floating point results are therefore bit-identical
//! whether the `parallel` feature is enabled, disabled, or forced off at
//! runtime with [`set_sequential`].

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed number of items per reduction chunk.
pub const CHUNK: usize = 256;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force every helper onto the calling thread (used by the benches).
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Sizes the global worker pool. Without the `parallel` feature this only
/// validates the argument.
pub fn configure_threads(n: usize) -> Result<(), String> {
    if n == 0 {
        return Err("thread count must be positive".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    Ok(())
}

/// Ordered map over `0..n`.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Ordered map over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Deterministic sum of `f(i)` over `0..n`.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}

/// Deterministic accumulation of per-item contributions into a dense vector
/// of length `len`. `f(i, acc)` adds item `i`'s contribution into `acc`.
pub fn accumulate_range<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    // coarse chunks: each one owns a full output buffer
    let per = n.div_ceil(64).max(CHUNK);
    let chunks = n.div_ceil(per);
    let partial = map_range(chunks, |c| {
        let mut acc = vec![0.0; len];
        let lo = c * per;
        let hi = (lo + per).min(n);
        for i in lo..hi {
            f(i, &mut acc);
        }
        acc
    });
    let mut out = vec![0.0; len];
    for acc in partial {
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a;
        }
    }
    out
}

/// Deterministic maximum of `f(i)` over `0..n` with the lowest index winning ties.
pub fn argmax_range<F>(n: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut best: Option<(usize, f64)> = None;
        for i in lo..hi {
            let v = f(i);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best
    });
    partial.into_iter().flatten().fold(None, |best, (i, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((i, v)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential_bitwise() {
        let f = |i: usize| (i as f64).sin() * 1e-3 + 1.0 / (i as f64 + 1.0);
        set_sequential(false);
        let a = sum_range(10_000, f);
        set_sequential(true);
        let b = sum_range(10_000, f);
        set_sequential(false);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        let v = [1.0, 3.0, 2.0, 3.0];
        assert_eq!(argmax_range(4, |i| v[i]), Some((1, 3.0)));
        assert_eq!(argmax_range(0, |i| v[i]), None);
    }

    #[test]
    fn accumulate_sums_contributions() {
        let out = accumulate_range(1000, 3, |i, acc| acc[i % 3] += 1.0);
        assert_eq!(out, vec![334.0, 333.0, 333.0]);
    }
}
