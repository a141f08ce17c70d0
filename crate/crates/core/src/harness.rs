//! Batch runner behind the command line: single runs, parameter sweeps,
//! reference oracles and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::codec::{write_ensemble, write_events};
use crate::config::{Experiment, ExperimentConfig};
use crate::diagnostics::{trajectory_report, write_trace_csv, EntropyTrace};
use crate::dynamics::kmc::{gillespie_run, gillespie_snapshots, pca_snapshots};
use crate::dynamics::Dynamics;
use crate::entropy::local_relative_entropy;
use crate::error::{invalid, Error, Result};
use crate::lattice::{SpinConfig, TorusGeometry};
use crate::measure::{ExactMeasure, SampleEnsemble};
use crate::par;
use crate::rng::chain_rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: Error) -> Self {
        let code = if is_cap(&e) { EXIT_CAP } else { EXIT_CONFIG };
        Failure { code, message: e.to_string() }
    }

    fn numeric(e: Error) -> Self {
        let code = if is_cap(&e) { EXIT_CAP } else { EXIT_NUMERIC };
        Failure { code, message: e.to_string() }
    }
}

fn is_cap(e: &Error) -> bool {
    match e {
        Error::CapExceeded { .. } => true,
        Error::AtTime { source, .. } => is_cap(source),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub version: String,
    pub seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<FileRecord>,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn record_file(dir: &Path, name: &str) -> Result<FileRecord> {
    let bytes = fs::read(dir.join(name))?;
    Ok(FileRecord { name: name.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

/// Checks every file of a manifest against its checksum.
pub fn verify_manifest(dir: &Path) -> Result<bool> {
    let m: RunManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    for f in &m.files {
        if record_file(dir, &f.name)? != *f {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Monte Carlo snapshots taken at the trace times.
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub ensembles: Vec<SampleEnsemble>,
    pub events: Option<crate::dynamics::kmc::Trajectory>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: EntropyTrace,
    pub summary: Value,
    pub monte_carlo: Option<MonteCarloResult>,
}

/// Runs the exact trace (and Monte Carlo if configured) without touching the disk.
pub fn execute(exp: &Experiment) -> Result<RunResult> {
    let cfg = &exp.config;
    let trace = trajectory_report(&exp.dynamics, &exp.initial, &exp.reference, &exp.potential, &cfg.times, &cfg.volumes)?;
    let summary = summarize(exp, &trace)?;
    let monte_carlo = match &cfg.monte_carlo {
        None => None,
        Some(mc) => {
            let seed = cfg.seed.ok_or_else(|| invalid("monte_carlo runs need a seed"))?;
            let start = cfg.initial.point_config(&cfg.geometry)?.ok_or_else(|| invalid("monte_carlo needs a point mass"))?;
            Some(run_monte_carlo(&exp.dynamics, &cfg.geometry, &start, &cfg.times, mc.chains, mc.dump_events, seed)?)
        }
    };
    Ok(RunResult { trace, summary, monte_carlo })
}

fn run_monte_carlo(
    dynamics: &Dynamics,
    geom: &TorusGeometry,
    start: &SpinConfig,
    times: &[f64],
    chains: usize,
    dump_events: bool,
    seed: u64,
) -> Result<MonteCarloResult> {
    match dynamics {
        Dynamics::Ips(rates) => {
            let ensembles = gillespie_snapshots(rates, geom, start, times, chains, seed)?;
            let events = if dump_events {
                let horizon = times.iter().cloned().fold(0.0, f64::max);
                Some(gillespie_run(rates, geom, start, horizon, &mut chain_rng(seed, 0))?)
            } else {
                None
            };
            Ok(MonteCarloResult { ensembles, events })
        }
        Dynamics::Pca(kernel) => {
            let steps: Vec<usize> = times.iter().map(|t| *t as usize).collect();
            Ok(MonteCarloResult { ensembles: pca_snapshots(kernel, geom, start, &steps, chains, seed)?, events: None })
        }
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn summarize(exp: &Experiment, trace: &EntropyTrace) -> Result<Value> {
    let geom = &exp.config.geometry;
    let top = trace.rows.iter().map(|r| r.volume).max().unwrap_or(0);
    let largest: Vec<_> = trace.rows.iter().filter(|r| r.volume == top).collect();
    let monotone = largest.windows(2).all(|w| !(w[1].h_density > w[0].h_density + 1e-8));
    let last = largest.last();
    let final_dlr = last.map(|r| r.dlr_residual).unwrap_or(f64::NAN);
    let torus_rows: Vec<_> = trace.rows.iter().filter(|r| r.volume == geom.volume()).collect();
    let identity = if exp.dynamics.is_discrete() || torus_rows.is_empty() {
        Value::Null
    } else {
        let gaps: Vec<f64> = torus_rows
            .iter()
            .map(|r| (r.g_direct - (r.g_rep + r.pairing)).abs())
            .filter(|x| x.is_finite())
            .collect();
        json!({
            "max_discrepancy": finite_or_null(gaps.iter().cloned().fold(0.0, f64::max)),
            "evaluated_rows": gaps.len(),
            "within_1e-9": gaps.iter().all(|&g| g <= 1e-9),
        })
    };
    let rigid = torus_rows.iter().zip(&trace.tv_to_mu).all(|(r, (_, tv))| !(r.g_direct.abs() < 1e-8) || *tv < 1e-6);
    Ok(json!({
        "geometry": geom,
        "volumes": trace.rows.iter().map(|r| r.volume).collect::<std::collections::BTreeSet<_>>(),
        "converged": {
            "h_density_non_increasing": monotone,
            "final_dlr_below_1e-6": final_dlr < 1e-6,
            "loss_identity": identity,
            "small_loss_implies_small_tv": rigid,
        },
        "final": last.map(|r| json!({
            "t": r.t,
            "volume": r.volume,
            "h_density": finite_or_null(r.h_density),
            "g_direct": finite_or_null(r.g_direct),
            "dlr_residual": finite_or_null(r.dlr_residual),
            "delta": finite_or_null(r.delta),
            "martingale_diag": finite_or_null(r.martingale_diag),
        })),
        "witnesses": {
            "dlr": trace.dlr_witnesses,
            "nonnull": trace.nonnull.last(),
        },
        "tv_to_reference": trace.tv_to_mu,
        "weak_distances": trace.weak_distances,
        "origin_marginals": trace.origin_marginals,
        "errors": trace.errors,
    }))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the outputs of a run into `dir` and returns their names.
pub fn write_outputs(exp: &Experiment, res: &RunResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut names = vec!["trace.csv".to_string(), "diagnostics.json".to_string()];
    write_trace_csv(&res.trace, BufWriter::new(fs::File::create(dir.join("trace.csv"))?))?;
    write_json(&dir.join("diagnostics.json"), &res.summary)?;
    if let Some(mc) = &res.monte_carlo {
        let mut w = csv::Writer::from_path(dir.join("mc_marginals.csv"))?;
        w.write_record(["t", "site", "state", "estimate", "std_error", "exact"])?;
        for (k, ens) in mc.ensembles.iter().enumerate() {
            let t = exp.config.times[k];
            let est = ens.estimate_marginal(&[0])?;
            let exact = &res.trace.origin_marginals[k].1;
            for a in 0..est.probs.len() {
                w.write_record([
                    t.to_string(),
                    "0".to_string(),
                    a.to_string(),
                    est.probs[a].to_string(),
                    est.std_errors[a].to_string(),
                    exact[a].to_string(),
                ])?;
            }
            let name = format!("ensemble_{k:03}.bin");
            write_ensemble(ens, BufWriter::new(fs::File::create(dir.join(&name))?))?;
            names.push(name);
        }
        w.flush()?;
        names.insert(2, "mc_marginals.csv".to_string());
        if let Some(tr) = &mc.events {
            write_events(&exp.config.geometry, tr, BufWriter::new(fs::File::create(dir.join("events.bin"))?))?;
            names.push("events.bin".to_string());
        }
    }
    Ok(names)
}

fn write_manifest(dir: &Path, config_bytes: &[u8], seed: Option<u64>, started: u128, names: &[String]) -> Result<()> {
    let files = names.iter().map(|n| record_file(dir, n)).collect::<Result<Vec<_>>>()?;
    let m = RunManifest {
        config_sha256: sha256_hex(config_bytes),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        files,
    };
    write_json(&dir.join("manifest.json"), &m)
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn output_dir(cfg_out: Option<&str>, ov: &Overrides) -> PathBuf {
    ov.out.clone().or_else(|| cfg_out.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(path: &Path) -> std::result::Result<(Vec<u8>, Value), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", path.display()) })?;
    let v = serde_json::from_slice(&bytes).map_err(|e| Failure::config(e.into()))?;
    Ok((bytes, v))
}

/// `run <cfg>`: writes `trace.csv`, `diagnostics.json`, optional Monte Carlo
/// files, and finally `manifest.json`. Returns the output directory.
pub fn cmd_run(path: &Path, ov: &Overrides) -> std::result::Result<PathBuf, Failure> {
    let started = now_ms();
    let (bytes, value) = load_config(path)?;
    let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Failure::config(e.into()))?;
    if ov.seed.is_some() {
        cfg.seed = ov.seed;
    }
    let exp = cfg.prepare().map_err(Failure::config)?;
    let res = execute(&exp).map_err(Failure::numeric)?;
    let dir = output_dir(cfg.output.as_deref(), ov);
    let names = write_outputs(&exp, &res, &dir).map_err(Failure::numeric)?;
    write_manifest(&dir, &bytes, cfg.seed, started, &names).map_err(Failure::numeric)?;
    Ok(dir)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: Value,
    /// JSON pointer into `base` mapped to the values it takes.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    pub output: Option<String>,
}

/// Sets `pointer` inside `v`, creating objects along the way.
pub fn set_pointer(v: &mut Value, pointer: &str, new: Value) -> Result<()> {
    if pointer.is_empty() {
        *v = new;
        return Ok(());
    }
    if !pointer.starts_with('/') {
        return Err(invalid(format!("grid key `{pointer}` is not a JSON pointer")));
    }
    let mut cur = v;
    let parts: Vec<String> = pointer[1..].split('/').map(|p| p.replace("~1", "/").replace("~0", "~")).collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.clone(), new);
                    return Ok(());
                }
                map.entry(part.clone()).or_insert_with(|| json!({}))
            }
            Value::Array(items) => {
                let k: usize = part.parse().map_err(|_| invalid(format!("bad array index `{part}`")))?;
                let slot = items.get_mut(k).ok_or_else(|| invalid(format!("index {k} out of range")))?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
            _ => return Err(invalid(format!("cannot descend into `{part}`"))),
        };
    }
    Ok(())
}

/// Cartesian product of the grid in key order (last key fastest).
pub fn grid_points(grid: &BTreeMap<String, Vec<Value>>) -> Vec<Vec<(String, Value)>> {
    if grid.is_empty() || grid.values().any(|v| v.is_empty()) {
        return Vec::new();
    }
    let mut points = vec![Vec::new()];
    for (k, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p: Vec<(String, Value)>| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub params: Vec<(String, Value)>,
    pub status: String,
    pub final_t: f64,
    pub volume: usize,
    pub final_h_density: f64,
    pub final_g_direct: f64,
    pub final_dlr_residual: f64,
    pub min_delta: f64,
    pub message: String,
}

fn sweep_one(base: &Value, params: &[(String, Value)], seed: Option<u64>) -> (SweepRow, Option<(Experiment, RunResult)>) {
    let mut row = SweepRow {
        params: params.to_vec(),
        status: "ok".into(),
        final_t: f64::NAN,
        volume: 0,
        final_h_density: f64::NAN,
        final_g_direct: f64::NAN,
        final_dlr_residual: f64::NAN,
        min_delta: f64::NAN,
        message: String::new(),
    };
    let attempt = || -> std::result::Result<(Experiment, RunResult), Failure> {
        let mut v = base.clone();
        for (k, x) in params {
            set_pointer(&mut v, k, x.clone()).map_err(Failure::config)?;
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Failure::config(e.into()))?;
        if seed.is_some() {
            cfg.seed = seed;
        }
        let exp = cfg.prepare().map_err(Failure::config)?;
        let res = execute(&exp).map_err(Failure::numeric)?;
        Ok((exp, res))
    };
    match attempt() {
        Ok((exp, res)) => {
            let top = res.trace.rows.iter().map(|r| r.volume).max().unwrap_or(0);
            if let Some(r) = res.trace.rows.iter().rev().find(|r| r.volume == top) {
                row.final_t = r.t;
                row.volume = r.volume;
                row.final_h_density = r.h_density;
                row.final_g_direct = r.g_direct;
                row.final_dlr_residual = r.dlr_residual;
            }
            row.min_delta = res.trace.rows.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
            if !res.trace.errors.is_empty() {
                row.message = format!("{} row errors", res.trace.errors.len());
            }
            (row, Some((exp, res)))
        }
        Err(f) => {
            row.status = match f.code {
                EXIT_CONFIG => "config-error".into(),
                EXIT_CAP => "cap-exceeded".into(),
                _ => "numeric-failure".into(),
            };
            row.message = f.message;
            (row, None)
        }
    }
}

/// Direction of a sequence: `non-increasing`, `non-decreasing`, `constant` or `mixed`.
pub fn trend(values: &[f64]) -> &'static str {
    let up = values.windows(2).all(|w| w[1] >= w[0]);
    let down = values.windows(2).all(|w| w[1] <= w[0]);
    match (up, down) {
        (true, true) => "constant",
        (true, false) => "non-decreasing",
        (false, true) => "non-increasing",
        _ => "mixed",
    }
}

fn trends(keys: &[String], rows: &[SweepRow]) -> Value {
    let mut out = serde_json::Map::new();
    for (ki, key) in keys.iter().enumerate() {
        let mut per_metric = serde_json::Map::new();
        for (metric, get) in [
            ("final_h_density", (|r: &SweepRow| r.final_h_density) as fn(&SweepRow) -> f64),
            ("final_dlr_residual", |r: &SweepRow| r.final_dlr_residual),
            ("min_delta", |r: &SweepRow| r.min_delta),
        ] {
            // group runs that agree on every other key, in grid order
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.status == "ok") {
                let others: Vec<String> =
                    r.params.iter().enumerate().filter(|(j, _)| *j != ki).map(|(_, (_, v))| v.to_string()).collect();
                groups.entry(others.join("|")).or_default().push(get(r));
            }
            let labels: Vec<&str> = groups.values().filter(|g| g.len() >= 2).map(|g| trend(g)).collect();
            let verdict = match labels.first() {
                None => "insufficient",
                Some(first) if labels.iter().all(|l| l == first) => first,
                _ => "mixed",
            };
            per_metric.insert(metric.to_string(), json!(verdict));
        }
        out.insert(key.clone(), Value::Object(per_metric));
    }
    Value::Object(out)
}

/// `sweep <cfg>`: one run per grid point, aggregated into `sweep.csv` and
/// `sweep_summary.json`; each run's own trace goes to `run_NNN/`.
pub fn cmd_sweep(path: &Path, ov: &Overrides) -> std::result::Result<PathBuf, Failure> {
    let started = now_ms();
    let (bytes, value) = load_config(path)?;
    let sweep: SweepConfig = serde_json::from_value(value).map_err(|e| Failure::config(e.into()))?;
    for k in sweep.grid.keys() {
        if !k.starts_with('/') {
            return Err(Failure::config(invalid(format!("grid key `{k}` is not a JSON pointer"))));
        }
    }
    let keys: Vec<String> = sweep.grid.keys().cloned().collect();
    let points = grid_points(&sweep.grid);
    let results = par::map_slice(&points, |p| sweep_one(&sweep.base, p, ov.seed));
    let dir = output_dir(sweep.output.as_deref(), ov);
    let io = |e: Error| Failure::numeric(e);
    fs::create_dir_all(&dir).map_err(|e| io(e.into()))?;
    let mut names = vec!["sweep.csv".to_string(), "sweep_summary.json".to_string()];
    let mut run_names = Vec::new();
    for (k, (_, ok)) in results.iter().enumerate() {
        if let Some((exp, res)) = ok {
            let sub = format!("run_{k:03}");
            let written = write_outputs(exp, res, &dir.join(&sub)).map_err(io)?;
            run_names.extend(written.into_iter().map(|n| format!("{sub}/{n}")));
        }
    }
    let rows: Vec<SweepRow> = results.into_iter().map(|(r, _)| r).collect();
    {
        let mut w = csv::Writer::from_path(dir.join("sweep.csv")).map_err(|e| io(e.into()))?;
        let mut header = vec!["run".to_string()];
        header.extend(keys.iter().cloned());
        header.extend(
            ["status", "final_t", "volume", "final_h_density", "final_g_direct", "final_dlr_residual", "min_delta", "message"]
                .map(String::from),
        );
        w.write_record(&header).map_err(|e| io(e.into()))?;
        for (k, r) in rows.iter().enumerate() {
            let mut rec = vec![k.to_string()];
            rec.extend(r.params.iter().map(|(_, v)| v.to_string()));
            rec.extend([
                r.status.clone(),
                r.final_t.to_string(),
                r.volume.to_string(),
                r.final_h_density.to_string(),
                r.final_g_direct.to_string(),
                r.final_dlr_residual.to_string(),
                r.min_delta.to_string(),
                r.message.clone(),
            ]);
            w.write_record(&rec).map_err(|e| io(e.into()))?;
        }
        w.flush().map_err(|e| io(e.into()))?;
    }
    let succeeded = rows.iter().filter(|r| r.status == "ok").count();
    let summary = json!({
        "runs": rows.len(),
        "succeeded": succeeded,
        "failed": rows.len() - succeeded,
        "keys": keys,
        "trends": trends(&keys, &rows),
        "all_final_dlr_below_1e-6": succeeded > 0 && rows.iter().filter(|r| r.status == "ok").all(|r| r.final_dlr_residual < 1e-6),
    });
    write_json(&dir.join("sweep_summary.json"), &summary).map_err(io)?;
    names.extend(run_names);
    write_manifest(&dir, &bytes, ov.seed, started, &names).map_err(io)?;
    if !rows.is_empty() && succeeded == 0 {
        return Err(Failure { code: EXIT_NUMERIC, message: "every sweep run failed".into() });
    }
    Ok(dir)
}

/// Infinite-volume pressure of the 1d Ising chain from the largest
/// transfer-matrix eigenvalue; with `length`, the periodic chain value
/// `L^{-1} log(λ_+^L + λ_-^L)`.
pub fn oracle_pressure_ising1d(beta: f64, h: f64, length: Option<usize>) -> f64 {
    let root = ((2.0 * beta).exp() * h.sinh().powi(2) + (-2.0 * beta).exp()).sqrt();
    let base = beta.exp() * h.cosh();
    let (lp, lm) = (base + root, base - root);
    match length {
        None => lp.ln(),
        Some(l) => {
            let l = l as i32;
            lp.ln() + (1.0 + (lm / lp).powi(l)).ln() / l as f64
        }
    }
}

/// `P(η_0(t) = η_0(0))` under rate-`rate` flips.
pub fn oracle_flip_marginal(t: f64, rate: f64) -> f64 {
    (1.0 + (-2.0 * rate * t).exp()) / 2.0
}

/// `h(δ_σ | u)` on a chain of `n` sites by summing over every configuration.
pub fn oracle_entropy_pointmass_uniform(n: usize, q: usize) -> Result<f64> {
    let g = TorusGeometry::chain(n, q)?;
    let pm = ExactMeasure::point_mass(&g, &SpinConfig::uniform_state(&g, 0)?)?;
    let u = ExactMeasure::uniform(&g)?;
    local_relative_entropy(&pm, &u, &g.all_sites())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles() {
        assert!((oracle_pressure_ising1d(1.0, 0.0, None) - (2.0 * 1f64.cosh()).ln()).abs() < 1e-15);
        assert!((oracle_flip_marginal(1.0, 1.0) - (1.0 + (-2f64).exp()) / 2.0).abs() < 1e-16);
        assert!((oracle_entropy_pointmass_uniform(4, 2).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-14);
        let g = TorusGeometry::chain(7, 2).unwrap();
        let p = crate::potential::pressure(&crate::potential::Potential::ising(1, 0.8, 0.3), &g).unwrap();
        assert!((p - oracle_pressure_ising1d(0.8, 0.3, Some(7))).abs() < 1e-13);
    }

    #[test]
    fn pointer_and_grid() {
        let mut v = json!({"a": {"b": 1}, "c": [1, 2]});
        set_pointer(&mut v, "/a/b", json!(5)).unwrap();
        set_pointer(&mut v, "/c/1", json!(9)).unwrap();
        set_pointer(&mut v, "/d/e", json!(true)).unwrap();
        assert_eq!(v, json!({"a": {"b": 5}, "c": [1, 9], "d": {"e": true}}));
        assert!(set_pointer(&mut v, "a", json!(1)).is_err());
        let mut grid = BTreeMap::new();
        assert!(grid_points(&grid).is_empty());
        grid.insert("/x".to_string(), vec![json!(1), json!(2)]);
        grid.insert("/y".to_string(), vec![json!("a"), json!("b"), json!("c")]);
        let pts = grid_points(&grid);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![("/x".to_string(), json!(1)), ("/y".to_string(), json!("b"))]);
    }

    #[test]
    fn trends_are_labelled() {
        assert_eq!(trend(&[3.0, 2.0, 2.0]), "non-increasing");
        assert_eq!(trend(&[1.0, 2.0]), "non-decreasing");
        assert_eq!(trend(&[1.0, 1.0]), "constant");
        assert_eq!(trend(&[1.0, 2.0, 1.0]), "mixed");
    }
}
