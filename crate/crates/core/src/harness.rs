//! Two-phase experiment driver: iTEBD up to `t_init`, then light-cone Monte
//! Carlo from the checkpoint, statistics, peaks and the constant shift
//! correction.
//!
//! Output files are CSV with a single `#`-prefixed JSON metadata line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::checkpoint::{encode, save_checkpoint};
use crate::error::{Error, Result};
use crate::mps::{evolve_to, neel_init, observe, MpsState, QuenchConfig, StepRecord};
use crate::sampler::{
    assemble_window_state, enumerate_boundary_pairs, sample_boundary, sample_rng, window_amplitudes, SchmidtIndex,
    WindowSpec,
};
use crate::window::{build_hloc, evolve_and_measure, EvolverParams, SparseWindowHamiltonian, WindowState};

/// One Monte Carlo sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub alpha: SchmidtIndex,
    pub beta: SchmidtIndex,
    /// `(t, ⟨Sz_0⟩)` on the fixed grid.
    pub series: Vec<(f64, f64)>,
    /// Master seed the per-sample stream was derived from.
    pub worker_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub mean: f64,
    /// `NaN` when there is a single sample.
    pub stderr: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregateCurve {
    pub grid: Vec<CurvePoint>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub height: f64,
    pub stderr: f64,
}

/// Monte Carlo run parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct McParams {
    pub l: usize,
    pub t_fin: f64,
    pub delta_t: f64,
    pub n_max: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    pub n_workers: usize,
}

impl McParams {
    pub fn evolver(&self, t_init: f64) -> EvolverParams {
        EvolverParams { t_init, delta_t: self.delta_t, n_max: self.n_max, t_fin: self.t_fin }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    pub curve: AggregateCurve,
    pub records: Vec<SampleRecord>,
}

/// Evolve the Néel state to `config.t_init`, returning the final state and
/// one record per Trotter step, preceded by the initial observation.
pub fn itebd_curve(config: &QuenchConfig) -> Result<(MpsState, Vec<StepRecord>)> {
    config.validate()?;
    let mut rows = vec![observe(&neel_init())];
    let state = evolve_to(neel_init(), config.t_init, config, |r| rows.push(r.clone()))?;
    Ok((state, rows))
}

pub fn itebd_csv(rows: &[StepRecord]) -> String {
    let mut out = String::from("t,sz0,sz1,discarded_weight,entropy_A,entropy_B\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.time, r.sz0, r.sz1, r.discarded_weight, r.entropy_a, r.entropy_b)
            .expect("string write");
    }
    out
}

/// Run the iTEBD phase, writing the checkpoint and the per-step curve.
pub fn run_itebd(config: &QuenchConfig, out_checkpoint: &Path, out_curve: &Path) -> Result<MpsState> {
    let (state, rows) = itebd_curve(config)?;
    save_checkpoint(&state, config, out_checkpoint)?;
    fs::write(out_curve, itebd_csv(&rows))?;
    Ok(state)
}

/// Git-style content hash: SHA-256 of `"blob <len>\0" ++ bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn check_mc(state: &MpsState, config: &QuenchConfig, p: &McParams) -> Result<Vec<f64>> {
    WindowSpec { l: p.l, t_init: state.time, seed: p.master_seed }.validate(config.k_max)?;
    if !(p.t_fin > state.time) {
        return Err(Error::Config(format!("t_fin {} must exceed the checkpoint time {}", p.t_fin, state.time)));
    }
    if p.n_samples == 0 || p.n_workers == 0 {
        return Err(Error::Config("need at least one sample and one worker".into()));
    }
    p.evolver(state.time).grid()
}

fn one_sample(
    state: &MpsState,
    spec: &WindowSpec,
    h: &SparseWindowHamiltonian,
    ev: &EvolverParams,
    sample_id: u64,
) -> Result<SampleRecord> {
    let mut rng = sample_rng(spec.seed, sample_id);
    let sample = sample_boundary(state, spec, &mut rng)?;
    let psi = assemble_window_state(state, spec, &sample)?;
    let series = evolve_and_measure(&psi, h, ev)?;
    Ok(SampleRecord { sample_id, alpha: sample.alpha, beta: sample.beta, series, worker_seed: spec.seed })
}

/// Light-cone Monte Carlo from a checkpointed state.
///
/// Sample `k` always uses the random stream `(master_seed, k)`; workers get
/// contiguous blocks of sample ids and results are reduced in id order, so
/// the output does not depend on the worker count.
pub fn run_mc(state: &MpsState, config: &QuenchConfig, p: &McParams) -> Result<McResult> {
    check_mc(state, config, p)?;
    let spec = WindowSpec { l: p.l, t_init: state.time, seed: p.master_seed };
    let h = build_hloc(p.l, config.delta)?;
    let ev = p.evolver(state.time);
    let n = p.n_samples as u64;
    let workers = (p.n_workers as u64).min(n);
    let per = n.div_ceil(workers);

    let blocks: Vec<Result<Vec<SampleRecord>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (spec, h, ev) = (&spec, &h, &ev);
                scope.spawn(move || {
                    (w * per..((w + 1) * per).min(n)).map(|id| one_sample(state, spec, h, ev, id)).collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut records = Vec::with_capacity(p.n_samples);
    for b in blocks {
        records.extend(b?);
    }
    Ok(McResult { curve: aggregate(&records), records })
}

/// Mean and standard error `sd / √n` per grid point, summed in record order.
pub fn aggregate(records: &[SampleRecord]) -> AggregateCurve {
    let Some(first) = records.first() else {
        return AggregateCurve::default();
    };
    let n = records.len();
    let grid = first
        .series
        .iter()
        .enumerate()
        .map(|(k, &(t, _))| {
            let mean = records.iter().map(|r| r.series[k].1).sum::<f64>() / n as f64;
            let stderr = if n < 2 {
                f64::NAN
            } else {
                let var = records.iter().map(|r| (r.series[k].1 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            };
            CurvePoint { t, mean, stderr, n_samples: n }
        })
        .collect();
    AggregateCurve { grid }
}

/// Exact light-cone curve: every boundary pair weighted by its probability.
pub fn exhaustive_curve(state: &MpsState, config: &QuenchConfig, l: usize, ev: &EvolverParams) -> Result<Vec<(f64, f64)>> {
    let h = build_hloc(l, config.delta)?;
    let grid = ev.grid()?;
    let mut acc = vec![0.0; grid.len()];
    let mut total = 0.0;
    for (alpha, beta, w) in enumerate_boundary_pairs(state, l)? {
        let psi = WindowState::from_amplitudes(l, window_amplitudes(state, l, alpha, beta)?)?;
        for (a, (_, v)) in acc.iter_mut().zip(evolve_and_measure(&psi, &h, ev)?) {
            *a += w * v;
        }
        total += w;
    }
    Ok(grid.into_iter().zip(acc).map(|(t, a)| (t, a / total)).collect())
}

/// Strictly interior local maxima of `|mean|`.
pub fn extract_peaks(curve: &AggregateCurve) -> Vec<Peak> {
    curve
        .grid
        .windows(3)
        .filter(|w| w[1].mean.abs() > w[0].mean.abs() && w[1].mean.abs() > w[2].mean.abs())
        .map(|w| Peak { t: w[1].t, height: w[1].mean.abs(), stderr: w[1].stderr })
        .collect()
}

/// Linear interpolation of a `(t, value)` series sorted by time; `None`
/// outside its range.
pub fn interpolate(series: &[(f64, f64)], t: f64) -> Option<f64> {
    let tol = 1e-9;
    let i = series.partition_point(|&(s, _)| s < t - tol);
    let &(t1, v1) = series.get(i)?;
    if (t1 - t).abs() <= tol {
        return Some(v1);
    }
    let &(t0, v0) = series.get(i.checked_sub(1)?)?;
    Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
}

/// Default overlap: the first quarter of the grid, at least three points.
pub fn default_overlap(curve: &AggregateCurve) -> usize {
    (curve.grid.len() / 4).max(3)
}

/// Shift the curve by `c = mean(reference − mean)` over its first `overlap`
/// grid points. Returns the corrected curve and `c`.
pub fn shift_correction(
    curve: &AggregateCurve,
    reference: &[(f64, f64)],
    overlap: usize,
) -> Result<(AggregateCurve, f64)> {
    let diffs: Vec<f64> = curve
        .grid
        .iter()
        .take(overlap)
        .filter_map(|p| interpolate(reference, p.t).map(|r| r - p.mean))
        .collect();
    if diffs.len() < 3 {
        return Err(Error::Config(format!(
            "shift correction needs at least 3 overlapping grid points, found {}",
            diffs.len()
        )));
    }
    let c = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let grid = curve.grid.iter().map(|p| CurvePoint { mean: p.mean + c, ..*p }).collect();
    Ok((AggregateCurve { grid }, c))
}

fn meta_line(meta: &Value) -> String {
    format!("# {}\n", serde_json::to_string(meta).expect("metadata serializes"))
}

/// Metadata echoed in Monte Carlo outputs; the worker count is left out on
/// purpose so that outputs are comparable across it.
pub fn mc_metadata(config: &QuenchConfig, t_init: f64, p: &McParams, checkpoint_hash: &str) -> Value {
    json!({
        "kind": "lightcone_mc",
        "delta": config.delta,
        "dt": config.dt,
        "k_max": config.k_max,
        "t_init": t_init,
        "l": p.l,
        "t_fin": p.t_fin,
        "delta_t": p.delta_t,
        "n_max": p.n_max,
        "n_samples": p.n_samples,
        "master_seed": p.master_seed,
        "checkpoint_sha256": checkpoint_hash,
        "shift": Value::Null,
    })
}

pub fn curve_csv(meta: &Value, curve: &AggregateCurve) -> String {
    let mut out = meta_line(meta);
    out.push_str("t,mean_sz0,stderr,n_samples\n");
    for p in &curve.grid {
        writeln!(out, "{},{},{},{}", p.t, p.mean, p.stderr, p.n_samples).expect("string write");
    }
    out
}

pub fn peaks_csv(meta: &Value, peaks: &[Peak]) -> String {
    let mut out = meta_line(meta);
    out.push_str("t_peak,height,stderr\n");
    for p in peaks {
        writeln!(out, "{},{},{}", p.t, p.height, p.stderr).expect("string write");
    }
    out
}

/// Hash of the serialized checkpoint, as written by [`run_itebd`].
pub fn checkpoint_hash(state: &MpsState, config: &QuenchConfig) -> String {
    content_hash(&encode(state, config))
}

/// Parse a CSV with an optional `#` metadata line and a header row into
/// its metadata and numeric rows.
pub fn parse_csv(text: &str) -> Result<(Value, Vec<Vec<f64>>)> {
    let mut meta = Value::Null;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(m) = line.strip_prefix('#') {
            if meta.is_null() {
                meta = serde_json::from_str(m.trim()).unwrap_or(Value::Null);
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line.split(',').next().is_some_and(|f| f.trim().parse::<f64>().is_err()) {
                continue;
            }
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", n + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((meta, rows))
}

/// Read a Monte Carlo curve written by [`curve_csv`].
pub fn parse_curve(text: &str) -> Result<(Value, AggregateCurve)> {
    let (meta, rows) = parse_csv(text)?;
    let grid = rows
        .iter()
        .map(|r| match r.as_slice() {
            [t, mean, stderr, n, ..] => Ok(CurvePoint { t: *t, mean: *mean, stderr: *stderr, n_samples: *n as usize }),
            _ => Err(Error::Parse("curve rows need t, mean_sz0, stderr, n_samples".into())),
        })
        .collect::<Result<_>>()?;
    Ok((meta, AggregateCurve { grid }))
}

/// Read a reference curve: the first two columns of any CSV, for example
/// the iTEBD curve `(t, sz0, …)`.
pub fn parse_reference(text: &str) -> Result<Vec<(f64, f64)>> {
    let (_, rows) = parse_csv(text)?;
    let mut series: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| match r.as_slice() {
            [t, v, ..] => Ok((*t, *v)),
            _ => Err(Error::Parse("reference rows need at least two columns".into())),
        })
        .collect::<Result<_>>()?;
    series.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[(f64, f64)]) -> AggregateCurve {
        AggregateCurve {
            grid: points.iter().map(|&(t, mean)| CurvePoint { t, mean, stderr: 0.01, n_samples: 10 }).collect(),
        }
    }

    #[test]
    fn peaks_of_cosine() {
        let pts: Vec<(f64, f64)> = (0..=1000).map(|k| 0.01 * k as f64).map(|t| (t, t.cos() / 2.0)).collect();
        let peaks = extract_peaks(&curve(&pts));
        assert_eq!(peaks.len(), 3);
        for (k, p) in peaks.iter().enumerate() {
            assert!((p.t - (k + 1) as f64 * std::f64::consts::PI).abs() < 0.01);
            assert!((p.height - 0.5).abs() < 1e-4);
        }
    }

    #[test]
    fn monotone_curve_has_no_peaks() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 0.5 - 0.01 * k as f64)).collect();
        assert!(extract_peaks(&curve(&pts)).is_empty());
    }

    #[test]
    fn constant_offset_is_removed() {
        let reference: Vec<(f64, f64)> = (0..40).map(|k| 0.25 * k as f64).map(|t| (t, (2.0 * t).sin())).collect();
        let mc = curve(&reference.iter().map(|&(t, v)| (t, v + 0.003)).collect::<Vec<_>>());
        let (fixed, c) = shift_correction(&mc, &reference, default_overlap(&mc)).unwrap();
        assert!((c + 0.003).abs() < 1e-12);
        for (p, r) in fixed.grid.iter().zip(&reference) {
            assert!((p.mean - r.1).abs() < 1e-12);
        }
        let (_, c0) = shift_correction(&curve(&reference), &reference, 10).unwrap();
        assert_eq!(c0, 0.0);
        assert!(shift_correction(&mc, &[], 10).is_err());
    }

    #[test]
    fn interpolation() {
        let s = [(0.0, 0.0), (1.0, 2.0)];
        assert_eq!(interpolate(&s, 0.25), Some(0.5));
        assert_eq!(interpolate(&s, 1.0), Some(2.0));
        assert_eq!(interpolate(&s, 1.5), None);
    }

    #[test]
    fn single_sample_flags_stderr() {
        let r = SampleRecord {
            sample_id: 0,
            alpha: SchmidtIndex { charge: 0, index: 0 },
            beta: SchmidtIndex { charge: 0, index: 0 },
            series: vec![(0.0, 0.5), (1.0, 0.25)],
            worker_seed: 1,
        };
        let c = aggregate(&[r]);
        assert!(c.grid.iter().all(|p| p.stderr.is_nan() && p.n_samples == 1));
        let text = curve_csv(&json!({}), &c);
        let (_, back) = parse_curve(&text).unwrap();
        assert!(back.grid[1].stderr.is_nan());
        assert_eq!(back.grid[1].mean, 0.25);
    }

    #[test]
    fn neel_checkpoint_itebd_curve() {
        let cfg = QuenchConfig::new(0.5, 0.0625, 16, 0.0).unwrap();
        let (_, rows) = itebd_curve(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].sz0, 0.5);
    }
}
