//! Monte Carlo driver: statistics, file formats and the shift correction.

mod common;

use common::{evolve_density_sz0, window_density_matrix};
use lcmp::harness::{
    aggregate, checkpoint_hash, curve_csv, exhaustive_curve, mc_metadata, parse_curve, run_mc, shift_correction,
    AggregateCurve, CurvePoint, McParams,
};
use lcmp::mps::{evolve_to, neel_init, MpsState, QuenchConfig};
use lcmp::sampler::{assemble_window_state, sample_boundary, sample_rng, WindowSpec};
use lcmp::window::{build_hloc, evolve_and_measure};
use proptest::prelude::*;

fn setup() -> (MpsState, QuenchConfig) {
    let cfg = QuenchConfig::new(0.5, 0.0625, 32, 1.0).unwrap();
    (evolve_to(neel_init(), cfg.t_init, &cfg, |_| {}).unwrap(), cfg)
}

fn params(n_samples: usize, n_workers: usize) -> McParams {
    McParams { l: 2, t_fin: 2.0, delta_t: 0.25, n_max: 20, n_samples, master_seed: 9, n_workers }
}

#[test]
fn aggregate_matches_records_recomputed_by_hand() {
    let (s, cfg) = setup();
    let p = params(40, 3);
    let res = run_mc(&s, &cfg, &p).unwrap();
    assert_eq!(res.records.len(), 40);

    let h = build_hloc(p.l, cfg.delta).unwrap();
    let spec = WindowSpec { l: p.l, t_init: s.time, seed: p.master_seed };
    for r in res.records.iter().step_by(7) {
        let b = sample_boundary(&s, &spec, &mut sample_rng(p.master_seed, r.sample_id)).unwrap();
        assert_eq!((b.alpha, b.beta), (r.alpha, r.beta));
        let psi = assemble_window_state(&s, &spec, &b).unwrap();
        assert_eq!(evolve_and_measure(&psi, &h, &p.evolver(s.time)).unwrap(), r.series);
    }

    for (k, point) in res.curve.grid.iter().enumerate() {
        let xs: Vec<f64> = res.records.iter().map(|r| r.series[k].1).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((point.mean - mean).abs() < 1e-12);
        assert!((point.stderr - sd / n.sqrt()).abs() < 1e-12);
        assert_eq!(point.n_samples, 40);
    }
    assert_eq!(aggregate(&res.records), res.curve);
}

#[test]
fn exhaustive_curve_matches_density_matrix_oracle() {
    let (s, cfg) = setup();
    let p = params(1, 1);
    let ev = p.evolver(s.time);
    let got = exhaustive_curve(&s, &cfg, p.l, &ev).unwrap();
    let rel: Vec<f64> = got.iter().map(|x| x.0 - s.time).collect();
    let want = evolve_density_sz0(&window_density_matrix(&s, p.l), p.l, cfg.delta, &rel);
    for ((t, g), w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12, "t={t}: {g} vs {w}");
    }
}

#[test]
fn monte_carlo_is_consistent_with_the_exhaustive_sum() {
    let (s, cfg) = setup();
    let p = params(3000, 4);
    let exact = exhaustive_curve(&s, &cfg, p.l, &p.evolver(s.time)).unwrap();
    let res = run_mc(&s, &cfg, &p).unwrap();
    for (pt, (t, e)) in res.curve.grid.iter().zip(&exact) {
        assert!((pt.t - t).abs() < 1e-12);
        let z = (pt.mean - e) / pt.stderr.max(1e-15);
        assert!(z.abs() < 4.5 || (pt.mean - e).abs() < 1e-12, "t={t}: z={z}");
    }
}

#[test]
fn curve_file_round_trips_and_is_worker_independent() {
    let (s, cfg) = setup();
    let hash = checkpoint_hash(&s, &cfg);
    let texts: Vec<String> = [1, 2, 5]
        .iter()
        .map(|&w| {
            let p = params(12, w);
            curve_csv(&mc_metadata(&cfg, s.time, &p, &hash), &run_mc(&s, &cfg, &p).unwrap().curve)
        })
        .collect();
    assert!(texts.windows(2).all(|w| w[0] == w[1]));

    let (meta, curve) = parse_curve(&texts[0]).unwrap();
    assert_eq!(meta["checkpoint_sha256"], hash.as_str());
    assert_eq!(meta["n_samples"], 12);
    assert_eq!(curve, run_mc(&s, &cfg, &params(12, 1)).unwrap().curve);
}

#[test]
fn invalid_runs_are_config_errors() {
    let (s, cfg) = setup();
    for p in [
        McParams { t_fin: 0.5, ..params(4, 1) },
        McParams { n_samples: 0, ..params(4, 1) },
        McParams { n_workers: 0, ..params(4, 1) },
        McParams { l: 0, ..params(4, 1) },
    ] {
        assert_eq!(run_mc(&s, &cfg, &p).unwrap_err().exit_code(), 2, "{p:?}");
    }
}

fn curve_of(points: &[(f64, f64)]) -> AggregateCurve {
    AggregateCurve { grid: points.iter().map(|&(t, mean)| CurvePoint { t, mean, stderr: 0.01, n_samples: 100 }).collect() }
}

proptest! {
    #[test]
    fn shift_minimizes_rms_over_the_overlap(values in prop::collection::vec(-0.5f64..0.5, 8..40),
                                            offset in -0.2f64..0.2, overlap in 3usize..8) {
        let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (i as f64 * 0.25, v)).collect();
        let reference: Vec<(f64, f64)> =
            pts.iter().map(|&(t, v)| (t, v + offset + 0.01 * (t * 7.0).sin())).collect();
        let curve = curve_of(&pts);
        let (fixed, c) = shift_correction(&curve, &reference, overlap).unwrap();

        let rms = |cv: &AggregateCurve, extra: f64| -> f64 {
            (cv.grid.iter().take(overlap).zip(&reference).map(|(p, r)| (r.1 - p.mean - extra).powi(2)).sum::<f64>()
                / overlap as f64).sqrt()
        };
        let best = rms(&fixed, 0.0);
        prop_assert!(best <= rms(&curve, 0.0) + 1e-15);
        for eps in [-1e-3, 1e-3] {
            prop_assert!(best <= rms(&fixed, eps) + 1e-15);
        }
        // residual has zero mean over the overlap, and everything else is a
        // rigid shift by c
        let resid: f64 = fixed.grid.iter().take(overlap).zip(&reference).map(|(p, r)| r.1 - p.mean).sum();
        prop_assert!(resid.abs() < 1e-12);
        for (a, b) in fixed.grid.iter().zip(&curve.grid) {
            prop_assert!((a.mean - b.mean - c).abs() < 1e-15);
            prop_assert_eq!(a.stderr, b.stderr);
        }
    }
}

#[test]
fn shift_needs_three_overlapping_points() {
    let curve = curve_of(&[(0.0, 0.1), (0.5, 0.2), (1.0, 0.3), (1.5, 0.4)]);
    let reference = [(0.9, 0.0), (2.0, 0.0)];
    assert_eq!(shift_correction(&curve, &reference, 4).unwrap_err().exit_code(), 2);
}
