//! Property tests for the block-sparse layer against dense linear algebra.

use lcmp::graded::{block_svd, merged_truncate, GradedMatrix, GradedVector, SchmidtSpectrum, SectorDims, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn block(rows: usize, cols: usize, seed: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |r, c| {
        let k = (r * cols + c) * 2;
        C64::new(seed[k % seed.len()], seed[(k + 1) % seed.len()])
    })
}

prop_compose! {
    fn graded_matrix()(shift in -1i32..=1, dims in prop::collection::vec(1usize..5, 1..4),
                       cols in prop::collection::vec(1usize..5, 1..4),
                       seed in prop::collection::vec(-1.0f64..1.0, 64)) -> (GradedMatrix, SectorDims, SectorDims) {
        let mut m = GradedMatrix::new(shift);
        let mut rd = SectorDims::new();
        let mut cd = SectorDims::new();
        for (i, (&r, &c)) in dims.iter().zip(cols.iter().cycle()).enumerate() {
            let q = i as i32 - 1;
            m.insert(q, q + shift, block(r, c, &seed[i..])).unwrap();
            rd.insert(q, r);
            cd.insert(q + shift, c);
        }
        (m, rd, cd)
    }
}

proptest! {
    #[test]
    fn block_svd_reconstructs((m, rd, cd) in graded_matrix()) {
        let (x, lam, y) = block_svd(&m).unwrap();
        let rec = x.matmul(&y.scale_rows(&lam).unwrap()).unwrap();
        let dense = m.to_dense(&rd, &cd);
        prop_assert!((rec.to_dense(&rd, &cd) - &dense).norm() < 1e-12 * (1.0 + dense.norm()));
        // singular values match the dense decomposition sector by sector
        for (q, b) in m.iter() {
            let mut s: Vec<f64> = b.clone().singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            let got = lam.sector(q).unwrap();
            for (a, b) in got.iter().zip(&s) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
        // left vectors orthonormal, pivot real positive
        for (_, xb) in x.iter() {
            let g = xb.adjoint() * xb;
            prop_assert!((g - DMatrix::<C64>::identity(xb.ncols(), xb.ncols())).norm() < 1e-12);
            for col in xb.column_iter() {
                let p = col.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
                prop_assert!(p.im.abs() < 1e-12 && p.re > 0.0);
            }
        }
    }

    #[test]
    fn matmul_matches_dense((a, ra, ca) in graded_matrix(), seed in prop::collection::vec(-1.0f64..1.0, 32)) {
        // right factor: identity-shaped blocks on the column space of `a`
        let mut b = GradedMatrix::new(0);
        for (q, d) in ca.iter() {
            b.insert(q, q, block(d, d, &seed)).unwrap();
        }
        let p = a.matmul(&b).unwrap();
        let dense = a.to_dense(&ra, &ca) * b.to_dense(&ca, &ca);
        prop_assert!((p.to_dense(&ra, &ca) - dense).norm() < 1e-12);
    }

    #[test]
    fn matvec_matches_dense((a, ra, ca) in graded_matrix(), seed in prop::collection::vec(-1.0f64..1.0, 16)) {
        let mut v = GradedVector::new();
        for (q, d) in ra.iter() {
            v.insert(q, DVector::from_fn(d, |i, _| C64::new(seed[i % 16], seed[(i + 3) % 16])));
        }
        let left = a.matvec(&v, Side::Left).unwrap();
        let dense = a.to_dense(&ra, &ca).transpose() * v.to_dense(&ra);
        prop_assert!((left.to_dense(&ca) - dense).norm() < 1e-12);

        let mut w = GradedVector::new();
        for (q, d) in ca.iter() {
            w.insert(q, DVector::from_fn(d, |i, _| C64::new(seed[(i + 5) % 16], seed[i % 16])));
        }
        let right = a.matvec(&w, Side::Right).unwrap();
        let dense = a.to_dense(&ra, &ca) * w.to_dense(&ca);
        prop_assert!((right.to_dense(&ra) - dense).norm() < 1e-12);
    }

    #[test]
    fn truncation_keeps_the_largest(values in prop::collection::vec((-2i32..=2, 1e-6f64..1.0), 1..40), k in 1usize..20) {
        let mut by: std::collections::BTreeMap<i32, Vec<f64>> = Default::default();
        for (q, v) in &values {
            by.entry(*q).or_default().push(*v);
        }
        let mut lam = SchmidtSpectrum::from_sectors(by);
        lam.normalize();
        let (kept, report) = merged_truncate(&lam, k);
        let mut all: Vec<f64> = lam.iter().flat_map(|(_, w)| w.to_vec()).collect();
        all.sort_by(|a, b| b.total_cmp(a));
        let n = k.min(all.len());
        prop_assert_eq!(kept.len(), n);
        let dropped: f64 = all[n..].iter().map(|x| x * x).sum();
        prop_assert!((report.discarded_weight - dropped).abs() < 1e-12);
        prop_assert!((kept.total_weight() - 1.0).abs() < 1e-12);
        // every kept value is at least every dropped one (before renormalization)
        let scale = (1.0 - dropped).sqrt();
        let smallest_kept = kept.min_value() * scale;
        prop_assert!(all[n..].iter().all(|&d| d <= smallest_kept + 1e-15));
    }
}
