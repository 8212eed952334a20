//! U(1)-graded linear algebra.
//!
//! Every bond index of the matrix product state carries a conserved charge:
//! the number of up spins to the left of the bond, counted relative to the
//! Néel reference configuration. Matrices that act between bond spaces only
//! connect sectors whose charges differ by a fixed `charge_shift`, so all
//! dense work happens block by block.
//!
//! Blocks are stored in [`BTreeMap`]s keyed by charge, which gives a fixed
//! iteration order and therefore reproducible floating-point results.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Bond charge in units of single spin flips.
pub type SectorCharge = i32;

/// Singular values smaller than this fraction of the largest one are treated
/// as round-off and dropped before truncation.
pub const SVD_FLOOR: f64 = 1e-14;

/// Dimension of each charge sector of a bond space.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SectorDims(BTreeMap<SectorCharge, usize>);

impl SectorDims {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, q: SectorCharge, dim: usize) {
        if dim > 0 {
            self.0.insert(q, dim);
        } else {
            self.0.remove(&q);
        }
    }

    pub fn get(&self, q: SectorCharge) -> usize {
        self.0.get(&q).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectorCharge, usize)> + '_ {
        self.0.iter().map(|(&q, &d)| (q, d))
    }

    /// Offset of each sector in the densified (charge-ordered) basis.
    pub fn offsets(&self) -> BTreeMap<SectorCharge, usize> {
        let mut acc = 0;
        self.0
            .iter()
            .map(|(&q, &d)| {
                let off = acc;
                acc += d;
                (q, off)
            })
            .collect()
    }
}

/// Which side of a matrix a vector is multiplied on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Row vector times matrix, `v · M`. Charges move by `+shift`.
    Left,
    /// Matrix times column vector, `M · v`. Charges move by `-shift`.
    Right,
}

/// A vector whose entries are grouped into charge sectors. Absent sectors
/// are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradedVector {
    blocks: BTreeMap<SectorCharge, DVector<C64>>,
}

impl GradedVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit vector `e_index` in sector `q` of a space with the given dims.
    pub fn basis(q: SectorCharge, index: usize, dim: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        let mut out = Self::new();
        out.blocks.insert(q, v);
        out
    }

    pub fn insert(&mut self, q: SectorCharge, block: DVector<C64>) {
        if block.is_empty() {
            self.blocks.remove(&q);
        } else {
            self.blocks.insert(q, block);
        }
    }

    pub fn block(&self, q: SectorCharge) -> Option<&DVector<C64>> {
        self.blocks.get(&q)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectorCharge, &DVector<C64>)> + '_ {
        self.blocks.iter().map(|(&q, b)| (q, b))
    }

    pub fn charges(&self) -> impl Iterator<Item = SectorCharge> + '_ {
        self.blocks.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.values().map(|b| b.norm_squared()).sum()
    }

    pub fn scale(&mut self, factor: C64) {
        for b in self.blocks.values_mut() {
            *b *= factor;
        }
    }

    /// Bilinear pairing `Σ_q Σ_i u_i v_i` without conjugation.
    pub fn dot(&self, other: &GradedVector) -> C64 {
        self.blocks
            .iter()
            .filter_map(|(q, a)| other.blocks.get(q).map(|b| a.dot(b)))
            .sum()
    }

    pub fn to_dense(&self, dims: &SectorDims) -> DVector<C64> {
        let offsets = dims.offsets();
        let mut out = DVector::zeros(dims.total());
        for (q, b) in &self.blocks {
            let off = offsets[q];
            out.rows_mut(off, b.len()).copy_from(b);
        }
        out
    }
}

/// A block matrix with the selection rule `col_charge = row_charge + shift`.
///
/// Blocks are keyed by their row charge; an absent block is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedMatrix {
    shift: SectorCharge,
    blocks: BTreeMap<SectorCharge, DMatrix<C64>>,
}

impl GradedMatrix {
    pub fn new(shift: SectorCharge) -> Self {
        Self { shift, blocks: BTreeMap::new() }
    }

    /// Identity on a bond space.
    pub fn identity(dims: &SectorDims) -> Self {
        let mut m = Self::new(0);
        for (q, d) in dims.iter() {
            m.blocks.insert(q, DMatrix::identity(d, d));
        }
        m
    }

    pub fn charge_shift(&self) -> SectorCharge {
        self.shift
    }

    /// Store a block, rejecting any that breaks the selection rule.
    pub fn insert(&mut self, row: SectorCharge, col: SectorCharge, block: DMatrix<C64>) -> Result<()> {
        if col != row + self.shift {
            return Err(Error::SelectionRule { row, col, shift: self.shift });
        }
        self.insert_row(row, block);
        Ok(())
    }

    /// Store a block by its row charge.
    pub fn insert_row(&mut self, row: SectorCharge, block: DMatrix<C64>) {
        if block.nrows() == 0 || block.ncols() == 0 {
            self.blocks.remove(&row);
        } else {
            self.blocks.insert(row, block);
        }
    }

    pub fn block(&self, row: SectorCharge) -> Option<&DMatrix<C64>> {
        self.blocks.get(&row)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectorCharge, &DMatrix<C64>)> + '_ {
        self.blocks.iter().map(|(&q, b)| (q, b))
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.blocks.values().map(|b| b.norm_squared()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks
            .values()
            .all(|b| b.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Row and column sector dimensions implied by the stored blocks.
    pub fn row_dims(&self) -> SectorDims {
        let mut d = SectorDims::new();
        for (&q, b) in &self.blocks {
            d.insert(q, b.nrows());
        }
        d
    }

    pub fn col_dims(&self) -> SectorDims {
        let mut d = SectorDims::new();
        for (&q, b) in &self.blocks {
            d.insert(q + self.shift, b.ncols());
        }
        d
    }

    pub fn scale(&self, factor: C64) -> Self {
        let blocks = self.blocks.iter().map(|(&q, b)| (q, b * factor)).collect();
        Self { shift: self.shift, blocks }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: C64, other: &GradedMatrix) -> Result<()> {
        if other.shift != self.shift {
            return Err(Error::ShiftMismatch(self.shift, other.shift));
        }
        for (&q, b) in &other.blocks {
            match self.blocks.get_mut(&q) {
                Some(a) => {
                    if a.shape() != b.shape() {
                        return Err(Error::DimensionMismatch { sector: q, expected: a.nrows(), found: b.nrows() });
                    }
                    *a += b * factor;
                }
                None => {
                    self.blocks.insert(q, b * factor);
                }
            }
        }
        Ok(())
    }

    /// Matrix product; the result's shift is the sum of the two shifts.
    pub fn matmul(&self, rhs: &GradedMatrix) -> Result<GradedMatrix> {
        let mut out = GradedMatrix::new(self.shift + rhs.shift);
        for (&q, a) in &self.blocks {
            let mid = q + self.shift;
            if let Some(b) = rhs.blocks.get(&mid) {
                if a.ncols() != b.nrows() {
                    return Err(Error::DimensionMismatch { sector: mid, expected: a.ncols(), found: b.nrows() });
                }
                out.blocks.insert(q, a * b);
            }
        }
        Ok(out)
    }

    /// `diag(λ) · self`, scaling the rows of each block by the spectrum
    /// of the matching sector.
    pub fn scale_rows(&self, lambda: &SchmidtSpectrum) -> Result<GradedMatrix> {
        let mut out = GradedMatrix::new(self.shift);
        for (&q, b) in &self.blocks {
            let Some(w) = lambda.sector(q) else { continue };
            if w.len() != b.nrows() {
                return Err(Error::DimensionMismatch { sector: q, expected: b.nrows(), found: w.len() });
            }
            let mut s = b.clone();
            for (i, &wi) in w.iter().enumerate() {
                s.row_mut(i).scale_mut(wi);
            }
            out.blocks.insert(q, s);
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> GradedMatrix {
        let blocks = self
            .blocks
            .iter()
            .map(|(&q, b)| (q + self.shift, b.adjoint()))
            .collect();
        GradedMatrix { shift: -self.shift, blocks }
    }

    /// Per-block matrix-vector product.
    pub fn matvec(&self, v: &GradedVector, side: Side) -> Result<GradedVector> {
        let mut out = GradedVector::new();
        match side {
            Side::Left => {
                for (q, x) in v.iter() {
                    if let Some(m) = self.blocks.get(&q) {
                        if m.nrows() != x.len() {
                            return Err(Error::DimensionMismatch { sector: q, expected: m.nrows(), found: x.len() });
                        }
                        out.insert(q + self.shift, m.tr_mul(x));
                    }
                }
            }
            Side::Right => {
                for (q, x) in v.iter() {
                    if let Some(m) = self.blocks.get(&(q - self.shift)) {
                        if m.ncols() != x.len() {
                            return Err(Error::DimensionMismatch { sector: q, expected: m.ncols(), found: x.len() });
                        }
                        out.insert(q - self.shift, m * x);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Expand into a plain matrix with rows and columns ordered by charge.
    pub fn to_dense(&self, rows: &SectorDims, cols: &SectorDims) -> DMatrix<C64> {
        let ro = rows.offsets();
        let co = cols.offsets();
        let mut out = DMatrix::zeros(rows.total(), cols.total());
        for (&q, b) in &self.blocks {
            let (r, c) = (ro[&q], co[&(q + self.shift)]);
            out.view_mut((r, c), b.shape()).copy_from(b);
        }
        out
    }
}

/// Schmidt values grouped by sector, each sector sorted descending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchmidtSpectrum {
    sectors: BTreeMap<SectorCharge, Vec<f64>>,
}

impl SchmidtSpectrum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Spectrum with a single unit value in sector `q`.
    pub fn product(q: SectorCharge) -> Self {
        let mut s = Self::new();
        s.sectors.insert(q, vec![1.0]);
        s
    }

    /// Build from unsorted per-sector values; each sector is sorted
    /// descending. Empty sectors are dropped.
    pub fn from_sectors(sectors: impl IntoIterator<Item = (SectorCharge, Vec<f64>)>) -> Self {
        let mut out = Self::new();
        for (q, mut w) in sectors {
            w.sort_by(|a, b| b.total_cmp(a));
            if !w.is_empty() {
                out.sectors.insert(q, w);
            }
        }
        out
    }

    pub fn sector(&self, q: SectorCharge) -> Option<&[f64]> {
        self.sectors.get(&q).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectorCharge, &[f64])> + '_ {
        self.sectors.iter().map(|(&q, w)| (q, w.as_slice()))
    }

    pub fn dims(&self) -> SectorDims {
        let mut d = SectorDims::new();
        for (&q, w) in &self.sectors {
            d.insert(q, w.len());
        }
        d
    }

    pub fn len(&self) -> usize {
        self.sectors.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ λ²`.
    pub fn total_weight(&self) -> f64 {
        self.sectors.values().flatten().map(|w| w * w).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.sectors.values().flatten().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.sectors.values().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rescale so that `Σ λ² = 1`.
    pub fn normalize(&mut self) {
        let n = self.total_weight().sqrt();
        if n > 0.0 {
            for w in self.sectors.values_mut().flatten() {
                *w /= n;
            }
        }
    }

    /// Von Neumann entropy `-Σ λ² ln λ²` of the normalized spectrum.
    pub fn entropy(&self) -> f64 {
        let total = self.total_weight();
        let s: f64 = self
            .sectors
            .values()
            .flatten()
            .map(|w| w * w / total)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum();
        // `0 - s` rather than `-s` so a pure state prints as 0, not -0
        0.0 - s
    }

    /// All entries as `(charge, index within sector, value)` in global
    /// descending order. Ties go to the charge closer to zero, then to the
    /// more negative charge.
    pub fn merged(&self) -> Vec<(SectorCharge, usize, f64)> {
        let mut all: Vec<_> = self
            .sectors
            .iter()
            .flat_map(|(&q, w)| w.iter().enumerate().map(move |(i, &v)| (q, i, v)))
            .collect();
        all.sort_by(merged_order);
        all
    }
}

fn merged_order(a: &(SectorCharge, usize, f64), b: &(SectorCharge, usize, f64)) -> Ordering {
    b.2.total_cmp(&a.2)
        .then(a.0.abs().cmp(&b.0.abs()))
        .then(a.0.cmp(&b.0))
        .then(a.1.cmp(&b.1))
}

/// Outcome of one truncation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TruncationReport {
    /// `Σ λ²` over the dropped values, before renormalization.
    pub discarded_weight: f64,
    pub kept_per_sector: BTreeMap<SectorCharge, usize>,
    /// Largest dimension of any block handed to the SVD.
    pub largest_block_dim: usize,
}

/// Keep the `k_max` globally largest Schmidt values across all sectors and
/// renormalize. Values below [`SVD_FLOOR`] times the largest are dropped
/// first and count towards the discarded weight.
pub fn merged_truncate(lambda: &SchmidtSpectrum, k_max: usize) -> (SchmidtSpectrum, TruncationReport) {
    let floor = SVD_FLOOR * lambda.max_value();
    let merged = lambda.merged();
    let mut kept: BTreeMap<SectorCharge, usize> = BTreeMap::new();
    let mut discarded = 0.0;
    for (rank, &(q, _, v)) in merged.iter().enumerate() {
        if rank < k_max.max(1) && v > floor {
            *kept.entry(q).or_default() += 1;
        } else {
            discarded += v * v;
        }
    }
    let mut out = SchmidtSpectrum::from_sectors(
        kept.iter().map(|(&q, &n)| (q, lambda.sectors[&q][..n].to_vec())),
    );
    if discarded > 0.0 {
        out.normalize();
    }
    let report = TruncationReport { discarded_weight: discarded, kept_per_sector: kept, largest_block_dim: 0 };
    (out, report)
}

/// Singular value decomposition of one dense block, values sorted
/// descending, with the largest-magnitude entry of every left singular
/// vector made real and positive.
pub fn dense_svd(m: &DMatrix<C64>, sector: SectorCharge) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let (rows, cols) = m.shape();
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdNoConvergence { sector, rows, cols })?;
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::SvdNoConvergence { sector, rows, cols });
    };
    let s = svd.singular_values;
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdNoConvergence { sector, rows, cols });
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let r = order.len();
    let mut x = DMatrix::zeros(rows, r);
    let mut y = DMatrix::zeros(r, cols);
    let mut values = Vec::with_capacity(r);
    for (j, &k) in order.iter().enumerate() {
        let col = u.column(k);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best })
            .0;
        let p = col[pivot];
        let phase = if p.norm() > 0.0 { p / p.norm() } else { C64::new(1.0, 0.0) };
        x.set_column(j, &(col * phase.conj()));
        y.set_row(j, &(v_t.row(k) * phase));
        values.push(s[k]);
    }
    Ok((x, values, y))
}

/// Sector-by-sector SVD `θ = X · diag(λ) · Y`.
///
/// `X` has shift zero (row charge equals the new bond charge) and `Y`
/// carries the whole shift of `θ`.
pub fn block_svd(theta: &GradedMatrix) -> Result<(GradedMatrix, SchmidtSpectrum, GradedMatrix)> {
    let mut x = GradedMatrix::new(0);
    let mut y = GradedMatrix::new(theta.shift);
    let mut values = Vec::new();
    for (q, block) in theta.iter() {
        let (u, s, v) = dense_svd(block, q)?;
        x.insert_row(q, u);
        y.insert_row(q, v);
        values.push((q, s));
    }
    Ok((x, SchmidtSpectrum::from_sectors(values), y))
}
