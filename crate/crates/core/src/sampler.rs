//! Monte Carlo sampling of boundary Schmidt states and construction of the
//! window state they select.
//!
//! A sample fixes a Schmidt state `α` on the bond left of site `-l` and a
//! Schmidt state `β` on the bond right of site `+l`, drawn with weight
//! `⟨ψ|Π_α Π_β|ψ⟩`. The joint weight does not factorize, so `β` is drawn
//! through a chain of conditionals: starting from `⟨α|`, each window spin is
//! drawn from the ratio of squared norms of its two candidate extensions and
//! `β` from the components of the final vector. Right-normalization of the
//! site matrices makes the right environment the identity, which is what
//! turns those squared norms into conditional probabilities. The spins drawn
//! along the way are thrown away; only `(α, β)` is kept, and the window
//! amplitudes of every configuration are then built coherently.
//!
//! An alternative is to propagate the density matrix `|α⟩⟨α|` through the
//! completely positive maps defined by the two sublattices and read the
//! distribution of `β` off its diagonal. That costs matrix-matrix products
//! per site instead of matrix-vector products and is not implemented.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graded::{GradedVector, SchmidtSpectrum, SectorCharge, Side};
use crate::mps::{MpsState, Spin, Sublattice};
use crate::window::{WindowState, MAX_HALF_WIDTH};

/// Candidate branches whose squared norm falls below this fraction of the
/// sibling's are treated as exactly zero.
pub const DEAD_BRANCH_RATIO: f64 = 1e-28;

/// Window geometry and sampling seed.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    pub l: usize,
    pub t_init: f64,
    pub seed: u64,
}

impl WindowSpec {
    pub fn validate(&self, k_max: usize) -> Result<()> {
        if self.l == 0 || self.l > MAX_HALF_WIDTH {
            return Err(Error::Config(format!("window half-width must be in 1..={MAX_HALF_WIDTH}, got {}", self.l)));
        }
        let _ = k_max;
        Ok(())
    }

    /// Whether `2^(l+1) ≤ k_max`, the regime where storing the half-window
    /// vectors costs no more than the state itself.
    pub fn balanced_for(&self, k_max: usize) -> bool {
        (1usize << (self.l + 1)) <= k_max
    }
}

/// A Schmidt state on a bond: its charge and position within the sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchmidtIndex {
    pub charge: SectorCharge,
    pub index: usize,
}

/// Sampled boundary pair plus the conditional probabilities used to draw
/// it. The probabilities are diagnostics only.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    pub alpha: SchmidtIndex,
    pub beta: SchmidtIndex,
    pub conditionals: Vec<f64>,
}

/// Random stream of sample `sample_id` under `master_seed`.
pub fn sample_rng(master_seed: u64, sample_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_id);
    rng
}

/// Spectrum of the bond between sites `-l-1` and `-l`.
pub fn left_boundary_spectrum(state: &MpsState, l: usize) -> &SchmidtSpectrum {
    state.lambda_right(Sublattice::of_site(-(l as i64) - 1))
}

/// Spectrum of the bond between sites `l` and `l+1`.
pub fn right_boundary_spectrum(state: &MpsState, l: usize) -> &SchmidtSpectrum {
    state.lambda_right(Sublattice::of_site(l as i64))
}

fn draw_index<R: Rng>(rng: &mut R, weights: &[(SchmidtIndex, f64)]) -> Option<SchmidtIndex> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for &(idx, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(idx);
        if target < acc {
            return Some(idx);
        }
    }
    last
}

/// Draw `α` with probability `λ_α²` on the left boundary bond.
pub fn sample_alpha<R: Rng>(state: &MpsState, spec: &WindowSpec, rng: &mut R) -> SchmidtIndex {
    let lambda = left_boundary_spectrum(state, spec.l);
    let weights = lambda
        .iter()
        .flat_map(|(q, w)| w.iter().enumerate().map(move |(i, &x)| (SchmidtIndex { charge: q, index: i }, x * x)))
        .collect::<Vec<_>>();
    draw_index(rng, &weights).expect("boundary spectrum is non-empty")
}

/// Unit row vector `⟨α|` on the left boundary bond.
fn alpha_vector(state: &MpsState, l: usize, alpha: SchmidtIndex) -> Result<GradedVector> {
    let dims = left_boundary_spectrum(state, l).dims();
    let d = dims.get(alpha.charge);
    if alpha.index >= d {
        return Err(Error::Config(format!("alpha {alpha:?} outside the boundary bond")));
    }
    Ok(GradedVector::basis(alpha.charge, alpha.index, d))
}

/// Draw the window spins one by one conditioned on `α`, then `β`
/// conditioned on all of them.
pub fn sample_spins_and_beta<R: Rng>(
    state: &MpsState,
    spec: &WindowSpec,
    alpha: SchmidtIndex,
    rng: &mut R,
) -> Result<BoundarySample> {
    let l = spec.l as i64;
    let mut v = alpha_vector(state, spec.l, alpha)?;
    let mut conditionals = Vec::with_capacity(2 * spec.l + 2);
    for site in -l..=l {
        let a = state.site(Sublattice::of_site(site));
        let up = a.get(Spin::Up).matvec(&v, Side::Left)?;
        let down = a.get(Spin::Down).matvec(&v, Side::Left)?;
        let (mut nu, mut nd) = (up.norm_sqr(), down.norm_sqr());
        if nu < DEAD_BRANCH_RATIO * nd {
            nu = 0.0;
        }
        if nd < DEAD_BRANCH_RATIO * nu {
            nd = 0.0;
        }
        if nu + nd == 0.0 {
            return Err(Error::DeadBranch { site, sector: alpha.charge });
        }
        let p_up = nu / (nu + nd);
        let (mut next, p, n) = if rng.random::<f64>() < p_up { (up, p_up, nu) } else { (down, 1.0 - p_up, nd) };
        next.scale(C64::new(1.0 / n.sqrt(), 0.0));
        conditionals.push(p);
        v = next;
    }
    let weights = v
        .iter()
        .flat_map(|(q, b)| b.iter().enumerate().map(move |(i, z)| (SchmidtIndex { charge: q, index: i }, z.norm_sqr())))
        .collect::<Vec<_>>();
    let beta = draw_index(rng, &weights).ok_or(Error::DeadBranch { site: l + 1, sector: alpha.charge })?;
    let p_beta = weights.iter().find(|(i, _)| *i == beta).map_or(0.0, |(_, w)| *w) / v.norm_sqr();
    conditionals.push(p_beta);
    Ok(BoundarySample { alpha, beta, conditionals })
}

/// Draw a full boundary sample.
pub fn sample_boundary<R: Rng>(state: &MpsState, spec: &WindowSpec, rng: &mut R) -> Result<BoundarySample> {
    let alpha = sample_alpha(state, spec, rng);
    sample_spins_and_beta(state, spec, alpha, rng)
}

/// Half-window boundary vectors: configuration bits and a vector of
/// definite charge.
type HalfVectors = Vec<(usize, SectorCharge, DVector<C64>)>;

fn single_block(v: GradedVector) -> Option<(SectorCharge, DVector<C64>)> {
    let mut it = v.iter();
    let (q, b) = it.next()?;
    debug_assert!(it.next().is_none());
    Some((q, b.clone()))
}

/// `⟨α| A(s_{-l}) ⋯ A(s_0)` for every configuration of sites `-l..=0`.
fn left_half(state: &MpsState, l: usize, alpha: SchmidtIndex) -> Result<HalfVectors> {
    let v = alpha_vector(state, l, alpha)?;
    let mut level: Vec<(usize, GradedVector)> = vec![(0, v)];
    for site in -(l as i64)..=0 {
        let a = state.site(Sublattice::of_site(site));
        let mut next = Vec::with_capacity(level.len() * 2);
        for (cfg, v) in &level {
            for s in [Spin::Down, Spin::Up] {
                let w = a.get(s).matvec(v, Side::Left)?;
                if !w.is_empty() {
                    next.push(((cfg << 1) | (s == Spin::Up) as usize, w));
                }
            }
        }
        level = next;
    }
    Ok(level.into_iter().filter_map(|(c, v)| single_block(v).map(|(q, b)| (c, q, b))).collect())
}

/// `A(s_1) ⋯ A(s_l) |β⟩` for every configuration of sites `1..=l`.
fn right_half(state: &MpsState, l: usize, beta: SchmidtIndex) -> Result<HalfVectors> {
    let dims = right_boundary_spectrum(state, l).dims();
    let d = dims.get(beta.charge);
    if beta.index >= d {
        return Err(Error::Config(format!("beta {beta:?} outside the boundary bond")));
    }
    let mut level: Vec<(usize, GradedVector)> = vec![(0, GradedVector::basis(beta.charge, beta.index, d))];
    for site in (1..=l as i64).rev() {
        let a = state.site(Sublattice::of_site(site));
        let bit = 1usize << (l as i64 - site);
        let mut next = Vec::with_capacity(level.len() * 2);
        for (cfg, v) in &level {
            for s in [Spin::Down, Spin::Up] {
                let w = a.get(s).matvec(v, Side::Right)?;
                if !w.is_empty() {
                    next.push((cfg | if s == Spin::Up { bit } else { 0 }, w));
                }
            }
        }
        level = next;
    }
    Ok(level.into_iter().filter_map(|(c, v)| single_block(v).map(|(q, b)| (c, q, b))).collect())
}

/// Unnormalized window amplitudes `⟨α| A(s_{-l}) ⋯ A(s_l) |β⟩` for all
/// `2^(2l+1)` configurations, by pairing left- and right-half vectors.
pub fn window_amplitudes(state: &MpsState, l: usize, alpha: SchmidtIndex, beta: SchmidtIndex) -> Result<Vec<C64>> {
    let left = left_half(state, l, alpha)?;
    let right = right_half(state, l, beta)?;
    let mut by_charge: BTreeMap<SectorCharge, Vec<(usize, &DVector<C64>)>> = BTreeMap::new();
    for (cfg, q, v) in &right {
        by_charge.entry(*q).or_default().push((*cfg, v));
    }
    let mut amps = vec![C64::new(0.0, 0.0); 1 << (2 * l + 1)];
    for (cl, q, lv) in &left {
        if let Some(group) = by_charge.get(q) {
            for (cr, rv) in group {
                amps[(cl << l) | cr] = lv.dot(rv);
            }
        }
    }
    Ok(amps)
}

/// Normalized window state `Π_α Π_β |ψ⟩` restricted to the window.
pub fn assemble_window_state(state: &MpsState, spec: &WindowSpec, sample: &BoundarySample) -> Result<WindowState> {
    let amps = window_amplitudes(state, spec.l, sample.alpha, sample.beta)?;
    WindowState::from_amplitudes(spec.l, amps)
}

/// Every boundary pair with non-zero weight `⟨ψ|Π_α Π_β|ψ⟩`, in charge
/// order.
pub fn enumerate_boundary_pairs(state: &MpsState, l: usize) -> Result<Vec<(SchmidtIndex, SchmidtIndex, f64)>> {
    let lambda = left_boundary_spectrum(state, l);
    let mut out = Vec::new();
    for (q, w) in lambda.iter() {
        for (i, &la) in w.iter().enumerate() {
            let alpha = SchmidtIndex { charge: q, index: i };
            // Σ over window configurations of |⟨α|A⋯A|β⟩|² for every β.
            let mut level = vec![alpha_vector(state, l, alpha)?];
            for site in -(l as i64)..=l as i64 {
                let a = state.site(Sublattice::of_site(site));
                let mut next = Vec::with_capacity(level.len() * 2);
                for v in &level {
                    for s in Spin::BOTH {
                        let x = a.get(s).matvec(v, Side::Left)?;
                        if !x.is_empty() {
                            next.push(x);
                        }
                    }
                }
                level = next;
            }
            let mut acc: BTreeMap<SchmidtIndex, f64> = BTreeMap::new();
            for v in &level {
                for (qb, b) in v.iter() {
                    for (j, z) in b.iter().enumerate() {
                        *acc.entry(SchmidtIndex { charge: qb, index: j }).or_default() += z.norm_sqr();
                    }
                }
            }
            for (beta, s) in acc {
                if s > 0.0 {
                    out.push((alpha, beta, la * la * s));
                }
            }
        }
    }
    Ok(out)
}
