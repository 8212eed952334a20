//! Exact evolution of the light-cone window.
//!
//! The window covers sites `-l..=l`. Basis states are bit strings with site
//! `-l` as the most significant bit and spin up as `1`. The open-boundary
//! window Hamiltonian is block diagonal in the total-Sz sector, so it is
//! stored sector by sector in compressed-row form and the Taylor propagator
//! only ever touches the sector a state lives in.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::graded::SectorCharge;
use crate::mps::step_count;

/// Largest supported window half-width.
pub const MAX_HALF_WIDTH: usize = 14;

/// Pre-renormalization norm drift tolerated per Taylor step.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;

/// Spin-wave velocity `(π/2) sin θ / θ` with `cos θ = Δ`, defined for
/// `|Δ| ≤ 1`.
pub fn spin_wave_velocity(delta: f64) -> Option<f64> {
    if !(-1.0..=1.0).contains(&delta) {
        return None;
    }
    let theta = delta.acos();
    if theta == 0.0 {
        return Some(std::f64::consts::FRAC_PI_2);
    }
    Some(std::f64::consts::FRAC_PI_2 * theta.sin() / theta)
}

/// Number of sites in a window of half-width `l`.
pub fn window_sites(l: usize) -> usize {
    2 * l + 1
}

/// Bit mask of site `site` (in `-l..=l`).
pub fn site_bit(l: usize, site: i64) -> usize {
    let pos = (site + l as i64) as usize;
    1 << (2 * l - pos)
}

/// Number of up spins of the Néel pattern on the window.
fn neel_ups(l: usize) -> i32 {
    (-(l as i64)..=l as i64).filter(|i| i.rem_euclid(2) == 0).count() as i32
}

/// Néel-relative charge of a window configuration.
pub fn config_charge(l: usize, config: usize) -> SectorCharge {
    config.count_ones() as i32 - neel_ups(l)
}

/// The Néel configuration on the window (even sites up).
pub fn neel_config(l: usize) -> usize {
    (-(l as i64)..=l as i64)
        .filter(|i| i.rem_euclid(2) == 0)
        .map(|i| site_bit(l, i))
        .sum()
}

/// A normalized amplitude vector over the window, supported on a single
/// total-Sz sector.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowState {
    l: usize,
    amplitudes: Vec<C64>,
    sector: SectorCharge,
}

impl WindowState {
    /// Wrap a full amplitude vector. Fails if it is not confined to one
    /// sector or has zero norm; the result is normalized.
    pub fn from_amplitudes(l: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1 << window_sites(l) {
            return Err(Error::Config(format!(
                "window of half-width {l} needs {} amplitudes, got {}",
                1usize << window_sites(l),
                amplitudes.len()
            )));
        }
        let mut sector = None;
        for (i, a) in amplitudes.iter().enumerate() {
            if a.norm_sqr() > 0.0 {
                let q = config_charge(l, i);
                match sector {
                    None => sector = Some(q),
                    Some(s) if s != q => {
                        return Err(Error::Config("amplitudes span several Sz sectors".into()));
                    }
                    _ => {}
                }
            }
        }
        let sector = sector.ok_or(Error::ZeroWindowNorm)?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self { l, amplitudes, sector })
    }

    /// Computational basis state.
    pub fn basis(l: usize, config: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << window_sites(l)];
        amplitudes[config] = C64::new(1.0, 0.0);
        Self { l, amplitudes, sector: config_charge(l, config) }
    }

    pub fn neel(l: usize) -> Self {
        Self::basis(l, neel_config(l))
    }

    pub fn half_width(&self) -> usize {
        self.l
    }

    pub fn sector(&self) -> SectorCharge {
        self.sector
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨Sz⟩` on window site `site`.
    pub fn sz(&self, site: i64) -> f64 {
        let bit = site_bit(self.l, site);
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit != 0 { 0.5 * a.norm_sqr() } else { -0.5 * a.norm_sqr() })
            .sum()
    }

    pub fn sz0(&self) -> f64 {
        self.sz(0)
    }
}

/// One total-Sz block of the window Hamiltonian in compressed-row form.
#[derive(Clone, Debug)]
pub struct SectorBlock {
    /// Global basis index of each local row, ascending.
    pub states: Vec<u32>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SectorBlock {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    /// `y = H x`, rows in fixed order.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, v) in self.row(i) {
                acc += x[j] * v;
            }
            *yi = acc;
        }
    }
}

/// Open-boundary XXZ Hamiltonian on the window, stored per sector.
#[derive(Clone, Debug)]
pub struct SparseWindowHamiltonian {
    l: usize,
    delta: f64,
    sectors: BTreeMap<SectorCharge, SectorBlock>,
}

/// `H = Σ_{i=-l}^{l-1} S^x_i S^x_{i+1} + S^y_i S^y_{i+1} + Δ S^z_i S^z_{i+1}`.
pub fn build_hloc(l: usize, delta: f64) -> Result<SparseWindowHamiltonian> {
    build_xxz(l, 1.0, delta)
}

/// XXZ window Hamiltonian with an explicit in-plane coupling.
pub fn build_xxz(l: usize, jxy: f64, delta: f64) -> Result<SparseWindowHamiltonian> {
    if l == 0 || l > MAX_HALF_WIDTH {
        return Err(Error::Config(format!("window half-width must be in 1..={MAX_HALF_WIDTH}, got {l}")));
    }
    let n = window_sites(l);
    let dim = 1usize << n;
    let mut by_sector: BTreeMap<SectorCharge, Vec<u32>> = BTreeMap::new();
    for s in 0..dim {
        by_sector.entry(config_charge(l, s)).or_default().push(s as u32);
    }
    let mut local = vec![0u32; dim];
    let mut sectors = BTreeMap::new();
    for (q, states) in by_sector {
        for (i, &s) in states.iter().enumerate() {
            local[s as usize] = i as u32;
        }
        let mut row_ptr = Vec::with_capacity(states.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &s in &states {
            let s = s as usize;
            let mut diag = 0.0;
            let mut hops = Vec::new();
            for b in 0..n - 1 {
                let pair = (1 << b) | (1 << (b + 1));
                let bits = s & pair;
                if bits == 0 || bits == pair {
                    diag += 0.25 * delta;
                } else {
                    diag -= 0.25 * delta;
                    if jxy != 0.0 {
                        hops.push((local[s ^ pair], 0.5 * jxy));
                    }
                }
            }
            hops.push((local[s], diag));
            hops.sort_by_key(|h| h.0);
            for (c, v) in hops {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        sectors.insert(q, SectorBlock { states, row_ptr, cols, vals });
    }
    Ok(SparseWindowHamiltonian { l, delta, sectors })
}

impl SparseWindowHamiltonian {
    pub fn half_width(&self) -> usize {
        self.l
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dimension(&self) -> usize {
        1 << window_sites(self.l)
    }

    pub fn sector(&self, q: SectorCharge) -> Option<&SectorBlock> {
        self.sectors.get(&q)
    }

    pub fn sectors(&self) -> impl Iterator<Item = (SectorCharge, &SectorBlock)> + '_ {
        self.sectors.iter().map(|(&q, b)| (q, b))
    }

    pub fn max_row_nnz(&self) -> usize {
        self.sectors
            .values()
            .flat_map(|b| b.row_ptr.windows(2).map(|w| w[1] - w[0]))
            .max()
            .unwrap_or(0)
    }

    /// Full-space matrix element `⟨row|H|col⟩`.
    pub fn element(&self, row: usize, col: usize) -> f64 {
        let q = config_charge(self.l, row);
        if q != config_charge(self.l, col) {
            return 0.0;
        }
        let block = &self.sectors[&q];
        let (Ok(i), Ok(j)) = (block.states.binary_search(&(row as u32)), block.states.binary_search(&(col as u32)))
        else {
            return 0.0;
        };
        block.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `H ψ` on a full-length amplitude vector.
    pub fn apply(&self, psi: &WindowState) -> Vec<C64> {
        let block = &self.sectors[&psi.sector];
        let x: Vec<C64> = block.states.iter().map(|&s| psi.amplitudes[s as usize]).collect();
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        block.apply(&x, &mut y);
        let mut out = vec![C64::new(0.0, 0.0); psi.amplitudes.len()];
        for (&s, v) in block.states.iter().zip(y) {
            out[s as usize] = v;
        }
        out
    }
}

/// Coarse time grid and Taylor order of the window evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolverParams {
    pub t_init: f64,
    pub delta_t: f64,
    pub n_max: usize,
    pub t_fin: f64,
}

impl EvolverParams {
    pub const DEFAULT_N_MAX: usize = 20;

    pub fn validate(&self) -> Result<usize> {
        if !(self.delta_t > 0.0) {
            return Err(Error::Config(format!("delta_t must be positive, got {}", self.delta_t)));
        }
        if self.n_max < 4 {
            return Err(Error::Config(format!("n_max must be at least 4, got {}", self.n_max)));
        }
        step_count(self.t_fin - self.t_init, self.delta_t)
    }

    /// Measurement times `t_init + k δt`, endpoints included.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let n = self.validate()?;
        Ok((0..=n).map(|k| self.t_init + k as f64 * self.delta_t).collect())
    }
}

/// Truncated Taylor propagation of a compact sector vector. Returns the
/// norm drift `|1 - ‖ψ‖|` before renormalization.
fn taylor_in_sector(block: &SectorBlock, x: &mut [C64], delta_t: f64, n_max: usize) -> f64 {
    let dim = x.len();
    let mut term = x.to_vec();
    let mut next = vec![C64::new(0.0, 0.0); dim];
    let mut acc = x.to_vec();
    let factor = C64::new(0.0, -delta_t);
    for n in 1..=n_max {
        block.apply(&term, &mut next);
        let f = factor / n as f64;
        for (t, nx) in term.iter_mut().zip(&next) {
            *t = nx * f;
        }
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    let norm = acc.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for (xi, a) in x.iter_mut().zip(acc) {
        *xi = a / norm;
    }
    (1.0 - norm).abs()
}

fn gather(block: &SectorBlock, psi: &WindowState) -> Vec<C64> {
    block.states.iter().map(|&s| psi.amplitudes[s as usize]).collect()
}

fn scatter(block: &SectorBlock, x: &[C64], psi: &mut WindowState) {
    for (&s, &v) in block.states.iter().zip(x) {
        psi.amplitudes[s as usize] = v;
    }
}

fn check_compatible(psi: &WindowState, h: &SparseWindowHamiltonian) -> Result<()> {
    if psi.l != h.l {
        return Err(Error::Config(format!("state half-width {} differs from Hamiltonian {}", psi.l, h.l)));
    }
    Ok(())
}

/// One step `ψ ← Σ_{n≤n_max} (-i δt H)^n ψ / n!`, renormalized.
///
/// Returns the new state and its pre-renormalization norm drift; a drift
/// above [`NORM_DRIFT_LIMIT`] is an error.
pub fn taylor_step(
    psi: &WindowState,
    h: &SparseWindowHamiltonian,
    delta_t: f64,
    n_max: usize,
) -> Result<(WindowState, f64)> {
    check_compatible(psi, h)?;
    let block = &h.sectors[&psi.sector];
    let mut x = gather(block, psi);
    let drift = taylor_in_sector(block, &mut x, delta_t, n_max);
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift, limit: NORM_DRIFT_LIMIT });
    }
    let mut out = psi.clone();
    scatter(block, &x, &mut out);
    Ok((out, drift))
}

/// `⟨Sz_0⟩` at every grid time from `t_init` to `t_fin`.
pub fn evolve_and_measure(
    psi: &WindowState,
    h: &SparseWindowHamiltonian,
    params: &EvolverParams,
) -> Result<Vec<(f64, f64)>> {
    check_compatible(psi, h)?;
    let grid = params.grid()?;
    let block = &h.sectors[&psi.sector];
    let centre = site_bit(psi.l, 0);
    let sz0 = |x: &[C64]| -> f64 {
        block
            .states
            .iter()
            .zip(x)
            .map(|(&s, a)| if s as usize & centre != 0 { 0.5 * a.norm_sqr() } else { -0.5 * a.norm_sqr() })
            .sum()
    };
    let mut x = gather(block, psi);
    let mut out = Vec::with_capacity(grid.len());
    out.push((grid[0], sz0(&x)));
    for &t in &grid[1..] {
        let drift = taylor_in_sector(block, &mut x, params.delta_t, params.n_max);
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift, limit: NORM_DRIFT_LIMIT });
        }
        out.push((t, sz0(&x)));
    }
    Ok(out)
}
