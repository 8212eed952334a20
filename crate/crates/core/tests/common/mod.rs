//! Independent oracles shared by the integration tests. Nothing here goes
//! through the block-sparse machinery except to read tensors out of a state.
#![allow(dead_code)]

use lcmp::graded::SchmidtSpectrum;
use lcmp::mps::{MpsState, Spin, Sublattice};
use lcmp::sampler::SchmidtIndex;
use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

// ---------------------------------------------------------------------------
// Kronecker-product Hamiltonians. Site 0 is the leftmost tensor factor (most
// significant bit); local index 1 is spin up.

fn sz() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5])
}

fn splus() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])
}

fn embed(n: usize, ops: &[(usize, DMatrix<f64>)]) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for site in 0..n {
        let op = ops.iter().find(|(s, _)| *s == site).map(|(_, m)| m.clone()).unwrap_or_else(|| DMatrix::identity(2, 2));
        out = out.kronecker(&op);
    }
    out
}

/// Open-chain XXZ Hamiltonian on `n` sites.
pub fn kron_hamiltonian(n: usize, delta: f64) -> DMatrix<f64> {
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..n - 1 {
        let sp = splus();
        let sm = sp.transpose();
        h += embed(n, &[(i, sp.clone()), (i + 1, sm.clone())]) * 0.5;
        h += embed(n, &[(i, sm), (i + 1, sp)]) * 0.5;
        h += embed(n, &[(i, sz()), (i + 1, sz())]) * delta;
    }
    h
}

pub fn sz_at(n: usize, site: usize) -> DMatrix<f64> {
    embed(n, &[(site, sz())])
}

/// Exact `⟨Sz_site(t)⟩` for the product state `bits` (site 0 first, `true`
/// = up) by full diagonalization.
pub fn exact_sz(bits: &[bool], delta: f64, site: usize, times: &[f64]) -> Vec<f64> {
    let n = bits.len();
    let eig = SymmetricEigen::new(kron_hamiltonian(n, delta));
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    let v = eig.eigenvectors.map(c);
    let coeffs: DVector<C64> = v.row(idx).transpose();
    let op = sz_at(n, site).map(c);
    times
        .iter()
        .map(|&t| {
            let phased = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * C64::from_polar(1.0, -eig.eigenvalues[k] * t));
            let psi = &v * phased;
            (psi.adjoint() * &op * &psi)[(0, 0)].re
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Two-site gate and a dense Trotter circuit.

/// Two-site Hamiltonian in the basis `{↑↑, ↑↓, ↓↑, ↓↓}`.
pub fn two_site_h(delta: f64) -> DMatrix<f64> {
    let d = delta / 4.0;
    DMatrix::from_row_slice(4, 4, &[d, 0.0, 0.0, 0.0, 0.0, -d, 0.5, 0.0, 0.0, 0.5, -d, 0.0, 0.0, 0.0, 0.0, d])
}

/// `exp(-i h step)` by diagonalization.
pub fn expm_gate(delta: f64, step: f64) -> Matrix4<C64> {
    let eig = SymmetricEigen::new(two_site_h(delta));
    let v = eig.eigenvectors.map(c);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * step)));
    let u = &v * d * v.adjoint();
    Matrix4::from_fn(|r, col| u[(r, col)])
}

/// Dense state of an open chain, bit `n-1-i` for site `i`, up = 1.
pub struct DenseChain {
    pub n: usize,
    pub psi: DVector<C64>,
}

impl DenseChain {
    pub fn product(bits: &[bool]) -> Self {
        let n = bits.len();
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut psi = DVector::zeros(1 << n);
        psi[idx] = c(1.0);
        Self { n, psi }
    }

    fn bit(&self, site: usize) -> usize {
        1 << (self.n - 1 - site)
    }

    /// Apply a gate on `(site, site + 1)`; gate basis `{↑↑, ↑↓, ↓↑, ↓↓}`.
    pub fn apply(&mut self, site: usize, u: &Matrix4<C64>) {
        let (b0, b1) = (self.bit(site), self.bit(site + 1));
        for base in 0..self.psi.len() {
            if base & (b0 | b1) != 0 {
                continue;
            }
            let idx = [base | b0 | b1, base | b0, base | b1, base];
            let x = idx.map(|i| self.psi[i]);
            for (r, &i) in idx.iter().enumerate() {
                self.psi[i] = (0..4).map(|k| u[(r, k)] * x[k]).sum();
            }
        }
    }

    pub fn sz(&self, site: usize) -> f64 {
        let b = self.bit(site);
        self.psi.iter().enumerate().map(|(i, a)| if i & b != 0 { 0.5 } else { -0.5 } * a.norm_sqr()).sum()
    }
}

/// Strang-split Trotter circuit on an open chain: per step, gates on bonds
/// starting at even sites with `dt/2`, odd with `dt`, even with `dt/2`.
/// `even_first` picks which bond parity plays the role of the outer layer.
pub fn dense_trotter_sz(bits: &[bool], delta: f64, dt: f64, steps: usize, site: usize, outer_parity: usize) -> Vec<f64> {
    let mut chain = DenseChain::product(bits);
    let half = expm_gate(delta, dt / 2.0);
    let full = expm_gate(delta, dt);
    let n = bits.len();
    let mut out = vec![chain.sz(site)];
    for _ in 0..steps {
        for (u, parity) in [(&half, outer_parity), (&full, 1 - outer_parity), (&half, outer_parity)] {
            for s in (parity..n - 1).step_by(2) {
                chain.apply(s, u);
            }
        }
        out.push(chain.sz(site));
    }
    out
}

pub fn neel_bits(n: usize, up_parity: usize) -> Vec<bool> {
    (0..n).map(|i| i % 2 == up_parity).collect()
}

// ---------------------------------------------------------------------------
// Naive dense contraction of the infinite MPS.

/// Dense `A(s)` of the site at `site`, bonds ordered by charge.
pub fn dense_site(state: &MpsState, site: i64, s: Spin) -> DMatrix<C64> {
    let sub = Sublattice::of_site(site);
    let rows = state.lambda_left(sub).dims();
    let cols = state.lambda_right(sub).dims();
    state.site(sub).get(s).to_dense(&rows, &cols)
}

pub fn offset(spec: &SchmidtSpectrum, idx: SchmidtIndex) -> usize {
    spec.dims().offsets()[&idx.charge] + idx.index
}

/// Window configuration bits: site `-l` is the most significant, up = 1.
pub fn config_spins(l: usize, config: usize) -> Vec<Spin> {
    (0..2 * l + 1).map(|k| if config >> (2 * l - k) & 1 == 1 { Spin::Up } else { Spin::Down }).collect()
}

/// `A(s_{-l}) ⋯ A(s_l)` as a dense matrix from the left boundary bond to the
/// right boundary bond.
pub fn dense_string(state: &MpsState, l: usize, config: usize) -> DMatrix<C64> {
    let spins = config_spins(l, config);
    let mut m: Option<DMatrix<C64>> = None;
    for (k, &s) in spins.iter().enumerate() {
        let a = dense_site(state, k as i64 - l as i64, s);
        m = Some(match m {
            None => a,
            Some(p) => p * a,
        });
    }
    m.unwrap()
}

/// `⟨α|A(s_{-l}) ⋯ A(s_l)|β⟩` for all configurations, site by site with
/// dense row vectors.
pub fn naive_amplitudes(state: &MpsState, l: usize, alpha: SchmidtIndex, beta: SchmidtIndex) -> Vec<C64> {
    let left = state.lambda_right(Sublattice::of_site(-(l as i64) - 1));
    let right = state.lambda_right(Sublattice::of_site(l as i64));
    let (a, b) = (offset(left, alpha), offset(right, beta));
    let mut e = DMatrix::zeros(1, left.dims().total());
    e[(0, a)] = c(1.0);
    (0..1usize << (2 * l + 1))
        .map(|cfg| {
            let mut v = e.clone();
            for (k, &s) in config_spins(l, cfg).iter().enumerate() {
                v *= dense_site(state, k as i64 - l as i64, s);
            }
            v[(0, b)]
        })
        .collect()
}

/// Reduced density matrix of the window, with the left boundary weighted by
/// `λ²` and the right environment the identity.
pub fn window_density_matrix(state: &MpsState, l: usize) -> DMatrix<C64> {
    let left = state.lambda_right(Sublattice::of_site(-(l as i64) - 1));
    let w: Vec<f64> = left.iter().flat_map(|(_, v)| v.iter().map(|x| x * x).collect::<Vec<_>>()).collect();
    let lam2 = DMatrix::from_diagonal(&DVector::from_iterator(w.len(), w.iter().map(|&x| c(x))));
    let dim = 1usize << (2 * l + 1);
    let strings: Vec<DMatrix<C64>> = (0..dim).map(|cfg| dense_string(state, l, cfg)).collect();
    let weighted: Vec<DMatrix<C64>> = strings.iter().map(|p| &lam2 * p).collect();
    DMatrix::from_fn(dim, dim, |i, j| (&weighted[i] * strings[j].adjoint()).trace())
}

/// `tr(ρ(t) Sz_0)` with `ρ(t) = e^{-iHt} ρ e^{iHt}` under the open window
/// Hamiltonian.
pub fn evolve_density_sz0(rho: &DMatrix<C64>, l: usize, delta: f64, times: &[f64]) -> Vec<f64> {
    let n = 2 * l + 1;
    let eig = SymmetricEigen::new(kron_hamiltonian(n, delta));
    let v = eig.eigenvectors.map(c);
    let rho_e = v.adjoint() * rho * &v;
    let op_e = v.adjoint() * sz_at(n, l).map(c) * &v;
    let e = &eig.eigenvalues;
    times
        .iter()
        .map(|&t| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..rho_e.nrows() {
                for j in 0..rho_e.ncols() {
                    acc += rho_e[(i, j)] * C64::from_polar(1.0, -(e[i] - e[j]) * t) * op_e[(j, i)];
                }
            }
            acc.re / rho.trace().re
        })
        .collect()
}
