//! Light-cone sampling on a brickwork circuit.
//!
//! Qubits `0..n` stand for the labels `-n/2..n/2`; the observed qubit is the
//! one labelled `0`, i.e. index `n/2`. Odd layers (1, 3, …) couple
//! `(0,1), (2,3), …`, even layers couple `(1,2), (3,4), …`.
//!
//! Gates outside the backward light cone of the observed qubit are dropped.
//! The remaining gates split into four regions:
//!
//! * `B` and `D`: early gates (first half of the layers) entirely on the
//!   left or right half of the chain and outside the forward cone of the
//!   central cut;
//! * `C`: early gates inside that forward cone;
//! * `A`: late gates.
//!
//! No `B` or `D` gate ever follows a `C` gate on a shared qubit, so the
//! circuit factorizes as `U_A U_C U_D U_B`. The qubits touched by `A` and `C`
//! form the window; projective measurements on the qubits outside it commute
//! with `U_A U_C`, and their outcomes `(α, β)` are what gets sampled.

use nalgebra::{DVector, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sampler::sample_rng;

pub const MAX_CIRCUIT_QUBITS: usize = 20;

/// One two-qubit gate acting on `(qubit, qubit + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub layer: usize,
    pub qubit: usize,
    pub u: Matrix4<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrickworkCircuit {
    n_qubits: usize,
    depth: usize,
    /// Gates per layer; layer `t` (1-based) is `layers[t - 1]`.
    layers: Vec<Vec<Gate>>,
}

/// Qubit pairs of layer `t` (1-based).
fn layer_pairs(n: usize, t: usize) -> impl Iterator<Item = usize> {
    let start = if t % 2 == 1 { 0 } else { 1 };
    (start..n.saturating_sub(1)).step_by(2)
}

/// Haar-distributed 4×4 unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary<R: Rng>(rng: &mut R) -> Matrix4<C64> {
    let z = Matrix4::from_fn(|_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / 2f64.sqrt()
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..4 {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// The SWAP gate.
pub fn swap_gate() -> Matrix4<C64> {
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    Matrix4::new(o, z, z, z, z, z, o, z, z, o, z, z, z, z, z, o)
}

impl BrickworkCircuit {
    fn check_size(n_qubits: usize) -> Result<()> {
        if n_qubits < 2 || !n_qubits.is_multiple_of(2) || n_qubits > MAX_CIRCUIT_QUBITS {
            return Err(Error::Config(format!(
                "circuit needs an even number of qubits in 2..={MAX_CIRCUIT_QUBITS}, got {n_qubits}"
            )));
        }
        Ok(())
    }

    /// Circuit with every gate produced by `make(layer, qubit)`.
    pub fn from_fn(n_qubits: usize, depth: usize, mut make: impl FnMut(usize, usize) -> Matrix4<C64>) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let layers = (1..=depth)
            .map(|t| layer_pairs(n_qubits, t).map(|q| Gate { layer: t, qubit: q, u: make(t, q) }).collect())
            .collect();
        Ok(Self { n_qubits, depth, layers })
    }

    pub fn identity(n_qubits: usize, depth: usize) -> Result<Self> {
        Self::from_fn(n_qubits, depth, |_, _| Matrix4::identity())
    }

    /// Seeded circuit of Haar-random gates.
    pub fn random(n_qubits: usize, depth: usize, seed: u64) -> Result<Self> {
        let mut rng = sample_rng(seed, u64::MAX);
        Self::from_fn(n_qubits, depth, |_, _| random_unitary(&mut rng))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> + '_ {
        self.layers.iter().flatten()
    }

    /// Index of the observed qubit (label 0).
    pub fn centre(&self) -> usize {
        self.n_qubits / 2
    }

    pub fn max_unitarity_error(&self) -> f64 {
        self.gates()
            .map(|g| (g.u.adjoint() * g.u - Matrix4::<C64>::identity()).norm())
            .fold(0.0, f64::max)
    }
}

/// Alternating product state `|↑↓↑↓…⟩` with the observed qubit up.
pub fn neel_product(n_qubits: usize) -> Vec<bool> {
    let c = n_qubits / 2;
    (0..n_qubits).map(|j| (j % 2) == (c % 2)).collect()
}

/// Region of a kept gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    A,
    B,
    C,
    D,
}

/// Partition of the light-cone gates and the measured qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitRegions {
    /// Region of every kept gate, as `(layer, qubit, region)` in time order.
    pub gates: Vec<(usize, usize, Region)>,
    /// Qubits the window dynamics acts on, ascending.
    pub window: Vec<usize>,
    /// Measured qubits left and right of the window.
    pub outer_left: Vec<usize>,
    pub outer_right: Vec<usize>,
    /// Backward light-cone membership of each qubit before each layer:
    /// `cone[t][q]` for `t` in `0..=depth`.
    pub cone: Vec<Vec<bool>>,
}

impl CircuitRegions {
    pub fn of(circ: &BrickworkCircuit) -> Self {
        let n = circ.n_qubits;
        let half = circ.depth / 2;
        let mid = n / 2; // left half is 0..mid

        // Backward light cone of the centre qubit.
        let mut cone = vec![vec![false; n]; circ.depth + 1];
        let mut live = vec![false; n];
        live[circ.centre()] = true;
        cone[circ.depth] = live.clone();
        let mut kept = vec![Vec::new(); circ.depth + 1];
        for t in (1..=circ.depth).rev() {
            for g in &circ.layers[t - 1] {
                if live[g.qubit] || live[g.qubit + 1] {
                    live[g.qubit] = true;
                    live[g.qubit + 1] = true;
                    kept[t].push(g.qubit);
                }
            }
            cone[t - 1] = live.clone();
        }

        // Forward cone of the cut between qubits mid-1 and mid.
        let mut forward = vec![false; n];
        let mut gates = Vec::new();
        for t in 1..=circ.depth {
            for &q in &kept[t] {
                let region = if t > half {
                    Region::A
                } else if q + 1 == mid || forward[q] || forward[q + 1] {
                    forward[q] = true;
                    forward[q + 1] = true;
                    Region::C
                } else if q + 1 < mid {
                    Region::B
                } else {
                    Region::D
                };
                gates.push((t, q, region));
            }
        }

        let mut in_window = vec![false; n];
        in_window[circ.centre()] = true;
        for &(_, q, r) in &gates {
            if matches!(r, Region::A | Region::C) {
                in_window[q] = true;
                in_window[q + 1] = true;
            }
        }
        let window = (0..n).filter(|&q| in_window[q]).collect();
        let outer_left = (0..mid).filter(|&q| !in_window[q]).collect();
        let outer_right = (mid..n).filter(|&q| !in_window[q]).collect();
        Self { gates, window, outer_left, outer_right, cone }
    }

    pub fn region_of(&self, layer: usize, qubit: usize) -> Option<Region> {
        self.gates.iter().find(|g| g.0 == layer && g.1 == qubit).map(|g| g.2)
    }
}

/// Dense state over an ordered list of qubits; entry `i` has bit
/// `(len - 1 - k)` set when `qubits[k]` is up.
#[derive(Clone, Debug)]
struct Register {
    qubits: Vec<usize>,
    amps: DVector<C64>,
}

impl Register {
    fn product(qubits: Vec<usize>, initial: &[bool]) -> Self {
        let m = qubits.len();
        let idx = qubits
            .iter()
            .enumerate()
            .filter(|(_, &q)| initial[q])
            .map(|(k, _)| 1usize << (m - 1 - k))
            .sum::<usize>();
        let mut amps = DVector::zeros(1 << m);
        amps[idx] = C64::new(1.0, 0.0);
        Self { qubits, amps }
    }

    fn bit(&self, qubit: usize) -> usize {
        let k = self.qubits.iter().position(|&q| q == qubit).expect("qubit in register");
        1 << (self.qubits.len() - 1 - k)
    }

    fn apply(&mut self, g: &Gate) {
        let (b0, b1) = (self.bit(g.qubit), self.bit(g.qubit + 1));
        for base in 0..self.amps.len() {
            if base & (b0 | b1) != 0 {
                continue;
            }
            let idx = [base | b0 | b1, base | b0, base | b1, base];
            // basis order {↑↑, ↑↓, ↓↑, ↓↓} with ↑ = bit set
            let x: [C64; 4] = idx.map(|i| self.amps[i]);
            for (r, &i) in idx.iter().enumerate() {
                self.amps[i] = (0..4).map(|c| g.u[(r, c)] * x[c]).sum();
            }
        }
    }

    fn sz(&self, qubit: usize) -> f64 {
        let b = self.bit(qubit);
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & b != 0 { 0.5 * a.norm_sqr() } else { -0.5 * a.norm_sqr() })
            .sum::<f64>()
            / self.amps.norm_squared()
    }

    /// Project the qubits in `measured` onto the configuration `outcome`
    /// (bit `k` of `outcome` for `measured[k]`, most significant first) and
    /// return the remaining register, unnormalized.
    fn project(&self, measured: &[usize], outcome: usize) -> Register {
        let rest: Vec<usize> = self.qubits.iter().copied().filter(|q| !measured.contains(q)).collect();
        let mbits: Vec<usize> = measured.iter().map(|&q| self.bit(q)).collect();
        let rbits: Vec<usize> = rest.iter().map(|&q| self.bit(q)).collect();
        let mm = measured.len();
        let fixed: usize = (0..mm).filter(|k| outcome >> (mm - 1 - k) & 1 == 1).map(|k| mbits[k]).sum();
        let m = rest.len();
        let amps = DVector::from_fn(1 << m, |j, _| {
            let mut i = fixed;
            for (k, &b) in rbits.iter().enumerate() {
                if j >> (m - 1 - k) & 1 == 1 {
                    i |= b;
                }
            }
            self.amps[i]
        });
        Register { qubits: rest, amps }
    }

    fn kron(&self, other: &Register) -> Register {
        let mut qubits = self.qubits.clone();
        qubits.extend(&other.qubits);
        let amps = self.amps.kronecker(&other.amps);
        Register { qubits, amps }
    }
}

fn check_initial(circ: &BrickworkCircuit, initial: &[bool]) -> Result<()> {
    if initial.len() != circ.n_qubits {
        return Err(Error::Config(format!("initial state has {} qubits, circuit {}", initial.len(), circ.n_qubits)));
    }
    Ok(())
}

/// Full state-vector simulation; returns `⟨Sz⟩` on the observed qubit after
/// all layers.
pub fn direct_expectation(circ: &BrickworkCircuit, initial: &[bool]) -> Result<f64> {
    check_initial(circ, initial)?;
    let mut reg = Register::product((0..circ.n_qubits).collect(), initial);
    for g in circ.gates() {
        reg.apply(g);
    }
    Ok(reg.sz(circ.centre()))
}

/// Same as [`direct_expectation`] but applying only gates inside the
/// backward light cone.
pub fn cone_only_expectation(circ: &BrickworkCircuit, initial: &[bool]) -> Result<f64> {
    check_initial(circ, initial)?;
    let regions = CircuitRegions::of(circ);
    let mut reg = Register::product((0..circ.n_qubits).collect(), initial);
    for g in circ.gates() {
        if regions.region_of(g.layer, g.qubit).is_some() {
            reg.apply(g);
        }
    }
    Ok(reg.sz(circ.centre()))
}

/// Early-time halves `U_B Ψ_L` and `U_D Ψ_R`.
struct EarlyHalves {
    regions: CircuitRegions,
    left: Register,
    right: Register,
}

impl EarlyHalves {
    fn new(circ: &BrickworkCircuit, initial: &[bool]) -> Self {
        let regions = CircuitRegions::of(circ);
        let mid = circ.n_qubits / 2;
        let mut left = Register::product((0..mid).collect(), initial);
        let mut right = Register::product((mid..circ.n_qubits).collect(), initial);
        for g in circ.gates() {
            match regions.region_of(g.layer, g.qubit) {
                Some(Region::B) => left.apply(g),
                Some(Region::D) => right.apply(g),
                _ => {}
            }
        }
        Self { regions, left, right }
    }

    fn left_outcome(&self, alpha: usize) -> Register {
        self.left.project(&self.regions.outer_left, alpha)
    }

    fn right_outcome(&self, beta: usize) -> Register {
        self.right.project(&self.regions.outer_right, beta)
    }

    /// `⟨Sz_0⟩` after evolving the normalized projected window state through
    /// `U_C` then `U_A`.
    fn window_expectation(&self, circ: &BrickworkCircuit, l: &Register, r: &Register) -> f64 {
        let mut w = l.kron(r);
        let n = w.amps.norm();
        w.amps /= C64::new(n, 0.0);
        for region in [Region::C, Region::A] {
            for g in circ.gates() {
                if self.regions.region_of(g.layer, g.qubit) == Some(region) {
                    w.apply(g);
                }
            }
        }
        w.sz(circ.centre())
    }
}

/// Exact weighted sum over every measurement outcome `(α, β)` on the outer
/// qubits. Returns the expectation and the total weight.
pub fn lightcone_expectation_sum(circ: &BrickworkCircuit, initial: &[bool]) -> Result<(f64, f64)> {
    check_initial(circ, initial)?;
    if circ.n_qubits > 16 {
        return Err(Error::Config("exhaustive light-cone sum supports at most 16 qubits".into()));
    }
    let halves = EarlyHalves::new(circ, initial);
    let na = 1usize << halves.regions.outer_left.len();
    let nb = 1usize << halves.regions.outer_right.len();
    let lefts: Vec<(Register, f64)> = (0..na)
        .map(|a| {
            let r = halves.left_outcome(a);
            let w = r.amps.norm_squared();
            (r, w)
        })
        .collect();
    let rights: Vec<(Register, f64)> = (0..nb)
        .map(|b| {
            let r = halves.right_outcome(b);
            let w = r.amps.norm_squared();
            (r, w)
        })
        .collect();
    let mut total = 0.0;
    let mut sum = 0.0;
    for (lr, wl) in &lefts {
        for (rr, wr) in &rights {
            let w = wl * wr;
            if w == 0.0 {
                continue;
            }
            total += w;
            sum += w * halves.window_expectation(circ, lr, rr);
        }
    }
    Ok((sum, total))
}

/// Monte Carlo estimate: outcomes drawn with their Born weights, window
/// expectations averaged. Returns `(mean, standard error)`.
pub fn lightcone_expectation_sampled(
    circ: &BrickworkCircuit,
    initial: &[bool],
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_initial(circ, initial)?;
    if n_samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let halves = EarlyHalves::new(circ, initial);
    let left_probs: Vec<f64> = born_weights(&halves.left, &halves.regions.outer_left);
    let right_probs: Vec<f64> = born_weights(&halves.right, &halves.regions.outer_right);
    let mut values = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut rng = sample_rng(seed, k as u64);
        let a = draw(&left_probs, rng.random());
        let b = draw(&right_probs, rng.random());
        let v = halves.window_expectation(circ, &halves.left_outcome(a), &halves.right_outcome(b));
        values.push(v);
    }
    Ok(mean_and_stderr(&values))
}

fn born_weights(reg: &Register, measured: &[usize]) -> Vec<f64> {
    (0..1usize << measured.len()).map(|o| reg.project(measured, o).amps.norm_squared()).collect()
}

fn draw(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Sample mean and standard error `sd / √n` (zero for a single sample).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_circuit() {
        for n in [2, 4, 8] {
            let c = BrickworkCircuit::identity(n, n / 2).unwrap();
            let init = neel_product(n);
            assert_eq!(direct_expectation(&c, &init).unwrap(), 0.5);
            let (sum, w) = lightcone_expectation_sum(&c, &init).unwrap();
            assert_eq!(sum, 0.5);
            assert!((w - 1.0).abs() < 1e-12);
            let (m, e) = lightcone_expectation_sampled(&c, &init, 50, 1).unwrap();
            assert_eq!((m, e), (0.5, 0.0));
        }
    }

    #[test]
    fn swap_moves_the_spin() {
        let c = BrickworkCircuit::from_fn(2, 1, |_, _| swap_gate()).unwrap();
        // qubit 1 is the observed one (label 0); start with |↑↓⟩ on labels (-1, 0)
        assert_eq!(direct_expectation(&c, &[true, false]).unwrap(), 0.5);
        assert_eq!(direct_expectation(&c, &[false, true]).unwrap(), -0.5);
    }

    #[test]
    fn random_gates_are_unitary() {
        let c = BrickworkCircuit::random(8, 4, 3).unwrap();
        assert!(c.max_unitarity_error() < 1e-12);
    }

    #[test]
    fn regions_respect_causality() {
        for n in [4, 6, 8, 10] {
            let c = BrickworkCircuit::random(n, n / 2, 0).unwrap();
            let r = CircuitRegions::of(&c);
            // no B or D gate after a C gate on a shared qubit
            for &(t, q, reg) in &r.gates {
                if matches!(reg, Region::B | Region::D) {
                    for &(t2, q2, reg2) in &r.gates {
                        if reg2 == Region::C && t2 < t {
                            assert!(q2 + 1 < q || q + 1 < q2, "{n}: B/D gate {t},{q} after C gate {t2},{q2}");
                        }
                    }
                }
            }
            assert!(r.window.contains(&c.centre()));
            assert!(r.outer_left.iter().all(|q| !r.window.contains(q)));
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(BrickworkCircuit::identity(5, 2).is_err());
        assert!(BrickworkCircuit::identity(22, 2).is_err());
    }
}
