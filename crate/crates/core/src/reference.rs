//! Brute-force state-vector evolution of a finite open XXZ chain, used as
//! ground truth for the iTEBD engine and the window evolver.
//!
//! The propagator is a fine-step Taylor series restricted to the total-Sz
//! sector of the initial configuration; the Hamiltonian is applied on the
//! fly from bit operations rather than through the stored window matrices.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mps::Spin;

pub const MAX_REFERENCE_SITES: usize = 20;

/// Substep length of the reference propagator.
const SUBSTEP: f64 = 0.05;

/// Observables of the reference chain at one time: `⟨Sz⟩` on every site.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePoint {
    pub t: f64,
    pub sz: Vec<f64>,
}

struct Sector {
    n: usize,
    delta: f64,
    states: Vec<u32>,
    index: Vec<u32>,
}

impl Sector {
    fn new(n: usize, ups: u32, delta: f64) -> Self {
        let states: Vec<u32> = (0..1u32 << n).filter(|s| s.count_ones() == ups).collect();
        let mut index = vec![u32::MAX; 1 << n];
        for (i, &s) in states.iter().enumerate() {
            index[s as usize] = i as u32;
        }
        Self { n, delta, states, index }
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (i, &s) in self.states.iter().enumerate() {
            let mut diag = 0.0;
            for b in 0..self.n - 1 {
                let a1 = (s >> b) & 1;
                let a2 = (s >> (b + 1)) & 1;
                if a1 == a2 {
                    diag += 0.25 * self.delta;
                } else {
                    diag -= 0.25 * self.delta;
                    let j = self.index[(s ^ (0b11 << b)) as usize] as usize;
                    y[j] += x[i] * 0.5;
                }
            }
            y[i] += x[i] * diag;
        }
    }

    fn sz(&self, x: &[C64]) -> Vec<f64> {
        (0..self.n)
            .map(|site| {
                self.states
                    .iter()
                    .zip(x)
                    .map(|(&s, a)| if (s >> site) & 1 == 1 { 0.5 * a.norm_sqr() } else { -0.5 * a.norm_sqr() })
                    .sum()
            })
            .collect()
    }

    fn propagate(&self, x: &mut [C64], dt: f64) {
        let mut term = x.to_vec();
        let mut next = vec![C64::new(0.0, 0.0); x.len()];
        let factor = C64::new(0.0, -dt);
        for n in 1..=60 {
            self.apply(&term, &mut next);
            let f = factor / n as f64;
            let mut size = 0.0;
            for (t, v) in term.iter_mut().zip(&next) {
                *t = v * f;
                size += t.norm_sqr();
            }
            for (a, t) in x.iter_mut().zip(&term) {
                *a += t;
            }
            if size < 1e-36 {
                break;
            }
        }
    }
}

/// Evolve the product state `initial` (site 0 first) of an open chain under
/// the XXZ Hamiltonian and record `⟨Sz⟩` on every site at each time in
/// `t_grid` (ascending, starting at or after zero).
pub fn dense_reference_evolve(initial: &[Spin], delta: f64, t_grid: &[f64]) -> Result<Vec<ReferencePoint>> {
    let n = initial.len();
    if !(2..=MAX_REFERENCE_SITES).contains(&n) {
        return Err(Error::Config(format!("reference chain needs 2..={MAX_REFERENCE_SITES} sites, got {n}")));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Config("reference time grid must be ascending and non-negative".into()));
    }
    let config: u32 = initial
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == Spin::Up)
        .map(|(i, _)| 1u32 << i)
        .sum();
    let sector = Sector::new(n, config.count_ones(), delta);
    let mut x = vec![C64::new(0.0, 0.0); sector.states.len()];
    x[sector.index[config as usize] as usize] = C64::new(1.0, 0.0);

    let mut now = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let span = t - now;
        if span > 0.0 {
            let steps = (span / SUBSTEP).ceil().max(1.0) as usize;
            for _ in 0..steps {
                sector.propagate(&mut x, span / steps as f64);
            }
            now = t;
        }
        out.push(ReferencePoint { t, sz: sector.sz(&x) });
    }
    Ok(out)
}

/// Néel configuration of `n` sites with site `up_site` (and every other
/// site of the same parity) up.
pub fn neel_chain(n: usize, up_site: usize) -> Vec<Spin> {
    (0..n)
        .map(|i| if i % 2 == up_site % 2 { Spin::Up } else { Spin::Down })
        .collect()
}
