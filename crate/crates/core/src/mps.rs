//! Period-2 infinite matrix product state and the division-free iTEBD
//! update.
//!
//! The state stores right-normalized site matrices `A(s) = Γ(s) λ` for the
//! two sublattices together with the Schmidt spectra on the bonds to the
//! right of each sublattice. An update never multiplies by an inverse
//! Schmidt value: the new `A` on the right site is read off the SVD, and the
//! one on the left site is rebuilt from the pre-SVD two-site matrix `C`
//! projected onto the kept right singular vectors.
//!
//! Site `0` is an A-site and carries spin up in the initial Néel state.
//! Bond charges count up spins to the left of the bond relative to Néel, so
//! a site matrix `A(s)` shifts the charge by `[s = ↑] - [Néel spin = ↑]`.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::graded::{block_svd, merged_truncate, GradedMatrix, SchmidtSpectrum, SectorCharge, TruncationReport};

/// Local spin state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn sz(self) -> f64 {
        match self {
            Spin::Up => 0.5,
            Spin::Down => -0.5,
        }
    }

    /// Row/column index in the two-site product basis `{↑↑, ↑↓, ↓↑, ↓↓}`.
    fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// The two sublattices of the period-2 unit cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    /// Sublattice of an integer site; even sites are A-sites.
    pub fn of_site(site: i64) -> Self {
        if site.rem_euclid(2) == 0 {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    pub fn other(self) -> Self {
        match self {
            Sublattice::A => Sublattice::B,
            Sublattice::B => Sublattice::A,
        }
    }

    pub fn neel_spin(self) -> Spin {
        match self {
            Sublattice::A => Spin::Up,
            Sublattice::B => Spin::Down,
        }
    }

    /// Charge carried across a bond by spin `s` on this sublattice.
    pub fn charge_shift(self, s: Spin) -> SectorCharge {
        let up = |x: Spin| (x == Spin::Up) as SectorCharge;
        up(s) - up(self.neel_spin())
    }
}

/// Which pair of bonds a two-site gate layer acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondParity {
    /// Gates on `(A, B)` pairs, i.e. sites `(2r, 2r+1)`.
    AB,
    /// Gates on `(B, A)` pairs, i.e. sites `(2r-1, 2r)`.
    BA,
}

/// Run parameters of an iTEBD quench.
#[derive(Clone, Debug, PartialEq)]
pub struct QuenchConfig {
    pub delta: f64,
    pub dt: f64,
    pub k_max: usize,
    pub t_init: f64,
    /// Cumulative discarded weight above which observer records carry a
    /// warning flag.
    pub discard_warning: f64,
}

impl QuenchConfig {
    pub const DEFAULT_DISCARD_WARNING: f64 = 1e-6;

    pub fn new(delta: f64, dt: f64, k_max: usize, t_init: f64) -> Result<Self> {
        let c = Self { delta, dt, k_max, t_init, discard_warning: Self::DEFAULT_DISCARD_WARNING };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("delta must be finite".into()));
        }
        if self.k_max < 2 {
            return Err(Error::Config(format!("k_max must be at least 2, got {}", self.k_max)));
        }
        if !(self.t_init >= 0.0) {
            return Err(Error::Config(format!("t_init must be non-negative, got {}", self.t_init)));
        }
        step_count(self.t_init, self.dt)?;
        Ok(())
    }
}

/// Number of steps of size `dt` covering `span`, which must be an integer
/// multiple of `dt` within 1e-9.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    let n = span / dt;
    if n < -1e-9 || (n - n.round()).abs() > 1e-9 {
        return Err(Error::Config(format!("time span {span} is not a multiple of step {dt}")));
    }
    Ok(n.round().max(0.0) as usize)
}

/// Exact two-site propagator `exp(-i h step)` for the XXZ bond
/// `h = SxSx + SySy + Δ SzSz`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteGate {
    pub u: Matrix4<C64>,
    pub step: f64,
}

impl TwoSiteGate {
    pub fn identity() -> Self {
        Self { u: Matrix4::identity(), step: 0.0 }
    }

    /// Matrix element `⟨s1 s2| U |s1' s2'⟩`.
    pub fn element(&self, out: (Spin, Spin), inp: (Spin, Spin)) -> C64 {
        self.u[(2 * out.0.index() + out.1.index(), 2 * inp.0.index() + inp.1.index())]
    }
}

/// Closed-form gate built per total-Sz block.
pub fn build_gate(delta: f64, step: f64) -> TwoSiteGate {
    let corner = C64::from_polar(1.0, -delta * step / 4.0);
    let centre = C64::from_polar(1.0, delta * step / 4.0);
    let (s, c) = (step / 2.0).sin_cos();
    let diag = centre * c;
    let off = centre * C64::new(0.0, -s);
    let z = C64::new(0.0, 0.0);
    let u = Matrix4::new(
        corner, z, z, z, //
        z, diag, off, z, //
        z, off, diag, z, //
        z, z, z, corner,
    );
    TwoSiteGate { u, step }
}

/// Site matrices `A(↑)` and `A(↓)` of one sublattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub up: GradedMatrix,
    pub down: GradedMatrix,
}

impl SiteTensor {
    pub fn get(&self, s: Spin) -> &GradedMatrix {
        match s {
            Spin::Up => &self.up,
            Spin::Down => &self.down,
        }
    }

    fn empty(sub: Sublattice) -> Self {
        Self {
            up: GradedMatrix::new(sub.charge_shift(Spin::Up)),
            down: GradedMatrix::new(sub.charge_shift(Spin::Down)),
        }
    }

    fn get_mut(&mut self, s: Spin) -> &mut GradedMatrix {
        match s {
            Spin::Up => &mut self.up,
            Spin::Down => &mut self.down,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.up.is_finite() && self.down.is_finite()
    }
}

/// Translation-invariant (period 2) infinite matrix product state.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsState {
    pub a: SiteTensor,
    pub b: SiteTensor,
    /// Spectrum on the bond right of an A-site.
    pub lambda_a: SchmidtSpectrum,
    /// Spectrum on the bond right of a B-site.
    pub lambda_b: SchmidtSpectrum,
    pub time: f64,
}

/// The Néel product state `|…↑↓↑↓…⟩` with site 0 up.
pub fn neel_init() -> MpsState {
    let one = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    let mut a = SiteTensor::empty(Sublattice::A);
    a.up.insert_row(0, one.clone());
    let mut b = SiteTensor::empty(Sublattice::B);
    b.down.insert_row(0, one);
    MpsState {
        a,
        b,
        lambda_a: SchmidtSpectrum::product(0),
        lambda_b: SchmidtSpectrum::product(0),
        time: 0.0,
    }
}

impl MpsState {
    pub fn site(&self, sub: Sublattice) -> &SiteTensor {
        match sub {
            Sublattice::A => &self.a,
            Sublattice::B => &self.b,
        }
    }

    /// Spectrum of the bond to the right of a site of `sub`.
    pub fn lambda_right(&self, sub: Sublattice) -> &SchmidtSpectrum {
        match sub {
            Sublattice::A => &self.lambda_a,
            Sublattice::B => &self.lambda_b,
        }
    }

    /// Spectrum of the bond to the left of a site of `sub`.
    pub fn lambda_left(&self, sub: Sublattice) -> &SchmidtSpectrum {
        self.lambda_right(sub.other())
    }

    pub fn bond_dim(&self) -> usize {
        self.lambda_a.len().max(self.lambda_b.len())
    }

    pub fn is_finite(&self) -> bool {
        let spectra_ok = |l: &SchmidtSpectrum| l.iter().all(|(_, w)| w.iter().all(|x| x.is_finite()));
        self.a.is_finite() && self.b.is_finite() && spectra_ok(&self.lambda_a) && spectra_ok(&self.lambda_b)
    }

    /// Largest Frobenius deviation of `Σ_s A(s) A(s)†` from the identity on
    /// the left bond of either sublattice.
    pub fn right_normalization_error(&self) -> f64 {
        [Sublattice::A, Sublattice::B]
            .into_iter()
            .map(|sub| right_normalization_error(self.site(sub), self.lambda_left(sub)))
            .fold(0.0, f64::max)
    }
}

fn right_normalization_error(site: &SiteTensor, left: &SchmidtSpectrum) -> f64 {
    let mut worst: f64 = 0.0;
    for (q, d) in left.dims().iter() {
        let mut acc = DMatrix::<C64>::identity(d, d) * C64::new(-1.0, 0.0);
        for s in Spin::BOTH {
            if let Some(b) = site.get(s).block(q) {
                acc += b * b.adjoint();
            }
        }
        worst = worst.max(acc.norm());
    }
    worst
}

/// `⟨Sz⟩` on a site of sublattice `sub`, from its one-site reduced density
/// matrix.
pub fn expect_sz(state: &MpsState, sub: Sublattice) -> f64 {
    let left = state.lambda_left(sub);
    let weight = |s: Spin| {
        state
            .site(sub)
            .get(s)
            .scale_rows(left)
            .map(|m| m.frobenius_sqr())
            .unwrap_or(0.0)
    };
    let (up, down) = (weight(Spin::Up), weight(Spin::Down));
    0.5 * (up - down) / (up + down)
}

/// Apply one layer of two-site gates and truncate the new bond to `k_max`
/// Schmidt values.
///
/// For `BondParity::AB` the gate acts on `(A, B)`, the A-bond spectrum is
/// replaced and the B-bond spectrum is untouched; `BA` swaps the roles.
pub fn update_bond(
    state: &MpsState,
    gate: &TwoSiteGate,
    which: BondParity,
    k_max: usize,
) -> Result<(MpsState, TruncationReport)> {
    let (first, second) = match which {
        BondParity::AB => (Sublattice::A, Sublattice::B),
        BondParity::BA => (Sublattice::B, Sublattice::A),
    };
    let outer = state.lambda_left(first);
    let outer_dims = outer.dims();
    let (ta, tb) = (state.site(first), state.site(second));

    // Step 1: C(s1, s2) = Σ U A(s1') A(s2'), Θ = λ_outer C.
    let mut c = [[None, None], [None, None]];
    for s1 in Spin::BOTH {
        for s2 in Spin::BOTH {
            let shift = first.charge_shift(s1) + second.charge_shift(s2);
            let mut acc = GradedMatrix::new(shift);
            for p1 in Spin::BOTH {
                for p2 in Spin::BOTH {
                    let u = gate.element((s1, s2), (p1, p2));
                    if u == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let prod = ta.get(p1).matmul(tb.get(p2))?;
                    acc.add_scaled(u, &prod)?;
                }
            }
            c[s1.index()][s2.index()] = Some(acc);
        }
    }
    let c = c.map(|row| row.map(Option::unwrap));
    let mut theta = [[GradedMatrix::new(0), GradedMatrix::new(0)], [GradedMatrix::new(0), GradedMatrix::new(0)]];
    for s1 in Spin::BOTH {
        for s2 in Spin::BOTH {
            theta[s1.index()][s2.index()] = c[s1.index()][s2.index()].scale_rows(outer)?;
        }
    }

    // Group (α, s1) rows and (s2, γ) columns by the middle-bond charge β.
    let mut middle: Vec<SectorCharge> = outer_dims
        .iter()
        .flat_map(|(q, _)| Spin::BOTH.map(|s| q + first.charge_shift(s)))
        .collect();
    middle.sort_unstable();
    middle.dedup();

    let mut theta_blocks = GradedMatrix::new(0);
    let mut c_blocks = Vec::new();
    let mut largest = 0;
    for &q in &middle {
        let rows: Vec<(Spin, SectorCharge, usize)> = Spin::BOTH
            .iter()
            .map(|&s| (s, q - first.charge_shift(s)))
            .map(|(s, qa)| (s, qa, outer_dims.get(qa)))
            .collect();
        let cols: Vec<(Spin, SectorCharge, usize)> = Spin::BOTH
            .iter()
            .map(|&s| (s, q + second.charge_shift(s)))
            .map(|(s, qg)| (s, qg, outer_dims.get(qg)))
            .collect();
        let nr: usize = rows.iter().map(|r| r.2).sum();
        let nc: usize = cols.iter().map(|c| c.2).sum();
        if nr == 0 || nc == 0 {
            continue;
        }
        let mut th = DMatrix::zeros(nr, nc);
        let mut cm = DMatrix::zeros(nr, nc);
        let mut r0 = 0;
        for &(s1, qa, dr) in &rows {
            let mut c0 = 0;
            for &(s2, _, dc) in &cols {
                if dr > 0 && dc > 0 {
                    if let Some(b) = theta[s1.index()][s2.index()].block(qa) {
                        th.view_mut((r0, c0), (dr, dc)).copy_from(b);
                    }
                    if let Some(b) = c[s1.index()][s2.index()].block(qa) {
                        cm.view_mut((r0, c0), (dr, dc)).copy_from(b);
                    }
                }
                c0 += dc;
            }
            r0 += dr;
        }
        if th.norm_squared() == 0.0 {
            continue;
        }
        largest = largest.max(nr.max(nc));
        theta_blocks.insert_row(q, th);
        c_blocks.push((q, rows, cols, cm));
    }

    // Step 2: block SVD and merged truncation.
    let (_x, spectrum, y) = block_svd(&theta_blocks)?;
    let (kept, mut report) = merged_truncate(&spectrum, k_max);
    report.largest_block_dim = largest;

    // Step 3: Ã(second) = Y, Ã(first) = C Y†.
    let mut new_first = SiteTensor::empty(first);
    let mut new_second = SiteTensor::empty(second);
    for (q, rows, cols, cm) in c_blocks {
        let n = report.kept_per_sector.get(&q).copied().unwrap_or(0);
        if n == 0 {
            continue;
        }
        let yk = y.block(q).expect("svd block for every theta sector").rows(0, n).into_owned();
        let mut c0 = 0;
        for &(s2, _, dc) in &cols {
            if dc > 0 {
                new_second.get_mut(s2).insert_row(q, yk.columns(c0, dc).into_owned());
            }
            c0 += dc;
        }
        let cy = &cm * yk.adjoint();
        let mut r0 = 0;
        for &(s1, qa, dr) in &rows {
            if dr > 0 {
                new_first.get_mut(s1).insert_row(qa, cy.rows(r0, dr).into_owned());
            }
            r0 += dr;
        }
        if !cy.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { sector: q });
        }
    }

    let mut next = state.clone();
    match which {
        BondParity::AB => {
            next.a = new_first;
            next.b = new_second;
            next.lambda_a = kept;
        }
        BondParity::BA => {
            next.b = new_first;
            next.a = new_second;
            next.lambda_b = kept;
        }
    }
    Ok((next, report))
}

/// Observables recorded after each full Trotter step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub sz0: f64,
    pub sz1: f64,
    /// Weight discarded during this step.
    pub discarded_weight: f64,
    pub cumulative_discarded: f64,
    pub entropy_a: f64,
    pub entropy_b: f64,
    /// Largest block decomposed during this step.
    pub largest_block_dim: usize,
    /// Set once the cumulative discarded weight exceeds the configured
    /// warning threshold.
    pub warning: bool,
}

/// Observation of a state without any evolution step.
pub fn observe(state: &MpsState) -> StepRecord {
    StepRecord {
        time: state.time,
        sz0: expect_sz(state, Sublattice::A),
        sz1: expect_sz(state, Sublattice::B),
        discarded_weight: 0.0,
        cumulative_discarded: 0.0,
        entropy_a: state.lambda_a.entropy(),
        entropy_b: state.lambda_b.entropy(),
        largest_block_dim: 0,
        warning: false,
    }
}

/// Second-order Trotter evolution from `state.time` to `t_end`.
///
/// Each step applies `AB(dt/2) · BA(dt) · AB(dt/2)` and the observer sees
/// the state after every complete step.
pub fn evolve_to(
    state: MpsState,
    t_end: f64,
    config: &QuenchConfig,
    mut observer: impl FnMut(&StepRecord),
) -> Result<MpsState> {
    let steps = step_count(t_end - state.time, config.dt)?;
    let half = build_gate(config.delta, config.dt / 2.0);
    let full = build_gate(config.delta, config.dt);
    let t0 = state.time;
    let mut state = state;
    let mut cumulative = 0.0;
    for k in 0..steps {
        let mut discarded = 0.0;
        let mut largest = 0;
        for (gate, which) in [(&half, BondParity::AB), (&full, BondParity::BA), (&half, BondParity::AB)] {
            let (next, report) = update_bond(&state, gate, which, config.k_max)?;
            discarded += report.discarded_weight;
            largest = largest.max(report.largest_block_dim);
            state = next;
        }
        state.time = t0 + (k + 1) as f64 * config.dt;
        cumulative += discarded;
        let mut rec = observe(&state);
        rec.discarded_weight = discarded;
        rec.cumulative_discarded = cumulative;
        rec.largest_block_dim = largest;
        rec.warning = cumulative > config.discard_warning;
        observer(&rec);
    }
    if steps == 0 {
        state.time = t_end.max(t0);
    }
    Ok(state)
}
