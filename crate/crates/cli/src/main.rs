//! `lcmp`: iTEBD checkpoints, light-cone Monte Carlo and circuit demos.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcmp::checkpoint::load_checkpoint;
use lcmp::circuit::{
    direct_expectation, lightcone_expectation_sampled, lightcone_expectation_sum, neel_product, BrickworkCircuit,
};
use lcmp::harness::{
    checkpoint_hash, curve_csv, default_overlap, extract_peaks, mc_metadata, parse_curve, parse_reference,
    peaks_csv, run_itebd, run_mc, shift_correction, McParams,
};
use lcmp::mps::QuenchConfig;
use lcmp::window::EvolverParams;
use lcmp::{Error, Result};

#[derive(Parser)]
#[command(name = "lcmp", version, about = "Light-cone matrix-product toolkit for the XXZ quench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the Néel state with iTEBD and write a checkpoint plus the curve.
    Itebd(ItebdArgs),
    /// Light-cone Monte Carlo from a checkpoint.
    Sample(SampleArgs),
    /// Peak heights of a Monte Carlo curve, optionally shift-corrected.
    Peaks(PeaksArgs),
    /// Light-cone decomposition of a random brickwork circuit.
    CircuitDemo(CircuitArgs),
}

/// Named parameter presets. Explicit flags override them.
#[derive(Clone, Copy, Debug, ValueEnum)]
enum Profile {
    /// Production scale: k_max 4096, l = 10.
    Full,
    /// Minutes on a workstation: k_max 256, l = 6.
    Desk,
    /// Seconds: k_max 64, l = 2.
    Quick,
}

impl Profile {
    fn k_max(self) -> usize {
        match self {
            Profile::Full => 4096,
            Profile::Desk => 256,
            Profile::Quick => 64,
        }
    }

    fn l(self) -> usize {
        match self {
            Profile::Full => 10,
            Profile::Desk => 6,
            Profile::Quick => 2,
        }
    }
}

#[derive(Args)]
struct ItebdArgs {
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 0.0625)]
    dt: f64,
    /// Bond dimension; required unless a profile is given.
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Checkpoint time.
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    out_checkpoint: PathBuf,
    #[arg(long)]
    out_curve: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Window half-width [default: 10, or the profile's].
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long)]
    t_fin: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    delta_t: f64,
    #[arg(long, default_value_t = EvolverParams::DEFAULT_N_MAX)]
    nmax: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Refuse to run unless the checkpoint was made with this anisotropy.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct PeaksArgs {
    /// Monte Carlo curve written by `sample`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Trusted early-time curve, e.g. the iTEBD curve.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, requires = "reference")]
    shift_correct: bool,
    /// Number of leading grid points used for the shift [default: a quarter
    /// of the grid, at least 3].
    #[arg(long, requires = "shift_correct")]
    overlap: Option<usize>,
    /// Peaks file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the shifted curve here.
    #[arg(long, requires = "shift_correct")]
    out_curve: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Direct,
    Sum,
    Sample,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn itebd(a: ItebdArgs) -> Result<()> {
    let k_max = a
        .kmax
        .or(a.profile.map(Profile::k_max))
        .ok_or_else(|| Error::Config("--kmax or --profile is required".into()))?;
    let config = QuenchConfig::new(a.delta, a.dt, k_max, a.t_end)?;
    let state = run_itebd(&config, &a.out_checkpoint, &a.out_curve)?;
    eprintln!("checkpoint at t = {} with bond dimension {}", state.time, state.bond_dim());
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let (state, config) = load_checkpoint(&a.checkpoint)?;
    if let Some(d) = a.delta {
        if d != config.delta {
            return Err(Error::Incompatible(format!("checkpoint has delta = {}, requested {d}", config.delta)));
        }
    }
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let p = McParams {
        l: a.l.or(a.profile.map(Profile::l)).unwrap_or(10),
        t_fin: a.t_fin,
        delta_t: a.delta_t,
        n_max: a.nmax,
        n_samples: a.samples,
        master_seed: a.seed,
        n_workers: workers,
    };
    let result = run_mc(&state, &config, &p)?;
    let meta = mc_metadata(&config, state.time, &p, &checkpoint_hash(&state, &config));
    write(&a.out, &curve_csv(&meta, &result.curve))
}

fn peaks(a: PeaksArgs) -> Result<()> {
    let (mut meta, mut curve) = parse_curve(&fs::read_to_string(&a.input)?)?;
    if curve.grid.len() < 3 {
        return Err(Error::Config(format!("need at least 3 grid points, found {}", curve.grid.len())));
    }
    if a.shift_correct {
        let path = a.reference.as_ref().expect("clap enforces --reference");
        let reference = parse_reference(&fs::read_to_string(path)?)?;
        let overlap = a.overlap.unwrap_or_else(|| default_overlap(&curve));
        let (shifted, c) = shift_correction(&curve, &reference, overlap)?;
        curve = shifted;
        if let Some(m) = meta.as_object_mut() {
            m.insert("shift".into(), c.into());
            m.insert("shift_overlap".into(), overlap.into());
        }
        if let Some(out) = &a.out_curve {
            write(out, &curve_csv(&meta, &curve))?;
        }
    }
    let text = peaks_csv(&meta, &extract_peaks(&curve));
    match &a.out {
        Some(out) => write(out, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn circuit_demo(a: CircuitArgs) -> Result<()> {
    let circ = BrickworkCircuit::random(a.n, a.depth, a.seed)?;
    let init = neel_product(a.n);
    match a.mode {
        Mode::Direct => println!("direct {}", direct_expectation(&circ, &init)?),
        Mode::Sum => {
            let (value, weight) = lightcone_expectation_sum(&circ, &init)?;
            println!("sum {value} total_weight {weight}");
        }
        Mode::Sample => {
            let (mean, stderr) = lightcone_expectation_sampled(&circ, &init, a.samples, a.seed)?;
            println!("sample {mean} stderr {stderr} n {}", a.samples);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Itebd(a) => itebd(a),
        Command::Sample(a) => sample(a),
        Command::Peaks(a) => peaks(a),
        Command::CircuitDemo(a) => circuit_demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
