//! `breatherlab` command-line interface.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.
//! Failures print a single `error: ...` line on stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use breatherlab::dynamics::{evolve_with_diagnostics, write_diagnostics_csv, FieldState, PolaronState};
use breatherlab::elliptic::{fit_periodic_wave, TravelingWaveProfile};
use breatherlab::fluctuation::{monodromy, Background, BackgroundSource, DEFAULT_MODES};
use breatherlab::lindstedt::{
    build_nonresonant, build_solution, solve_resonance_system, LindstedtSolution, Normalization, ResonanceProblem,
};
use breatherlab::qcond::{
    conditional_density, conditional_expectation, event_probability, matrix_from_value, BipartiteDims, DensityMatrix,
    Projector,
};
use clap::{Parser, Subcommand};
use serde::Deserialize;

const THREADS_ENV: &str = "BREATHERLAB_THREADS";

#[derive(Parser)]
#[command(name = "breatherlab", version, about = "Doubly-periodic φ⁴ solutions, evolution, Floquet analysis and conditional states")]
#[command(after_help = "Environment: BREATHERLAB_THREADS caps the worker threads used by parallel stages.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standing wave by Poincaré–Lindstedt expansion (resonant when mass = 0).
    Lindstedt {
        /// Number of retained (odd) harmonics in the resonance system.
        #[arg(long, default_value_t = 4)]
        modes: usize,
        #[arg(long)]
        epsilon: f64,
        /// Fundamental amplitude a₁.
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.0)]
        mass: f64,
        /// Newton tolerance on the resonance residual.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Periodic traveling wave A·cn / A·sn with spatial period 2π/harmonic.
    Twave {
        #[arg(long)]
        mass: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        velocity: f64,
        #[arg(long, default_value_t = 1)]
        harmonic: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve a field or polaron state and write step,time,energy,momentum CSV.
    Evolve {
        /// Field state, polaron state, standing-wave or traveling-wave JSON.
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Grid size used when the input is an analytic solution.
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Floquet multipliers and zero-mode residuals about a periodic background.
    Floquet {
        /// Standing-wave or traveling-wave JSON.
        #[arg(long)]
        background: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MODES)]
        modes: usize,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Conditional state of subsystem 1 given a projector on subsystem 2.
    Qcond {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        projector: PathBuf,
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        /// Hermitian observable on subsystem 1.
        #[arg(long)]
        observable: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Core(breatherlab::Error),
    Input(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Input(s) => s.clone(),
        }
    }
}

impl From<breatherlab::Error> for Failure {
    fn from(e: breatherlab::Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Deserialize)]
#[serde(untagged)]
enum InitFile {
    Polaron(PolaronState),
    Field(FieldState),
    Analytic(BackgroundSource),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn finite(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input(format!("--{name} must be finite")))
    }
}

fn lindstedt(modes: usize, epsilon: f64, amplitude: f64, mass: f64, tol: f64) -> CliResult<LindstedtSolution> {
    for (n, v) in [("epsilon", epsilon), ("amplitude", amplitude), ("mass", mass), ("tol", tol)] {
        finite(n, v)?;
    }
    if mass < 0.0 {
        return Err(Failure::Input("--mass must be >= 0".into()));
    }
    if mass > 0.0 {
        return Ok(build_nonresonant(1, amplitude, mass, epsilon)?);
    }
    let problem = ResonanceProblem::new(modes, Normalization::FixA1(amplitude), tol);
    let root = solve_resonance_system(&problem, &[amplitude], 9.0 * amplitude * amplitude / 32.0)?;
    Ok(build_solution(&root.amplitudes, root.omega1, epsilon, tol)?)
}

fn evolve(init: &Path, dt: f64, steps: usize, record_every: usize, grid: usize, out: &Path) -> CliResult<()> {
    finite("dt", dt)?;
    let mut csv = Vec::new();
    let records = match read_json::<InitFile>(init)? {
        InitFile::Polaron(s) => {
            s.validate()?;
            evolve_with_diagnostics(&s, dt, steps, record_every)?.records
        }
        InitFile::Field(s) => {
            s.validate()?;
            evolve_with_diagnostics(&s, dt, steps, record_every)?.records
        }
        InitFile::Analytic(src) => {
            let s = Background::new(src)?.field_state(grid, 0.0)?;
            evolve_with_diagnostics(&s, dt, steps, record_every)?.records
        }
    };
    write_diagnostics_csv(&records, &mut csv).map_err(|e| Failure::Input(e.to_string()))?;
    write_bytes(out, &csv)
}

fn qcond(state: &Path, projector: &Path, d1: usize, d2: usize, observable: Option<&Path>, out: &Path) -> CliResult<()> {
    let dims = BipartiteDims::new(d1, d2)?;
    let rho: DensityMatrix = read_json(state)?;
    let p: Projector = read_json(projector)?;
    let probability = event_probability(&rho, &p, dims)?;
    let conditional = conditional_density(&rho, &p, dims)?;
    let mut doc = serde_json::json!({
        "probability": probability,
        "conditional": conditional,
    });
    if let Some(path) = observable {
        let f = matrix_from_value(&read_json::<serde_json::Value>(path)?)?;
        let e = conditional_expectation(&rho, &f, &p, dims)?;
        doc["expectation"] = serde_json::json!({
            "value": e.value,
            "identity_value": e.identity_value,
            "conditional": e.normalized()?,
        });
    }
    write_json(out, &doc)
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Input(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Lindstedt { modes, epsilon, amplitude, mass, tol, out } => {
            write_json(&out, &lindstedt(modes, epsilon, amplitude, mass, tol)?)
        }
        Command::Twave { mass, epsilon, velocity, harmonic, out } => {
            let p: TravelingWaveProfile = fit_periodic_wave(mass, epsilon, velocity, harmonic)?;
            write_json(&out, &p)
        }
        Command::Evolve { init, dt, steps, record_every, grid, out } => {
            evolve(&init, dt, steps, record_every, grid, &out)
        }
        Command::Floquet { background, modes, dt, out } => {
            finite("dt", dt)?;
            let bg = Background::new(read_json::<BackgroundSource>(&background)?)?;
            write_json(&out, &monodromy(&bg, modes, dt)?.to_json())
        }
        Command::Qcond { state, projector, d1, d2, observable, out } => {
            qcond(&state, &projector, d1, d2, observable.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = writeln!(std::io::stderr(), "error: {}", f.message().replace('\n', " "));
            ExitCode::from(f.exit_code())
        }
    }
}
