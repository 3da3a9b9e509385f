//! Command-line entry point.
//!
//! Exit codes: `0` success, `1` a criterion failed, `2` configuration
//! error, `3` runtime abort (for example positivity loss).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::closure::{lam_diffusion_matrix, lam_force_identity_residual, well_prepared_state};
use crate::config::ExperimentConfig;
use crate::error::{MixtureError, Result};
use crate::grid::{write_limit_snapshot, write_relaxation_snapshot, FieldU1D};
use crate::harness;
use crate::{limit, relaxation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITERIA_FAIL: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_RUNTIME_ABORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mixdiff",
    about = "Stefan-Maxwell mixtures: structure certification, twin 1-D solvers, epsilon sweeps"
)]
pub struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides the config's output.directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for random sampling in `check` and `lam-compare`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the structure certification battery and write report.json.
    Check {
        /// Number of random states per check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Advance one solver and write CSV snapshots.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
    },
    /// Run the epsilon sweep and write sweep.csv.
    Sweep,
    /// Tabulate the omega-parametrized coefficient matrices and the force
    /// identity residual.
    LamCompare,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Model {
    Relaxation,
    Limit,
}

pub fn main_entry() -> i32 {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> i32 {
    if let Some(threads) = cli.threads {
        // ignore failures: a pool may already exist in-process (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    if let Err(e) = fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory: {e}");
        return EXIT_CONFIG_ERROR;
    }

    let outcome = match cli.command {
        Command::Check { samples } => check(&config, &out_dir, samples, cli.seed),
        Command::Simulate { model } => simulate(&config, &out_dir, model),
        Command::Sweep => sweep(&config, &out_dir),
        Command::LamCompare => lam_compare(&config, &out_dir, cli.seed),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                MixtureError::Config(_) | MixtureError::InvalidSpec(_) => EXIT_CONFIG_ERROR,
                _ => EXIT_RUNTIME_ABORT,
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Err(MixtureError::Config(
            "--config <path> is required".into(),
        )),
    }
}

fn check(config: &ExperimentConfig, out_dir: &Path, samples: usize, seed: u64) -> Result<i32> {
    if samples < 100 {
        return Err(MixtureError::Config(format!(
            "check needs at least 100 samples, got {samples}"
        )));
    }
    let spec = config.spec()?;
    let report = harness::certify_structure(&spec, samples, seed)?;
    let path = out_dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(|e| MixtureError::Config(format!("cannot write {}: {e}", path.display())))?;
    for c in &report.checks {
        println!(
            "{}: {} (max violation {:.3e}, {} samples)",
            c.condition,
            if c.pass { "pass" } else { "FAIL" },
            c.max_violation,
            c.samples
        );
    }
    println!("report written to {}", path.display());
    Ok(if report.pass {
        EXIT_OK
    } else {
        EXIT_CRITERIA_FAIL
    })
}

fn simulate(config: &ExperimentConfig, out_dir: &Path, model: Model) -> Result<i32> {
    let spec = config.spec()?;
    let profile = config.profile()?;
    let u0 = FieldU1D::from_profile(&spec, &profile, config.grid.m, config.grid.length)?;
    let mut times = config.time.snapshot_times.clone();
    if times.is_empty() {
        times.push(config.time.t_end);
    }
    match model {
        Model::Relaxation => {
            let mut field = well_prepared_state(&spec, &u0)?;
            for (k, &t) in times.iter().enumerate() {
                relaxation::advance_to(&spec, &mut field, t, config.time.cfl)?;
                let path = out_dir.join(format!("relaxation_{k:03}.csv"));
                let mut file = fs::File::create(&path).map_err(io_err(&path))?;
                write_relaxation_snapshot(&field, &mut file).map_err(io_err(&path))?;
                println!("wrote {}", path.display());
            }
        }
        Model::Limit => {
            let mut field = u0;
            for (k, &t) in times.iter().enumerate() {
                limit::advance_to(&spec, &mut field, t, config.time.cfl)?;
                let path = out_dir.join(format!("limit_{k:03}.csv"));
                let mut file = fs::File::create(&path).map_err(io_err(&path))?;
                write_limit_snapshot(&field, &mut file).map_err(io_err(&path))?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(EXIT_OK)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> MixtureError + '_ {
    move |e| MixtureError::Config(format!("cannot write {}: {e}", path.display()))
}

fn sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.spec()?;
    let profile = config.profile()?;
    let rows = harness::epsilon_sweep(
        &spec,
        &profile,
        &config.sweep.eps_list,
        config.grid.m,
        config.grid.length,
        config.time.t_end,
        config.time.cfl,
    )?;
    let path = out_dir.join("sweep.csv");
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    harness::write_sweep_csv(&rows, &mut file).map_err(io_err(&path))?;
    let order = harness::fit_order(&rows)?;
    for r in &rows {
        println!("epsilon {:>10.6}: error {:.6e}", r.epsilon, r.error);
    }
    println!("fitted order: {order:.4}");
    println!("table written to {}", path.display());
    let [lo, hi] = config.sweep.order_band;
    Ok(if (lo..=hi).contains(&order) {
        EXIT_OK
    } else {
        eprintln!("fitted order {order:.4} outside [{lo}, {hi}]");
        EXIT_CRITERIA_FAIL
    })
}

fn lam_compare(config: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<i32> {
    let spec = config.spec()?;
    let n = spec.n_species();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // max residual of the force identity over random profiles
    let mut residual: f64 = 0.0;
    for _ in 0..100 {
        let densities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let grads = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
        residual = residual.max(lam_force_identity_residual(&spec, &densities, &grads)?);
    }

    let densities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let omega_flat = vec![1.0; n];
    let omega_ramp: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let d_flat = lam_diffusion_matrix(&spec, &densities, &omega_flat)?;
    let d_ramp = lam_diffusion_matrix(&spec, &densities, &omega_ramp)?;
    let spread = (&d_flat - &d_ramp).amax();
    let asym_flat = (&d_flat - d_flat.transpose()).amax();

    let path = out_dir.join("lam_compare.csv");
    let mut text = String::from("omega,i,j,dbar\n");
    for (label, m) in [("flat", &d_flat), ("ramp", &d_ramp)] {
        for i in 0..n {
            for j in 0..n {
                text.push_str(&format!("{label},{},{},{:.16e}\n", i + 1, j + 1, m[(i, j)]));
            }
        }
    }
    fs::write(&path, text).map_err(io_err(&path))?;

    println!("force identity residual (100 profiles): {residual:.3e}");
    println!("max |Dbar(flat) - Dbar(ramp)|: {spread:.3e}");
    println!("Dbar(flat) asymmetry (reported only): {asym_flat:.3e}");
    println!("table written to {}", path.display());
    Ok(if residual <= 1e-12 && spread > 1e-8 {
        EXIT_OK
    } else {
        EXIT_CRITERIA_FAIL
    })
}
