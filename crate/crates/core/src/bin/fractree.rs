use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use fractree::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use fractree::identify::write_report;
use fractree::measurement::{parse_grid, read_measurement, write_measurement};
use fractree::{
    candidates, identify, simulate_measurement, ComponentId, DamageCase, Error, NoiseMode, NoiseSpec, PoleZeroDatabase,
    SolverSettings, TreeParams,
};

#[derive(Parser)]
#[command(
    name = "fractree",
    version,
    about = "Damage identification for self-similar spring-damper trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Shared,
    Independent,
    PerResponse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    NoiseSweep,
    GenBreakdown,
    EpsBreakdown,
    SecondBest,
    DeepDamage,
    InterpCompare,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate pole/zero loci for every component up to a generation.
    BuildDb {
        #[arg(long)]
        max_gen: u32,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic noisy response of one damage case.
    Simulate {
        #[arg(long)]
        component: String,
        #[arg(long)]
        eps: f64,
        /// Noise amplitude in percent.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// MIN:MAX:N, log-spaced.
        #[arg(long, default_value = "1e-4:1e4:200")]
        grid: String,
        #[arg(long, value_enum, default_value_t = Mode::Shared)]
        noise_mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify the damaged component and amount from a measurement file.
    Identify {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        meas: PathBuf,
        /// Deepest candidate generation; defaults to the database depth.
        #[arg(long)]
        max_gen: Option<u32>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run one of the seeded experiments and write CSV files.
    Experiment {
        #[arg(value_enum)]
        kind: Experiment,
        /// TOML config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> fractree::Result<()> {
    match cli.command {
        Command::BuildDb { max_gen, k, b, out } => {
            let params = TreeParams::new(k, b)?;
            let db = PoleZeroDatabase::build(max_gen, &params)?;
            db.save(&out)?;
            info!("wrote {} tables to {}", db.len(), out.display());
        }
        Command::Simulate {
            component,
            eps,
            noise,
            seed,
            grid,
            noise_mode,
            k,
            b,
            out,
        } => {
            let params = TreeParams::new(k, b)?;
            let case = DamageCase::new(component.parse::<ComponentId>()?, eps)?;
            let mode = match noise_mode {
                Mode::Shared => NoiseMode::Shared,
                Mode::Independent => NoiseMode::Independent,
                Mode::PerResponse => NoiseMode::PerResponse,
            };
            let spec = NoiseSpec::new(noise, seed)?.with_mode(mode);
            let fr = simulate_measurement(&case, &params, &parse_grid(&grid)?, &spec)?;
            write_measurement(&fr, &out)?;
        }
        Command::Identify {
            db,
            meas,
            max_gen,
            report,
        } => {
            let db = PoleZeroDatabase::load(&db)?;
            let max_gen = max_gen.unwrap_or(db.max_generation());
            if max_gen == 0 || max_gen > db.max_generation() {
                return Err(Error::Domain(format!(
                    "--max-gen {max_gen} must lie in 1..={}",
                    db.max_generation()
                )));
            }
            let fr = read_measurement(&meas)?;
            let result = identify(&fr, &db, &candidates(max_gen), &SolverSettings::default())?;
            write_report(&result, &report)?;
            println!(
                "{} eps={:.6} J={:.6e}",
                result.best.component, result.best.eps_star, result.best.j
            );
        }
        Command::Experiment { kind, config, out } => {
            let config = match config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            let kind = match kind {
                Experiment::NoiseSweep => ExperimentKind::NoiseSweep,
                Experiment::GenBreakdown => ExperimentKind::GenBreakdown,
                Experiment::EpsBreakdown => ExperimentKind::EpsBreakdown,
                Experiment::SecondBest => ExperimentKind::SecondBest,
                Experiment::DeepDamage => ExperimentKind::DeepDamage,
                Experiment::InterpCompare => ExperimentKind::InterpCompare,
            };
            for path in run_experiment(kind, &config, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
