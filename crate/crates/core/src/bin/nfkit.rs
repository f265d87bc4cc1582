use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfkit::acceptance::Suite;
use nfkit::cli::{
    parse_config, run_experiment, ExperimentConfig, ExperimentKind, Parameters, RunError, EXIT_ACCEPTANCE_FAILURE,
};

#[derive(Parser)]
#[command(name = "nfkit", version, about = "Near-field propagation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; overrides `output_path`. Without either, CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PositioningArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    elements_per_ap: Option<u64>,
    /// Range-measurement variance in dB relative to 1 m².
    #[arg(long, allow_hyphen_values = true)]
    noise_db_m2: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Rayleigh, Fresnel and uniform-power distances of an aperture.
    Boundaries(RunArgs),
    /// Per-element received power of a multipath channel.
    PowerProfile(RunArgs),
    /// Dictionary coefficients of a channel (angular or polar domain).
    AngularSpread(RunArgs),
    /// Gain maps of a wideband beamformer on several subcarriers.
    Beamsplit(RunArgs),
    /// Narrowband beamfocusing gain map.
    GainMap(RunArgs),
    /// Effective DoF versus link distance.
    DofDistance(RunArgs),
    /// Effective DoF versus TX aperture.
    DofAperture(RunArgs),
    /// Sparse channel estimation with OMP.
    Estimate(RunArgs),
    /// Time-of-arrival positioning Monte Carlo.
    Positioning(PositioningArgs),
    /// Run the acceptance criteria at reduced trial counts.
    SelfCheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut config = parse_config(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if config.kind() != kind {
        return Err(format!(
            "{}: config describes `{}`, not `{kind}`",
            args.config.display(),
            config.kind()
        ));
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if let Some(out) = &args.out {
        config.output_path = Some(out.to_string_lossy().into_owned());
    }
    Ok(config)
}

fn run(kind: ExperimentKind, args: &RunArgs, overrides: impl FnOnce(&mut Parameters)) -> ExitCode {
    let mut config = match load(kind, args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    overrides(&mut config.parameters);
    let to_stdout = config.output_path.is_none();
    match run_experiment(&config) {
        Ok(output) => {
            if to_stdout {
                print!("{}", output.table.to_csv());
                if let Some(s) = &output.summary {
                    eprint!("{}", s.to_csv());
                }
            } else if let Some(s) = &output.summary {
                print!("{}", s.to_csv());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn self_check(seed: u64) -> ExitCode {
    let outcomes = Suite::quick(seed).run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name.to_string())
        .collect();
    if failed.is_empty() {
        println!("self-check passed ({} criteria)", outcomes.len());
        ExitCode::SUCCESS
    } else {
        println!("self-check failed: {}", failed.join(", "));
        ExitCode::from(EXIT_ACCEPTANCE_FAILURE as u8)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let none = |_: &mut Parameters| {};
    match cli.command {
        Command::Boundaries(a) => run(ExperimentKind::Boundaries, &a, none),
        Command::PowerProfile(a) => run(ExperimentKind::PowerProfile, &a, none),
        Command::AngularSpread(a) => run(ExperimentKind::AngularSpread, &a, none),
        Command::Beamsplit(a) => run(ExperimentKind::Beamsplit, &a, none),
        Command::GainMap(a) => run(ExperimentKind::GainMap, &a, none),
        Command::DofDistance(a) => run(ExperimentKind::DofDistance, &a, none),
        Command::DofAperture(a) => run(ExperimentKind::DofAperture, &a, none),
        Command::Estimate(a) => run(ExperimentKind::Estimate, &a, none),
        Command::Positioning(a) => run(ExperimentKind::Positioning, &a.run, |p| {
            if let Parameters::Positioning(p) = p {
                if let Some(t) = a.trials {
                    p.trials = t as usize;
                }
                if let Some(n) = a.elements_per_ap {
                    p.elements_per_ap = n as usize;
                }
                if let Some(db) = a.noise_db_m2 {
                    p.noise_db_m2 = db;
                }
            }
        }),
        Command::SelfCheck { seed } => self_check(seed),
    }
}
