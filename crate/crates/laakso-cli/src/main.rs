//! Experiment driver: one experiment per invocation (or `all`), seeded
//! reproducibly, with JSON-lines or CSV output and exact rational values.
//!
//! Exit codes: 0 when every row and block check passes, 1 when any check
//! fails, 2 for configuration or usage errors.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Config, OutputFormat, PoincareMode};
use output::{Block, Emitter};

#[derive(Parser)]
#[command(
    name = "laakso-cli",
    version,
    about = "Seeded experiment driver for exact computations on a wormhole quotient of the unit square over the Cantor set"
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed. The LAAKSO_SEED environment variable wins over this.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap worker threads for row evaluation (0 keeps the library default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format for all report lines.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Bernoulli weight p/q of the sampling measure.
    #[arg(long, global = true, value_name = "P/Q")]
    w: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check geodesic distances against the breadth-first oracle.
    Distance {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        sources: Option<usize>,
        #[arg(long)]
        targets: Option<usize>,
    },
    /// Decompose geodesics and audit the scale bookkeeping.
    Geodesic {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        height_depth: Option<u32>,
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Certified ball masses at sampled centers.
    BallMeasure {
        #[arg(long)]
        centers: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<String>>,
        #[arg(long)]
        bracket: Option<String>,
    },
    /// Doubling ratio sweep against the analytic bound.
    Doubling {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<String>>,
    },
    /// Regularity band of the symmetric measure.
    Ahlfors {
        #[arg(long)]
        centers: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<u32>>,
        #[arg(long)]
        band: Option<String>,
    },
    /// Exact non-doubling ratios of the split measure.
    Nondoubling {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        lambda_hat: Option<String>,
        #[arg(long, value_delimiter = ',')]
        ms: Option<Vec<u32>>,
        #[arg(long)]
        floor: Option<String>,
    },
    /// Digit-frequency separation of two Bernoulli measures.
    Singularity {
        #[arg(long)]
        w_low: Option<String>,
        #[arg(long)]
        w_high: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Difference quotients across the builtin function suite.
    Differentiate {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<String>>,
    },
    /// Residual of a candidate derivative over sampled balls.
    Residual {
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        df: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        radius: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// Chain construction and sampled Poincare-type inequalities.
    Poincare {
        #[arg(long, value_enum)]
        mode: Option<PoincareMode>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        height_depth: Option<u32>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        ball_samples: Option<usize>,
        #[arg(long)]
        lip_samples: Option<usize>,
        #[arg(long)]
        lip_shift: Option<u32>,
        #[arg(long)]
        balls: Option<usize>,
        #[arg(long)]
        radius: Option<String>,
    },
    /// Run every experiment once in a fixed order.
    All,
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl Command {
    /// Fold the subcommand's flags into the config, flags winning.
    fn apply(self, config: &mut Config) -> AppliedCommand {
        match self {
            Command::Distance { resolution, sources, targets } => {
                set(&mut config.distance.resolution, resolution);
                set(&mut config.distance.sources, sources);
                set(&mut config.distance.targets, targets);
                AppliedCommand::Distance
            }
            Command::Geodesic { resolution, height_depth, pairs } => {
                set(&mut config.geodesic.resolution, resolution);
                set(&mut config.geodesic.height_depth, height_depth);
                set(&mut config.geodesic.pairs, pairs);
                AppliedCommand::Geodesic
            }
            Command::BallMeasure { centers, radii, bracket } => {
                set(&mut config.ball_measure.centers, centers);
                set(&mut config.ball_measure.radii, radii);
                set(&mut config.ball_measure.bracket, bracket);
                AppliedCommand::BallMeasure
            }
            Command::Doubling { samples, radii } => {
                set(&mut config.doubling.samples, samples);
                set(&mut config.doubling.radii, radii);
                AppliedCommand::Doubling
            }
            Command::Ahlfors { centers, ks, band } => {
                set(&mut config.ahlfors.centers, centers);
                set(&mut config.ahlfors.ks, ks);
                set(&mut config.ahlfors.band, band);
                AppliedCommand::Ahlfors
            }
            Command::Nondoubling { lambda, lambda_hat, ms, floor } => {
                set(&mut config.measure.lambda, lambda);
                set(&mut config.measure.lambda_hat, lambda_hat);
                set(&mut config.nondoubling.ms, ms);
                set(&mut config.nondoubling.floor, floor);
                AppliedCommand::Nondoubling
            }
            Command::Singularity { w_low, w_high, depth, samples } => {
                set(&mut config.singularity.w_low, w_low);
                set(&mut config.singularity.w_high, w_high);
                set(&mut config.singularity.depth, depth);
                set(&mut config.singularity.samples, samples);
                AppliedCommand::Singularity
            }
            Command::Differentiate { resolution, points, scales } => {
                set(&mut config.differentiate.resolution, resolution);
                set(&mut config.differentiate.points, points);
                set(&mut config.differentiate.scales, scales);
                AppliedCommand::Differentiate
            }
            Command::Residual { function, df, resolution, radius, samples, points, tolerance } => {
                set(&mut config.residual.function, function);
                set(&mut config.residual.df, df);
                set(&mut config.residual.resolution, resolution);
                set(&mut config.residual.radius, radius);
                set(&mut config.residual.samples, samples);
                set(&mut config.residual.points, points);
                set(&mut config.residual.tolerance, tolerance);
                AppliedCommand::Residual
            }
            Command::Poincare {
                mode,
                resolution,
                height_depth,
                pairs,
                lambda,
                levels,
                ball_samples,
                lip_samples,
                lip_shift,
                balls,
                radius,
            } => {
                set(&mut config.poincare.mode, mode);
                set(&mut config.poincare.resolution, resolution);
                set(&mut config.poincare.height_depth, height_depth);
                set(&mut config.poincare.pairs, pairs);
                set(&mut config.poincare.lambda, lambda);
                set(&mut config.poincare.levels, levels);
                set(&mut config.poincare.ball_samples, ball_samples);
                set(&mut config.poincare.lip_samples, lip_samples);
                set(&mut config.poincare.lip_shift, lip_shift);
                set(&mut config.poincare.balls, balls);
                set(&mut config.poincare.radius, radius);
                AppliedCommand::Poincare
            }
            Command::All => AppliedCommand::All,
        }
    }
}

enum AppliedCommand {
    Distance,
    Geodesic,
    BallMeasure,
    Doubling,
    Ahlfors,
    Nondoubling,
    Singularity,
    Differentiate,
    Residual,
    Poincare,
    All,
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    config.resolve_seed(cli.seed)?;
    set(&mut config.threads, cli.threads);
    set(&mut config.format, cli.format);
    set(&mut config.measure.w, cli.w);
    let command = cli.command.apply(&mut config);

    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global()?;
    }

    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let mut emitter = Emitter::new(&mut lock, config.format, config.seed, config.threads);

    let runners: Vec<fn(&Config) -> Result<Block>> = match command {
        AppliedCommand::Distance => vec![experiments::metric::distance_experiment],
        AppliedCommand::Geodesic => vec![experiments::metric::geodesic],
        AppliedCommand::BallMeasure => vec![experiments::measure::ball_measure],
        AppliedCommand::Doubling => vec![experiments::measure::doubling],
        AppliedCommand::Ahlfors => vec![experiments::measure::ahlfors],
        AppliedCommand::Nondoubling => vec![experiments::measure::nondoubling],
        AppliedCommand::Singularity => vec![experiments::measure::singularity],
        AppliedCommand::Differentiate => vec![experiments::calculus::differentiate],
        AppliedCommand::Residual => vec![experiments::calculus::residual],
        AppliedCommand::Poincare => vec![experiments::poincare::run],
        AppliedCommand::All => experiments::all_runners(),
    };
    let total = runners.len();
    let mut passed = 0;
    for runner in runners {
        let block = runner(&config)?;
        experiments::ensure_some_row_ran(&block)?;
        if block.pass() {
            passed += 1;
        }
        emitter.emit(&block)?;
    }
    if matches!(command, AppliedCommand::All) {
        emitter.emit_overall(total, passed)?;
    }
    Ok(passed == total)
}
