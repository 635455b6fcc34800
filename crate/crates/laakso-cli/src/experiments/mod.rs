//! The experiment drivers, one function per subcommand.
//!
//! Every driver samples through RNG streams derived from the master seed
//! and a fixed experiment tag, so runs are reproducible regardless of
//! thread schedule and experiments stay decorrelated under `all`. Row
//! errors are collected into the row itself; only configuration problems
//! (and a run where every single row errored) abort the experiment.

pub mod calculus;
pub mod measure;
pub mod metric;
pub mod poincare;

use anyhow::{bail, Result};
use laakso::rng::derived_rng;
use laakso::{LaaksoPoint, MeasureSpec};
use rand::Rng;
use serde_json::Value;

use crate::config::Config;
use crate::output::Block;

pub const TAG_DISTANCE: u64 = 0xe001;
pub const TAG_GEODESIC: u64 = 0xe002;
pub const TAG_BALL_MEASURE: u64 = 0xe003;
pub const TAG_DOUBLING: u64 = 0xe004;
pub const TAG_AHLFORS: u64 = 0xe005;
pub const TAG_SINGULARITY: u64 = 0xe007;
pub const TAG_DIFFERENTIATE: u64 = 0xe008;
pub const TAG_RESIDUAL: u64 = 0xe009;
pub const TAG_POINCARE_CHAIN: u64 = 0xe00a;
pub const TAG_POINCARE_POINTWISE: u64 = 0xe00b;
pub const TAG_POINCARE_BALL: u64 = 0xe00c;

/// Render any exact value as a JSON string; rationals never become floats.
pub fn exact(value: &dyn std::fmt::Display) -> Value {
    Value::from(value.to_string())
}

/// Sample a pair of distinct points from one stream.
pub fn sample_distinct_pair<R: Rng + ?Sized>(
    spec: &MeasureSpec,
    resolution: usize,
    height_depth: u32,
    rng: &mut R,
) -> (LaaksoPoint, LaaksoPoint) {
    let x = laakso::sample_point(spec, resolution, height_depth, rng);
    loop {
        let y = laakso::sample_point(spec, resolution, height_depth, rng);
        if y != x {
            return (x, y);
        }
    }
}

/// A run where every row errored is a broken experiment, not a result.
pub fn ensure_some_row_ran(block: &Block) -> Result<()> {
    if !block.rows.is_empty() && block.rows.iter().all(|row| row.error.is_some()) {
        let first = block.rows[0].error.as_deref().unwrap_or("unknown");
        bail!("experiment {}: all {} rows failed, first error: {first}", block.experiment, block.rows.len());
    }
    Ok(())
}

/// Per-experiment seed so sweeps under `all` stay independent.
pub fn experiment_seed(master: u64, tag: u64) -> u64 {
    derived_rng(master, &[tag]).gen::<u64>()
}

/// The fixed order the `all` meta-command runs, with the Poincare
/// experiment in each of its three modes.
pub fn all_runners() -> Vec<fn(&Config) -> Result<Block>> {
    vec![
        metric::distance_experiment,
        metric::geodesic,
        measure::ball_measure,
        measure::doubling,
        measure::ahlfors,
        measure::nondoubling,
        measure::singularity,
        calculus::differentiate,
        calculus::residual,
        poincare::run_chain,
        poincare::run_pointwise,
        poincare::run_ball,
    ]
}
