//! Experiment configuration: defaults, TOML file, and flag overrides.
//!
//! Precedence is flags > file > built-in defaults, except the seed, where
//! the `LAAKSO_SEED` environment variable wins over everything. Rational
//! parameters are kept as strings (`p/q` or `k/3^d`) so a config
//! round-trips through its textual form losslessly; they are parsed and
//! range-checked by `validate` before an experiment runs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use laakso::{BigRational, MeasureSpec, Triadic, ORACLE_MAX_RESOLUTION};
use num_traits::One;
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA: &str = "laakso-config/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputFormat::Json => write!(f, "json"),
            OutputFormat::Csv => write!(f, "csv"),
        }
    }
}

/// The full configuration, one section per experiment plus shared knobs.
/// Unknown keys are rejected so typos surface as parse errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub schema: String,
    pub seed: u64,
    /// Worker thread cap for row evaluation; 0 keeps the library default.
    pub threads: usize,
    pub format: OutputFormat,
    pub measure: MeasureSection,
    pub distance: DistanceSection,
    pub geodesic: GeodesicSection,
    pub ball_measure: BallMeasureSection,
    pub doubling: DoublingSection,
    pub ahlfors: AhlforsSection,
    pub nondoubling: NondoublingSection,
    pub singularity: SingularitySection,
    pub differentiate: DifferentiateSection,
    pub residual: ResidualSection,
    pub poincare: PoincareSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema: CONFIG_SCHEMA.to_string(),
            seed: 7,
            threads: 0,
            format: OutputFormat::Json,
            measure: MeasureSection::default(),
            distance: DistanceSection::default(),
            geodesic: GeodesicSection::default(),
            ball_measure: BallMeasureSection::default(),
            doubling: DoublingSection::default(),
            ahlfors: AhlforsSection::default(),
            nondoubling: NondoublingSection::default(),
            singularity: SingularitySection::default(),
            differentiate: DifferentiateSection::default(),
            residual: ResidualSection::default(),
            poincare: PoincareSection::default(),
        }
    }
}

/// Shared sampling measure: Bernoulli weight for most experiments, split
/// weights for the non-doubling one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub w: String,
    pub lambda: String,
    pub lambda_hat: String,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection { w: "1/2".into(), lambda: "3/10".into(), lambda_hat: "6/10".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceSection {
    pub resolution: usize,
    pub sources: usize,
    pub targets: usize,
}

impl Default for DistanceSection {
    fn default() -> Self {
        DistanceSection { resolution: 4, sources: 4, targets: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicSection {
    pub resolution: usize,
    pub height_depth: u32,
    pub pairs: usize,
}

impl Default for GeodesicSection {
    fn default() -> Self {
        GeodesicSection { resolution: 5, height_depth: 6, pairs: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallMeasureSection {
    pub centers: usize,
    pub radii: Vec<String>,
    /// Certification tolerance: every row needs upper <= bracket * lower.
    pub bracket: String,
}

impl Default for BallMeasureSection {
    fn default() -> Self {
        BallMeasureSection {
            centers: 8,
            radii: vec!["1/3^2".into(), "1/3^3".into()],
            bracket: "4".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoublingSection {
    pub samples: usize,
    pub radii: Vec<String>,
}

impl Default for DoublingSection {
    fn default() -> Self {
        DoublingSection {
            samples: 20,
            radii: vec!["1/3^2".into(), "1/3^3".into(), "1/3^4".into(), "1/3^5".into(), "1/3^6".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AhlforsSection {
    pub centers: usize,
    pub ks: Vec<u32>,
    /// Maximal multiplicative width of the regularity band.
    pub band: String,
}

impl Default for AhlforsSection {
    fn default() -> Self {
        AhlforsSection { centers: 50, ks: vec![2, 3, 4, 5, 6], band: "1000".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NondoublingSection {
    pub ms: Vec<u32>,
    /// Per-row floor: computed ratio >= floor * analytic bound.
    pub floor: String,
}

impl Default for NondoublingSection {
    fn default() -> Self {
        NondoublingSection { ms: vec![6, 8, 10], floor: "1/2".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingularitySection {
    pub w_low: String,
    pub w_high: String,
    pub depth: usize,
    pub samples: usize,
}

impl Default for SingularitySection {
    fn default() -> Self {
        SingularitySection { w_low: "3/10".into(), w_high: "7/10".into(), depth: 500, samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifferentiateSection {
    pub resolution: usize,
    pub points: usize,
    pub scales: Vec<String>,
}

impl Default for DifferentiateSection {
    fn default() -> Self {
        DifferentiateSection {
            resolution: 5,
            points: 5,
            scales: vec!["1/3^2".into(), "1/3^3".into(), "1/3^4".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResidualSection {
    pub function: String,
    pub df: String,
    pub resolution: usize,
    pub radius: String,
    pub samples: usize,
    pub points: usize,
    pub tolerance: String,
}

impl Default for ResidualSection {
    fn default() -> Self {
        ResidualSection {
            function: "height".into(),
            df: "1".into(),
            resolution: 5,
            radius: "1/3^2".into(),
            samples: 200,
            points: 4,
            tolerance: "0".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PoincareMode {
    Chain,
    Pointwise,
    Ball,
}

impl fmt::Display for PoincareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoincareMode::Chain => write!(f, "chain"),
            PoincareMode::Pointwise => write!(f, "pointwise"),
            PoincareMode::Ball => write!(f, "ball"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareSection {
    pub mode: PoincareMode,
    pub resolution: usize,
    pub height_depth: u32,
    pub pairs: usize,
    pub lambda: String,
    pub levels: usize,
    pub ball_samples: usize,
    pub lip_samples: usize,
    pub lip_shift: u32,
    pub balls: usize,
    pub radius: String,
}

impl Default for PoincareSection {
    fn default() -> Self {
        PoincareSection {
            mode: PoincareMode::Chain,
            resolution: 5,
            height_depth: 7,
            pairs: 30,
            lambda: "2".into(),
            levels: 3,
            ball_samples: 24,
            lip_samples: 4,
            lip_shift: 2,
            balls: 3,
            radius: "1/3^2".into(),
        }
    }
}

impl Config {
    /// Parse a TOML file; errors carry the file's line and column.
    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: Config =
            toml::from_str(&text).with_context(|| format!("config file {} is invalid", path.display()))?;
        if config.schema != CONFIG_SCHEMA {
            bail!(
                "config file {} declares schema {:?}, this binary speaks {:?}",
                path.display(),
                config.schema,
                CONFIG_SCHEMA
            );
        }
        Ok(config)
    }

    /// Seed precedence: LAAKSO_SEED env var, then the --seed flag, then the
    /// config file, then the built-in default.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<()> {
        if let Ok(raw) = std::env::var("LAAKSO_SEED") {
            let seed: u64 =
                raw.trim().parse().with_context(|| format!("LAAKSO_SEED={raw:?} is not a 64-bit seed"))?;
            self.seed = seed;
            return Ok(());
        }
        if let Some(seed) = flag {
            self.seed = seed;
        }
        Ok(())
    }
}

/// Parse a rational parameter, naming the field in errors.
pub fn parse_rational(field: &str, s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim()).with_context(|| format!("{field} = {s:?} is not a rational p/q"))
}

/// Parse a weight in (0, 1).
pub fn parse_weight(field: &str, s: &str) -> Result<BigRational> {
    let w = parse_rational(field, s)?;
    if !num_traits::Signed::is_positive(&w) || w >= BigRational::one() {
        bail!("{field} = {s:?} must lie strictly between 0 and 1");
    }
    Ok(w)
}

/// Parse a triadic parameter (`k`, `k/3^d`, or `k/q` with `q` a power of 3).
pub fn parse_triadic(field: &str, s: &str) -> Result<Triadic> {
    Triadic::from_str(s.trim()).map_err(|e| anyhow::anyhow!("{field}: {e}"))
}

pub fn bernoulli_spec(section: &MeasureSection) -> Result<MeasureSpec> {
    let w = parse_weight("measure.w", &section.w)?;
    MeasureSpec::bernoulli(w).map_err(|e| anyhow::anyhow!("measure.w: {e}"))
}

pub fn split_spec(section: &MeasureSection) -> Result<MeasureSpec> {
    let lambda = parse_weight("measure.lambda", &section.lambda)?;
    let lambda_hat = parse_weight("measure.lambda_hat", &section.lambda_hat)?;
    MeasureSpec::split(lambda, lambda_hat).map_err(|e| anyhow::anyhow!("measure.lambda/lambda_hat: {e}"))
}

pub fn check_resolution(field: &str, resolution: usize, need_oracle: bool) -> Result<()> {
    if resolution == 0 {
        bail!("{field} must be at least 1");
    }
    if need_oracle && resolution > ORACLE_MAX_RESOLUTION {
        bail!("{field} = {resolution} exceeds the oracle ceiling {ORACLE_MAX_RESOLUTION}");
    }
    Ok(())
}

pub fn check_nonempty<T>(field: &str, list: &[T]) -> Result<()> {
    if list.is_empty() {
        bail!("{field} must not be empty");
    }
    Ok(())
}

pub fn check_positive(field: &str, value: usize) -> Result<()> {
    if value == 0 {
        bail!("{field} must be positive");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_losslessly() {
        let mut config = Config::default();
        config.seed = 99;
        config.doubling.radii = vec!["1/3^4".into()];
        config.measure.w = "2/7".into();
        let text = toml::to_string(&config).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = toml::from_str::<Config>("sed = 7\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sed"), "diagnostic should name the field: {msg}");
    }

    #[test]
    fn rational_parsers_vet_their_input() {
        assert!(parse_rational("x", "3/4").is_ok());
        assert!(parse_rational("x", "").is_err());
        assert!(parse_weight("x", "7/10").is_ok());
        assert!(parse_weight("x", "7/5").is_err());
        assert_eq!(parse_triadic("x", "2/3^3").unwrap(), Triadic::new(2, 3));
        assert!(parse_triadic("x", "1/5").is_err());
    }
}
