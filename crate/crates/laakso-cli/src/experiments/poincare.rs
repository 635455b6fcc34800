//! Chaining experiments: rectangle chain validation, and the pointwise
//! and ball forms of the sampled Poincare-type inequality.

use anyhow::{bail, Result};
use laakso::rng::derived_rng;
use laakso::{
    ball_pi_report, build_chain, builtin_functions, pointwise_pi_report, sample_point, validate_chain,
    BallPiParams, BigRational, LaaksoPoint, PointwisePiParams, Triadic,
};
use serde_json::{json, Value};

use super::{exact, sample_distinct_pair, TAG_POINCARE_BALL, TAG_POINCARE_CHAIN, TAG_POINCARE_POINTWISE};
use crate::config::{
    bernoulli_spec, check_positive, check_resolution, parse_triadic, Config, PoincareMode, PoincareSection,
};
use crate::output::{Block, Row};

pub fn run(config: &Config) -> Result<Block> {
    let section = &config.poincare;
    check_resolution("poincare.resolution", section.resolution, false)?;
    match section.mode {
        PoincareMode::Chain => chain(config, section),
        PoincareMode::Pointwise => pointwise(config, section),
        PoincareMode::Ball => ball(config, section),
    }
}

pub fn run_chain(config: &Config) -> Result<Block> {
    run_mode(config, PoincareMode::Chain)
}

pub fn run_pointwise(config: &Config) -> Result<Block> {
    run_mode(config, PoincareMode::Pointwise)
}

pub fn run_ball(config: &Config) -> Result<Block> {
    run_mode(config, PoincareMode::Ball)
}

fn run_mode(config: &Config, mode: PoincareMode) -> Result<Block> {
    let mut tuned = config.clone();
    tuned.poincare.mode = mode;
    run(&tuned)
}

/// Build a rectangle chain per sampled pair and revalidate it from
/// scratch: counts, case labels, endpoint containment, and the certified
/// diameter decay.
fn chain(config: &Config, section: &PoincareSection) -> Result<Block> {
    check_positive("poincare.pairs", section.pairs)?;
    let spec = bernoulli_spec(&config.measure)?;

    let mut rows = Vec::with_capacity(section.pairs);
    for i in 0..section.pairs {
        let mut rng = derived_rng(config.seed, &[TAG_POINCARE_CHAIN, i as u64]);
        let (p, q) = sample_distinct_pair(&spec, section.resolution, section.height_depth, &mut rng);
        let row = (|| -> Result<Row> {
            let chain = build_chain(&p, &q)?;
            validate_chain(&chain, &spec)?;
            let junction = chain.labels[chain.negative_count].to_string();
            Ok(Row::ok(
                i,
                vec![
                    ("x", exact(&p)),
                    ("y", exact(&q)),
                    ("distance", exact(&chain.distance)),
                    ("scale", chain.scale.into()),
                    ("rectangles", chain.rectangles.len().into()),
                    ("junction", junction.into()),
                ],
                true,
            ))
        })();
        rows.push(row.unwrap_or_else(|e| Row::failed(i, e.to_string())));
    }

    Ok(Block {
        experiment: "poincare".into(),
        columns: vec!["x", "y", "distance", "scale", "rectangles", "junction"],
        config: json!({ "measure": config.measure, "poincare": section }),
        rows,
        details: json!({ "mode": "chain" }),
        block_pass: true,
    })
}

fn pi_params(section: &PoincareSection) -> Result<(Triadic, PointwisePiParams, BallPiParams)> {
    let lambda = parse_triadic("poincare.lambda", &section.lambda)?;
    if !lambda.is_positive() {
        bail!("poincare.lambda must be positive");
    }
    let pointwise = PointwisePiParams {
        lambda: lambda.clone(),
        levels: section.levels,
        ball_samples: section.ball_samples,
        lip_samples: section.lip_samples,
        lip_shift: section.lip_shift,
    };
    let ball = BallPiParams {
        lambda: lambda.clone(),
        ball_samples: section.ball_samples,
        lip_samples: section.lip_samples,
        lip_shift: section.lip_shift,
    };
    Ok((lambda, pointwise, ball))
}

fn optional_ratio(ratio: &Option<BigRational>) -> Value {
    match ratio {
        Some(r) => Value::from(r.to_string()),
        None => Value::Null,
    }
}

/// Sampled pointwise inequality over the builtin suite: each pair's gap
/// against the maximal slope estimates at its endpoints. A row passes
/// when the ratio is finite.
fn pointwise(config: &Config, section: &PoincareSection) -> Result<Block> {
    check_positive("poincare.pairs", section.pairs)?;
    let spec = bernoulli_spec(&config.measure)?;
    let (_, params, _) = pi_params(section)?;

    let pairs: Vec<(LaaksoPoint, LaaksoPoint)> = (0..section.pairs)
        .map(|i| {
            let mut rng = derived_rng(config.seed, &[TAG_POINCARE_POINTWISE, i as u64]);
            sample_distinct_pair(&spec, section.resolution, section.height_depth, &mut rng)
        })
        .collect();
    let functions = builtin_functions(section.resolution);

    let mut rows = Vec::with_capacity(functions.len() * pairs.len());
    let mut max_ratio: Option<BigRational> = None;
    let mut unbounded = 0usize;
    let mut per_function = serde_json::Map::new();
    for f in &functions {
        let report = pointwise_pi_report(f, &pairs, &spec, &params, config.seed)?;
        unbounded += report.unbounded_rows;
        for pi_row in &report.rows {
            let index = rows.len();
            rows.push(Row::ok(
                index,
                vec![
                    ("function", f.name().into()),
                    ("x", exact(&pi_row.p)),
                    ("y", exact(&pi_row.q)),
                    ("distance", exact(&pi_row.distance)),
                    ("maximal_x", exact(&pi_row.maximal_p)),
                    ("maximal_y", exact(&pi_row.maximal_q)),
                    ("ratio", optional_ratio(&pi_row.ratio)),
                ],
                pi_row.ratio.is_some(),
            ));
        }
        per_function.insert(f.name().to_string(), optional_ratio(&report.max_ratio));
        if let Some(r) = &report.max_ratio {
            if max_ratio.as_ref().map_or(true, |m| r > m) {
                max_ratio = Some(r.clone());
            }
        }
    }

    Ok(Block {
        experiment: "poincare".into(),
        columns: vec!["function", "x", "y", "distance", "maximal_x", "maximal_y", "ratio"],
        config: json!({ "measure": config.measure, "poincare": section }),
        rows,
        details: json!({
            "mode": "pointwise",
            "max_ratio": optional_ratio(&max_ratio),
            "per_function": Value::Object(per_function),
            "unbounded_rows": unbounded,
        }),
        block_pass: unbounded == 0,
    })
}

/// Sampled ball inequality over the builtin suite: mean deviation inside
/// each ball against the radius times the enlarged ball's slope average.
fn ball(config: &Config, section: &PoincareSection) -> Result<Block> {
    check_positive("poincare.balls", section.balls)?;
    let spec = bernoulli_spec(&config.measure)?;
    let (_, _, params) = pi_params(section)?;
    let radius = parse_triadic("poincare.radius", &section.radius)?;
    if !radius.is_positive() {
        bail!("poincare.radius must be positive");
    }

    let balls: Vec<(LaaksoPoint, Triadic)> = (0..section.balls)
        .map(|i| {
            let mut rng = derived_rng(config.seed, &[TAG_POINCARE_BALL, i as u64]);
            let center = sample_point(&spec, section.resolution, section.height_depth, &mut rng);
            (center, radius.clone())
        })
        .collect();
    let functions = builtin_functions(section.resolution);

    let mut rows = Vec::with_capacity(functions.len() * balls.len());
    let mut max_ratio: Option<BigRational> = None;
    let mut unbounded = 0usize;
    let mut per_function = serde_json::Map::new();
    for f in &functions {
        let report = ball_pi_report(f, &balls, &spec, &params, config.seed)?;
        unbounded += report.unbounded_rows;
        for pi_row in &report.rows {
            let index = rows.len();
            rows.push(Row::ok(
                index,
                vec![
                    ("function", f.name().into()),
                    ("center", exact(&pi_row.center)),
                    ("radius", exact(&pi_row.radius)),
                    ("lhs", exact(&pi_row.lhs)),
                    ("rhs", exact(&pi_row.rhs)),
                    ("ratio", optional_ratio(&pi_row.ratio)),
                ],
                pi_row.ratio.is_some(),
            ));
        }
        per_function.insert(f.name().to_string(), optional_ratio(&report.max_ratio));
        if let Some(r) = &report.max_ratio {
            if max_ratio.as_ref().map_or(true, |m| r > m) {
                max_ratio = Some(r.clone());
            }
        }
    }

    Ok(Block {
        experiment: "poincare".into(),
        columns: vec!["function", "center", "radius", "lhs", "rhs", "ratio"],
        config: json!({ "measure": config.measure, "poincare": section }),
        rows,
        details: json!({
            "mode": "ball",
            "max_ratio": optional_ratio(&max_ratio),
            "per_function": Value::Object(per_function),
            "unbounded_rows": unbounded,
        }),
        block_pass: unbounded == 0,
    })
}
