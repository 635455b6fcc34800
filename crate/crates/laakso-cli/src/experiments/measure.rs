//! Measure experiments: certified ball masses, doubling sweeps, Ahlfors
//! regularity, the split-measure non-doubling ratio, and the digit
//! frequency separation of two Bernoulli measures.

use anyhow::{bail, Result};
use laakso::rng::derived_rng;
use laakso::{
    ahlfors_report, ball_measure as ball_mass, digit_statistics, doubling_report, fine_grid, nondoubling_ratio,
    required_resolution, sample_address, sample_point, BigRational, Triadic,
};
use num_traits::Signed;
use rayon::prelude::*;
use serde_json::json;

use super::{exact, experiment_seed, TAG_AHLFORS, TAG_BALL_MEASURE, TAG_DOUBLING, TAG_SINGULARITY};
use crate::config::{
    bernoulli_spec, check_nonempty, check_positive, parse_rational, parse_triadic, parse_weight, split_spec,
    Config,
};
use crate::output::{Block, Row};

/// Certified ball masses over sampled centers and configured radii. A row
/// passes when the certified bracket is positive and no wider than the
/// configured multiplicative tolerance.
pub fn ball_measure(config: &Config) -> Result<Block> {
    let section = &config.ball_measure;
    check_positive("ball_measure.centers", section.centers)?;
    check_nonempty("ball_measure.radii", &section.radii)?;
    let spec = bernoulli_spec(&config.measure)?;
    let bracket = parse_rational("ball_measure.bracket", &section.bracket)?;
    let mut radii = Vec::with_capacity(section.radii.len());
    for (i, raw) in section.radii.iter().enumerate() {
        let r = parse_triadic(&format!("ball_measure.radii[{i}]"), raw)?;
        if !r.is_positive() || r >= Triadic::one() {
            bail!("ball_measure.radii[{i}] = {r} must lie in (0, 1)");
        }
        radii.push(r);
    }
    let r_min = radii.iter().min().expect("nonempty radii");
    let resolution = required_resolution(r_min)? + 2;

    let centers: Vec<_> = (0..section.centers)
        .map(|i| {
            let mut rng = derived_rng(config.seed, &[TAG_BALL_MEASURE, i as u64]);
            sample_point(&spec, resolution, resolution as u32, &mut rng)
        })
        .collect();

    let mut rows = Vec::new();
    let mut worst = BigRational::from_integer(0.into());
    for x in &centers {
        for r in &radii {
            let index = rows.len();
            let row = (|| -> Result<Row> {
                let grid = fine_grid(r)?;
                let bounds = ball_mass(&spec, x, r, &grid)?;
                if !bounds.lower.is_positive() {
                    bail!("certified lower mass vanished at {x}, r = {r}");
                }
                let ratio = &bounds.upper / &bounds.lower;
                let pass = ratio <= bracket;
                if ratio > worst {
                    worst = ratio.clone();
                }
                Ok(Row::ok(
                    index,
                    vec![
                        ("center", exact(x)),
                        ("radius", exact(r)),
                        ("lower", exact(&bounds.lower)),
                        ("upper", exact(&bounds.upper)),
                        ("bracket_ratio", exact(&ratio)),
                    ],
                    pass,
                ))
            })();
            rows.push(row.unwrap_or_else(|e| Row::failed(index, e.to_string())));
        }
    }

    Ok(Block {
        experiment: "ball-measure".into(),
        columns: vec!["center", "radius", "lower", "upper", "bracket_ratio"],
        config: json!({ "measure": config.measure, "ball_measure": section }),
        rows,
        details: json!({
            "resolution": resolution,
            "bracket": section.bracket,
            "max_bracket_ratio": worst.to_string(),
        }),
        block_pass: true,
    })
}

/// Doubling sweep: certified mass ratio of the doubled ball against the
/// analytic bound for the configured Bernoulli weight.
pub fn doubling(config: &Config) -> Result<Block> {
    let section = &config.doubling;
    check_positive("doubling.samples", section.samples)?;
    check_nonempty("doubling.radii", &section.radii)?;
    let spec = bernoulli_spec(&config.measure)?;
    let mut radii = Vec::with_capacity(section.radii.len());
    for (i, raw) in section.radii.iter().enumerate() {
        radii.push(parse_triadic(&format!("doubling.radii[{i}]"), raw)?);
    }
    let report = doubling_report(&spec, section.samples, &radii, experiment_seed(config.seed, TAG_DOUBLING))?;

    let rows = report
        .rows
        .iter()
        .enumerate()
        .map(|(index, row)| {
            Row::ok(
                index,
                vec![
                    ("center", exact(&row.center)),
                    ("radius", exact(&row.radius)),
                    ("small_lower", exact(&row.small.lower)),
                    ("doubled_upper", exact(&row.doubled.upper)),
                    ("ratio", exact(&row.ratio)),
                ],
                row.pass,
            )
        })
        .collect();

    Ok(Block {
        experiment: "doubling".into(),
        columns: vec!["center", "radius", "small_lower", "doubled_upper", "ratio"],
        config: json!({ "measure": config.measure, "doubling": section }),
        rows,
        details: json!({
            "bound": report.bound.to_string(),
            "max_ratio": report.max_ratio.to_string(),
        }),
        block_pass: report.max_ratio <= report.bound,
    })
}

/// Ahlfors regularity of the symmetric measure: certified mass over the
/// exact power of the radius must stay inside a band no wider than the
/// configured multiplicative factor.
pub fn ahlfors(config: &Config) -> Result<Block> {
    let section = &config.ahlfors;
    check_positive("ahlfors.centers", section.centers)?;
    check_nonempty("ahlfors.ks", &section.ks)?;
    let band_bound = parse_rational("ahlfors.band", &section.band)?;
    let report = ahlfors_report(section.centers, &section.ks, experiment_seed(config.seed, TAG_AHLFORS))?;

    let rows = report
        .rows
        .iter()
        .enumerate()
        .map(|(index, row)| {
            Row::ok(
                index,
                vec![
                    ("center", exact(&row.center)),
                    ("k", row.k.into()),
                    ("radius", exact(&row.radius)),
                    ("lower_ratio", exact(&row.lower_ratio)),
                    ("upper_ratio", exact(&row.upper_ratio)),
                ],
                row.lower_ratio.is_positive(),
            )
        })
        .collect();

    let band = &report.max_upper_ratio / &report.min_lower_ratio;
    Ok(Block {
        experiment: "ahlfors".into(),
        columns: vec!["center", "k", "radius", "lower_ratio", "upper_ratio"],
        config: json!({ "ahlfors": section }),
        rows,
        details: json!({
            "min_lower_ratio": report.min_lower_ratio.to_string(),
            "max_upper_ratio": report.max_upper_ratio.to_string(),
            "band": band.to_string(),
            "band_bound": section.band,
        }),
        block_pass: report.min_lower_ratio.is_positive() && band <= band_bound,
    })
}

/// Exact non-doubling ratios of the split measure: one row per ball
/// parameter, certified ratio against its analytic lower bound, and the
/// whole sweep must grow strictly.
pub fn nondoubling(config: &Config) -> Result<Block> {
    let section = &config.nondoubling;
    check_nonempty("nondoubling.ms", &section.ms)?;
    for pair in section.ms.windows(2) {
        if pair[1] <= pair[0] {
            bail!("nondoubling.ms must be strictly increasing, got {:?}", section.ms);
        }
    }
    let floor = parse_rational("nondoubling.floor", &section.floor)?;
    let spec = split_spec(&config.measure)?;
    let (lambda, lambda_hat) = match &spec {
        laakso::MeasureSpec::Split { lambda, lambda_hat } => (lambda.clone(), lambda_hat.clone()),
        _ => unreachable!("split_spec builds a split measure"),
    };
    if lambda >= lambda_hat {
        bail!("measure.lambda must be smaller than measure.lambda_hat for a non-doubling sweep");
    }

    let mut rows = Vec::with_capacity(section.ms.len());
    let mut last_ok: Option<BigRational> = None;
    let mut increasing = true;
    for (index, &m) in section.ms.iter().enumerate() {
        let row = (|| -> Result<Row> {
            let report = nondoubling_ratio(&lambda, &lambda_hat, m)?;
            let pass = report.computed >= &floor * &report.analytic;
            if let Some(prev) = &last_ok {
                increasing &= report.computed > *prev;
            }
            last_ok = Some(report.computed.clone());
            Ok(Row::ok(
                index,
                vec![
                    ("m", m.into()),
                    ("computed", exact(&report.computed)),
                    ("analytic", exact(&report.analytic)),
                    ("floor", exact(&floor)),
                ],
                pass,
            ))
        })();
        rows.push(row.unwrap_or_else(|e| Row::failed(index, e.to_string())));
    }

    Ok(Block {
        experiment: "nondoubling".into(),
        columns: vec!["m", "computed", "analytic", "floor"],
        config: json!({ "measure": config.measure, "nondoubling": section }),
        rows,
        details: json!({ "strictly_increasing": increasing }),
        block_pass: increasing,
    })
}

/// Mutual singularity statistic: depth-`n` digit frequencies from the two
/// measures must land on their own sides of 1/2 every single time.
pub fn singularity(config: &Config) -> Result<Block> {
    let section = &config.singularity;
    check_positive("singularity.depth", section.depth)?;
    check_positive("singularity.samples", section.samples)?;
    let w_low = parse_weight("singularity.w_low", &section.w_low)?;
    let w_high = parse_weight("singularity.w_high", &section.w_high)?;
    let half = BigRational::new(1.into(), 2.into());
    if w_low >= half || w_high <= half {
        bail!("singularity needs w_low < 1/2 < w_high to separate at the 1/2 threshold");
    }

    let sides = [
        (0u64, laakso::MeasureSpec::bernoulli(w_low)?, true),
        (1u64, laakso::MeasureSpec::bernoulli(w_high)?, false),
    ];
    let mut rows = Vec::with_capacity(2);
    for (side, spec, expect_low) in &sides {
        let misclassified: usize = (0..section.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = derived_rng(config.seed, &[TAG_SINGULARITY, *side, i as u64]);
                let mean = digit_statistics(&sample_address(spec, section.depth, &mut rng)).final_mean();
                let low = mean < half;
                usize::from(low != *expect_low)
            })
            .sum();
        rows.push(Row::ok(
            rows.len(),
            vec![
                ("measure", exact(spec)),
                ("samples", section.samples.into()),
                ("depth", section.depth.into()),
                ("misclassified", misclassified.into()),
            ],
            misclassified == 0,
        ));
    }

    Ok(Block {
        experiment: "singularity".into(),
        columns: vec!["measure", "samples", "depth", "misclassified"],
        config: json!({ "singularity": section }),
        rows,
        details: json!({ "threshold": "1/2" }),
        block_pass: true,
    })
}
