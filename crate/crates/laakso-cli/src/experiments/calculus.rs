//! Derivative experiments: directional quotients across the builtin
//! function suite and residual checks against a candidate derivative.

use anyhow::{bail, Result};
use laakso::rng::derived_rng;
use laakso::{
    builtin_functions, differentiability_residual, directional_derivative, sample_point, BigRational,
    LaaksoPoint, MeasureSpec, Triadic,
};
use num_traits::{One, Signed};
use serde_json::json;

use super::{exact, TAG_DIFFERENTIATE, TAG_RESIDUAL};
use crate::config::{
    bernoulli_spec, check_nonempty, check_positive, check_resolution, parse_rational, parse_triadic, Config,
};
use crate::output::{Block, Row};

/// Sample a point whose upward steps stay inside the unit interval.
fn sample_point_below<R: rand::Rng + ?Sized>(
    spec: &MeasureSpec,
    resolution: usize,
    headroom: &Triadic,
    rng: &mut R,
) -> Result<LaaksoPoint> {
    let limit = &Triadic::one() - headroom;
    for _ in 0..200 {
        let x = sample_point(spec, resolution, resolution as u32 + 1, rng);
        if *x.height() <= limit {
            return Ok(x);
        }
    }
    bail!("no sampled height left room for a step of {headroom}");
}

/// Difference quotients for every builtin function at shared sample
/// points. Rows pass when each quotient respects the declared slope bound,
/// the two fiber representatives agree at wormholes, and the coordinate
/// function reproduces slope one exactly.
pub fn differentiate(config: &Config) -> Result<Block> {
    let section = &config.differentiate;
    check_resolution("differentiate.resolution", section.resolution, false)?;
    check_positive("differentiate.points", section.points)?;
    check_nonempty("differentiate.scales", &section.scales)?;
    let spec = bernoulli_spec(&config.measure)?;
    let mut scales = Vec::with_capacity(section.scales.len());
    for (i, raw) in section.scales.iter().enumerate() {
        let t = parse_triadic(&format!("differentiate.scales[{i}]"), raw)?;
        if !t.is_positive() {
            bail!("differentiate.scales[{i}] = {t} must be positive");
        }
        scales.push(t);
    }
    for pair in scales.windows(2) {
        if pair[1] >= pair[0] {
            bail!("differentiate.scales must decrease strictly, got {:?}", section.scales);
        }
    }
    let headroom = scales[0].clone();

    let points = (0..section.points)
        .map(|i| {
            let mut rng = derived_rng(config.seed, &[TAG_DIFFERENTIATE, i as u64]);
            sample_point_below(&spec, section.resolution, &headroom, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let functions = builtin_functions(section.resolution);

    let mut rows = Vec::with_capacity(functions.len() * points.len());
    for f in &functions {
        for x in &points {
            let index = rows.len();
            let row = (|| -> Result<Row> {
                let sweep = directional_derivative(f, x, &scales)?;
                let lip = f.lipschitz();
                let mut pass = sweep.sides_agree != Some(false);
                for quotient_row in &sweep.rows {
                    pass &= quotient_row.quotient.abs() <= *lip;
                    if f.name() == "height" {
                        pass &= quotient_row.quotient == BigRational::one();
                    }
                }
                let quotients = sweep
                    .rows
                    .iter()
                    .map(|r| r.quotient.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
                let order = sweep.wormhole_order.map_or(String::new(), |o| o.to_string());
                Ok(Row::ok(
                    index,
                    vec![
                        ("function", f.name().into()),
                        ("point", exact(x)),
                        ("wormhole_order", order.into()),
                        ("quotients", quotients.into()),
                        ("lip", exact(lip)),
                    ],
                    pass,
                ))
            })();
            rows.push(row.unwrap_or_else(|e| Row::failed(index, e.to_string())));
        }
    }

    Ok(Block {
        experiment: "differentiate".into(),
        columns: vec!["function", "point", "wormhole_order", "quotients", "lip"],
        config: json!({ "measure": config.measure, "differentiate": section }),
        rows,
        details: json!({ "functions": functions.len(), "points": points.len() }),
        block_pass: true,
    })
}

/// Residual of a candidate derivative over sampled balls: the largest
/// normalized gap must stay under the configured tolerance. The default
/// checks that the coordinate function has derivative one with residual
/// exactly zero.
pub fn residual(config: &Config) -> Result<Block> {
    let section = &config.residual;
    check_resolution("residual.resolution", section.resolution, false)?;
    check_positive("residual.points", section.points)?;
    check_positive("residual.samples", section.samples)?;
    let spec = bernoulli_spec(&config.measure)?;
    let df = parse_rational("residual.df", &section.df)?;
    let tolerance = parse_rational("residual.tolerance", &section.tolerance)?;
    if tolerance.is_negative() {
        bail!("residual.tolerance must be nonnegative");
    }
    let radius = parse_triadic("residual.radius", &section.radius)?;
    if !radius.is_positive() {
        bail!("residual.radius must be positive");
    }
    let functions = builtin_functions(section.resolution);
    let function = functions
        .iter()
        .find(|f| f.name() == section.function)
        .ok_or_else(|| {
            let names = functions.iter().map(|f| f.name().to_string()).collect::<Vec<_>>().join(", ");
            anyhow::anyhow!("residual.function = {:?} is not a builtin (have: {names})", section.function)
        })?;

    let mut rows = Vec::with_capacity(section.points);
    for i in 0..section.points {
        let mut rng = derived_rng(config.seed, &[TAG_RESIDUAL, i as u64]);
        let x = sample_point(&spec, section.resolution, section.resolution as u32 + 1, &mut rng);
        let row = (|| -> Result<Row> {
            let residual = differentiability_residual(function, &x, &df, &radius, section.samples, &mut rng)?;
            let pass = residual <= tolerance;
            Ok(Row::ok(
                i,
                vec![
                    ("function", function.name().into()),
                    ("point", exact(&x)),
                    ("df", exact(&df)),
                    ("radius", exact(&radius)),
                    ("residual", exact(&residual)),
                ],
                pass,
            ))
        })();
        rows.push(row.unwrap_or_else(|e| Row::failed(i, e.to_string())));
    }

    Ok(Block {
        experiment: "residual".into(),
        columns: vec!["function", "point", "df", "radius", "residual"],
        config: json!({ "measure": config.measure, "residual": section }),
        rows,
        details: json!({ "tolerance": section.tolerance }),
        block_pass: true,
    })
}
