//! Distance and geodesic experiments.

use anyhow::Result;
use laakso::rng::derived_rng;
use laakso::{distance, sample_point, scale_index, segment_decomposition, DistanceOracle, Triadic};
use serde_json::json;

use super::{exact, sample_distinct_pair, TAG_DISTANCE, TAG_GEODESIC};
use crate::config::{bernoulli_spec, check_positive, check_resolution, Config};
use crate::output::{Block, Row};

/// Compare the geodesic distance against breadth-first search on the grid
/// graph, sharing one search per source point. A row passes when the two
/// agree exactly and the distance is symmetric.
pub fn distance_experiment(config: &Config) -> Result<Block> {
    let section = &config.distance;
    check_resolution("distance.resolution", section.resolution, true)?;
    check_positive("distance.sources", section.sources)?;
    check_positive("distance.targets", section.targets)?;
    let spec = bernoulli_spec(&config.measure)?;
    let oracle = DistanceOracle::new(section.resolution)?;

    let mut rows = Vec::with_capacity(section.sources * section.targets);
    for s in 0..section.sources {
        let mut rng = derived_rng(config.seed, &[TAG_DISTANCE, s as u64]);
        let x = sample_point(&spec, section.resolution, section.resolution as u32, &mut rng);
        let from = oracle.distances_from(&x)?;
        for _ in 0..section.targets {
            let y = sample_point(&spec, section.resolution, section.resolution as u32, &mut rng);
            let index = rows.len();
            let row = (|| -> Result<Row> {
                let d = distance(&x, &y)?;
                let reference = from.get(&y)?;
                let symmetric = distance(&y, &x)?;
                let pass = d == reference && d == symmetric;
                Ok(Row::ok(
                    index,
                    vec![
                        ("x", exact(&x)),
                        ("y", exact(&y)),
                        ("distance", exact(&d)),
                        ("oracle", exact(&reference)),
                    ],
                    pass,
                ))
            })();
            rows.push(row.unwrap_or_else(|e| Row::failed(index, e.to_string())));
        }
    }

    Ok(Block {
        experiment: "distance".into(),
        columns: vec!["x", "y", "distance", "oracle"],
        config: json!({ "measure": config.measure, "distance": section }),
        rows,
        details: json!({ "oracle_resolution": section.resolution }),
        block_pass: true,
    })
}

/// Decompose geodesics and check the scale bookkeeping: the path
/// revalidates, the scale sum stays under 11 times the distance, each
/// jump respects its order's reach, and at most one jump undercuts the
/// distance's own scale index.
pub fn geodesic(config: &Config) -> Result<Block> {
    let section = &config.geodesic;
    check_resolution("geodesic.resolution", section.resolution, false)?;
    check_positive("geodesic.pairs", section.pairs)?;
    let spec = bernoulli_spec(&config.measure)?;
    let eleven = Triadic::from_int(11);

    let mut rows = Vec::with_capacity(section.pairs);
    for i in 0..section.pairs {
        let mut rng = derived_rng(config.seed, &[TAG_GEODESIC, i as u64]);
        let (x, y) = sample_distinct_pair(&spec, section.resolution, section.height_depth, &mut rng);
        let row = (|| -> Result<Row> {
            let d = distance(&x, &y)?;
            let dec = segment_decomposition(&x, &y)?;
            dec.path.validate()?;
            let mu_sum: Triadic = dec.mu.iter().fold(Triadic::zero(), |s, m| &s + m);
            let bound = &eleven * &d;
            let mut caps = dec.total_length == d && mu_sum <= bound;
            for (j, (order, lambda)) in dec.orders.iter().zip(&dec.lambdas).enumerate() {
                caps &= lambda <= &d;
                if j >= 1 {
                    caps &= lambda <= &Triadic::new(2, order - 1);
                }
            }
            let n_star = scale_index(&d);
            let low_orders = dec.orders.iter().filter(|&&o| o < n_star).count();
            let pass = caps && low_orders <= 1;
            let orders =
                dec.orders.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(";");
            Ok(Row::ok(
                i,
                vec![
                    ("x", exact(&x)),
                    ("y", exact(&y)),
                    ("length", exact(&d)),
                    ("segments", dec.path.segments.len().into()),
                    ("jumps", dec.path.jumps.len().into()),
                    ("orders", orders.into()),
                    ("mu_sum", exact(&mu_sum)),
                    ("bound", exact(&bound)),
                ],
                pass,
            ))
        })();
        rows.push(row.unwrap_or_else(|e| Row::failed(i, e.to_string())));
    }

    Ok(Block {
        experiment: "geodesic".into(),
        columns: vec!["x", "y", "length", "segments", "jumps", "orders", "mu_sum", "bound"],
        config: json!({ "measure": config.measure, "geodesic": section }),
        rows,
        details: json!({ "scale_sum_factor": "11" }),
        block_pass: true,
    })
}
