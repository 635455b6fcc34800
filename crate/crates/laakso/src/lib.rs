//! Exact computation on a Laakso-type metric measure space.
//!
//! The space is the quotient of `[0,1] × K` (`K` the middle-thirds Cantor
//! set) that glues address digit `n` at every height `k/3^n` in lowest
//! terms. Working at a finite resolution `N` keeps every quantity a
//! rational number, so distances, measures, and the inequalities relating
//! them are computed exactly, with certified upper and lower bounds where
//! a quantity is only bracketed.
//!
//! Modules build on one another in order: [`triadic`] (exact arithmetic on
//! `k/3^d`), [`cantor`] (addresses and product measures on `K`),
//! [`space`] (points and wormhole levels of the quotient), [`metric`]
//! (geodesic distance and paths), [`measure`] (pushforward measures and
//! ball bounds), [`calculus`] (Lipschitz test functions and derivatives),
//! and [`poincare`] (chaining machinery behind the Poincaré inequality).

// Error variants carry the exact rationals that violated a precondition;
// diagnostics over a lean Err on cold paths.
#![allow(clippy::result_large_err)]

pub mod calculus;
pub mod cantor;
pub mod measure;
pub mod metric;
pub mod poincare;
pub mod rng;
pub mod space;
pub mod triadic;

pub use calculus::{
    builtin_functions, differentiability_residual, directional_derivative, lip_upper, respects_quotient,
    CalculusError, DerivativeSweep, PiecewiseLinear, QuotientRow, TestFunction, REJECTION_CAP,
};
pub use cantor::{
    cylinder_mass, digit_statistics, extend_address, nu_ball_mass, sample_address, CantorAddress, CantorError,
    DigitStats, MeasureSpec,
};
pub use measure::{
    ahlfors_report, ball_measure, doubling_bound, doubling_report, fine_grid, nondoubling_ratio, rectangle_mass,
    required_resolution, sample_in_ball, sample_point, AhlforsReport, AhlforsRow, BallMeasureBounds,
    DoublingReport, DoublingRow, Interval, MeasureError, NondoublingReport, Rectangle,
};
pub use poincare::{
    ball_pi_report, build_chain, case_gap_bound, case_gap_bound_exact, oned_average_gap, pointwise_pi_report,
    rectangle_diameter_bound, scale_index, telescoping_check, validate_chain, BallPiParams, BallPiReport,
    BallPiRow, CaseGapReport, CaseLabel, Chain, GammaCurve, GapBudget, PoincareError, PointwisePiParams,
    PointwisePiReport, PointwisePiRow, TelescopingReport, CHAIN_DIAMETER_CONSTANT, CHAIN_INTERVAL_CONSTANT,
};
pub use metric::{
    distance, distance_oracle, geodesic, segment_decomposition, DistanceOracle, GeodesicPath, MetricError,
    OracleDistances, SegmentDecomposition, VerticalRun, WormholeJump, ORACLE_MAX_RESOLUTION,
};
pub use space::{nearest_level_geq, nearest_level_leq, wormhole_levels, wormhole_order, LaaksoPoint, SpaceError, WormholeLevel};
pub use triadic::{pow3, Triadic};

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
