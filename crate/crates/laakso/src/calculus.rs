//! Lipschitz test functions and their height-direction calculus.
//!
//! A [`TestFunction`] couples an exact evaluator with a declared Lipschitz
//! constant and, when one is known, a pointwise derivative taken in the
//! height direction. Difference quotients along a fiber probe that
//! derivative at finite scales: at a wormhole of order `n` the fiber splits,
//! so the sweep reports one quotient per representative (the lower-address
//! side and the side shifted by `2/3^n`) together with whether the two sides
//! agree. Nothing here extrapolates a limit; callers see the finite-scale
//! data and decide.
//!
//! Residuals and local Lipschitz ratios are estimated by rejection-sampling
//! points of a closed ball and maximizing the relevant exact ratio over the
//! accepted sample. Sampling failures surface as errors, never as silently
//! smaller sample sets.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::cantor::CantorAddress;
use crate::measure::sample_point;
use crate::metric::{distance, MetricError};
use crate::rng::derived_rng;
use crate::space::{wormhole_levels, LaaksoPoint};
use crate::triadic::Triadic;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalculusError {
    #[error("breakpoints must be strictly increasing in the first coordinate, with at least two entries: {0}")]
    BadBreakpoints(String),
    #[error("argument {t} lies outside the function domain [{lo}, {hi}]")]
    OutsideDomain { t: BigRational, lo: BigRational, hi: BigRational },
    #[error("composition over heights needs a function defined on all of [0, 1], got [{lo}, {hi}]")]
    DomainTooSmall { lo: BigRational, hi: BigRational },
    #[error("scale list must consist of nonzero steps strictly decreasing in magnitude: {0}")]
    BadScales(String),
    #[error("step {step} from height {height} leaves [0, 1]")]
    StepOutOfDomain { height: Triadic, step: Triadic },
    #[error("no point of the ball of radius {radius} was accepted after {attempts} attempts")]
    SamplingFailed { radius: Triadic, attempts: u32 },
    #[error("{0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Attempts per sample before rejection sampling gives up. Explicit failure
/// beats a silently biased estimate.
pub const REJECTION_CAP: u32 = 10_000;

/// A continuous piecewise-linear function given by its breakpoints. Used
/// both as the outer factor of height compositions and for exact
/// interval-average arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    points: Vec<(BigRational, BigRational)>,
}

impl PiecewiseLinear {
    /// Breakpoints must be strictly increasing in the first coordinate and
    /// number at least two.
    pub fn new(points: Vec<(BigRational, BigRational)>) -> Result<Self, CalculusError> {
        if points.len() < 2 {
            return Err(CalculusError::BadBreakpoints(format!("got {} point(s)", points.len())));
        }
        for pair in points.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(CalculusError::BadBreakpoints(format!(
                    "{} is not below {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(PiecewiseLinear { points })
    }

    pub fn domain(&self) -> (&BigRational, &BigRational) {
        (&self.points[0].0, &self.points[self.points.len() - 1].0)
    }

    fn check_domain(&self, t: &BigRational) -> Result<(), CalculusError> {
        let (lo, hi) = self.domain();
        if t < lo || t > hi {
            return Err(CalculusError::OutsideDomain { t: t.clone(), lo: lo.clone(), hi: hi.clone() });
        }
        Ok(())
    }

    fn slope_of_piece(&self, i: usize) -> BigRational {
        let (ref a, ref va) = self.points[i];
        let (ref b, ref vb) = self.points[i + 1];
        (vb - va) / (b - a)
    }

    pub fn eval(&self, t: &Triadic) -> Result<BigRational, CalculusError> {
        self.eval_rational(&t.to_rational())
    }

    pub fn eval_rational(&self, t: &BigRational) -> Result<BigRational, CalculusError> {
        self.check_domain(t)?;
        // Index of the piece whose closed left endpoint is the last one ≤ t.
        let i = self.points.partition_point(|(a, _)| a <= t);
        if i == self.points.len() {
            return Ok(self.points[i - 1].1.clone());
        }
        let i = i - 1;
        let (ref a, ref va) = self.points[i];
        Ok(va + self.slope_of_piece(i) * (t - a))
    }

    /// Slopes immediately left and right of `t`; `None` on the side where
    /// the domain ends.
    pub fn slopes_at(&self, t: &BigRational) -> Result<(Option<BigRational>, Option<BigRational>), CalculusError> {
        self.check_domain(t)?;
        let (lo, hi) = (self.domain().0.clone(), self.domain().1.clone());
        let left = if *t == lo {
            None
        } else {
            let i = self.points.partition_point(|(a, _)| a < t);
            Some(self.slope_of_piece(i - 1))
        };
        let right = if *t == hi {
            None
        } else {
            let i = self.points.partition_point(|(a, _)| a <= t);
            Some(self.slope_of_piece(i.min(self.points.len() - 1) - 1).clone())
        };
        Ok((left, right))
    }

    /// The derivative at `t`: the common two-sided slope, the one-sided
    /// slope at a domain endpoint, `None` at a kink.
    pub fn derivative_at(&self, t: &BigRational) -> Result<Option<BigRational>, CalculusError> {
        let (left, right) = self.slopes_at(t)?;
        Ok(match (left, right) {
            (Some(l), Some(r)) => {
                if l == r {
                    Some(l)
                } else {
                    None
                }
            }
            (Some(l), None) => Some(l),
            (None, Some(r)) => Some(r),
            (None, None) => unreachable!("domain has positive length"),
        })
    }

    /// Largest slope magnitude: the exact Lipschitz constant.
    pub fn lipschitz(&self) -> BigRational {
        (0..self.points.len() - 1)
            .map(|i| self.slope_of_piece(i).abs())
            .max()
            .expect("at least one piece")
    }

    /// Exact integral over `[lo, hi]`, a subinterval of the domain.
    pub fn integral(&self, lo: &BigRational, hi: &BigRational) -> Result<BigRational, CalculusError> {
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        if lo > hi {
            return Err(CalculusError::DegenerateInput(format!("integral needs {lo} <= {hi}")));
        }
        let two = BigRational::from_integer(BigInt::from(2));
        let mut total = BigRational::zero();
        for i in 0..self.points.len() - 1 {
            let a = self.points[i].0.clone().max(lo.clone());
            let b = self.points[i + 1].0.clone().min(hi.clone());
            if a < b {
                let fa = self.eval_rational(&a)?;
                let fb = self.eval_rational(&b)?;
                total += (b - a) * (fa + fb) / &two;
            }
        }
        Ok(total)
    }

    /// Exact average over `[lo, hi]`; the interval needs positive length.
    pub fn average(&self, lo: &BigRational, hi: &BigRational) -> Result<BigRational, CalculusError> {
        if lo >= hi {
            return Err(CalculusError::DegenerateInput(format!("average needs {lo} < {hi}")));
        }
        Ok(self.integral(lo, hi)? / (hi - lo))
    }

    /// Exact integral of the slope magnitude over `[lo, hi]`: the total
    /// variation of the function on that interval.
    pub fn abs_slope_integral(&self, lo: &BigRational, hi: &BigRational) -> Result<BigRational, CalculusError> {
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        if lo > hi {
            return Err(CalculusError::DegenerateInput(format!("integral needs {lo} <= {hi}")));
        }
        let mut total = BigRational::zero();
        for i in 0..self.points.len() - 1 {
            let a = self.points[i].0.clone().max(lo.clone());
            let b = self.points[i + 1].0.clone().min(hi.clone());
            if a < b {
                total += self.slope_of_piece(i).abs() * (b - a);
            }
        }
        Ok(total)
    }
}

type Evaluator = Arc<dyn Fn(&LaaksoPoint) -> BigRational + Send + Sync>;
type Derivative = Arc<dyn Fn(&LaaksoPoint) -> Option<BigRational> + Send + Sync>;

/// A named Lipschitz function on the space, with an exact evaluator, a
/// declared Lipschitz constant, and optionally a known height derivative.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    lipschitz: BigRational,
    eval: Evaluator,
    derivative: Option<Derivative>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({}, L = {})", self.name, self.lipschitz)
    }
}

impl TestFunction {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> &BigRational {
        &self.lipschitz
    }

    pub fn eval(&self, x: &LaaksoPoint) -> BigRational {
        (self.eval)(x)
    }

    /// The known derivative at `x`, if this function carries a derivative
    /// field and it is defined there.
    pub fn derivative_at(&self, x: &LaaksoPoint) -> Option<BigRational> {
        self.derivative.as_ref().and_then(|d| d(x))
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// The height coordinate itself: Lipschitz constant 1, derivative 1.
    pub fn height() -> TestFunction {
        TestFunction {
            name: "height".into(),
            lipschitz: BigRational::one(),
            eval: Arc::new(|x| x.height().to_rational()),
            derivative: Some(Arc::new(|_| Some(BigRational::one()))),
        }
    }

    pub fn constant(c: BigRational) -> TestFunction {
        let value = c.clone();
        TestFunction {
            name: format!("const({c})"),
            lipschitz: BigRational::zero(),
            eval: Arc::new(move |_| value.clone()),
            derivative: Some(Arc::new(|_| Some(BigRational::zero()))),
        }
    }

    /// The composition `g(height)` for piecewise-linear `g` defined on all
    /// of `[0, 1]`. Its derivative field is `g'` wherever `g` has a
    /// two-sided slope, undefined at kinks.
    pub fn composed(name: &str, g: PiecewiseLinear) -> Result<TestFunction, CalculusError> {
        let (lo, hi) = g.domain();
        if *lo > BigRational::zero() || *hi < BigRational::one() {
            return Err(CalculusError::DomainTooSmall { lo: lo.clone(), hi: hi.clone() });
        }
        let g = Arc::new(g);
        let g_eval = g.clone();
        let g_deriv = g.clone();
        Ok(TestFunction {
            name: name.into(),
            lipschitz: g.lipschitz(),
            eval: Arc::new(move |x| g_eval.eval(x.height()).expect("heights lie in the composition domain")),
            derivative: Some(Arc::new(move |x| {
                g_deriv
                    .derivative_at(&x.height().to_rational())
                    .expect("heights lie in the composition domain")
            })),
        })
    }

    /// Distance to a fixed anchor point; Lipschitz constant 1 by the
    /// triangle inequality. Evaluators expect points at the anchor's
    /// resolution.
    pub fn distance_to(anchor: LaaksoPoint) -> TestFunction {
        let name = format!("dist({anchor})");
        TestFunction {
            name,
            lipschitz: BigRational::one(),
            eval: Arc::new(move |x| {
                distance(&anchor, x).expect("anchored evaluators need the anchor's resolution").to_rational()
            }),
            derivative: None,
        }
    }

    /// The truncated cone `max(0, radius - d(x, anchor))`.
    pub fn cone(anchor: LaaksoPoint, radius: Triadic) -> Result<TestFunction, CalculusError> {
        if !radius.is_positive() {
            return Err(CalculusError::DegenerateInput(format!("cone radius {radius} must be positive")));
        }
        let name = format!("cone({anchor}, {radius})");
        let r = radius.to_rational();
        Ok(TestFunction {
            name,
            lipschitz: BigRational::one(),
            eval: Arc::new(move |x| {
                let d = distance(&anchor, x).expect("anchored evaluators need the anchor's resolution");
                let v = &r - d.to_rational();
                if v.is_negative() {
                    BigRational::zero()
                } else {
                    v
                }
            }),
            derivative: None,
        })
    }
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// The standard corpus at a given resolution: the height chart, a constant,
/// two kinked height compositions, a distance function and a truncated cone
/// anchored at fixed points. Needs `resolution >= 1`.
pub fn builtin_functions(resolution: usize) -> Vec<TestFunction> {
    assert!(resolution >= 1, "builtins anchor at addressed points");
    let low = LaaksoPoint::new(Triadic::new(1, 1), CantorAddress::zeros(resolution)).expect("1/3 is a height");
    let high = LaaksoPoint::new(Triadic::new(2, 1), CantorAddress::zeros(resolution).flipped(1))
        .expect("2/3 is a height");
    let absdev = PiecewiseLinear::new(vec![(rat(0, 1), rat(1, 2)), (rat(1, 2), rat(0, 1)), (rat(1, 1), rat(1, 2))])
        .expect("valid breakpoints");
    let kink3 = PiecewiseLinear::new(vec![(rat(0, 1), rat(1, 3)), (rat(1, 3), rat(0, 1)), (rat(1, 1), rat(2, 3))])
        .expect("valid breakpoints");
    vec![
        TestFunction::height(),
        TestFunction::constant(rat(1, 2)),
        TestFunction::composed("absdev", absdev).expect("domain covers [0, 1]"),
        TestFunction::composed("kink3", kink3).expect("domain covers [0, 1]"),
        TestFunction::distance_to(low),
        TestFunction::cone(high, Triadic::new(1, 1)).expect("positive radius"),
    ]
}

/// One difference quotient of a sweep. At a wormhole the `shifted` field
/// carries the quotient taken from the other representative.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientRow {
    pub scale: Triadic,
    pub quotient: BigRational,
    pub shifted: Option<BigRational>,
}

/// Difference quotients of a function along the fiber of `point`, one row
/// per requested scale.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeSweep {
    pub point: LaaksoPoint,
    pub wormhole_order: Option<u32>,
    pub rows: Vec<QuotientRow>,
    /// At a wormhole: whether the two representatives' quotients agree at
    /// every scale. `None` away from wormholes.
    pub sides_agree: Option<bool>,
}

/// Difference quotients `(f[x1 + t, x2] - f[x1, x2]) / t` per scale.
///
/// Scales must be nonzero with strictly decreasing magnitudes, and every
/// step must keep the height inside `[0, 1]`, which makes the sweep
/// one-sided at heights 0 and 1. At a wormhole of order `n` the quotient is
/// computed from the lower representative and, separately, from the
/// representative shifted by `2/3^n`; both are reported.
pub fn directional_derivative(
    f: &TestFunction,
    x: &LaaksoPoint,
    scales: &[Triadic],
) -> Result<DerivativeSweep, CalculusError> {
    if scales.is_empty() {
        return Err(CalculusError::BadScales("empty scale list".into()));
    }
    for t in scales {
        if t.is_zero() {
            return Err(CalculusError::BadScales("zero step".into()));
        }
    }
    for pair in scales.windows(2) {
        if pair[1].abs() >= pair[0].abs() {
            return Err(CalculusError::BadScales(format!(
                "|{}| does not decrease to |{}|",
                pair[0], pair[1]
            )));
        }
    }
    let order = x.active_wormhole();
    let addr = x.address().clone();
    let shifted_addr = order.map(|n| addr.flipped(n as usize));
    let base = f.eval(x);
    let base_shifted = shifted_addr.as_ref().map(|a| {
        f.eval(&LaaksoPoint::new(x.height().clone(), a.clone()).expect("height unchanged"))
    });
    let mut rows = Vec::with_capacity(scales.len());
    for t in scales {
        let h = x.height() + t;
        if h.is_negative() || h > Triadic::one() {
            return Err(CalculusError::StepOutOfDomain { height: x.height().clone(), step: t.clone() });
        }
        let t_rat = t.to_rational();
        let y = LaaksoPoint::new(h.clone(), addr.clone()).expect("height validated");
        let quotient = (f.eval(&y) - base.clone()) / t_rat.clone();
        let shifted = shifted_addr.as_ref().map(|a| {
            let y = LaaksoPoint::new(h.clone(), a.clone()).expect("height validated");
            (f.eval(&y) - base_shifted.clone().expect("present with shifted_addr")) / t_rat.clone()
        });
        rows.push(QuotientRow { scale: t.clone(), quotient, shifted });
    }
    let sides_agree = order.map(|_| rows.iter().all(|r| r.shifted.as_ref() == Some(&r.quotient)));
    Ok(DerivativeSweep { point: x.clone(), wormhole_order: order, rows, sides_agree })
}

/// Rejection-samples points of the closed ball `B(x, radius) \ {x}` and
/// returns the largest value of `ratio(y, d(x, y))`. Sampling streams are
/// derived per index, so results are reproducible and the maximization
/// parallelizes.
fn max_ratio_over_ball<R, G>(
    x: &LaaksoPoint,
    radius: &Triadic,
    samples: usize,
    rng: &mut R,
    tag: u64,
    ratio: G,
) -> Result<BigRational, CalculusError>
where
    R: Rng + ?Sized,
    G: Fn(&LaaksoPoint, &Triadic) -> BigRational + Sync,
{
    if !radius.is_positive() {
        return Err(CalculusError::DegenerateInput(format!("radius {radius} must be positive")));
    }
    if samples == 0 {
        return Err(CalculusError::DegenerateInput("sample count must be positive".into()));
    }
    let spec = crate::cantor::MeasureSpec::bernoulli_ratio(1, 2).expect("1/2 is a weight");
    let height_depth = radius.depth() + 2;
    let master = rng.next_u64();
    let values = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = derived_rng(master, &[tag, i as u64]);
            for _ in 0..REJECTION_CAP {
                let y = sample_point(&spec, x.resolution(), height_depth, &mut stream);
                let d = distance(x, &y)?;
                if d.is_positive() && d <= *radius {
                    return Ok(ratio(&y, &d));
                }
            }
            Err(CalculusError::SamplingFailed { radius: radius.clone(), attempts: REJECTION_CAP })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(values.into_iter().max().expect("sample count validated"))
}

/// The largest sampled value of
/// `|f(y) - f(x) - df_candidate (h(y) - h(x))| / d(x, y)` over the closed
/// ball of the given radius, `y != x`. Exactly zero at every radius when
/// `df_candidate` linearizes `f` on the ball.
pub fn differentiability_residual<R: Rng + ?Sized>(
    f: &TestFunction,
    x: &LaaksoPoint,
    df_candidate: &BigRational,
    radius: &Triadic,
    samples: usize,
    rng: &mut R,
) -> Result<BigRational, CalculusError> {
    let fx = f.eval(x);
    let hx = x.height().to_rational();
    max_ratio_over_ball(x, radius, samples, rng, 0x0d1f, |y, d| {
        let gap = f.eval(y) - &fx - df_candidate * (y.height().to_rational() - &hx);
        gap.abs() / d.to_rational()
    })
}

/// The largest sampled value of `|f(y) - f(x)| / d(x, y)` over the closed
/// ball of radius `rho`: a lower estimate of the pointwise Lipschitz
/// constant at `x`, never exceeding the declared constant.
pub fn lip_upper<R: Rng + ?Sized>(
    f: &TestFunction,
    x: &LaaksoPoint,
    rho: &Triadic,
    samples: usize,
    rng: &mut R,
) -> Result<BigRational, CalculusError> {
    let fx = f.eval(x);
    max_ratio_over_ball(x, rho, samples, rng, 0x0711, |y, d| {
        (f.eval(y) - &fx).abs() / d.to_rational()
    })
}

/// Checks that a function takes equal values on both representatives of
/// every wormhole point of every order up to the resolution, exhaustively
/// over all addresses. Cheap insurance that evaluators only see quotient
/// data.
pub fn respects_quotient(f: &TestFunction, resolution: usize) -> bool {
    assert!(resolution <= 16, "exhaustive check is exponential in resolution");
    for order in 1..=resolution as u32 {
        for level in wormhole_levels(order) {
            for code in 0u64..1 << resolution {
                let mut bits = Vec::with_capacity(resolution);
                for b in 0..resolution {
                    bits.push(code >> b & 1 == 1);
                }
                let address = CantorAddress::new(bits);
                let lowered = LaaksoPoint::new(level.height().clone(), {
                    let mut a = address.clone();
                    a.set_bit(order as usize, false);
                    a
                })
                .expect("levels are heights");
                let raised = LaaksoPoint::new(level.height().clone(), {
                    let mut a = address;
                    a.set_bit(order as usize, true);
                    a
                })
                .expect("levels are heights");
                if f.eval(&lowered) != f.eval(&raised) {
                    return false;
                }
            }
        }
    }
    true
}
