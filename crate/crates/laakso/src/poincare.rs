//! Chaining machinery behind the Poincaré-type estimates.
//!
//! A chain joins two points through a finite sequence of rectangles
//! `q(J × K_a)` whose diameters decay geometrically away from a central
//! pair at the scale of the distance. Consecutive rectangles are related in
//! one of three audited ways, each of which turns an average gap into an
//! integral of the slope: a shared wormhole digit, a nested interval, or a
//! one-digit refinement. The module builds such chains, validates them
//! against structural invariants with certified diameter bounds, computes
//! exact one-dimensional average gaps, replays the four-leg replacement
//! path through a wormhole, and estimates the pointwise and ball forms of
//! the inequality by sampling.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::calculus::{CalculusError, PiecewiseLinear, TestFunction, REJECTION_CAP};
use crate::cantor::{cylinder_mass, extend_address, CantorAddress, MeasureSpec};
use crate::measure::{rectangle_mass, sample_in_ball, Interval, MeasureError, Rectangle};
use crate::metric::{distance, geodesic, pair_cost_scaled, MetricError};
use crate::rng::derived_rng;
use crate::space::{nearest_level_geq, LaaksoPoint};
use crate::triadic::Triadic;

/// Declared bound: every chain rectangle at index `i` has certified
/// diameter at most `18 · 3^-|i| · d(p, q)`.
pub const CHAIN_DIAMETER_CONSTANT: i64 = 18;

/// Declared bound: the central interval has length at most `3 · d(p, q)`.
pub const CHAIN_INTERVAL_CONSTANT: i64 = 3;

const TAG_POINTWISE: u64 = 0x901f;
const TAG_BALL: u64 = 0xba11;
const TAG_CASE_GAP: u64 = 0xca5e;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoincareError {
    #[error("{0}")]
    DegenerateInput(String),
    #[error("interval [{lo}, {hi}] has no positive length")]
    EmptyInterval { lo: BigRational, hi: BigRational },
    #[error("interval [{ilo}, {ihi}] is not inside [{olo}, {ohi}]")]
    NotNested { ilo: BigRational, ihi: BigRational, olo: BigRational, ohi: BigRational },
    #[error("wormhole level {level} lies outside [{lo}, {hi}]")]
    LevelOutsideInterval { level: Triadic, lo: Triadic, hi: Triadic },
    #[error("addresses must differ exactly at digit {expected}, got {found:?}")]
    DigitMismatch { expected: u32, found: Vec<usize> },
    #[error("curve parameter {t} outside [0, {total}]")]
    ParameterOutOfRange { t: Triadic, total: Triadic },
    #[error("chain invariant broken at index {index}: {reason}")]
    ChainInvariant { index: i64, reason: String },
    #[error("lambda must be at least 1, got {lambda}")]
    LambdaTooSmall { lambda: Triadic },
    #[error("budget field {field} must be positive")]
    EmptyBudget { field: &'static str },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

/// The scale index `n` with `2 · 3^-(n+1) < d ≤ 2 · 3^-n`. Requires `d > 0`.
pub fn scale_index(d: &Triadic) -> u32 {
    assert!(d.is_positive(), "scale index needs a positive distance");
    let mut n = 0;
    while Triadic::new(2, n + 1) >= *d {
        n += 1;
    }
    n
}

/// An order-`order` wormhole level inside the closed interval, if any.
fn level_in_interval(interval: &Interval, order: u32) -> Option<Triadic> {
    nearest_level_geq(interval.lo(), order).filter(|l| *l <= *interval.hi())
}

fn contains_interval(outer: &Interval, inner: &Interval) -> bool {
    *outer.lo() <= *inner.lo() && *inner.hi() <= *outer.hi()
}

/// How two consecutive chain rectangles are related.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseLabel {
    /// Same interval, addresses of equal depth differing at exactly the
    /// digit of this order, with an order-`order` level inside the interval.
    SharedWormhole { order: u32 },
    /// Same address, one interval contained in the other.
    SubInterval,
    /// One rectangle appends a single digit (of the given order, equal to
    /// its depth) to the other's address inside a contained interval; the
    /// coarser interval holds a level of that order.
    ChildCylinder { order: u32 },
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::SharedWormhole { order } => write!(f, "shared-wormhole({order})"),
            CaseLabel::SubInterval => write!(f, "sub-interval"),
            CaseLabel::ChildCylinder { order } => write!(f, "child-cylinder({order})"),
        }
    }
}

/// A finite chain of rectangles from `p` to `q`.
///
/// Rectangle `k` carries chain index `k - negative_count`; index 0 and
/// index 1 share the central interval. The first rectangle contains `p`,
/// the last contains `q`, and consecutive rectangles satisfy their label.
#[derive(Debug, Clone)]
pub struct Chain {
    pub p: LaaksoPoint,
    pub q: LaaksoPoint,
    pub distance: Triadic,
    /// The scale index of `distance`.
    pub scale: u32,
    pub resolution: usize,
    pub negative_count: usize,
    pub positive_count: usize,
    pub rectangles: Vec<Rectangle>,
    /// `labels[k]` relates `rectangles[k]` and `rectangles[k + 1]`.
    pub labels: Vec<CaseLabel>,
}

impl Chain {
    /// Chain indices run from `-negative_count` to `positive_count`.
    pub fn index_range(&self) -> (i64, i64) {
        (-(self.negative_count as i64), self.positive_count as i64)
    }

    pub fn rectangle(&self, index: i64) -> &Rectangle {
        &self.rectangles[(index + self.negative_count as i64) as usize]
    }
}

/// Certified upper bound on the diameter of a rectangle at the given
/// resolution.
///
/// Points of the rectangle differ only at digits deeper than the address,
/// so a path sweeping the interval stretched far enough to cross a level of
/// every free order connects any two of them. Taking the cheaper of the
/// down-first and up-first sweeps costs at most `2(|J| + α + β)` where
/// `α, β` is the optimal stretch; with no free digits the diameter is the
/// interval length itself.
pub fn rectangle_diameter_bound(rect: &Rectangle, resolution: usize) -> Triadic {
    let len = rect.interval.length();
    let free: Vec<usize> = (rect.address.len() + 1..=resolution).collect();
    if free.is_empty() {
        return len;
    }
    let g = rect
        .interval
        .lo()
        .depth()
        .max(rect.interval.hi().depth())
        .max(resolution as u32);
    let cost = pair_cost_scaled(
        &rect.interval.lo().scaled(g),
        &rect.interval.hi().scaled(g),
        g,
        &free,
    );
    &len + &Triadic::new(cost, g)
}

fn point_in_rectangle(point: &LaaksoPoint, rect: &Rectangle) -> bool {
    rect.interval.contains(point.height())
        && point
            .representatives()
            .iter()
            .any(|r| r.prefix(rect.address.len()) == rect.address)
}

/// Extend `[a, b]` downward (then upward at the floor) to length `target`,
/// staying inside `[0, 1]`.
fn extend_to_length(a: &Triadic, b: &Triadic, target: &Triadic) -> (Triadic, Triadic) {
    let len = b - a;
    if len >= *target {
        return (a.clone(), b.clone());
    }
    let lo = a - &(target - &len);
    if lo.is_negative() {
        (Triadic::zero(), target.clone())
    } else {
        (lo, b.clone())
    }
}

/// A subinterval of `outer` of length `2 · 3^-exp` containing `anchor`,
/// centered on it where the boundary allows.
fn nested_subinterval(outer: &Interval, anchor: &Triadic, exp: u32) -> Interval {
    let half = Triadic::unit(exp);
    let len = half.double();
    debug_assert!(len <= outer.length(), "subinterval longer than its parent");
    let mut lo = anchor - &half;
    if lo < *outer.lo() {
        lo = outer.lo().clone();
    }
    let mut hi = &lo + &len;
    if hi > *outer.hi() {
        hi = outer.hi().clone();
        lo = &hi - &len;
    }
    Interval::new(lo, hi).expect("nested subintervals stay inside [0, 1]")
}

/// Build the rectangle chain joining two distinct points.
///
/// The central interval is the geodesic's height range, extended to length
/// at least `2 · 3^-max(n, 1)` so that every interval in the chain is long
/// enough to guarantee the wormhole level its label requires. Addresses
/// refine one digit per step, from the depth `min(max(n, 1) - 1, N)` shared
/// prefix scale down to the full resolution on both sides.
pub fn build_chain(p: &LaaksoPoint, q: &LaaksoPoint) -> Result<Chain, PoincareError> {
    if p == q {
        return Err(PoincareError::DegenerateInput("chain endpoints must be distinct".into()));
    }
    let path = geodesic(p, q)?;
    let d = path.total_length.clone();
    let n = scale_index(&d);
    let resolution = p.resolution();

    // Height range swept by the geodesic; it contains both endpoint heights
    // and one level of every order the two chosen representatives differ at.
    let mut a = p.height().clone();
    let mut b = p.height().clone();
    for seg in &path.segments {
        for h in [&seg.from, &seg.to] {
            if *h < a {
                a = h.clone();
            }
            if *h > b {
                b = h.clone();
            }
        }
    }
    let x_rep = path.segments.first().expect("geodesics have a first run").address.clone();
    let y_rep = path.segments.last().expect("geodesics have a last run").address.clone();

    let d0 = ((n.max(1) - 1) as usize).min(resolution);
    let target = Triadic::new(2, d0 as u32 + 1);
    let (lo0, hi0) = extend_to_length(&a, &b, &target);
    let j0 = Interval::new(lo0, hi0)?;
    let m1 = resolution - d0;
    let m2 = resolution - d0 + 1;

    let mut rectangles = Vec::with_capacity(m1 + m2 + 1);
    let mut inner = Vec::with_capacity(m1);
    let mut prev = j0.clone();
    for k in 1..=m1 {
        let ik = nested_subinterval(&prev, p.height(), (d0 + k + 1) as u32);
        inner.push(Rectangle::new(ik.clone(), x_rep.prefix(d0 + k)));
        prev = ik;
    }
    inner.reverse();
    rectangles.extend(inner);
    rectangles.push(Rectangle::new(j0.clone(), x_rep.prefix(d0)));
    rectangles.push(Rectangle::new(j0.clone(), y_rep.prefix(d0)));
    let mut prev = j0;
    for m in 2..=m2 {
        let gm = nested_subinterval(&prev, q.height(), (d0 + m) as u32);
        rectangles.push(Rectangle::new(gm.clone(), y_rep.prefix(d0 + m - 1)));
        prev = gm;
    }

    let mut labels = Vec::with_capacity(rectangles.len() - 1);
    for k in 0..rectangles.len() - 1 {
        if k == m1 {
            let diffs = rectangles[k].address.differing_bits(&rectangles[k + 1].address);
            labels.push(match diffs.len() {
                0 => CaseLabel::SubInterval,
                1 => CaseLabel::SharedWormhole { order: diffs[0] as u32 },
                _ => {
                    return Err(PoincareError::ChainInvariant {
                        index: 0,
                        reason: format!("central prefixes differ at {} digits", diffs.len()),
                    })
                }
            });
        } else {
            let order = rectangles[k].address.len().max(rectangles[k + 1].address.len());
            labels.push(CaseLabel::ChildCylinder { order: order as u32 });
        }
    }

    Ok(Chain {
        p: p.clone(),
        q: q.clone(),
        distance: d,
        scale: n,
        resolution,
        negative_count: m1,
        positive_count: m2,
        rectangles,
        labels,
    })
}

/// Check every structural invariant of a chain, independently of how it was
/// built: the scale bracket, the central interval's length bound, endpoint
/// containment, each consecutive pair's label, positive masses, and the
/// certified diameter decay.
pub fn validate_chain(chain: &Chain, spec: &MeasureSpec) -> Result<(), PoincareError> {
    let fail = |index: i64, reason: String| Err(PoincareError::ChainInvariant { index, reason });

    let d = distance(&chain.p, &chain.q)?;
    if d != chain.distance || !d.is_positive() {
        return fail(0, format!("stored distance {} is not d(p, q) = {d}", chain.distance));
    }
    let n = chain.scale;
    if !(Triadic::new(2, n + 1) < d && d <= Triadic::new(2, n)) {
        return fail(0, format!("distance {d} escapes the scale-{n} bracket"));
    }
    if chain.rectangles.len() != chain.negative_count + chain.positive_count + 1 {
        return fail(0, "rectangle count disagrees with the index range".into());
    }
    if chain.labels.len() + 1 != chain.rectangles.len() {
        return fail(0, "label count disagrees with the rectangle count".into());
    }
    if chain.positive_count == 0 {
        return fail(0, "chains need at least the two central rectangles".into());
    }

    let central = &chain.rectangle(0).interval;
    if central != &chain.rectangle(1).interval {
        return fail(0, "indices 0 and 1 must share the central interval".into());
    }
    let max_len = &Triadic::from_int(CHAIN_INTERVAL_CONSTANT) * &d;
    if central.length() > max_len {
        return fail(0, format!("central interval length {} exceeds {max_len}", central.length()));
    }

    let (first, last) = (&chain.rectangles[0], chain.rectangles.last().unwrap());
    if !point_in_rectangle(&chain.p, first) {
        return fail(chain.index_range().0, "first rectangle misses p".into());
    }
    if !point_in_rectangle(&chain.q, last) {
        return fail(chain.index_range().1, "last rectangle misses q".into());
    }

    for k in 0..chain.labels.len() {
        let index = k as i64 - chain.negative_count as i64;
        let (r1, r2) = (&chain.rectangles[k], &chain.rectangles[k + 1]);
        match &chain.labels[k] {
            CaseLabel::SharedWormhole { order } => {
                if r1.interval != r2.interval {
                    return fail(index, "shared-wormhole rectangles must share their interval".into());
                }
                if r1.address.len() != r2.address.len() {
                    return fail(index, "shared-wormhole addresses must have equal depth".into());
                }
                let diffs = r1.address.differing_bits(&r2.address);
                if diffs != [*order as usize] {
                    return fail(index, format!("addresses differ at {diffs:?}, not just digit {order}"));
                }
                if level_in_interval(&r1.interval, *order).is_none() {
                    return fail(index, format!("no order-{order} level inside the shared interval"));
                }
            }
            CaseLabel::SubInterval => {
                if r1.address != r2.address {
                    return fail(index, "sub-interval rectangles must share their address".into());
                }
                if !contains_interval(&r1.interval, &r2.interval)
                    && !contains_interval(&r2.interval, &r1.interval)
                {
                    return fail(index, "neither interval contains the other".into());
                }
            }
            CaseLabel::ChildCylinder { order } => {
                let (parent, child) = if r1.address.len() < r2.address.len() { (r1, r2) } else { (r2, r1) };
                if child.address.len() != parent.address.len() + 1 {
                    return fail(index, "child address must append exactly one digit".into());
                }
                if *order as usize != child.address.len() {
                    return fail(index, format!("label order {order} is not the appended depth"));
                }
                if child.address.prefix(parent.address.len()) != parent.address {
                    return fail(index, "child address does not extend the parent".into());
                }
                if !contains_interval(&parent.interval, &child.interval) {
                    return fail(index, "child interval leaves the parent interval".into());
                }
                if level_in_interval(&parent.interval, *order).is_none() {
                    return fail(index, format!("no order-{order} level inside the parent interval"));
                }
            }
        }
    }

    for k in 0..chain.rectangles.len() {
        let index = k as i64 - chain.negative_count as i64;
        let rect = &chain.rectangles[k];
        if !rect.interval.length().is_positive() {
            return fail(index, "rectangle interval has no length".into());
        }
        if !rectangle_mass(spec, rect).is_positive() {
            return fail(index, "rectangle has no mass".into());
        }
        if rect.address.len() > chain.resolution {
            return fail(index, "address deeper than the resolution".into());
        }
        let allowed = &Triadic::from_int(CHAIN_DIAMETER_CONSTANT) * &d.scale_down(index.unsigned_abs() as u32);
        let diam = rectangle_diameter_bound(rect, chain.resolution);
        if diam > allowed {
            return fail(index, format!("certified diameter {diam} exceeds {allowed}"));
        }
    }
    Ok(())
}

/// Exact mean gap of a piecewise-linear function between two positive-length
/// subintervals of `J`, with the slope integral over `J` that bounds it:
/// `|avg_A f - avg_B f| ≤ ∫_J |f'|`.
pub fn oned_average_gap(
    f: &PiecewiseLinear,
    j: (&BigRational, &BigRational),
    a: (&BigRational, &BigRational),
    b: (&BigRational, &BigRational),
) -> Result<(BigRational, BigRational), PoincareError> {
    for (lo, hi) in [j, a, b] {
        if lo >= hi {
            return Err(PoincareError::EmptyInterval { lo: lo.clone(), hi: hi.clone() });
        }
    }
    for (lo, hi) in [a, b] {
        if lo < j.0 || hi > j.1 {
            return Err(PoincareError::NotNested {
                ilo: lo.clone(),
                ihi: hi.clone(),
                olo: j.0.clone(),
                ohi: j.1.clone(),
            });
        }
    }
    let gap = (f.average(a.0, a.1)? - f.average(b.0, b.1)?).abs();
    let bound = f.abs_slope_integral(j.0, j.1)?;
    assert!(gap <= bound, "mean gap {gap} escaped its slope integral {bound}");
    Ok((gap, bound))
}

/// The four-leg unit-speed path that swaps the digit at a wormhole while
/// sweeping an interval: down the first fiber from the top of `J`, back up
/// to the level, across, and on to the top of the second fiber, then a
/// final descent mirrors the first leg. Total length `3 |J|`.
#[derive(Debug, Clone)]
pub struct GammaCurve {
    s: CantorAddress,
    s_prime: CantorAddress,
    interval: Interval,
    level: Triadic,
    order: u32,
}

impl GammaCurve {
    /// Requires the level to lie inside the interval and the two addresses
    /// to differ exactly at the level's digit.
    pub fn new(
        s: CantorAddress,
        s_prime: CantorAddress,
        interval: Interval,
        level: Triadic,
        order: u32,
    ) -> Result<Self, PoincareError> {
        if !interval.length().is_positive() {
            return Err(PoincareError::EmptyInterval {
                lo: interval.lo().to_rational(),
                hi: interval.hi().to_rational(),
            });
        }
        if !interval.contains(&level) {
            return Err(PoincareError::LevelOutsideInterval {
                level,
                lo: interval.lo().clone(),
                hi: interval.hi().clone(),
            });
        }
        let diffs = s.differing_bits(&s_prime);
        if diffs != [order as usize] {
            return Err(PoincareError::DigitMismatch { expected: order, found: diffs });
        }
        Ok(GammaCurve { s, s_prime, interval, level, order })
    }

    /// Arc length of the whole curve: `3 |J|`.
    pub fn total(&self) -> Triadic {
        let len = self.interval.length();
        &len.double() + &len
    }

    /// The parameter at which the digit swap happens.
    pub fn jump_parameter(&self) -> Triadic {
        &(&self.interval.length() + &self.level) - self.interval.lo()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// The point at arc length `t` from the start. The curve starts at the
    /// top of the interval on the first address and ends at the bottom on
    /// the second, sweeping every height of both fibers on the way.
    pub fn point_at(&self, t: &Triadic) -> Result<LaaksoPoint, PoincareError> {
        let len = self.interval.length();
        let total = self.total();
        if t.is_negative() || *t > total {
            return Err(PoincareError::ParameterOutOfRange { t: t.clone(), total });
        }
        let (height, address) = if *t <= len {
            (self.interval.hi() - t, &self.s)
        } else if *t <= self.jump_parameter() {
            (&(self.interval.lo() + t) - &len, &self.s)
        } else if *t <= len.double() {
            (&(self.interval.lo() + t) - &len, &self.s_prime)
        } else {
            (&(self.interval.hi() + &len.double()) - t, &self.s_prime)
        };
        Ok(LaaksoPoint::new(height, address.clone()).expect("curve heights stay inside the interval"))
    }
}

/// Sampling budget for rectangle averages: heights on a `3^height_cells_log3`
/// grid of left endpoints (exact strata), addresses drawn from the measure
/// conditioned on the rectangle's prefix.
#[derive(Debug, Clone)]
pub struct GapBudget {
    pub height_cells_log3: u32,
    pub address_samples: usize,
}

impl Default for GapBudget {
    fn default() -> Self {
        GapBudget { height_cells_log3: 2, address_samples: 24 }
    }
}

/// One audited average gap between consecutive chain rectangles.
#[derive(Debug, Clone)]
pub struct CaseGapReport {
    pub label: CaseLabel,
    pub gap: BigRational,
    pub bound: BigRational,
    /// Discretization and sampling allowance added to the bound before the
    /// pass verdict; zero for exact gaps.
    pub slack: BigRational,
    pub pass: bool,
    /// Which slope proxy the bound uses.
    pub lip_proxy: &'static str,
}

/// The case bound with the declared Lipschitz constant as slope proxy.
///
/// Shared wormhole: moving each point of one rectangle to its mate along a
/// sweep of `J` costs at most `2 |J|` of arc, so the gap is at most
/// `2 |J| (L + L)`. Sub-interval: `|J| L` for the containing interval.
/// Child cylinder: splitting the parent average over the appended digit
/// combines the two, weighted by the discarded branch.
fn case_bound(
    label: &CaseLabel,
    first: &Rectangle,
    second: &Rectangle,
    lip: &BigRational,
    spec: &MeasureSpec,
) -> BigRational {
    let rat = |t: &Triadic| t.to_rational();
    match label {
        CaseLabel::SharedWormhole { .. } => {
            BigRational::from_integer(BigInt::from(4)) * rat(&first.interval.length()) * lip
        }
        CaseLabel::SubInterval => {
            let len = rat(&first.interval.length()).max(rat(&second.interval.length()));
            len * lip
        }
        CaseLabel::ChildCylinder { .. } => {
            let (parent, child) = if first.address.len() < second.address.len() {
                (first, second)
            } else {
                (second, first)
            };
            let kept = cylinder_mass(spec, &child.address) / cylinder_mass(spec, &parent.address);
            let one = BigRational::from_integer(BigInt::from(1));
            let four = BigRational::from_integer(BigInt::from(4));
            let weight = four * (&one - &kept) + one;
            weight * rat(&parent.interval.length()) * lip
        }
    }
}

/// Exact case gap for a function of the height alone: the address marginal
/// integrates out, so each rectangle average is the interval average of `g`.
pub fn case_gap_bound_exact(
    g: &PiecewiseLinear,
    first: &Rectangle,
    second: &Rectangle,
    label: &CaseLabel,
    spec: &MeasureSpec,
) -> Result<CaseGapReport, PoincareError> {
    let avg = |r: &Rectangle| -> Result<BigRational, PoincareError> {
        Ok(g.average(&r.interval.lo().to_rational(), &r.interval.hi().to_rational())?)
    };
    let gap = (avg(first)? - avg(second)?).abs();
    let bound = case_bound(label, first, second, &g.lipschitz(), spec);
    let pass = gap <= bound;
    Ok(CaseGapReport { label: label.clone(), gap, bound, slack: BigRational::zero(), pass, lip_proxy: "declared-lipschitz" })
}

fn isqrt(n: usize) -> u64 {
    let mut k = 1u64;
    while (k + 1) * (k + 1) <= n as u64 {
        k += 1;
    }
    k
}

fn sampled_rectangle_average(
    f: &TestFunction,
    rect: &Rectangle,
    spec: &MeasureSpec,
    resolution: usize,
    budget: &GapBudget,
    seed: u64,
    tag: u64,
) -> Result<BigRational, PoincareError> {
    let cells = 3usize.pow(budget.height_cells_log3);
    let cell = rect.interval.length().scale_down(budget.height_cells_log3);
    let mut rng = derived_rng(seed, &[TAG_CASE_GAP, tag]);
    let mut total = BigRational::zero();
    for _ in 0..budget.address_samples {
        let address = extend_address(spec, &rect.address, resolution, &mut rng);
        for i in 0..cells {
            let t = rect.interval.lo() + &(&cell * &Triadic::from_int(i as i64));
            let point = LaaksoPoint::new(t, address.clone()).expect("strata stay inside [0, 1]");
            total += f.eval(&point);
        }
    }
    let count = BigInt::from((cells * budget.address_samples) as u64);
    Ok(total / BigRational::from_integer(count))
}

/// Estimate the average gap between two chain rectangles and compare it to
/// the case bound, with slack covering the height discretization and the
/// address sampling noise.
#[allow(clippy::too_many_arguments)]
pub fn case_gap_bound(
    f: &TestFunction,
    first: &Rectangle,
    second: &Rectangle,
    label: &CaseLabel,
    spec: &MeasureSpec,
    resolution: usize,
    budget: &GapBudget,
    seed: u64,
) -> Result<CaseGapReport, PoincareError> {
    if budget.address_samples == 0 {
        return Err(PoincareError::EmptyBudget { field: "address_samples" });
    }
    let a1 = sampled_rectangle_average(f, first, spec, resolution, budget, seed, 1)?;
    let a2 = sampled_rectangle_average(f, second, spec, resolution, budget, seed, 2)?;
    let gap = (a1 - a2).abs();
    let lip = f.lipschitz();
    let bound = case_bound(label, first, second, lip, spec);

    let cell_sum = (&first.interval.length().scale_down(budget.height_cells_log3)
        + &second.interval.length().scale_down(budget.height_cells_log3))
        .to_rational();
    let diam_sum = (&rectangle_diameter_bound(first, resolution)
        + &rectangle_diameter_bound(second, resolution))
        .to_rational();
    let noise = BigRational::new(BigInt::from(5), BigInt::from(isqrt(budget.address_samples)));
    let slack = lip * (cell_sum + diam_sum * noise);

    let pass = gap <= &bound + &slack;
    Ok(CaseGapReport { label: label.clone(), gap, bound, slack, pass, lip_proxy: "declared-lipschitz" })
}

/// Telescoped chain audit for a function of the height alone.
#[derive(Debug, Clone)]
pub struct TelescopingReport {
    /// `|g(h(p)) - g(h(q))|`.
    pub difference: BigRational,
    /// Sum of the exact consecutive average gaps.
    pub telescoped: BigRational,
    /// `L` times the certified diameters of the two end rectangles, the
    /// cost of replacing the endpoint values by end-rectangle averages.
    pub end_slack: BigRational,
    pub pass: bool,
}

/// Verify `|f(p) - f(q)| ≤ Σ |avg_i - avg_{i+1}| + L (diam first + diam last)`
/// exactly, for `f = g ∘ height` with `g` piecewise linear on `[0, 1]`.
pub fn telescoping_check(g: &PiecewiseLinear, chain: &Chain) -> Result<TelescopingReport, PoincareError> {
    let avg = |r: &Rectangle| -> Result<BigRational, PoincareError> {
        Ok(g.average(&r.interval.lo().to_rational(), &r.interval.hi().to_rational())?)
    };
    let difference = (g.eval(chain.p.height())? - g.eval(chain.q.height())?).abs();
    let mut telescoped = BigRational::zero();
    for k in 0..chain.rectangles.len() - 1 {
        telescoped += (avg(&chain.rectangles[k])? - avg(&chain.rectangles[k + 1])?).abs();
    }
    let lip = g.lipschitz();
    let ends = &rectangle_diameter_bound(&chain.rectangles[0], chain.resolution)
        + &rectangle_diameter_bound(chain.rectangles.last().unwrap(), chain.resolution);
    let end_slack = lip * ends.to_rational();
    let pass = difference <= &telescoped + &end_slack;
    Ok(TelescopingReport { difference, telescoped, end_slack, pass })
}

/// Budgets and scales for the pointwise inequality sweep.
#[derive(Debug, Clone)]
pub struct PointwisePiParams {
    /// Ball radii are `lambda · d · 3^-j`; must be at least 1.
    pub lambda: Triadic,
    /// Radii run over `j = 0..=levels`.
    pub levels: usize,
    /// Points sampled per ball for the restricted maximal average.
    pub ball_samples: usize,
    /// Samples per local slope-ratio estimate.
    pub lip_samples: usize,
    /// The slope ratio at a point looks `3^-lip_shift` of the ball radius
    /// around it.
    pub lip_shift: u32,
}

impl Default for PointwisePiParams {
    fn default() -> Self {
        PointwisePiParams {
            lambda: Triadic::from_int(2),
            levels: 6,
            ball_samples: 16,
            lip_samples: 8,
            lip_shift: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointwisePiRow {
    pub p: LaaksoPoint,
    pub q: LaaksoPoint,
    pub distance: Triadic,
    pub maximal_p: BigRational,
    pub maximal_q: BigRational,
    /// `|f(p) - f(q)| / (d (M(p) + M(q)))`; zero when the numerator
    /// vanishes, `None` when only the denominator does.
    pub ratio: Option<BigRational>,
}

#[derive(Debug, Clone)]
pub struct PointwisePiReport {
    pub function: String,
    pub lambda: Triadic,
    pub rows: Vec<PointwisePiRow>,
    pub max_ratio: Option<BigRational>,
    pub unbounded_rows: usize,
    pub lip_proxy: &'static str,
}

/// Best sampled slope ratio over the ball around `y`: the local analogue of
/// the slope proxy, computed with the measure-restricted ball sampler.
fn lip_ratio_local<R: Rng + ?Sized>(
    f: &TestFunction,
    y: &LaaksoPoint,
    rho: &Triadic,
    samples: usize,
    spec: &MeasureSpec,
    rng: &mut R,
) -> Result<BigRational, PoincareError> {
    let fy = f.eval(y);
    let mut best = BigRational::zero();
    for _ in 0..samples {
        let (z, d) = sample_in_ball(spec, y, rho, REJECTION_CAP, rng)?;
        if d.is_zero() {
            continue;
        }
        let ratio = (f.eval(&z) - &fy).abs() / d.to_rational();
        if ratio > best {
            best = ratio;
        }
    }
    Ok(best)
}

/// Restricted maximal average of the slope proxy at `x`: the largest, over
/// radii `lambda d 3^-j`, of the ball average of the local slope ratio.
#[allow(clippy::too_many_arguments)]
fn maximal_estimate(
    f: &TestFunction,
    x: &LaaksoPoint,
    d: &Triadic,
    spec: &MeasureSpec,
    params: &PointwisePiParams,
    seed: u64,
    pair: u64,
    side: u64,
) -> Result<BigRational, PoincareError> {
    let mut best = BigRational::zero();
    for j in 0..=params.levels {
        let mut r = (&params.lambda * d).scale_down(j as u32);
        if r > Triadic::one() {
            r = Triadic::one();
        }
        let rho = r.scale_down(params.lip_shift);
        let mut total = BigRational::zero();
        for k in 0..params.ball_samples {
            let mut rng = derived_rng(seed, &[TAG_POINTWISE, pair, side, j as u64, k as u64]);
            let (y, _) = sample_in_ball(spec, x, &r, REJECTION_CAP, &mut rng)?;
            total += lip_ratio_local(f, &y, &rho, params.lip_samples, spec, &mut rng)?;
        }
        let mean = total / BigRational::from_integer(BigInt::from(params.ball_samples as u64));
        if mean > best {
            best = mean;
        }
    }
    Ok(best)
}

/// Sweep the pointwise inequality over point pairs: for each pair, estimate
/// the restricted maximal slope average at both ends and report the ratio
/// of `|f(p) - f(q)|` to `d(p, q)` times their sum.
pub fn pointwise_pi_report(
    f: &TestFunction,
    pairs: &[(LaaksoPoint, LaaksoPoint)],
    spec: &MeasureSpec,
    params: &PointwisePiParams,
    seed: u64,
) -> Result<PointwisePiReport, PoincareError> {
    if params.lambda < Triadic::one() {
        return Err(PoincareError::LambdaTooSmall { lambda: params.lambda.clone() });
    }
    for (field, v) in [
        ("ball_samples", params.ball_samples),
        ("lip_samples", params.lip_samples),
    ] {
        if v == 0 {
            return Err(PoincareError::EmptyBudget { field });
        }
    }
    let rows = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (p, q))| {
            let d = distance(p, q)?;
            if d.is_zero() {
                return Err(PoincareError::DegenerateInput(format!("pair {i} repeats the point {p}")));
            }
            let maximal_p = maximal_estimate(f, p, &d, spec, params, seed, i as u64, 0)?;
            let maximal_q = maximal_estimate(f, q, &d, spec, params, seed, i as u64, 1)?;
            let gap = (f.eval(p) - f.eval(q)).abs();
            let denom = d.to_rational() * (&maximal_p + &maximal_q);
            let ratio = if gap.is_zero() {
                Some(BigRational::zero())
            } else if denom.is_zero() {
                None
            } else {
                Some(gap / denom)
            };
            Ok(PointwisePiRow { p: p.clone(), q: q.clone(), distance: d, maximal_p, maximal_q, ratio })
        })
        .collect::<Result<Vec<_>, PoincareError>>()?;
    let max_ratio = rows.iter().filter_map(|r| r.ratio.clone()).max();
    let unbounded_rows = rows.iter().filter(|r| r.ratio.is_none()).count();
    Ok(PointwisePiReport {
        function: f.name().to_string(),
        lambda: params.lambda.clone(),
        rows,
        max_ratio,
        unbounded_rows,
        lip_proxy: "sampled-ratio",
    })
}

/// Budgets for the ball form of the inequality.
#[derive(Debug, Clone)]
pub struct BallPiParams {
    /// The slope average is taken over the `lambda`-enlarged ball.
    pub lambda: Triadic,
    pub ball_samples: usize,
    pub lip_samples: usize,
    pub lip_shift: u32,
}

impl Default for BallPiParams {
    fn default() -> Self {
        BallPiParams { lambda: Triadic::from_int(2), ball_samples: 32, lip_samples: 8, lip_shift: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct BallPiRow {
    pub center: LaaksoPoint,
    pub radius: Triadic,
    /// Sampled mean deviation of `f` from its ball average.
    pub lhs: BigRational,
    /// Radius times the sampled slope average over the enlarged ball.
    pub rhs: BigRational,
    pub ratio: Option<BigRational>,
}

#[derive(Debug, Clone)]
pub struct BallPiReport {
    pub function: String,
    pub lambda: Triadic,
    pub rows: Vec<BallPiRow>,
    pub max_ratio: Option<BigRational>,
    pub unbounded_rows: usize,
    pub lip_proxy: &'static str,
}

/// Sweep the ball inequality over the given balls: compare the mean
/// deviation of `f` inside each ball to the radius times the slope average
/// over the enlarged ball.
pub fn ball_pi_report(
    f: &TestFunction,
    balls: &[(LaaksoPoint, Triadic)],
    spec: &MeasureSpec,
    params: &BallPiParams,
    seed: u64,
) -> Result<BallPiReport, PoincareError> {
    if params.lambda < Triadic::one() {
        return Err(PoincareError::LambdaTooSmall { lambda: params.lambda.clone() });
    }
    for (field, v) in [
        ("ball_samples", params.ball_samples),
        ("lip_samples", params.lip_samples),
    ] {
        if v == 0 {
            return Err(PoincareError::EmptyBudget { field });
        }
    }
    let rows = balls
        .par_iter()
        .enumerate()
        .map(|(i, (center, radius))| {
            let mut values = Vec::with_capacity(params.ball_samples);
            for k in 0..params.ball_samples {
                let mut rng = derived_rng(seed, &[TAG_BALL, i as u64, 0, k as u64]);
                let (y, _) = sample_in_ball(spec, center, radius, REJECTION_CAP, &mut rng)?;
                values.push(f.eval(&y));
            }
            let count = BigRational::from_integer(BigInt::from(params.ball_samples as u64));
            let mean = values.iter().sum::<BigRational>() / &count;
            let lhs = values.iter().map(|v| (v - &mean).abs()).sum::<BigRational>() / &count;

            let enlarged = &params.lambda * radius;
            let rho = enlarged.scale_down(params.lip_shift);
            let mut lip_total = BigRational::zero();
            for k in 0..params.ball_samples {
                let mut rng = derived_rng(seed, &[TAG_BALL, i as u64, 1, k as u64]);
                let (z, _) = sample_in_ball(spec, center, &enlarged, REJECTION_CAP, &mut rng)?;
                lip_total += lip_ratio_local(f, &z, &rho, params.lip_samples, spec, &mut rng)?;
            }
            let rhs = radius.to_rational() * lip_total / &count;
            let ratio = if lhs.is_zero() {
                Some(BigRational::zero())
            } else if rhs.is_zero() {
                None
            } else {
                Some(&lhs / &rhs)
            };
            Ok(BallPiRow { center: center.clone(), radius: radius.clone(), lhs, rhs, ratio })
        })
        .collect::<Result<Vec<_>, PoincareError>>()?;
    let max_ratio = rows.iter().filter_map(|r| r.ratio.clone()).max();
    let unbounded_rows = rows.iter().filter(|r| r.ratio.is_none()).count();
    Ok(BallPiReport {
        function: f.name().to_string(),
        lambda: params.lambda.clone(),
        rows,
        max_ratio,
        unbounded_rows,
        lip_proxy: "sampled-ratio",
    })
}
