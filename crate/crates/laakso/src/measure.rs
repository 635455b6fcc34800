//! The lifted measures on the resolution-`N` space: rectangle masses,
//! rigorous ball-measure bounds, doubling and power-law regularity
//! reports, and the non-doubling two-parameter counterexample.
//!
//! The measure attached to a `MeasureSpec` is the pushforward of
//! (length on the height interval) × (the spec's Cantor measure) to the
//! quotient. Rectangles `q(J × K_a)` have exact mass `|J| · ν(K_a)`; balls
//! do not, so `ball_measure` returns certified lower and upper bounds
//! instead, obtained by classifying height-grid cells against the radius
//! using the fact that `t ↦ d(x, (t, a))` is 1-Lipschitz.
//!
//! Only a small set of addresses can intersect a ball: flipping digit `n`
//! requires visiting an order-`n` level, and a path of length `≤ r` from
//! `x` stays within height `[x₁ - r, x₁ + r]`, so digits with no level in
//! that window are pinned to `x`'s value. That localization cuts the `2^N`
//! address enumeration down to the digits whose scale is comparable to
//! `r`, which is what makes the sweeps tractable.

use num_bigint::{BigInt, RandBigInt};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::cantor::{cylinder_mass, sample_address, CantorAddress, CantorError, MeasureSpec};
use crate::metric::{pair_cost_scaled, MetricError};
use crate::rng::derived_rng;
use crate::space::{nearest_level_geq, LaaksoPoint};
use crate::triadic::{pow3, Triadic};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("radius {r} outside the open interval (0, {max})")]
    RadiusOutOfRange { r: Triadic, max: Triadic },
    #[error("grid step {grid} is coarser than radius/27 = {radius}/27")]
    GridTooCoarse { grid: Triadic, radius: Triadic },
    #[error("grid step {grid} must be a power of 1/3")]
    GridNotUnitPower { grid: Triadic },
    #[error("resolution {resolution} too coarse for radius {radius}: needs 2/3^N < r/9")]
    ResolutionInadequate { resolution: usize, radius: Triadic },
    #[error("resolution {resolution} exceeds the enumeration limit {max}")]
    ResolutionTooWide { resolution: usize, max: usize },
    #[error("{count} candidate digits exceed the enumeration limit {max}")]
    CandidateSetTooLarge { count: usize, max: usize },
    #[error("interval [{lo}, {hi}] is empty")]
    EmptyInterval { lo: Triadic, hi: Triadic },
    #[error("interval [{lo}, {hi}] leaves [0, 1]")]
    IntervalOutOfRange { lo: Triadic, hi: Triadic },
    #[error("this report requires a Bernoulli measure")]
    NotBernoulli,
    #[error("split parameters must satisfy lambda < lambda_hat (got {lambda} >= {lambda_hat}); swap them and mirror the center instead")]
    ParameterOrder { lambda: BigRational, lambda_hat: BigRational },
    #[error("scale index m = {m} below the minimum {min}")]
    ScaleTooCoarse { m: u32, min: u32 },
    #[error("no proposal landed in the radius-{radius} ball within {attempts} attempts")]
    BallSamplingFailed { radius: Triadic, attempts: u32 },
    #[error(transparent)]
    Weight(#[from] CantorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A closed subinterval of [0, 1] with triadic endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Triadic,
    hi: Triadic,
}

impl Interval {
    pub fn new(lo: Triadic, hi: Triadic) -> Result<Self, MeasureError> {
        if lo > hi {
            return Err(MeasureError::EmptyInterval { lo, hi });
        }
        if lo.is_negative() || hi > Triadic::one() {
            return Err(MeasureError::IntervalOutOfRange { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> &Triadic {
        &self.lo
    }

    pub fn hi(&self) -> &Triadic {
        &self.hi
    }

    pub fn length(&self) -> Triadic {
        &self.hi - &self.lo
    }

    pub fn contains(&self, t: &Triadic) -> bool {
        *t >= self.lo && *t <= self.hi
    }
}

/// The image of `J × K_a` in the quotient: all heights in `J` over every
/// address extending `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rectangle {
    pub interval: Interval,
    pub address: CantorAddress,
}

impl Rectangle {
    pub fn new(interval: Interval, address: CantorAddress) -> Self {
        Rectangle { interval, address }
    }
}

/// Exact mass of a rectangle: `|J| · ν(K_a)`.
pub fn rectangle_mass(spec: &MeasureSpec, rect: &Rectangle) -> BigRational {
    rect.interval.length().to_rational() * cylinder_mass(spec, &rect.address)
}

/// Certified bounds on the mass of the closed ball `B(x, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallMeasureBounds {
    pub lower: BigRational,
    pub upper: BigRational,
    pub resolution: usize,
    pub grid: Triadic,
}

/// Integer type usable for the scaled sweep arithmetic.
trait ScaledInt: Integer + Clone + From<u8> {
    fn from_big(v: &BigInt) -> Option<Self>;
    fn to_big(&self) -> BigInt;
}

impl ScaledInt for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl ScaledInt for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

fn fill_bits(mask: u64, out: &mut Vec<usize>) {
    out.clear();
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize + 1);
        m &= m - 1;
    }
}

fn code_of(a: &CantorAddress) -> u64 {
    let mut c = 0u64;
    for n in 1..=a.len() {
        if a.bit(n) {
            c |= 1 << (n - 1);
        }
    }
    c
}

fn address_from_code(code: u64, len: usize) -> CantorAddress {
    CantorAddress::new((1..=len).map(|n| code >> (n - 1) & 1 == 1).collect())
}

/// Digits that could differ inside `B(x, r)`: those with an order-`n`
/// level within the reachable height window `[x₁ - r, x₁ + r]`.
fn candidate_digits(x1: &Triadic, r: &Triadic, resolution: usize) -> Vec<usize> {
    let lo = {
        let v = x1 - r;
        if v.is_negative() { Triadic::zero() } else { v }
    };
    let hi = {
        let v = x1 + r;
        if v > Triadic::one() { Triadic::one() } else { v }
    };
    (1..=resolution)
        .filter(|&n| matches!(nearest_level_geq(&lo, n as u32), Some(l) if l <= hi))
        .collect()
}

struct SweepContext<T> {
    g: u32,
    grid_depth: u32,
    resolution: usize,
    x1: T,
    r: T,
    delta: T,
    j_min: T,
    j_max: T,
    cells: T,
    x_codes: Vec<u64>,
}

impl<T: ScaledInt> SweepContext<T> {
    /// Wormhole order of the grid height `j · 3^-grid_depth`, if any.
    fn row_order(&self, j: &T) -> Option<usize> {
        if j.is_zero() || *j == self.cells {
            return None;
        }
        let three = T::from(3u8);
        let mut j = j.clone();
        let mut v = 0u32;
        while j.mod_floor(&three).is_zero() {
            j = j.div_floor(&three);
            v += 1;
        }
        let order = (self.grid_depth - v) as usize;
        (order <= self.resolution).then_some(order)
    }

    /// Count (inside, inside-or-boundary) grid cells for one address,
    /// marching with Lipschitz run-length skips.
    fn classify_cells(&self, a_code: u64) -> (BigInt, BigInt) {
        let mut inside = T::zero();
        let mut covered = T::zero();
        let mut bits = Vec::with_capacity(self.resolution);
        let mut j = self.j_min.clone();
        while j <= self.j_max {
            let t = j.clone() * self.delta.clone();
            let (lo, hi) = if t <= self.x1 { (t.clone(), self.x1.clone()) } else { (self.x1.clone(), t) };
            let row = self.row_order(&j);
            let mut best: Option<T> = None;
            for &xc in &self.x_codes {
                let base = xc ^ a_code;
                let masks = match row {
                    Some(o) => [base, base ^ (1 << (o - 1))],
                    None => [base, base],
                };
                let count = if row.is_some() { 2 } else { 1 };
                for &mask in &masks[..count] {
                    fill_bits(mask, &mut bits);
                    let cost = pair_cost_scaled(&lo, &hi, self.g, &bits);
                    if best.as_ref().is_none_or(|b| cost < *b) {
                        best = Some(cost);
                    }
                }
            }
            let d = best.expect("at least one representative mask");
            let remaining = self.j_max.clone() - j.clone() + T::one();
            let run;
            if d <= self.r.clone() - self.delta.clone() {
                // Cells this deep inside stay inside for (gap / delta) more
                // steps by the Lipschitz bound.
                let gap = self.r.clone() - self.delta.clone() - d;
                run = (gap.div_floor(&self.delta) + T::one()).min(remaining);
                inside = inside + run.clone();
                covered = covered + run.clone();
            } else if d >= self.r.clone() + self.delta.clone() {
                let gap = d - self.r.clone() - self.delta.clone();
                run = (gap.div_floor(&self.delta) + T::one()).min(remaining);
            } else {
                run = T::one();
                covered = covered + T::one();
            }
            j = j + run;
        }
        (inside.to_big(), covered.to_big())
    }
}

fn sweep<T: ScaledInt>(
    spec: &MeasureSpec,
    x: &LaaksoPoint,
    free: &[usize],
    g: u32,
    grid_depth: u32,
    scaled: &ScaledBall,
) -> (BigRational, BigRational) {
    let conv = |v: &BigInt| T::from_big(v).expect("scaled value fits the sweep integer type");
    let n = x.resolution();
    let x_code = code_of(x.address());
    let mut x_codes = vec![x_code];
    if let Some(order) = x.active_wormhole() {
        x_codes.push(x_code | 1 << (order - 1));
    }
    let ctx = SweepContext::<T> {
        g,
        grid_depth,
        resolution: n,
        x1: conv(&scaled.x1),
        r: conv(&scaled.r),
        delta: conv(&scaled.delta),
        j_min: conv(&scaled.j_min),
        j_max: conv(&scaled.j_max),
        cells: conv(&scaled.cells),
        x_codes,
    };
    let clear: u64 = free.iter().fold(0, |m, &b| m | 1 << (b - 1));
    let delta_mass = BigRational::new(BigInt::one(), pow3(grid_depth));
    let mut lower = BigRational::zero();
    let mut upper = BigRational::zero();
    for subset in 0u64..1 << free.len() {
        let mut code = x_code & !clear;
        for (i, &bit) in free.iter().enumerate() {
            if subset >> i & 1 == 1 {
                code |= 1 << (bit - 1);
            }
        }
        let address = address_from_code(code, n);
        let nu = cylinder_mass(spec, &address);
        let (inside, covered) = ctx.classify_cells(code);
        lower += &nu * &delta_mass * BigRational::from_integer(inside);
        upper += nu * &delta_mass * BigRational::from_integer(covered);
    }
    (lower, upper)
}

struct ScaledBall {
    x1: BigInt,
    r: BigInt,
    delta: BigInt,
    j_min: BigInt,
    j_max: BigInt,
    cells: BigInt,
}

const MAX_ENUMERATION_DIGITS: usize = 60;
const MAX_CANDIDATE_DIGITS: usize = 22;

/// Certified lower and upper bounds on the measure of the closed ball
/// `B(x, r)`, computed on a height grid of step `grid`.
///
/// Grid cells are classified by the distance at their left endpoint:
/// at most `r - grid` means the whole cell is inside, at least `r + grid`
/// means it contributes nothing, and anything between counts toward the
/// upper bound only. Addresses outside the reachable set contribute
/// nothing and are never enumerated.
pub fn ball_measure(
    spec: &MeasureSpec,
    x: &LaaksoPoint,
    r: &Triadic,
    grid: &Triadic,
) -> Result<BallMeasureBounds, MeasureError> {
    let n = x.resolution();
    if !r.is_positive() || *r >= Triadic::one() {
        return Err(MeasureError::RadiusOutOfRange { r: r.clone(), max: Triadic::one() });
    }
    if !grid.is_positive() || *grid.numerator() != BigInt::one() {
        return Err(MeasureError::GridNotUnitPower { grid: grid.clone() });
    }
    if &Triadic::from_int(27) * grid > *r {
        return Err(MeasureError::GridTooCoarse { grid: grid.clone(), radius: r.clone() });
    }
    // Unresolved digits must be metrically negligible at scale r, so the
    // classification is meaningful: 2/3^N < r/9.
    if Triadic::new(18, n as u32) >= *r {
        return Err(MeasureError::ResolutionInadequate { resolution: n, radius: r.clone() });
    }
    if n > MAX_ENUMERATION_DIGITS {
        return Err(MeasureError::ResolutionTooWide { resolution: n, max: MAX_ENUMERATION_DIGITS });
    }
    let free = candidate_digits(x.height(), r, n);
    if free.len() > MAX_CANDIDATE_DIGITS {
        return Err(MeasureError::CandidateSetTooLarge { count: free.len(), max: MAX_CANDIDATE_DIGITS });
    }
    let grid_depth = grid.depth();
    let g = x.height().depth().max(grid_depth).max(n as u32);
    let x1 = x.height().scaled(g);
    let rs = r.scaled(g);
    let delta = pow3(g - grid_depth);
    let cells = pow3(grid_depth);
    // Cells beyond the window sit at height distance > r from x1 and are
    // outside regardless of address.
    let j_min = ((&x1 - &rs).div_floor(&delta) - BigInt::one()).max(BigInt::zero());
    let j_max = ((&x1 + &rs).div_floor(&delta) + BigInt::one()).min(&cells - BigInt::one());
    let scaled = ScaledBall { x1, r: rs, delta, j_min, j_max, cells };
    let (lower, upper) = if g <= 75 {
        sweep::<i128>(spec, x, &free, g, grid_depth, &scaled)
    } else {
        sweep::<BigInt>(spec, x, &free, g, grid_depth, &scaled)
    };
    debug_assert!(lower >= BigRational::zero() && lower <= upper && upper <= BigRational::one());
    Ok(BallMeasureBounds { lower, upper, resolution: n, grid: grid.clone() })
}

/// Smallest resolution adequate for balls of radius `r` (the `2/3^N < r/9`
/// rule), plus nothing else; sweep drivers add their own margin.
pub fn required_resolution(r: &Triadic) -> Result<usize, MeasureError> {
    if !r.is_positive() {
        return Err(MeasureError::RadiusOutOfRange { r: r.clone(), max: Triadic::one() });
    }
    for n in 1usize..=400 {
        if Triadic::new(18, n as u32) < *r {
            return Ok(n);
        }
    }
    unreachable!("positive triadic radii exceed 18/3^400");
}

/// Largest power-of-1/3 grid step no coarser than `r / 243`, the step the
/// report sweeps use.
pub fn fine_grid(r: &Triadic) -> Result<Triadic, MeasureError> {
    if !r.is_positive() {
        return Err(MeasureError::RadiusOutOfRange { r: r.clone(), max: Triadic::one() });
    }
    for gdepth in 1.. {
        if Triadic::new(243, gdepth) <= *r {
            return Ok(Triadic::unit(gdepth));
        }
    }
    unreachable!()
}

/// A point distributed according to the measure at grid scale: height
/// uniform over the `3^-height_depth` grid, address from `sample_address`,
/// then canonicalized.
pub fn sample_point<R: Rng + ?Sized>(
    spec: &MeasureSpec,
    resolution: usize,
    height_depth: u32,
    rng: &mut R,
) -> LaaksoPoint {
    let j = rng.gen_bigint_range(&BigInt::zero(), &pow3(height_depth));
    let address = sample_address(spec, resolution, rng);
    LaaksoPoint::new(Triadic::new(j, height_depth), address).expect("grid heights lie in [0, 1)")
}

/// A point of the closed ball around `center` distributed according to the
/// measure restricted to the ball (at grid scale `3^-(radius depth + 2)` in
/// height), together with its exact distance from the center.
///
/// Proposals come from the smallest product slab containing the ball:
/// heights within `radius` of the center, and addresses agreeing with the
/// center except at digits whose wormhole level is within `radius` of the
/// center height. Any point of the ball differs from the center only at such
/// digits, so rejection from the slab is exact. `attempts` caps the number
/// of rejected proposals.
pub fn sample_in_ball<R: Rng + ?Sized>(
    spec: &MeasureSpec,
    center: &LaaksoPoint,
    radius: &Triadic,
    attempts: u32,
    rng: &mut R,
) -> Result<(LaaksoPoint, Triadic), MeasureError> {
    if !radius.is_positive() || *radius > Triadic::one() {
        return Err(MeasureError::RadiusOutOfRange { r: radius.clone(), max: Triadic::one() });
    }
    let n = center.resolution();
    let free = candidate_digits(center.height(), radius, n);
    let lo = {
        let v = center.height() - radius;
        if v.is_negative() { Triadic::zero() } else { v }
    };
    let hi = {
        let v = center.height() + radius;
        if v > Triadic::one() { Triadic::one() } else { v }
    };
    let depth = (radius.depth() + 3).max(lo.depth()).max(hi.depth());
    let j_lo = lo.scaled(depth);
    let j_hi = hi.scaled(depth);
    for _ in 0..attempts {
        let j = rng.gen_bigint_range(&j_lo, &(&j_hi + 1));
        let mut address = CantorAddress::empty();
        for k in 1..=n {
            let b = if free.binary_search(&k).is_ok() {
                crate::cantor::sample_digit(rng, &spec.zero_probability(&address))
            } else {
                center.address().bit(k)
            };
            address = address.child(b);
        }
        let y = LaaksoPoint::new(Triadic::new(j, depth), address).expect("slab heights lie in [0, 1]");
        let d = crate::metric::distance(center, &y).expect("slab points share the resolution");
        if d <= *radius {
            return Ok((y, d));
        }
    }
    Err(MeasureError::BallSamplingFailed { radius: radius.clone(), attempts })
}

#[derive(Debug, Clone)]
pub struct DoublingRow {
    pub center: LaaksoPoint,
    pub radius: Triadic,
    pub small: BallMeasureBounds,
    pub doubled: BallMeasureBounds,
    pub ratio: BigRational,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct DoublingReport {
    pub bound: BigRational,
    pub rows: Vec<DoublingRow>,
    pub max_ratio: BigRational,
}

/// Ratio bound for a Bernoulli measure: `16 · max(w^-4, (1-w)^-4)`.
pub fn doubling_bound(w: &BigRational) -> BigRational {
    let inv_w = w.recip();
    let inv_cw = (BigRational::one() - w).recip();
    let a = &inv_w * &inv_w * &inv_w * &inv_w;
    let b = &inv_cw * &inv_cw * &inv_cw * &inv_cw;
    BigRational::from_integer(BigInt::from(16)) * a.max(b)
}

/// For sampled centers and each radius, certify
/// `upper(B(x, 2r)) / lower(B(x, r))` against the doubling bound.
pub fn doubling_report(
    spec: &MeasureSpec,
    samples: usize,
    radii: &[Triadic],
    seed: u64,
) -> Result<DoublingReport, MeasureError> {
    let w = match spec {
        MeasureSpec::Bernoulli { w } => w.clone(),
        MeasureSpec::Split { .. } => return Err(MeasureError::NotBernoulli),
    };
    let third = Triadic::unit(1);
    let mut r_min: Option<&Triadic> = None;
    for r in radii {
        if !r.is_positive() || *r >= third {
            return Err(MeasureError::RadiusOutOfRange { r: r.clone(), max: third });
        }
        if r_min.map_or(true, |m| r < m) {
            r_min = Some(r);
        }
    }
    let bound = doubling_bound(&w);
    let Some(r_min) = r_min else {
        return Ok(DoublingReport { bound, rows: Vec::new(), max_ratio: BigRational::zero() });
    };
    let resolution = required_resolution(r_min)? + 2;
    let centers: Vec<LaaksoPoint> = (0..samples)
        .map(|i| {
            let mut rng = derived_rng(seed, &[0xD0B1, i as u64]);
            sample_point(spec, resolution, resolution as u32, &mut rng)
        })
        .collect();
    let tasks: Vec<(&LaaksoPoint, &Triadic)> =
        centers.iter().flat_map(|x| radii.iter().map(move |r| (x, r))).collect();
    let rows: Vec<DoublingRow> = tasks
        .par_iter()
        .map(|(x, r)| -> Result<DoublingRow, MeasureError> {
            let grid = fine_grid(r)?;
            let small = ball_measure(spec, x, r, &grid)?;
            let doubled = ball_measure(spec, x, &r.double(), &grid)?;
            assert!(small.lower.is_positive(), "adequate grids certify positive ball mass");
            let ratio = &doubled.upper / &small.lower;
            let pass = ratio <= bound;
            Ok(DoublingRow { center: (*x).clone(), radius: (*r).clone(), small, doubled, ratio, pass })
        })
        .collect::<Result<_, _>>()?;
    let max_ratio = rows.iter().map(|row| row.ratio.clone()).max().unwrap_or_else(BigRational::zero);
    Ok(DoublingReport { bound, rows, max_ratio })
}

#[derive(Debug, Clone)]
pub struct AhlforsRow {
    pub center: LaaksoPoint,
    pub k: u32,
    pub radius: Triadic,
    pub bounds: BallMeasureBounds,
    /// lower bound over r^Q, with r = 3^-k and r^Q = 6^-k exactly.
    pub lower_ratio: BigRational,
    pub upper_ratio: BigRational,
}

#[derive(Debug, Clone)]
pub struct AhlforsReport {
    pub rows: Vec<AhlforsRow>,
    pub min_lower_ratio: BigRational,
    pub max_upper_ratio: BigRational,
}

/// Bracket `mass(B(x, 3^-k)) / (3^-k)^Q` for the symmetric measure, where
/// `Q = 1 + log 2 / log 3` makes `(3^-k)^Q = 6^-k` exactly rational.
pub fn ahlfors_report(samples: usize, ks: &[u32], seed: u64) -> Result<AhlforsReport, MeasureError> {
    let spec = MeasureSpec::bernoulli_ratio(1, 2)?;
    for &k in ks {
        if k == 0 || k > 30 {
            return Err(MeasureError::RadiusOutOfRange { r: Triadic::unit(k.min(64)), max: Triadic::one() });
        }
    }
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let resolution = required_resolution(&Triadic::unit(k_max))? + 2;
    let centers: Vec<LaaksoPoint> = (0..samples)
        .map(|i| {
            let mut rng = derived_rng(seed, &[0xA1F5, i as u64]);
            sample_point(&spec, resolution, resolution as u32, &mut rng)
        })
        .collect();
    let tasks: Vec<(&LaaksoPoint, u32)> = centers.iter().flat_map(|x| ks.iter().map(move |&k| (x, k))).collect();
    let rows: Vec<AhlforsRow> = tasks
        .par_iter()
        .map(|&(x, k)| -> Result<AhlforsRow, MeasureError> {
            let r = Triadic::unit(k);
            let grid = fine_grid(&r)?;
            let bounds = ball_measure(&spec, x, &r, &grid)?;
            let scale = BigRational::from_integer(num_traits::pow(BigInt::from(6), k as usize));
            let lower_ratio = &bounds.lower * &scale;
            let upper_ratio = &bounds.upper * &scale;
            Ok(AhlforsRow { center: x.clone(), k, radius: r, bounds, lower_ratio, upper_ratio })
        })
        .collect::<Result<_, _>>()?;
    let min_lower_ratio = rows.iter().map(|r| r.lower_ratio.clone()).min().unwrap_or_else(BigRational::zero);
    let max_upper_ratio = rows.iter().map(|r| r.upper_ratio.clone()).max().unwrap_or_else(BigRational::zero);
    Ok(AhlforsReport { rows, min_lower_ratio, max_upper_ratio })
}

#[derive(Debug, Clone)]
pub struct NondoublingReport {
    pub m: u32,
    pub lambda: BigRational,
    pub lambda_hat: BigRational,
    pub small: BallMeasureBounds,
    pub doubled: BallMeasureBounds,
    /// Certified lower bound on the doubling ratio: lower(2B) / upper(B).
    pub computed: BigRational,
    /// The analytic lower bound `1 + (lambda_hat / lambda)^(m-2)`.
    pub analytic: BigRational,
}

/// Doubling-ratio blowup of the split measure at the ball
/// `B((1/3 + 3^-m, 00…0), 3^-m)`, which hugs the order-1 level from above:
/// the doubled ball crosses it and picks up the heavy-branch cylinders.
pub fn nondoubling_ratio(
    lambda: &BigRational,
    lambda_hat: &BigRational,
    m: u32,
) -> Result<NondoublingReport, MeasureError> {
    if m < 3 {
        return Err(MeasureError::ScaleTooCoarse { m, min: 3 });
    }
    if lambda >= lambda_hat {
        return Err(MeasureError::ParameterOrder { lambda: lambda.clone(), lambda_hat: lambda_hat.clone() });
    }
    let spec = MeasureSpec::split(lambda.clone(), lambda_hat.clone())?;
    let resolution = m as usize + 4;
    let r = Triadic::unit(m);
    let grid = Triadic::unit(m + 5);
    let height = Triadic::new(pow3(m - 1) + BigInt::one(), m);
    let center = LaaksoPoint::new(height, CantorAddress::zeros(resolution)).expect("center lies in [0, 1]");
    let small = ball_measure(&spec, &center, &r, &grid)?;
    let doubled = ball_measure(&spec, &center, &r.double(), &grid)?;
    assert!(small.upper.is_positive(), "balls carry positive mass");
    let computed = &doubled.lower / &small.upper;
    let quotient = lambda_hat / lambda;
    let analytic = BigRational::one() + num_traits::pow(quotient, (m - 2) as usize);
    Ok(NondoublingReport {
        m,
        lambda: lambda.clone(),
        lambda_hat: lambda_hat.clone(),
        small,
        doubled,
        computed,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::DistanceOracle;
    use crate::triadic::Triadic;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn tri(k: i64, d: u32) -> Triadic {
        Triadic::new(k, d)
    }

    fn interval(lo: Triadic, hi: Triadic) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn rectangle_masses_are_exact_products() {
        let half = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let whole = Rectangle::new(interval(Triadic::zero(), Triadic::one()), CantorAddress::empty());
        assert_eq!(rectangle_mass(&half, &whole), BigRational::one());

        let third = MeasureSpec::bernoulli_ratio(1, 3).unwrap();
        let rect = Rectangle::new(interval(Triadic::zero(), tri(1, 1)), "01".parse().unwrap());
        assert_eq!(rectangle_mass(&third, &rect), rat(2, 27));

        let degenerate = Rectangle::new(interval(tri(5, 2), tri(5, 2)), "01".parse().unwrap());
        assert!(rectangle_mass(&third, &degenerate).is_zero());
    }

    #[test]
    fn rectangle_mass_is_additive_under_refinement() {
        let spec = MeasureSpec::bernoulli_ratio(2, 7).unwrap();
        let a: CantorAddress = "01".parse().unwrap();
        let whole = Rectangle::new(interval(tri(1, 2), tri(8, 2)), a.clone());
        let total = rectangle_mass(&spec, &whole);
        // Split J at 1/3 and 2/3, and refine the address one level.
        let cuts = [tri(1, 2), tri(3, 2), tri(6, 2), tri(8, 2)];
        let mut sum = BigRational::zero();
        for pair in cuts.windows(2) {
            for child in [a.child(false), a.child(true)] {
                let rect = Rectangle::new(interval(pair[0].clone(), pair[1].clone()), child);
                sum += rectangle_mass(&spec, &rect);
            }
        }
        assert_eq!(sum, total);
    }

    #[test]
    fn wormhole_fibers_are_measure_null() {
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        // Cover every level of order ≤ 2 by intervals of shrinking width;
        // the total mass is (number of levels) · width → 0.
        let mut previous = BigRational::from_integer(BigInt::from(10));
        for gdepth in 3..=6u32 {
            let width = Triadic::unit(gdepth);
            let mut total = BigRational::zero();
            for order in 1..=2u32 {
                for level in crate::space::wormhole_levels(order) {
                    let lo = level.height() - &width;
                    let hi = level.height() + &width;
                    let rect = Rectangle::new(interval(lo, hi), CantorAddress::empty());
                    total += rectangle_mass(&spec, &rect);
                }
            }
            let expected = BigRational::from_integer(BigInt::from(16)) * Triadic::unit(gdepth).to_rational();
            assert_eq!(total, expected);
            assert!(total < previous);
            previous = total;
        }
    }

    #[test]
    fn ball_bounds_match_an_unlocalized_recount() {
        // Independent recount with the public distance function: reachable
        // addresses must reproduce the sweep cell by cell, and every
        // skipped address must stay strictly outside the ball.
        let spec = MeasureSpec::bernoulli_ratio(1, 3).unwrap();
        let x = LaaksoPoint::new(tri(13, 3), "010110".parse().unwrap()).unwrap();
        let r = tri(1, 2);
        let grid = Triadic::unit(5);
        let got = ball_measure(&spec, &x, &r, &grid).unwrap();

        let n = 6;
        let free = candidate_digits(x.height(), &r, n);
        let fixed: u64 = free.iter().fold(!0u64 >> (64 - n), |m, &b| m & !(1 << (b - 1)));
        let x_code = code_of(x.address());
        let delta_mass = BigRational::new(BigInt::one(), BigInt::from(243));
        let mut lower = BigRational::zero();
        let mut upper = BigRational::zero();
        for code in 0u64..1 << n {
            let address = address_from_code(code, n);
            let reachable = code & fixed == x_code & fixed;
            let nu = cylinder_mass(&spec, &address);
            for j in 0..243i64 {
                let t = Triadic::new(j, 5);
                let point = LaaksoPoint::new(t.clone(), address.clone()).unwrap();
                let d = crate::metric::distance(&x, &point).unwrap();
                if !reachable {
                    assert!(d > r, "unreachable address {address} enters the ball at height {t}");
                    continue;
                }
                if d <= &r - &grid {
                    lower += &nu * &delta_mass;
                    upper += &nu * &delta_mass;
                } else if d < &r + &grid {
                    upper += &nu * &delta_mass;
                }
            }
        }
        assert_eq!(got.lower, lower);
        assert_eq!(got.upper, upper);
    }

    #[test]
    fn ball_bounds_are_sane_and_positive() {
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let x = LaaksoPoint::new(tri(13, 3), CantorAddress::zeros(6)).unwrap();
        let big = ball_measure(&spec, &x, &tri(26, 3), &Triadic::unit(7)).unwrap();
        assert!(big.upper <= BigRational::one());
        assert!(big.lower.is_positive());
        let medium = ball_measure(&spec, &x, &Triadic::unit(1), &Triadic::unit(5)).unwrap();
        assert!(medium.lower.is_positive());
        assert!(medium.lower <= medium.upper);
    }

    #[test]
    fn lower_bound_beats_the_analytic_cylinder_bound() {
        // A ball of radius r contains the points reachable by a vertical
        // run of r/2 that flips only digits deeper than the r-scale, so
        // its mass is at least (r/2) times that cylinder's mass, up to
        // grid slack.
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let x = LaaksoPoint::new(tri(13, 3), CantorAddress::zeros(6)).unwrap();
        let r = tri(1, 2);
        let grid = Triadic::unit(5);
        let bounds = ball_measure(&spec, &x, &r, &grid).unwrap();
        // 1/9 ≤ r < 1/3 puts the scale index at 2; the protected cylinder
        // has depth 3.
        let cyl = cylinder_mass(&spec, &x.address().prefix(3));
        let slack = (&grid + &grid).to_rational();
        let half_r = r.to_rational() / BigRational::from_integer(BigInt::from(2));
        let analytic = (half_r - slack) * cyl;
        assert!(
            bounds.lower >= analytic,
            "lower {} below analytic cylinder bound {}",
            bounds.lower,
            analytic
        );
    }

    #[test]
    fn ball_bounds_bracket_a_monte_carlo_estimate() {
        // 10^5 grid samples from the product measure, distances from one
        // breadth-first sweep; the binomial confidence interval must
        // intersect the certified bracket.
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let x = LaaksoPoint::new(tri(13, 3), CantorAddress::zeros(6)).unwrap();
        let r = tri(1, 2);
        let bounds = ball_measure(&spec, &x, &r, &Triadic::unit(5)).unwrap();
        let oracle = DistanceOracle::new(6).unwrap();
        let from_x = oracle.distances_from(&x).unwrap();
        let mut rng = derived_rng(11, &[0x3C]);
        let n = 100_000u32;
        let mut hits = 0u32;
        for _ in 0..n {
            let p = sample_point(&spec, 6, 6, &mut rng);
            if from_x.get(&p).unwrap() <= r {
                hits += 1;
            }
        }
        let p_hat = f64::from(hits) / f64::from(n);
        let eps = (f64::ln(2.0 / 0.001) / (2.0 * f64::from(n))).sqrt();
        let lower = bounds.lower.to_f64().unwrap();
        let upper = bounds.upper.to_f64().unwrap();
        assert!(lower <= p_hat + eps, "lower {lower} above CI {p_hat} + {eps}");
        assert!(upper >= p_hat - eps, "upper {upper} below CI {p_hat} - {eps}");
    }

    #[test]
    fn ball_bounds_are_monotone_in_radius() {
        let spec = MeasureSpec::bernoulli_ratio(2, 5).unwrap();
        let x = LaaksoPoint::new(tri(40, 4), "0110101".parse().unwrap()).unwrap();
        let grid = Triadic::unit(6);
        let radii = [tri(1, 2), tri(4, 3), tri(2, 2), tri(8, 3)];
        let mut prev: Option<BallMeasureBounds> = None;
        for r in radii {
            let b = ball_measure(&spec, &x, &r, &grid).unwrap();
            if let Some(p) = prev {
                assert!(b.lower >= p.lower, "lower bound shrank when r grew");
                assert!(b.upper >= p.upper, "upper bound shrank when r grew");
            }
            prev = Some(b);
        }
    }

    #[test]
    fn ball_preconditions_are_enforced() {
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let x = LaaksoPoint::new(tri(13, 3), CantorAddress::zeros(6)).unwrap();
        let r = tri(1, 2);
        assert!(matches!(
            ball_measure(&spec, &x, &Triadic::zero(), &Triadic::unit(5)),
            Err(MeasureError::RadiusOutOfRange { .. })
        ));
        assert!(matches!(
            ball_measure(&spec, &x, &Triadic::one(), &Triadic::unit(5)),
            Err(MeasureError::RadiusOutOfRange { .. })
        ));
        assert!(matches!(
            ball_measure(&spec, &x, &r, &Triadic::unit(2)),
            Err(MeasureError::GridTooCoarse { .. })
        ));
        assert!(matches!(
            ball_measure(&spec, &x, &r, &tri(2, 5)),
            Err(MeasureError::GridNotUnitPower { .. })
        ));
        let coarse = LaaksoPoint::new(tri(1, 1), CantorAddress::zeros(3)).unwrap();
        assert!(matches!(
            ball_measure(&spec, &coarse, &r, &Triadic::unit(5)),
            Err(MeasureError::ResolutionInadequate { .. })
        ));
    }

    #[test]
    fn doubling_report_stays_under_the_bernoulli_bound() {
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let radii = [Triadic::unit(2), Triadic::unit(3)];
        let report = doubling_report(&spec, 2, &radii, 42).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.bound, BigRational::from_integer(BigInt::from(256)));
        for row in &report.rows {
            assert!(row.pass, "ratio {} exceeds bound {}", row.ratio, report.bound);
            assert!(row.ratio >= BigRational::one());
        }
        assert!(report.max_ratio <= report.bound);
    }

    #[test]
    fn doubling_report_requires_bernoulli() {
        let split = MeasureSpec::split_ratio(3, 10, 6, 10).unwrap();
        assert!(matches!(
            doubling_report(&split, 1, &[Triadic::unit(2)], 1),
            Err(MeasureError::NotBernoulli)
        ));
        let half = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        assert!(matches!(
            doubling_report(&half, 1, &[Triadic::unit(1)], 1),
            Err(MeasureError::RadiusOutOfRange { .. })
        ));
    }

    #[test]
    fn doubling_report_is_deterministic() {
        let spec = MeasureSpec::bernoulli_ratio(7, 10).unwrap();
        let radii = [Triadic::unit(3)];
        let a = doubling_report(&spec, 2, &radii, 9).unwrap();
        let b = doubling_report(&spec, 2, &radii, 9).unwrap();
        assert_eq!(a.max_ratio, b.max_ratio);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.center, rb.center);
            assert_eq!(ra.ratio, rb.ratio);
        }
    }

    #[test]
    fn ahlfors_ratios_are_positive_and_bounded() {
        let report = ahlfors_report(3, &[2, 3], 7).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(report.min_lower_ratio.is_positive());
        for row in &report.rows {
            assert!(row.lower_ratio.is_positive());
            assert!(row.lower_ratio <= row.upper_ratio);
        }
        // 6^k scaling: radius 1/9 has r^Q = 1/36.
        let row = report.rows.iter().find(|r| r.k == 2).unwrap();
        assert_eq!(row.lower_ratio, &row.bounds.lower * BigRational::from_integer(BigInt::from(36)));
    }

    #[test]
    fn nondoubling_analytic_bound_is_exact() {
        let report = nondoubling_ratio(&rat(3, 10), &rat(6, 10), 10).unwrap();
        assert_eq!(report.analytic, BigRational::from_integer(BigInt::from(257)));
        assert!(report.computed.is_positive());
    }

    #[test]
    fn nondoubling_ratio_grows_with_scale() {
        let lambda = rat(3, 10);
        let hat = rat(6, 10);
        let small = nondoubling_ratio(&lambda, &hat, 4).unwrap();
        let large = nondoubling_ratio(&lambda, &hat, 6).unwrap();
        assert!(
            large.computed > small.computed,
            "ratio should grow: m=4 gives {}, m=6 gives {}",
            small.computed,
            large.computed
        );
    }

    #[test]
    fn nondoubling_rejects_bad_parameters() {
        assert!(matches!(
            nondoubling_ratio(&rat(6, 10), &rat(3, 10), 5),
            Err(MeasureError::ParameterOrder { .. })
        ));
        assert!(matches!(
            nondoubling_ratio(&rat(3, 10), &rat(6, 10), 2),
            Err(MeasureError::ScaleTooCoarse { .. })
        ));
    }

    #[test]
    fn nondoubling_bracket_agrees_with_monte_carlo() {
        // Certified ratio is lower(2B)/upper(B) ≤ true ratio; check both
        // ball brackets against a sampled estimate at a small scale.
        let lambda = rat(3, 10);
        let hat = rat(6, 10);
        let m = 3;
        let report = nondoubling_ratio(&lambda, &hat, m).unwrap();
        let spec = MeasureSpec::split(lambda, hat).unwrap();
        let resolution = m as usize + 4;
        let center = LaaksoPoint::new(
            Triadic::new(pow3(m - 1) + BigInt::one(), m),
            CantorAddress::zeros(resolution),
        )
        .unwrap();
        let oracle = DistanceOracle::new(resolution).unwrap();
        let from_c = oracle.distances_from(&center).unwrap();
        let r = Triadic::unit(m);
        let r2 = r.double();
        let mut rng = derived_rng(23, &[0x2b]);
        let n = 50_000u32;
        let (mut hits_small, mut hits_big) = (0u32, 0u32);
        for _ in 0..n {
            let p = sample_point(&spec, resolution, resolution as u32, &mut rng);
            let d = from_c.get(&p).unwrap();
            if d <= r {
                hits_small += 1;
            }
            if d <= r2 {
                hits_big += 1;
            }
        }
        let eps = (f64::ln(2.0 / 0.001) / (2.0 * f64::from(n))).sqrt();
        let p_small = f64::from(hits_small) / f64::from(n);
        let p_big = f64::from(hits_big) / f64::from(n);
        assert!(report.small.lower.to_f64().unwrap() <= p_small + eps);
        assert!(report.small.upper.to_f64().unwrap() >= p_small - eps);
        assert!(report.doubled.lower.to_f64().unwrap() <= p_big + eps);
        assert!(report.doubled.upper.to_f64().unwrap() >= p_big - eps);
    }

    #[test]
    fn sampled_rectangle_frequency_matches_mass() {
        let spec = MeasureSpec::bernoulli_ratio(1, 3).unwrap();
        let mut rng = derived_rng(5, &[0x5a]);
        let n = 100_000u32;
        let mut hits = 0u32;
        let third = Triadic::unit(1);
        for _ in 0..n {
            let p = sample_point(&spec, 4, 10, &mut rng);
            if *p.height() <= third && !p.address().bit(1) {
                hits += 1;
            }
        }
        let freq = f64::from(hits) / f64::from(n);
        let eps = (f64::ln(2.0 / 0.001) / (2.0 * f64::from(n))).sqrt();
        assert!((freq - 1.0 / 9.0).abs() <= eps + 1e-4, "frequency {freq} strays from 1/9");
    }

    #[test]
    fn sampling_is_deterministic_and_canonical() {
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let mut a = derived_rng(77, &[1]);
        let mut b = derived_rng(77, &[1]);
        for _ in 0..20 {
            let pa = sample_point(&spec, 8, 8, &mut a);
            let pb = sample_point(&spec, 8, 8, &mut b);
            assert_eq!(pa, pb);
            if let Some(order) = pa.active_wormhole() {
                assert!(!pa.address().bit(order as usize), "samples must be canonical");
            }
        }
    }

    #[test]
    fn ball_sampler_stays_inside_and_moves_both_coordinates() {
        let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
        let x = LaaksoPoint::new(Triadic::new(4, 2), CantorAddress::zeros(6)).unwrap();
        let r = Triadic::unit(2);
        let mut rng = derived_rng(11, &[0x5a3b]);
        let mut addresses = std::collections::HashSet::new();
        let mut heights = std::collections::HashSet::new();
        for _ in 0..200 {
            let (y, d) = sample_in_ball(&spec, &x, &r, 10_000, &mut rng).unwrap();
            assert!(d <= r, "sampled point at distance {d} > {r}");
            assert_eq!(crate::metric::distance(&x, &y).unwrap(), d);
            addresses.insert(y.address().clone());
            heights.insert(y.height().clone());
        }
        assert!(addresses.len() >= 2, "sampler should reach multiple fibers");
        assert!(heights.len() >= 25, "sampler should spread over the height window");
    }
}
