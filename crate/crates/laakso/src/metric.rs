//! Geodesic distance in the resolution-`N` space, explicit geodesic paths,
//! the jump decomposition of a geodesic, and a brute-force graph oracle.
//!
//! A path may change its address digit `n` only while sitting at an
//! order-`n` wormhole level, so the distance between `x` and `y` is the
//! height difference plus twice the vertical overshoot needed to reach a
//! level of every order in which the addresses differ. Writing
//! `lo ≤ hi` for the two heights, a digit `n` is free when an order-`n`
//! level lies in `[lo, hi]`; otherwise it must be resolved below `lo` at
//! down-cost `d_n` or above `hi` at up-cost `u_n`, and
//!
//! ```text
//! distance = (hi - lo) + 2 · min over assignments of (max chosen d_n + max chosen u_n)
//! ```
//!
//! minimized over the ≤ 4 representative pairs of the endpoints. The
//! minimum is found by sorting the two-sided digits by down-cost and
//! sweeping a cutoff, which takes `O(|D| log |D|)`.
//!
//! Double use of a level for a digit the endpoints agree on is never
//! helpful: un-flipping a digit requires reaching an order-`n` level twice,
//! which only adds interval constraints to the same minimization, so the
//! optimum over the differing digits alone is already a true lower bound,
//! and it is achieved by the constructed path.
//!
//! All arithmetic runs over integers after rescaling every height by
//! `3^g`, where `g` bounds the depths involved; the same generic core
//! serves both the arbitrary-precision entry points here and the `i128`
//! fast path used by the ball-measure sweeps.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::cantor::CantorAddress;
use crate::space::{LaaksoPoint, WormholeLevel};
use crate::triadic::Triadic;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("points live at different resolutions ({x} vs {y})")]
    ResolutionMismatch { x: usize, y: usize },
    #[error("oracle resolution {resolution} exceeds the brute-force limit {max}")]
    ResolutionTooLarge { resolution: usize, max: usize },
    #[error("height {height} is not a multiple of 3^-{resolution}, so it is off the oracle grid")]
    GridMisaligned { height: Triadic, resolution: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("path parameter {t} outside [0, {total}]")]
    ParameterOutOfRange { t: Triadic, total: Triadic },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

/// `3^e` in any integer type.
fn p3t<T: Integer + Clone + From<u8>>(e: u32) -> T {
    let three = T::from(3u8);
    let mut out = T::one();
    for _ in 0..e {
        out = out * three.clone();
    }
    out
}

/// Largest order-`n` level `≤ v`, everything scaled by `3^g`.
fn level_leq_scaled<T: Integer + Clone + From<u8>>(v: &T, g: u32, n: u32) -> Option<T> {
    debug_assert!(n >= 1 && n <= g);
    let s = p3t::<T>(g - n);
    let top = p3t::<T>(n) - T::one();
    let three = T::from(3u8);
    let mut k = v.div_floor(&s);
    if k > top {
        k = top;
    }
    while k >= T::one() && k.mod_floor(&three).is_zero() {
        k = k - T::one();
    }
    if k >= T::one() {
        Some(k * s)
    } else {
        None
    }
}

/// Smallest order-`n` level `≥ v`, everything scaled by `3^g`.
fn level_geq_scaled<T: Integer + Clone + From<u8>>(v: &T, g: u32, n: u32) -> Option<T> {
    debug_assert!(n >= 1 && n <= g);
    let s = p3t::<T>(g - n);
    let top = p3t::<T>(n) - T::one();
    let three = T::from(3u8);
    let mut k = v.div_ceil(&s);
    if k < T::one() {
        k = T::one();
    }
    while k <= top && k.mod_floor(&three).is_zero() {
        k = k + T::one();
    }
    if k <= top {
        Some(k * s)
    } else {
        None
    }
}

/// Where each differing digit gets resolved, with the chosen level per
/// digit. Heights are scaled by `3^g`.
struct FlipPlan<T> {
    alpha: T,
    beta: T,
    below: Vec<(usize, T)>,
    inside: Vec<(usize, T)>,
    above: Vec<(usize, T)>,
}

fn plan_flips<T: Integer + Clone + From<u8>>(lo: &T, hi: &T, g: u32, bits: &[usize]) -> FlipPlan<T> {
    let mut below = Vec::new();
    let mut inside = Vec::new();
    let mut above = Vec::new();
    let mut forced_alpha = T::zero();
    let mut forced_beta = T::zero();
    // Digits resolvable on either side: (bit, d_n, level below, u_n, level above).
    let mut flex: Vec<(usize, T, T, T, T)> = Vec::new();
    for &bit in bits {
        let n = bit as u32;
        if let Some(t) = level_geq_scaled(lo, g, n) {
            if t <= *hi {
                inside.push((bit, t));
                continue;
            }
        }
        let l = level_leq_scaled(lo, g, n);
        let r = level_geq_scaled(hi, g, n);
        match (l, r) {
            (Some(l), None) => {
                let d = lo.clone() - l.clone();
                if d > forced_alpha {
                    forced_alpha = d;
                }
                below.push((bit, l));
            }
            (None, Some(r)) => {
                let u = r.clone() - hi.clone();
                if u > forced_beta {
                    forced_beta = u;
                }
                above.push((bit, r));
            }
            (Some(l), Some(r)) => {
                let d = lo.clone() - l.clone();
                let u = r.clone() - hi.clone();
                flex.push((bit, d, l, u, r));
            }
            (None, None) => unreachable!("order-{n} levels exist on at least one side of any subinterval of [0,1]"),
        }
    }
    flex.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    // suffix_beta[c]: the beta needed if items c.. all resolve above.
    let len = flex.len();
    let mut suffix_beta = vec![forced_beta.clone(); len + 1];
    for c in (0..len).rev() {
        suffix_beta[c] = if flex[c].3 > suffix_beta[c + 1] { flex[c].3.clone() } else { suffix_beta[c + 1].clone() };
    }
    let mut best_alpha = forced_alpha.clone();
    let mut best_cost = forced_alpha.clone() + suffix_beta[0].clone();
    for c in 1..=len {
        // Sending the c cheapest digits below costs their largest d.
        let alpha_c = if flex[c - 1].1 > forced_alpha { flex[c - 1].1.clone() } else { forced_alpha.clone() };
        let cost = alpha_c.clone() + suffix_beta[c].clone();
        if cost < best_cost {
            best_cost = cost;
            best_alpha = alpha_c;
        }
    }
    // Every flexible digit that fits under alpha goes below; the rest go
    // above. This is deterministic and preserves the optimal (alpha, beta).
    let mut beta = suffix_beta[len].clone();
    for (bit, d, l, u, r) in flex {
        if d <= best_alpha {
            below.push((bit, l));
        } else {
            if u > beta {
                beta = u;
            }
            above.push((bit, r));
        }
    }
    debug_assert!(best_alpha.clone() + beta.clone() == best_cost);
    FlipPlan { alpha: best_alpha, beta, below, inside, above }
}

/// Scaled cost of joining heights `lo ≤ hi` while flipping `bits`:
/// `(hi - lo) + 2(alpha + beta)`.
pub(crate) fn pair_cost_scaled<T: Integer + Clone + From<u8>>(lo: &T, hi: &T, g: u32, bits: &[usize]) -> T {
    let plan = plan_flips(lo, hi, g, bits);
    (hi.clone() - lo.clone()) + T::from(2u8) * (plan.alpha + plan.beta)
}

fn scale_info(x: &LaaksoPoint, y: &LaaksoPoint) -> Result<(u32, BigInt, BigInt, bool), MetricError> {
    if x.resolution() != y.resolution() {
        return Err(MetricError::ResolutionMismatch { x: x.resolution(), y: y.resolution() });
    }
    let g = x.height().depth().max(y.height().depth()).max(x.resolution() as u32);
    let xh = x.height().scaled(g);
    let yh = y.height().scaled(g);
    let x_low = xh <= yh;
    let (lo, hi) = if x_low { (xh, yh) } else { (yh, xh) };
    Ok((g, lo, hi, x_low))
}

struct BestPair {
    x_rep: CantorAddress,
    y_rep: CantorAddress,
    bits: Vec<usize>,
    plan: FlipPlan<BigInt>,
    cost: BigInt,
}

/// Minimize cost over the ≤ 4 representative pairs; ties prefer fewer
/// differing digits (endpoint-level flips are free, so pre-flipping at an
/// endpoint never loses), then the earlier pair in a fixed order.
fn best_pair(x: &LaaksoPoint, y: &LaaksoPoint, g: u32, lo: &BigInt, hi: &BigInt) -> BestPair {
    let two = BigInt::from(2);
    let mut best: Option<BestPair> = None;
    for xr in x.representatives() {
        for yr in y.representatives() {
            let bits = xr.differing_bits(&yr);
            let plan = plan_flips(lo, hi, g, &bits);
            let cost = (hi - lo) + &two * (plan.alpha.clone() + plan.beta.clone());
            let better = match &best {
                None => true,
                Some(b) => cost < b.cost || (cost == b.cost && bits.len() < b.bits.len()),
            };
            if better {
                best = Some(BestPair { x_rep: xr.clone(), y_rep: yr, bits, plan, cost });
            }
        }
    }
    best.expect("at least one representative pair")
}

/// Exact geodesic distance between two points of the same resolution.
pub fn distance(x: &LaaksoPoint, y: &LaaksoPoint) -> Result<Triadic, MetricError> {
    let (g, lo, hi, _) = scale_info(x, y)?;
    let bp = best_pair(x, y, g, &lo, &hi);
    Ok(Triadic::new(bp.cost, g))
}

/// One maximal height run of a path, at a fixed address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerticalRun {
    pub from: Triadic,
    pub to: Triadic,
    pub address: CantorAddress,
}

impl VerticalRun {
    pub fn length(&self) -> Triadic {
        (&self.to - &self.from).abs()
    }
}

/// An address-digit flip between two consecutive runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WormholeJump {
    /// The jump sits between `segments[after_segment]` and the next one.
    pub after_segment: usize,
    pub level: WormholeLevel,
    pub flipped_bit: usize,
}

/// A distance-realizing path: vertical runs joined by wormhole jumps, with
/// at most two changes of vertical direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeodesicPath {
    pub start: LaaksoPoint,
    pub end: LaaksoPoint,
    pub segments: Vec<VerticalRun>,
    pub jumps: Vec<WormholeJump>,
    pub total_length: Triadic,
}

impl GeodesicPath {
    /// The point at arc length `t` from the start.
    pub fn point_at(&self, t: &Triadic) -> Result<LaaksoPoint, MetricError> {
        if t.is_negative() || *t > self.total_length {
            return Err(MetricError::ParameterOutOfRange { t: t.clone(), total: self.total_length.clone() });
        }
        let mut acc = Triadic::zero();
        for seg in &self.segments {
            let end = &acc + &seg.length();
            if *t <= end {
                let offset = t - &acc;
                let h = if seg.to >= seg.from { &seg.from + &offset } else { &seg.from - &offset };
                return LaaksoPoint::new(h, seg.address.clone())
                    .map_err(|e| MetricError::InvalidPath(format!("segment leaves the space: {e}")));
            }
            acc = end;
        }
        unreachable!("t ≤ total_length = sum of segment lengths");
    }

    /// Replay the path and check every structural invariant: continuity,
    /// jump legality, endpoint equality, length bookkeeping, and the
    /// at-most-two-direction-changes shape.
    pub fn validate(&self) -> Result<(), MetricError> {
        let fail = |m: String| MetricError::InvalidPath(m);
        if self.segments.is_empty() {
            return Err(fail("no segments".into()));
        }
        let n = self.start.resolution();
        if self.end.resolution() != n {
            return Err(fail("endpoint resolutions differ".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.address.len() != n {
                return Err(fail(format!("segment {i} has address length {} ≠ {n}", seg.address.len())));
            }
            for h in [&seg.from, &seg.to] {
                if h.is_negative() || *h > Triadic::one() {
                    return Err(fail(format!("segment {i} leaves [0,1] at height {h}")));
                }
            }
        }
        let mut prev_after = None;
        for jump in &self.jumps {
            if let Some(p) = prev_after {
                if jump.after_segment <= p {
                    return Err(fail("jumps out of order".into()));
                }
            }
            prev_after = Some(jump.after_segment);
            if jump.after_segment + 1 >= self.segments.len() {
                return Err(fail("jump after the final segment".into()));
            }
            if jump.flipped_bit < 1 || jump.flipped_bit > n {
                return Err(fail(format!("jump flips bit {} outside 1..={n}", jump.flipped_bit)));
            }
            if jump.level.order() as usize != jump.flipped_bit {
                return Err(fail(format!(
                    "jump level {} has order {} but flips bit {}",
                    jump.level.height(),
                    jump.level.order(),
                    jump.flipped_bit
                )));
            }
        }
        let jump_after: std::collections::HashMap<usize, &WormholeJump> =
            self.jumps.iter().map(|j| (j.after_segment, j)).collect();
        for i in 0..self.segments.len() - 1 {
            let (a, b) = (&self.segments[i], &self.segments[i + 1]);
            if a.to != b.from {
                return Err(fail(format!("segments {i} and {} do not meet in height", i + 1)));
            }
            match jump_after.get(&i) {
                Some(j) => {
                    if *j.level.height() != a.to {
                        return Err(fail(format!("jump after segment {i} is not at the meeting height")));
                    }
                    let diff = a.address.differing_bits(&b.address);
                    if diff != [j.flipped_bit] {
                        return Err(fail(format!("jump after segment {i} does not flip exactly bit {}", j.flipped_bit)));
                    }
                }
                None => {
                    if a.address != b.address {
                        return Err(fail(format!("address changes without a jump after segment {i}")));
                    }
                }
            }
        }
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        let start = LaaksoPoint::new(first.from.clone(), first.address.clone())
            .map_err(|e| fail(format!("start off the space: {e}")))?;
        let end = LaaksoPoint::new(last.to.clone(), last.address.clone())
            .map_err(|e| fail(format!("end off the space: {e}")))?;
        if start != self.start {
            return Err(fail("path does not start at its declared start point".into()));
        }
        if end != self.end {
            return Err(fail("path does not end at its declared end point".into()));
        }
        let mut total = Triadic::zero();
        for seg in &self.segments {
            total = &total + &seg.length();
        }
        if total != self.total_length {
            return Err(fail(format!("declared length {} ≠ replayed length {total}", self.total_length)));
        }
        let mut changes = 0;
        let mut dir: Option<bool> = None;
        for seg in &self.segments {
            if seg.from == seg.to {
                continue;
            }
            let up = seg.to > seg.from;
            if let Some(d) = dir {
                if d != up {
                    changes += 1;
                }
            }
            dir = Some(up);
        }
        if changes > 2 {
            return Err(fail(format!("{changes} direction changes, geodesics allow at most 2")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum FlipRule {
    /// Flip each digit at the planner's designated level, at the first
    /// crossing of that level. Used by `geodesic`.
    ChosenLevel,
    /// Flip each digit at the first crossing of any level of its order.
    /// Same length, but every jump happens as early as possible, which is
    /// what the decomposition bounds need.
    FirstCrossing,
}

fn build_path(x: &LaaksoPoint, y: &LaaksoPoint, rule: FlipRule) -> Result<GeodesicPath, MetricError> {
    if x == y {
        return Ok(GeodesicPath {
            start: x.clone(),
            end: y.clone(),
            segments: vec![VerticalRun { from: x.height().clone(), to: x.height().clone(), address: x.address().clone() }],
            jumps: Vec::new(),
            total_length: Triadic::zero(),
        });
    }
    let (g, lo, hi, x_low) = scale_info(x, y)?;
    let bp = best_pair(x, y, g, &lo, &hi);
    let a = &lo - &bp.plan.alpha;
    let b = &hi + &bp.plan.beta;
    // Three monotone legs starting at x. The middle leg spans [a, b], so
    // every level the plan needs is crossed.
    let legs: [(BigInt, BigInt); 3] = if x_low {
        [(lo.clone(), a.clone()), (a.clone(), b.clone()), (b.clone(), hi.clone())]
    } else {
        [(hi.clone(), b.clone()), (b.clone(), a.clone()), (a.clone(), lo.clone())]
    };
    let events: Vec<(usize, BigInt)> = match rule {
        FlipRule::ChosenLevel => bp
            .plan
            .below
            .iter()
            .chain(bp.plan.inside.iter())
            .chain(bp.plan.above.iter())
            .cloned()
            .collect(),
        FlipRule::FirstCrossing => bp
            .bits
            .iter()
            .map(|&bit| {
                let n = bit as u32;
                let lvl = legs
                    .iter()
                    .find_map(|(u, v)| {
                        if u >= v {
                            level_leq_scaled(u, g, n).filter(|l| l >= v)
                        } else {
                            level_geq_scaled(u, g, n).filter(|l| l <= v)
                        }
                    })
                    .expect("the middle leg alone crosses a level of every needed order");
                (bit, lvl)
            })
            .collect(),
    };
    // Each flip joins the first leg whose range contains its level; within
    // a leg, flips happen in crossing order.
    let mut leg_events: [Vec<(usize, BigInt)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (bit, lvl) in events {
        let slot = legs
            .iter()
            .position(|(u, v)| {
                let (lo_l, hi_l) = if u <= v { (u, v) } else { (v, u) };
                lvl >= *lo_l && lvl <= *hi_l
            })
            .expect("every flip level lies within [a, b]");
        leg_events[slot].push((bit, lvl));
    }
    let mut segments = Vec::new();
    let mut jumps = Vec::new();
    let mut cur = if x_low { lo.clone() } else { hi.clone() };
    let mut addr = bp.x_rep.clone();
    let to_tri = |v: &BigInt| Triadic::new(v.clone(), g);
    for ((u, v), mut evs) in legs.iter().zip(leg_events) {
        debug_assert!(cur == *u);
        let down = u >= v;
        evs.sort_by(|p, q| if down { q.1.cmp(&p.1) } else { p.1.cmp(&q.1) });
        for (bit, lvl) in evs {
            if lvl != cur {
                segments.push(VerticalRun { from: to_tri(&cur), to: to_tri(&lvl), address: addr.clone() });
                cur = lvl.clone();
            }
            assert!(!segments.is_empty(), "a jump cannot precede all movement");
            let level = WormholeLevel::from_height(to_tri(&lvl)).expect("jump heights lie strictly inside (0,1)");
            debug_assert_eq!(level.order() as usize, bit);
            jumps.push(WormholeJump { after_segment: segments.len() - 1, level, flipped_bit: bit });
            addr = addr.flipped(bit);
        }
        if *v != cur {
            segments.push(VerticalRun { from: to_tri(&cur), to: to_tri(v), address: addr.clone() });
            cur = v.clone();
        }
    }
    debug_assert_eq!(addr, bp.y_rep);
    if segments.is_empty() {
        // Equal heights with all digits pre-flipped cannot happen for
        // distinct canonical points, but keep the path well-formed.
        segments.push(VerticalRun { from: x.height().clone(), to: x.height().clone(), address: addr.clone() });
    }
    Ok(GeodesicPath {
        start: x.clone(),
        end: y.clone(),
        segments,
        jumps,
        total_length: Triadic::new(bp.cost, g),
    })
}

/// A path realizing `distance(x, y)`: down to `a`, up to `b`, down again,
/// flipping each differing digit at the first crossing of its planned
/// level.
pub fn geodesic(x: &LaaksoPoint, y: &LaaksoPoint) -> Result<GeodesicPath, MetricError> {
    build_path(x, y, FlipRule::ChosenLevel)
}

/// The jump structure of a geodesic from `x` to `y`.
///
/// `orders[i]` lists the wormhole orders used (ascending, necessarily
/// distinct) and `lambdas[i]` the arc position from `x` at which that jump
/// happens. `mu` is the strictly decreasing rearrangement of the jump
/// positions together with the total length `T` (so `mu[0] = T`), and
/// `points[i]` is the path point at parameter `mu[i]`. The geodesic is
/// chosen so that each jump happens at the first crossing of its order,
/// which keeps `lambdas[i] ≤ 2/3^(orders[i]-1)`.
#[derive(Debug, Clone)]
pub struct SegmentDecomposition {
    pub path: GeodesicPath,
    pub total_length: Triadic,
    pub orders: Vec<u32>,
    pub lambdas: Vec<Triadic>,
    pub mu: Vec<Triadic>,
    pub points: Vec<LaaksoPoint>,
}

pub fn segment_decomposition(x: &LaaksoPoint, y: &LaaksoPoint) -> Result<SegmentDecomposition, MetricError> {
    if x == y {
        return Err(MetricError::DegenerateInput("segment decomposition needs two distinct points".into()));
    }
    let path = build_path(x, y, FlipRule::FirstCrossing)?;
    let mut prefix = vec![Triadic::zero()];
    for seg in &path.segments {
        let last = prefix.last().unwrap().clone();
        prefix.push(&last + &seg.length());
    }
    let mut tagged: Vec<(u32, Triadic)> = path
        .jumps
        .iter()
        .map(|j| (j.level.order(), prefix[j.after_segment + 1].clone()))
        .collect();
    tagged.sort_by_key(|(order, _)| *order);
    let orders: Vec<u32> = tagged.iter().map(|(o, _)| *o).collect();
    let lambdas: Vec<Triadic> = tagged.iter().map(|(_, l)| l.clone()).collect();
    let mut mu: Vec<Triadic> = lambdas.clone();
    mu.push(path.total_length.clone());
    mu.sort();
    mu.dedup();
    mu.reverse();
    let points = mu.iter().map(|m| path.point_at(m)).collect::<Result<Vec<_>, _>>()?;
    Ok(SegmentDecomposition { total_length: path.total_length.clone(), path, orders, lambdas, mu, points })
}

/// Hard ceiling for the brute-force oracle: the level-9 graph already has
/// about ten million vertices.
pub const ORACLE_MAX_RESOLUTION: usize = 9;

/// Breadth-first shortest paths on the grid graph of the resolution-`N`
/// space: vertices are `(j/3^N, address)` pairs up to identification,
/// edges are vertical steps of length `3^-N`. Every geodesic breakpoint is
/// a multiple of `3^-N`, so graph distances equal true distances for
/// grid-aligned points.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    resolution: usize,
    rows: u32,
    width: u32,
}

impl DistanceOracle {
    pub fn new(resolution: usize) -> Result<Self, MetricError> {
        if resolution > ORACLE_MAX_RESOLUTION {
            return Err(MetricError::ResolutionTooLarge { resolution, max: ORACLE_MAX_RESOLUTION });
        }
        Ok(DistanceOracle { resolution, rows: 3u32.pow(resolution as u32), width: 1u32 << resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Wormhole order of row `j` (height `j/3^N`), if interior.
    fn row_order(&self, j: u32) -> Option<u32> {
        if j == 0 || j == self.rows {
            return None;
        }
        let mut j = j;
        let mut v = 0u32;
        while j.is_multiple_of(3) {
            j /= 3;
            v += 1;
        }
        Some(self.resolution as u32 - v)
    }

    fn canon(&self, j: u32, code: u32) -> u32 {
        match self.row_order(j) {
            Some(o) => code & !(1u32 << (o - 1)),
            None => code,
        }
    }

    fn code_of(&self, a: &CantorAddress) -> u32 {
        let mut c = 0u32;
        for n in 1..=a.len() {
            if a.bit(n) {
                c |= 1 << (n - 1);
            }
        }
        c
    }

    fn vertex(&self, p: &LaaksoPoint) -> Result<usize, MetricError> {
        if p.resolution() != self.resolution {
            return Err(MetricError::ResolutionMismatch { x: self.resolution, y: p.resolution() });
        }
        if p.height().depth() > self.resolution as u32 {
            return Err(MetricError::GridMisaligned { height: p.height().clone(), resolution: self.resolution });
        }
        let j = p
            .height()
            .scaled(self.resolution as u32)
            .to_u32()
            .expect("heights in [0,1] fit the grid");
        let code = self.canon(j, self.code_of(p.address()));
        Ok(j as usize * self.width as usize + code as usize)
    }

    /// Single-source shortest paths from `from` to every grid vertex.
    pub fn distances_from(&self, from: &LaaksoPoint) -> Result<OracleDistances, MetricError> {
        let start = self.vertex(from)?;
        let total = (self.rows as usize + 1) * self.width as usize;
        let mut dist = vec![u32::MAX; total];
        dist[start] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(start as u32);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v as usize];
            let j = v / self.width;
            let code = v % self.width;
            let mut reps = [code, 0];
            let mut nreps = 1;
            if let Some(o) = self.row_order(j) {
                reps[1] = code | (1 << (o - 1));
                nreps = 2;
            }
            for &r in &reps[..nreps] {
                if j > 0 {
                    let u = (j - 1) * self.width + self.canon(j - 1, r);
                    if dist[u as usize] == u32::MAX {
                        dist[u as usize] = dv + 1;
                        queue.push_back(u);
                    }
                }
                if j < self.rows {
                    let u = (j + 1) * self.width + self.canon(j + 1, r);
                    if dist[u as usize] == u32::MAX {
                        dist[u as usize] = dv + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
        Ok(OracleDistances { oracle: self.clone(), dist })
    }

    pub fn distance(&self, x: &LaaksoPoint, y: &LaaksoPoint) -> Result<Triadic, MetricError> {
        self.distances_from(x)?.get(y)
    }

    /// Every canonical grid point, for exhaustive sweeps at tiny `N`.
    pub fn all_points(&self) -> Vec<LaaksoPoint> {
        let mut out = Vec::new();
        for j in 0..=self.rows {
            for code in 0..self.width {
                if self.canon(j, code) != code {
                    continue;
                }
                let bits = (1..=self.resolution).map(|n| code >> (n - 1) & 1 == 1).collect();
                let p = LaaksoPoint::new(Triadic::new(i64::from(j), self.resolution as u32), CantorAddress::new(bits))
                    .expect("grid heights lie in [0,1]");
                out.push(p);
            }
        }
        out
    }
}

/// The result of one oracle sweep: distances from a fixed source, in units
/// of `3^-N`.
#[derive(Debug, Clone)]
pub struct OracleDistances {
    oracle: DistanceOracle,
    dist: Vec<u32>,
}

impl OracleDistances {
    pub fn get(&self, to: &LaaksoPoint) -> Result<Triadic, MetricError> {
        let v = self.oracle.vertex(to)?;
        let d = self.dist[v];
        assert!(d != u32::MAX, "the grid graph is connected");
        Ok(Triadic::new(i64::from(d), self.oracle.resolution as u32))
    }
}

/// Brute-force distance via a fresh breadth-first search; the independent
/// check for `distance`.
pub fn distance_oracle(x: &LaaksoPoint, y: &LaaksoPoint) -> Result<Triadic, MetricError> {
    DistanceOracle::new(x.resolution())?.distance(x, y)
}
