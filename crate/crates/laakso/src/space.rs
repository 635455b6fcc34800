//! Points of the glued space and the wormhole levels where gluing happens.
//!
//! The space is a quotient of `[0,1] × K` (`K` the Cantor set). At height
//! `h = k/3^n` in lowest terms with `3 ∤ k` and `0 < h < 1`, two points
//! whose addresses agree except in digit `n` are identified. We call `h` a
//! wormhole level of order `n`: crossing it lets a path toggle address
//! digit `n` for free.
//!
//! At resolution `N` addresses are truncated to `N` digits, so only levels
//! of order `≤ N` act as wormholes. A point is stored canonically: when its
//! height is an order-`n` level with `n` within resolution, digit `n` is
//! normalised to `0`, making structural equality coincide with equality in
//! the quotient.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::cantor::CantorAddress;
use crate::triadic::{pow3, Triadic};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("height {0} lies outside [0, 1]")]
    HeightOutOfRange(Triadic),
    #[error("invalid point {input:?}: {reason}")]
    ParsePoint { input: String, reason: String },
}

/// Order of `h` as a wormhole level: the depth of its reduced form `k/3^n`
/// with `3 ∤ k`, provided `0 < h < 1`. Heights `0` and `1` are the ends of
/// the space and glue nothing; non-triadic heights never arise here because
/// all heights are triadic by construction.
pub fn wormhole_order(h: &Triadic) -> Option<u32> {
    if h.is_positive() && *h < Triadic::one() {
        Some(h.depth())
    } else {
        None
    }
}

/// A height at which gluing happens, together with the digit it glues.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct WormholeLevel {
    height: Triadic,
    order: u32,
}

impl WormholeLevel {
    /// Classify a height; `None` for heights outside `(0, 1)`.
    pub fn from_height(height: Triadic) -> Option<Self> {
        wormhole_order(&height).map(|order| WormholeLevel { height, order })
    }

    pub fn height(&self) -> &Triadic {
        &self.height
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

impl fmt::Display for WormholeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (order {})", self.height, self.order)
    }
}

impl fmt::Debug for WormholeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// All order-`order` wormhole levels, ascending: `k/3^order` for
/// `1 ≤ k < 3^order` with `3 ∤ k`. There are `2 · 3^(order-1)` of them,
/// consecutive gaps are `1/3^order` or `2/3^order`, and the end gaps to `0`
/// and `1` are `1/3^order`.
pub fn wormhole_levels(order: u32) -> Vec<WormholeLevel> {
    assert!(order >= 1, "wormhole levels start at order 1");
    let limit = pow3(order);
    let mut k = BigInt::one();
    let mut out = Vec::new();
    while k < limit {
        if !(&k % 3u32).is_zero() {
            out.push(WormholeLevel { height: Triadic::new(k.clone(), order), order });
        }
        k += 1;
    }
    out
}

fn floor_scaled(x: &Triadic, order: u32) -> BigInt {
    if x.depth() <= order {
        x.scaled(order)
    } else {
        x.numerator().div_floor(&pow3(x.depth() - order))
    }
}

fn ceil_scaled(x: &Triadic, order: u32) -> BigInt {
    if x.depth() <= order {
        x.scaled(order)
    } else {
        x.numerator().div_ceil(&pow3(x.depth() - order))
    }
}

/// Largest order-`order` wormhole level `≤ x`, if any.
pub fn nearest_level_leq(x: &Triadic, order: u32) -> Option<Triadic> {
    let top = pow3(order) - 1;
    let mut k = floor_scaled(x, order).min(top);
    while k >= BigInt::one() && (&k % 3u32).is_zero() {
        k -= 1;
    }
    if k >= BigInt::one() {
        Some(Triadic::new(k, order))
    } else {
        None
    }
}

/// Smallest order-`order` wormhole level `≥ x`, if any.
pub fn nearest_level_geq(x: &Triadic, order: u32) -> Option<Triadic> {
    let top = pow3(order) - 1;
    let mut k = ceil_scaled(x, order).max(BigInt::one());
    while k <= top && (&k % 3u32).is_zero() {
        k += 1;
    }
    if k <= top {
        Some(Triadic::new(k, order))
    } else {
        None
    }
}

/// A point of the resolution-`N` space, where `N` is the address length.
/// Canonical: if the height is a wormhole level of order `n ≤ N`, digit `n`
/// is `0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LaaksoPoint {
    height: Triadic,
    address: CantorAddress,
}

impl LaaksoPoint {
    pub fn new(height: Triadic, address: CantorAddress) -> Result<Self, SpaceError> {
        if height.is_negative() || height > Triadic::one() {
            return Err(SpaceError::HeightOutOfRange(height));
        }
        let mut address = address;
        if let Some(n) = wormhole_order(&height) {
            if (n as usize) <= address.len() {
                address.set_bit(n as usize, false);
            }
        }
        Ok(LaaksoPoint { height, address })
    }

    pub fn height(&self) -> &Triadic {
        &self.height
    }

    pub fn address(&self) -> &CantorAddress {
        &self.address
    }

    /// Address length: the resolution this point lives at.
    pub fn resolution(&self) -> usize {
        self.address.len()
    }

    /// If the height is a wormhole level whose order is within resolution,
    /// its order.
    pub fn active_wormhole(&self) -> Option<u32> {
        wormhole_order(&self.height).filter(|&n| n as usize <= self.address.len())
    }

    /// The address representatives of this point in `[0,1] × K`: itself,
    /// plus the digit-flipped twin when the point sits on an active
    /// wormhole level. The twins' cylinder endpoints differ by exactly
    /// `2/3^n` for a level of order `n`.
    pub fn representatives(&self) -> Vec<CantorAddress> {
        let mut reps = vec![self.address.clone()];
        if let Some(n) = self.active_wormhole() {
            reps.push(self.address.flipped(n as usize));
        }
        reps
    }
}

impl fmt::Display for LaaksoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.height, self.address)
    }
}

impl fmt::Debug for LaaksoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for LaaksoPoint {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| SpaceError::ParsePoint { input: s.to_string(), reason: reason.to_string() };
        let (h, a) = s.split_once('@').ok_or_else(|| bad("expected `height @ address`"))?;
        let height: Triadic = h.trim().parse().map_err(|e| bad(&format!("height: {e}")))?;
        let address: CantorAddress = a.trim().parse().map_err(|e| bad(&format!("address: {e}")))?;
        LaaksoPoint::new(height, address)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri(k: i64, d: u32) -> Triadic {
        Triadic::new(k, d)
    }

    #[test]
    fn order_two_levels() {
        let got: Vec<Triadic> = wormhole_levels(2).into_iter().map(|l| l.height().clone()).collect();
        let want: Vec<Triadic> = [1, 2, 4, 5, 7, 8].iter().map(|&k| tri(k, 2)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn level_counts_and_gaps() {
        for n in 1..=6u32 {
            let levels = wormhole_levels(n);
            assert_eq!(levels.len() as u64, 2 * 3u64.pow(n - 1), "count at order {n}");
            let bound = tri(2, n);
            for pair in levels.windows(2) {
                let gap = pair[1].height() - pair[0].height();
                assert!(gap <= bound, "gap {gap} at order {n}");
                assert_eq!(pair[0].order(), n);
            }
            // End gaps to 0 and 1 are 1/3^n, so every closed interval of
            // length 2/3^n inside [0,1] contains an order-n level.
            assert_eq!(levels[0].height(), &tri(1, n));
            assert_eq!(levels[levels.len() - 1].height(), &tri(3i64.pow(n) - 1, n));
        }
    }

    #[test]
    fn wormhole_order_examples() {
        assert_eq!(wormhole_order(&tri(1, 1)), Some(1));
        assert_eq!(wormhole_order(&tri(5, 2)), Some(2));
        assert_eq!(wormhole_order(&tri(3, 2)), Some(1), "3/9 reduces to 1/3");
        assert_eq!(wormhole_order(&Triadic::zero()), None);
        assert_eq!(wormhole_order(&Triadic::one()), None);
        assert_eq!(wormhole_order(&tri(-1, 1)), None);
    }

    #[test]
    fn canonical_form_zeroes_the_glued_digit() {
        let p = LaaksoPoint::new(tri(1, 1), "1101".parse().unwrap()).unwrap();
        assert_eq!(p.to_string(), "1/3^1 @ 0101");
        assert_eq!(p.active_wormhole(), Some(1));

        // Order above the resolution: nothing to normalise.
        let q = LaaksoPoint::new(tri(1, 3), "11".parse().unwrap()).unwrap();
        assert_eq!(q.to_string(), "1/3^3 @ 11");
        assert_eq!(q.active_wormhole(), None);

        // Top and bottom heights glue nothing.
        let r = LaaksoPoint::new(Triadic::one(), "10".parse().unwrap()).unwrap();
        assert_eq!(r.address().to_string(), "10");
    }

    #[test]
    fn representatives_differ_in_the_order_digit() {
        let p = LaaksoPoint::new(tri(5, 2), "00".parse().unwrap()).unwrap();
        let reps = p.representatives();
        assert_eq!(reps.len(), 2);
        assert_eq!(reps[0].to_string(), "00");
        assert_eq!(reps[1].to_string(), "01");
        let gap = &reps[1].left_endpoint() - &reps[0].left_endpoint();
        assert_eq!(gap, tri(2, 2), "twin endpoints differ by 2/3^n");

        let q = LaaksoPoint::new(tri(1, 4), "00".parse().unwrap()).unwrap();
        assert_eq!(q.representatives().len(), 1, "order 4 exceeds resolution 2");
    }

    #[test]
    fn height_bounds_are_enforced() {
        assert!(LaaksoPoint::new(tri(-1, 2), CantorAddress::empty()).is_err());
        assert!(LaaksoPoint::new(tri(10, 2), CantorAddress::empty()).is_err());
        assert!(LaaksoPoint::new(tri(9, 2), CantorAddress::empty()).is_ok());
    }

    #[test]
    fn point_parsing_round_trips() {
        for s in ["1/3^2 @ 0110", "0 @ 11", "1 @ ", "5/3^3 @ 0"] {
            let p: LaaksoPoint = s.parse().unwrap();
            let back: LaaksoPoint = p.to_string().parse().unwrap();
            assert_eq!(p, back);
        }
        assert!("nope".parse::<LaaksoPoint>().is_err());
        assert!("1/3^1 @ 2".parse::<LaaksoPoint>().is_err());
        assert!("4/3^1 @ 0".parse::<LaaksoPoint>().is_err());
    }

    fn level_oracle_leq(x: &Triadic, order: u32) -> Option<Triadic> {
        wormhole_levels(order).into_iter().map(|l| l.height().clone()).filter(|l| l <= x).max()
    }

    fn level_oracle_geq(x: &Triadic, order: u32) -> Option<Triadic> {
        wormhole_levels(order).into_iter().map(|l| l.height().clone()).filter(|l| l >= x).min()
    }

    proptest! {
        #[test]
        fn nearest_levels_match_enumeration(num in -5i64..250, depth in 0u32..5, order in 1u32..5) {
            let x = Triadic::new(num, depth);
            prop_assert_eq!(nearest_level_leq(&x, order), level_oracle_leq(&x, order));
            prop_assert_eq!(nearest_level_geq(&x, order), level_oracle_geq(&x, order));
        }

        #[test]
        fn closed_intervals_of_double_gap_contain_a_level(num in 0i64..81, order in 1u32..5) {
            // Any [y, y + 2/3^n] inside [0,1] contains an order-n level.
            let y = Triadic::new(num, 4);
            let top = &y + &Triadic::new(2, order);
            prop_assume!(top <= Triadic::one());
            let l = nearest_level_geq(&y, order);
            prop_assert!(l.is_some());
            prop_assert!(l.unwrap() <= top);
        }

        #[test]
        fn canonicalisation_is_idempotent(num in 0i64..=81, code in 0u16..64) {
            let h = Triadic::new(num, 4);
            let bits: Vec<bool> = (0..6).map(|i| code >> (5 - i) & 1 == 1).collect();
            let p = LaaksoPoint::new(h.clone(), CantorAddress::new(bits)).unwrap();
            let q = LaaksoPoint::new(p.height().clone(), p.address().clone()).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
