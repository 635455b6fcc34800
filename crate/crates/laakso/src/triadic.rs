//! Exact arithmetic on triadic rationals, numbers of the form `k / 3^d`.
//!
//! Every height, radius and distance in this crate is triadic, so all
//! geometry can be computed without rounding. Values are kept canonical:
//! the depth is zero or the numerator is not divisible by three. That makes
//! equality structural and lets the depth double as the "wormhole order" of
//! an interior height (see the `space` module).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// `3^exp` as a big integer.
pub fn pow3(exp: u32) -> BigInt {
    BigInt::from(3u8).pow(exp)
}

/// A rational of the form `num / 3^depth`, canonical (depth 0 or 3 ∤ num).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Triadic {
    num: BigInt,
    depth: u32,
}

impl Triadic {
    pub fn new(num: impl Into<BigInt>, depth: u32) -> Self {
        let mut t = Triadic { num: num.into(), depth };
        t.reduce();
        t
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.depth = 0;
            return;
        }
        let three = BigInt::from(3u8);
        while self.depth > 0 && (&self.num % &three).is_zero() {
            self.num /= &three;
            self.depth -= 1;
        }
    }

    pub fn zero() -> Self {
        Triadic { num: BigInt::zero(), depth: 0 }
    }

    pub fn one() -> Self {
        Triadic { num: BigInt::from(1u8), depth: 0 }
    }

    /// `3^{-depth}`.
    pub fn unit(depth: u32) -> Self {
        Triadic { num: BigInt::from(1u8), depth }
    }

    pub fn from_int(k: i64) -> Self {
        Triadic { num: BigInt::from(k), depth: 0 }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    /// Numerator rescaled to `depth`, which must be at least `self.depth()`.
    pub fn scaled(&self, depth: u32) -> BigInt {
        assert!(depth >= self.depth, "cannot rescale {self} to coarser depth {depth}");
        &self.num * pow3(depth - self.depth)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), pow3(self.depth))
    }

    pub fn abs(&self) -> Self {
        Triadic { num: self.num.abs(), depth: self.depth }
    }

    pub fn double(&self) -> Self {
        Triadic::new(&self.num * 2, self.depth)
    }

    /// Multiply by `3^{-k}`.
    pub fn scale_down(&self, k: u32) -> Self {
        Triadic::new(self.num.clone(), self.depth + k)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other { self } else { other }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other { self } else { other }
    }
}

impl Ord for Triadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.depth.max(other.depth);
        self.scaled(d).cmp(&other.scaled(d))
    }
}

impl PartialOrd for Triadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Triadic {
    type Output = Triadic;
    fn add(self, rhs: &Triadic) -> Triadic {
        let d = self.depth.max(rhs.depth);
        Triadic::new(self.scaled(d) + rhs.scaled(d), d)
    }
}

impl Sub for &Triadic {
    type Output = Triadic;
    fn sub(self, rhs: &Triadic) -> Triadic {
        let d = self.depth.max(rhs.depth);
        Triadic::new(self.scaled(d) - rhs.scaled(d), d)
    }
}

impl Mul for &Triadic {
    type Output = Triadic;
    fn mul(self, rhs: &Triadic) -> Triadic {
        Triadic::new(&self.num * &rhs.num, self.depth + rhs.depth)
    }
}

impl Neg for &Triadic {
    type Output = Triadic;
    fn neg(self) -> Triadic {
        Triadic { num: -self.num.clone(), depth: self.depth }
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for Triadic {
            type Output = Triadic;
            fn $method(self, rhs: Triadic) -> Triadic {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Triadic {
    type Output = Triadic;
    fn neg(self) -> Triadic {
        -&self
    }
}

/// Textual form: `k` for integers, `k/3^d` otherwise.
impl fmt::Display for Triadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.depth == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/3^{}", self.num, self.depth)
        }
    }
}

impl fmt::Debug for Triadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid triadic rational {input:?}: {reason}")]
pub struct ParseTriadicError {
    pub input: String,
    pub reason: String,
}

impl FromStr for Triadic {
    type Err = ParseTriadicError;

    /// Accepts `k`, `k/3^d`, and `k/q` where `q` is a literal power of three.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ParseTriadicError { input: s.to_string(), reason: reason.to_string() };
        let s = s.trim();
        let Some((num_s, den_s)) = s.split_once('/') else {
            let num = BigInt::from_str(s).map_err(|_| err("numerator is not an integer"))?;
            return Ok(Triadic::new(num, 0));
        };
        let num = BigInt::from_str(num_s.trim()).map_err(|_| err("numerator is not an integer"))?;
        let den_s = den_s.trim();
        if let Some(exp_s) = den_s.strip_prefix("3^") {
            let depth: u32 = exp_s.trim().parse().map_err(|_| err("exponent is not a small nonnegative integer"))?;
            return Ok(Triadic::new(num, depth));
        }
        let den = BigInt::from_str(den_s).map_err(|_| err("denominator is not an integer"))?;
        if !den.is_positive() {
            return Err(err("denominator must be positive"));
        }
        let mut depth = 0u32;
        let mut d = den.clone();
        let three = BigInt::from(3u8);
        while (&d % &three).is_zero() {
            d /= &three;
            depth += 1;
        }
        if d != BigInt::from(1u8) {
            return Err(err("denominator is not a power of three"));
        }
        Ok(Triadic::new(num, depth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(num: i64, depth: u32) -> Triadic {
        Triadic::new(num, depth)
    }

    #[test]
    fn canonical_form_is_maintained() {
        assert_eq!(t(3, 1), t(1, 0));
        assert_eq!(t(9, 2), t(1, 0));
        assert_eq!(t(6, 2), t(2, 1));
        assert_eq!(t(0, 7), Triadic::zero());
        assert_eq!(t(2, 3).depth(), 3);
    }

    #[test]
    fn arithmetic_matches_hand_values() {
        // 1/3 + 1/9 = 4/9, 1/3 - 1/9 = 2/9, (1/3)(2/9) = 2/27
        assert_eq!(&t(1, 1) + &t(1, 2), t(4, 2));
        assert_eq!(&t(1, 1) - &t(1, 2), t(2, 2));
        assert_eq!(&t(1, 1) * &t(2, 2), t(2, 3));
        assert_eq!(&t(1, 1) - &t(2, 1), t(-1, 1));
    }

    #[test]
    fn ordering_crosses_depths() {
        assert!(t(1, 1) < t(2, 1));
        assert!(t(1, 1) > t(2, 2)); // 1/3 > 2/9
        assert!(t(-1, 1) < Triadic::zero());
        assert_eq!(t(3, 1).cmp(&t(1, 0)), Ordering::Equal);
    }

    #[test]
    fn display_and_parse_round_trip() {
        for v in [t(0, 0), t(5, 0), t(-2, 3), t(13, 4)] {
            let shown = v.to_string();
            let back: Triadic = shown.parse().unwrap();
            assert_eq!(back, v, "round trip through {shown}");
        }
        assert_eq!("2/9".parse::<Triadic>().unwrap(), t(2, 2));
        assert_eq!("4/3^2".parse::<Triadic>().unwrap(), t(4, 2));
        assert!("1/6".parse::<Triadic>().is_err());
        assert!("1/0".parse::<Triadic>().is_err());
        assert!("x/3^2".parse::<Triadic>().is_err());
    }

    proptest! {
        #[test]
        fn matches_rational_arithmetic(a in -200i64..200, p in 0u32..8, b in -200i64..200, q in 0u32..8) {
            let (x, y) = (t(a, p), t(b, q));
            let (rx, ry) = (x.to_rational(), y.to_rational());
            prop_assert_eq!((&x + &y).to_rational(), &rx + &ry);
            prop_assert_eq!((&x - &y).to_rational(), &rx - &ry);
            prop_assert_eq!((&x * &y).to_rational(), &rx * &ry);
            prop_assert_eq!(x.cmp(&y), rx.cmp(&ry));
        }

        #[test]
        fn reduction_is_canonical(a in -3000i64..3000, p in 0u32..10) {
            let x = t(a, p);
            if x.depth() > 0 {
                prop_assert!(x.numerator() % 3 != BigInt::zero());
            }
            prop_assert_eq!(x.to_rational(), t(a, p).to_rational());
        }
    }
}
