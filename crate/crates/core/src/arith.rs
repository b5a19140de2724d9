//! Exact rationals, the system of places of Q, and normalized absolute values.
//!
//! Finite places carry a certified prime and the normalization |a|_p = p^(-v_p(a));
//! the infinite place is the usual absolute value. Values stay exact rationals
//! on every certified path.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type Rational = BigRational;

pub fn rat_i64(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses the "num/den" wire form (a bare integer is accepted as num/1).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = num
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("bad rational {s:?}")))?;
    let d: BigInt = den
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("bad rational {s:?}")))?;
    if d.is_zero() {
        return Err(Error::Invalid(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// Canonical "num/den" wire form; the denominator is always written out.
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Deterministic Miller-Rabin, exact for all u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        b %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A place of Q: one finite place per prime plus the infinite place.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Place {
    Finite(u64),
    Infinite,
}

impl Place {
    /// Constructs the finite place at `p`, certifying primality.
    pub fn finite(p: u64) -> Result<Place> {
        if is_prime_u64(p) {
            Ok(Place::Finite(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Place::Finite(_))
    }

    /// Wire form: "p:<prime>" or "inf".
    pub fn parse(s: &str) -> Result<Place> {
        if s == "inf" {
            return Ok(Place::Infinite);
        }
        match s.strip_prefix("p:") {
            Some(rest) => {
                let p: u64 = rest
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad place {s:?}")))?;
                Place::finite(p)
            }
            None => Err(Error::Invalid(format!("bad place {s:?}"))),
        }
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Finite(p) => write!(f, "p:{p}"),
            Place::Infinite => write!(f, "inf"),
        }
    }
}

/// An exact nonnegative absolute value. Finite places always yield a power
/// of p; the infinite place yields |q| itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AbsValue(pub Rational);

impl AbsValue {
    pub fn zero() -> AbsValue {
        AbsValue(Rational::zero())
    }

    pub fn one() -> AbsValue {
        AbsValue(Rational::one())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for AbsValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rational(&self.0))
    }
}

/// p-adic valuation of a nonzero integer.
pub fn valuation_int(n: &BigInt, p: u64) -> i64 {
    assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut cur = n.clone();
    while (&cur % &p).is_zero() {
        cur /= &p;
        v += 1;
    }
    v
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(q: &Rational, p: u64) -> i64 {
    valuation_int(q.numer(), p) - valuation_int(q.denom(), p)
}

fn pow_rat(p: u64, e: i64) -> Rational {
    let base = BigInt::from(p);
    if e >= 0 {
        BigRational::from_integer(base.pow(e as u32))
    } else {
        BigRational::new(BigInt::one(), base.pow((-e) as u32))
    }
}

/// |q|_v. Returns 0 iff q = 0.
pub fn abs_value(q: &Rational, v: &Place) -> AbsValue {
    if q.is_zero() {
        return AbsValue::zero();
    }
    match v {
        Place::Finite(p) => AbsValue(pow_rat(*p, -valuation(q, *p))),
        Place::Infinite => AbsValue(q.abs()),
    }
}

/// The finite places where |q|_v differs from 1, i.e. the primes dividing
/// the numerator or denominator of q.
pub fn bad_places(q: &Rational) -> Result<Vec<Place>> {
    if q.is_zero() {
        return Err(Error::ZeroInput("bad_places of 0"));
    }
    let mut primes: Vec<u64> = factor_biguint(&q.numer().magnitude().clone());
    primes.extend(factor_biguint(q.denom().magnitude()));
    primes.sort_unstable();
    primes.dedup();
    Ok(primes.into_iter().map(Place::Finite).collect())
}

/// Prime divisors of a positive integer by trial division, pulling large
/// cofactors out with Miller-Rabin. Inputs here come from polynomial
/// coefficients, so they stay small.
pub fn factor_biguint(n: &BigUint) -> Vec<u64> {
    let mut out = Vec::new();
    if n.is_zero() || n.is_one() {
        return out;
    }
    let mut cur = n.clone();
    let mut p = 2u64;
    while &BigUint::from(p) * BigUint::from(p) <= cur {
        if (&cur % BigUint::from(p)).is_zero() {
            out.push(p);
            while (&cur % BigUint::from(p)).is_zero() {
                cur /= BigUint::from(p);
            }
        }
        p += if p == 2 { 1 } else { 2 };
        if p > 100_000 {
            break;
        }
    }
    if !cur.is_one() {
        if let Some(c) = cur.to_u64() {
            if is_prime_u64(c) {
                out.push(c);
                return out;
            }
        }
        // cofactor too large for the trial bound: split it the slow way
        let mut q = 100_001u64;
        let mut rem = cur;
        while !rem.is_one() {
            if (&rem % BigUint::from(q)).is_zero() {
                out.push(q);
                while (&rem % BigUint::from(q)).is_zero() {
                    rem /= BigUint::from(q);
                }
            }
            q += 2;
        }
    }
    out
}

/// Natural log of a positive big integer, via the top bits and the exponent.
pub fn ln_bigint(n: &BigInt) -> f64 {
    assert!(n.sign() == Sign::Plus, "ln of a non-positive integer");
    let mag = n.magnitude();
    let bits = mag.bits();
    if bits <= 52 {
        return (mag.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 52;
    let top: BigUint = mag >> shift;
    (top.to_u64().unwrap() as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of |q| for a nonzero rational.
pub fn ln_abs(q: &Rational) -> f64 {
    assert!(!q.is_zero());
    ln_bigint(&q.numer().abs()) - ln_bigint(q.denom())
}

/// Standard logarithmic Weil height of a rational: log max(|a|, |b|) in lowest terms.
pub fn weil_height(q: &Rational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let a = q.numer().abs();
    let b = q.denom().clone();
    let m = if a >= b { a } else { b };
    ln_bigint(&m)
}
