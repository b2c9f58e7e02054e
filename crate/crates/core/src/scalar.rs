//! Numeric backends for weights.
//!
//! Every weight in the crate is a product of model parameters, and all of the
//! parameters we care about live in a real quadratic field `Q(sqrt k)`. [`Surd`]
//! implements that field exactly on top of big rationals, so the oracle can
//! compare partition functions and FKG products without rounding. Samplers use
//! plain `f64` through the same [`Scalar`] trait.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Ordered field operations shared by `f64` and [`Surd`].
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Total order; exact for [`Surd`].
    fn total_cmp(&self, other: &Self) -> Ordering;
    /// Square root when it exists in the same number system.
    fn try_sqrt(&self) -> Option<Self>;
    /// Relative gap below which two values count as equal.
    const TOLERANCE: f64;

    fn is_zero(&self) -> bool {
        self.total_cmp(&Self::zero()) == Ordering::Equal
    }

    fn is_negative(&self) -> bool {
        self.total_cmp(&Self::zero()) == Ordering::Less
    }

    /// Integer power, negative exponents allowed for nonzero bases.
    fn powi(&self, n: i64) -> Self {
        let mut base = if n < 0 { Self::one() / self.clone() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a.total_cmp(&b) == Ordering::Less {
            b
        } else {
            a
        }
    }

    fn abs_val(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for f64 {
    const TOLERANCE: f64 = 1e-9;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }
    fn try_sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| self.sqrt())
    }
    fn powi(&self, n: i64) -> Self {
        f64::powf(*self, n as f64)
    }
}

/// An element `r + s * sqrt(k)` of a real quadratic field, `k` squarefree.
///
/// Rational values use `k = 1` and `s = 0`. Mixing two irrational values with
/// different radicands panics: it would leave the field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Surd {
    r: BigRational,
    s: BigRational,
    k: u64,
}

impl Surd {
    pub fn rational(r: BigRational) -> Self {
        Surd { r, s: BigRational::zero(), k: 1 }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `r + s * sqrt(k)` with `k` reduced to its squarefree part.
    pub fn new(r: BigRational, s: BigRational, k: u64) -> Self {
        let (f, core) = squarefree_split(k);
        Surd { r, s: s * BigRational::from_integer(BigInt::from(f)), k: core }.normalized()
    }

    /// Exact square root of a nonnegative rational.
    pub fn sqrt_rational(x: &BigRational) -> Self {
        assert!(!x.is_negative(), "square root of a negative rational");
        if x.is_zero() {
            return Self::rational(BigRational::zero());
        }
        // sqrt(n/d) = sqrt(n*d)/d
        let n = x.numer().clone();
        let d = x.denom().clone();
        let prod = n * d.clone();
        let (f, core) = squarefree_split_big(&prod);
        let coeff = BigRational::new(f, d);
        let core = core.to_u64().expect("radicand does not fit in u64");
        Surd { r: BigRational::zero(), s: coeff, k: core }.normalized()
    }

    /// Square root of a field element when it is again in a quadratic field
    /// (rational square, or rational times a square root). Returns `None` otherwise.
    pub fn sqrt(&self) -> Option<Self> {
        if self.s.is_zero() {
            if self.r.is_negative() {
                return None;
            }
            return Some(Self::sqrt_rational(&self.r));
        }
        // (x + y sqrt k)^2 = x^2 + k y^2 + 2xy sqrt k
        // x^2 solves t^2 - r t + k s^2/4 = 0
        let disc = self.r.clone() * self.r.clone() - BigRational::from_integer(BigInt::from(self.k)) * self.s.clone() * self.s.clone();
        if disc.is_negative() {
            return None;
        }
        let sd = Self::sqrt_rational(&disc);
        if !sd.s.is_zero() {
            return None;
        }
        let two = BigRational::from_integer(BigInt::from(2));
        for cand in [(self.r.clone() + sd.r.clone()) / two.clone(), (self.r.clone() - sd.r.clone()) / two.clone()] {
            if cand.is_negative() || cand.is_zero() {
                continue;
            }
            let x = Self::sqrt_rational(&cand);
            if !x.s.is_zero() {
                continue;
            }
            let y = self.s.clone() / (two.clone() * x.r.clone());
            let root = Surd { r: x.r, s: y, k: self.k }.normalized();
            if root.clone() * root.clone() == *self {
                return Some(if root.is_negative() { -root } else { root });
            }
        }
        None
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.r
    }

    pub fn surd_part(&self) -> &BigRational {
        &self.s
    }

    pub fn radicand(&self) -> u64 {
        self.k
    }

    pub fn is_rational(&self) -> bool {
        self.s.is_zero()
    }

    /// Closest rational representation of an `f64`, exact in binary.
    pub fn from_f64(x: f64) -> Self {
        Self::rational(BigRational::from_float(x).expect("finite float"))
    }

    fn normalized(mut self) -> Self {
        if self.s.is_zero() || self.k == 1 {
            if self.k == 1 {
                self.r += self.s.clone();
            }
            self.s = BigRational::zero();
            self.k = 1;
        }
        self
    }

    fn common_k(&self, other: &Self) -> u64 {
        match (self.s.is_zero(), other.s.is_zero()) {
            (true, true) => 1,
            (false, true) => self.k,
            (true, false) => other.k,
            (false, false) => {
                assert_eq!(self.k, other.k, "mixed radicands in one computation");
                self.k
            }
        }
    }

    fn kq(k: u64) -> BigRational {
        BigRational::from_integer(BigInt::from(k))
    }

    fn signum(&self) -> Ordering {
        let rs = self.r.cmp(&BigRational::zero());
        let ss = self.s.cmp(&BigRational::zero());
        if ss == Ordering::Equal {
            return rs;
        }
        if rs == Ordering::Equal || rs == ss {
            return ss;
        }
        let r2 = self.r.clone() * self.r.clone();
        let s2k = self.s.clone() * self.s.clone() * Self::kq(self.k);
        match r2.cmp(&s2k) {
            Ordering::Greater => rs,
            Ordering::Less => ss,
            Ordering::Equal => Ordering::Equal,
        }
    }
}

fn squarefree_split(k: u64) -> (u64, u64) {
    let mut f = 1u64;
    let mut core = 1u64;
    let mut n = k;
    let mut p = 2u64;
    while p * p <= n {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        f *= p.pow(e / 2);
        if e % 2 == 1 {
            core *= p;
        }
        p += 1;
    }
    core *= n;
    (f, core)
}

fn squarefree_split_big(n: &BigInt) -> (BigInt, BigInt) {
    let mut f = BigInt::one();
    let mut core = BigInt::one();
    let mut m = n.clone();
    let mut p = BigInt::from(2);
    while &p * &p <= m {
        let mut e = 0u32;
        loop {
            let (q, r) = m.div_rem(&p);
            if !r.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        f *= p.pow(e / 2);
        if e % 2 == 1 {
            core *= &p;
        }
        p += 1;
        if p > BigInt::from(1u64 << 32) {
            break;
        }
    }
    core *= m;
    (f, core)
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.s.is_zero() {
            write!(f, "{}", self.r)
        } else {
            write!(f, "{} + {}*sqrt({})", self.r, self.s, self.k)
        }
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        let k = self.common_k(&o);
        Surd { r: self.r + o.r, s: self.s + o.s, k }.normalized()
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        let k = self.common_k(&o);
        Surd { r: self.r - o.r, s: self.s - o.s, k }.normalized()
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, o: Surd) -> Surd {
        let k = self.common_k(&o);
        let kq = Surd::kq(k);
        let r = self.r.clone() * o.r.clone() + self.s.clone() * o.s.clone() * kq;
        let s = self.r * o.s + self.s * o.r;
        Surd { r, s, k }.normalized()
    }
}

impl Div for Surd {
    type Output = Surd;
    fn div(self, o: Surd) -> Surd {
        assert!(!Scalar::is_zero(&o), "division by zero");
        let k = self.common_k(&o);
        let kq = Surd::kq(k);
        let norm = o.r.clone() * o.r.clone() - o.s.clone() * o.s.clone() * kq;
        let conj = Surd { r: o.r / norm.clone(), s: -(o.s / norm), k };
        self * conj.normalized()
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { r: -self.r, s: -self.s, k: self.k }
    }
}

impl Scalar for Surd {
    const TOLERANCE: f64 = 1e-25;

    fn zero() -> Self {
        Surd::rational(BigRational::zero())
    }
    fn one() -> Self {
        Surd::rational(BigRational::one())
    }
    fn from_i64(v: i64) -> Self {
        Surd::rational(BigRational::from_integer(BigInt::from(v)))
    }
    fn ratio(num: i64, den: i64) -> Self {
        Surd::from_ratio(num, den)
    }
    fn to_f64(&self) -> f64 {
        let r = ratio_to_f64(&self.r);
        if self.s.is_zero() {
            r
        } else {
            r + ratio_to_f64(&self.s) * (self.k as f64).sqrt()
        }
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).signum()
    }
    fn try_sqrt(&self) -> Option<Self> {
        self.sqrt()
    }
    fn is_zero(&self) -> bool {
        self.r.is_zero() && self.s.is_zero()
    }
    fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }
}

fn ratio_to_f64(x: &BigRational) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            // scale down huge numerators/denominators
            let n = x.numer();
            let d = x.denom();
            let shift = n.bits().max(d.bits()).saturating_sub(1000);
            let n2: BigInt = n >> shift;
            let d2: BigInt = d >> shift;
            let v = n2.to_f64().unwrap_or(0.0) / d2.to_f64().unwrap_or(1.0);
            if n.sign() == Sign::Minus && v > 0.0 {
                -v
            } else {
                v
            }
        }
    }
}

/// Relative deviation `|x - y| / max(|x|, |y|)`, zero when both vanish.
pub fn relative_gap<S: Scalar>(x: &S, y: &S) -> f64 {
    let diff = (x.clone() - y.clone()).abs_val().to_f64();
    let scale = x.abs_val().to_f64().max(y.abs_val().to_f64());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn golden_ratio_square() {
        // ((3 + sqrt5)/2)^2 = (7 + 3 sqrt5)/2
        let x = Surd::new(q(3, 2), q(1, 2), 5);
        let y = x.clone() * x.clone();
        assert_eq!(y, Surd::new(q(7, 2), q(3, 2), 5));
        assert_eq!(y.sqrt().unwrap(), x);
    }

    #[test]
    fn reduces_radicand() {
        let s = Surd::sqrt_rational(&q(9, 2));
        assert_eq!(s.radicand(), 2);
        assert_eq!(s.surd_part(), &q(3, 2));
        let t = Surd::sqrt_rational(&q(25, 4));
        assert!(t.is_rational());
        assert_eq!(t.rational_part(), &q(5, 2));
    }

    #[test]
    fn sign_of_mixed_terms() {
        // 2 - sqrt 5 < 0 ; 3 - sqrt 5 > 0
        assert!(Surd::new(q(2, 1), q(-1, 1), 5).is_negative());
        assert!(!Surd::new(q(3, 1), q(-1, 1), 5).is_negative());
    }

    #[test]
    fn division_roundtrip() {
        let x = Surd::new(q(1, 3), q(2, 7), 5);
        let y = Surd::new(q(-4, 1), q(1, 1), 5);
        assert_eq!((x.clone() / y.clone()) * y, x);
    }
}
