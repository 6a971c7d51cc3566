// SPDX-License-Identifier: Apache-2.0

//! Exact arithmetic in cyclotomic fields `Q(zeta_N)`.
//!
//! A [`CycloNum`] carries its own conductor `N` and a canonical coordinate
//! vector in the power basis `1, z, ..., z^{phi(N)-1}` of `Q[z]/Phi_N(z)`,
//! stored as integer numerators over one positive common denominator.
//! Binary operations lift both operands to `lcm(N1, N2)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised by cyclotomic arithmetic.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CycloError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero input")]
    ZeroInput,
    #[error("malformed cyclotomic number: {0}")]
    Malformed(String),
}

fn phi_cache() -> &'static Mutex<HashMap<u64, Arc<Vec<i64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Vec<i64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Euler's totient.
pub fn euler_phi(n: u64) -> u64 {
    let mut result = n;
    let mut m = n;
    let mut d = 2u64;
    while d * d <= m {
        if m % d == 0 {
            while m % d == 0 {
                m /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// Coefficients of the cyclotomic polynomial `Phi_n`, low degree first.
///
/// Computed by dividing `x^n - 1` by `Phi_d` for every proper divisor `d`.
pub fn cyclotomic_poly(n: u64) -> Arc<Vec<i64>> {
    if let Some(v) = phi_cache().lock().unwrap().get(&n) {
        return v.clone();
    }
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in (1..n).filter(|d| n % d == 0) {
        let den = cyclotomic_poly(d);
        num = exact_div_monic(&num, &den);
    }
    let v = Arc::new(num);
    phi_cache().lock().unwrap().insert(n, v.clone());
    v
}

fn exact_div_monic(num: &[i64], den: &[i64]) -> Vec<i64> {
    let dn = num.len() - 1;
    let dd = den.len() - 1;
    let mut r = num.to_vec();
    let mut quot = vec![0i64; dn - dd + 1];
    for i in (0..=dn - dd).rev() {
        let c = r[i + dd];
        quot[i] = c;
        if c != 0 {
            for j in 0..=dd {
                r[i + j] -= c * den[j];
            }
        }
    }
    debug_assert!(r.iter().all(|&x| x == 0), "cyclotomic division must be exact");
    quot
}

/// An exact element of `Q(zeta_N)`.
#[derive(Clone)]
pub struct CycloNum {
    n: u64,
    num: Vec<BigInt>,
    den: BigInt,
}

impl CycloNum {
    /// Build from an arbitrary-length coordinate vector `sum num[k] z^k / den`.
    pub fn from_poly(n: u64, num: Vec<BigInt>, den: BigInt) -> Self {
        assert!(n >= 1, "conductor must be positive");
        assert!(!den.is_zero(), "denominator must be nonzero");
        let mut folded = vec![BigInt::zero(); n as usize];
        for (k, c) in num.into_iter().enumerate() {
            if !c.is_zero() {
                folded[k % n as usize] += c;
            }
        }
        Self::reduce(n, folded, den).simplified()
    }

    /// Sum of roots of unity `sum counts[k] zeta_N^k` with integer multiplicities.
    pub fn from_histogram(n: u64, counts: &[i64]) -> Self {
        let num = counts.iter().map(|&c| BigInt::from(c)).collect();
        Self::from_poly(n, num, BigInt::one())
    }

    /// Same as [`CycloNum::from_histogram`] with wide multiplicities.
    pub fn from_histogram_i128(n: u64, counts: &[i128]) -> Self {
        let num = counts.iter().map(|&c| BigInt::from(c)).collect();
        Self::from_poly(n, num, BigInt::one())
    }

    fn reduce(n: u64, mut v: Vec<BigInt>, den: BigInt) -> Self {
        let phi = euler_phi(n) as usize;
        let cp = cyclotomic_poly(n);
        for i in (phi..v.len()).rev() {
            if v[i].is_zero() {
                continue;
            }
            let c = std::mem::take(&mut v[i]);
            for j in 0..phi {
                if cp[j] != 0 {
                    v[i - phi + j] -= &c * cp[j];
                }
            }
        }
        v.truncate(phi);
        v.resize(phi, BigInt::zero());
        let mut out = CycloNum { n, num: v, den };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        if self.den.is_negative() {
            self.den = -std::mem::take(&mut self.den);
            for c in self.num.iter_mut() {
                *c = -std::mem::take(c);
            }
        }
        let mut g = self.den.clone();
        for c in &self.num {
            if g.is_one() {
                break;
            }
            g = g.gcd(c);
        }
        if !g.is_one() && !g.is_zero() {
            self.den /= &g;
            for c in self.num.iter_mut() {
                *c /= &g;
            }
        }
        if self.num.iter().all(|c| c.is_zero()) {
            self.den = BigInt::one();
        }
    }

    pub fn zero() -> Self {
        CycloNum { n: 1, num: vec![BigInt::zero()], den: BigInt::one() }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(v: i64) -> Self {
        CycloNum { n: 1, num: vec![BigInt::from(v)], den: BigInt::one() }
    }

    pub fn from_bigint(v: BigInt) -> Self {
        CycloNum { n: 1, num: vec![v], den: BigInt::one() }
    }

    pub fn from_rational(r: BigRational) -> Self {
        let mut out = CycloNum { n: 1, num: vec![r.numer().clone()], den: r.denom().clone() };
        out.normalize();
        out
    }

    /// `num / den` as a rational constant.
    pub fn frac(num: i64, den: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `zeta_N^k` reduced modulo `Phi_N`.
    pub fn root_of_unity(n: u64, k: i64) -> Self {
        let n = n.max(1);
        let k = k.rem_euclid(n as i64) as usize;
        let mut v = vec![BigInt::zero(); n as usize];
        v[k] = BigInt::one();
        Self::reduce(n, v, BigInt::one()).simplified()
    }

    /// Conductor `N` of the ambient field.
    pub fn conductor(&self) -> u64 {
        self.n
    }

    /// Power-basis coordinates as rationals (length `phi(N)`).
    pub fn coeffs(&self) -> Vec<BigRational> {
        self.num
            .iter()
            .map(|c| BigRational::new(c.clone(), self.den.clone()))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().map(|r| r.is_one()).unwrap_or(false)
    }

    /// The rational value, if the number lies in `Q`.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.num.iter().skip(1).all(|c| c.is_zero()) {
            Some(BigRational::new(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }

    /// Lift into `Q(zeta_m)` for a multiple `m` of the conductor.
    pub fn lift(&self, m: u64) -> Self {
        assert!(m % self.n == 0, "lift target must be a multiple of the conductor");
        if m == self.n {
            return self.clone();
        }
        let step = (m / self.n) as usize;
        let mut v = vec![BigInt::zero(); m as usize];
        for (k, c) in self.num.iter().enumerate() {
            if !c.is_zero() {
                v[k * step] = c.clone();
            }
        }
        Self::reduce(m, v, self.den.clone())
    }

    fn common(a: &Self, b: &Self) -> (Self, Self) {
        if a.n == b.n {
            return (a.clone(), b.clone());
        }
        let l = a.n.lcm(&b.n);
        (a.lift(l), b.lift(l))
    }

    /// Move rational values down to conductor 1.
    fn simplified(self) -> Self {
        if self.n != 1 && self.num.iter().skip(1).all(|c| c.is_zero()) {
            return CycloNum { n: 1, num: vec![self.num[0].clone()], den: self.den };
        }
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = Self::common(self, other);
        let num = a
            .num
            .iter()
            .zip(b.num.iter())
            .map(|(x, y)| x * &b.den + y * &a.den)
            .collect();
        let mut out = CycloNum { n: a.n, num, den: &a.den * &b.den };
        out.normalize();
        out.simplified()
    }

    pub fn neg(&self) -> Self {
        CycloNum { n: self.n, num: self.num.iter().map(|c| -c).collect(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.n == 1 || other.n == 1 {
            let (s, v) = if self.n == 1 { (self, other) } else { (other, self) };
            let c = &s.num[0];
            let mut out = CycloNum {
                n: v.n,
                num: v.num.iter().map(|x| x * c).collect(),
                den: &v.den * &s.den,
            };
            out.normalize();
            return out.simplified();
        }
        let (a, b) = Self::common(self, other);
        let n = a.n as usize;
        let mut acc = vec![BigInt::zero(); n];
        for (i, x) in a.num.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.num.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                acc[(i + j) % n] += x * y;
            }
        }
        Self::reduce(a.n, acc, &a.den * &b.den).simplified()
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self.mul(&Self::from_int(k))
    }

    /// Galois action `zeta_N -> zeta_N^a` for `a` prime to `N`.
    pub fn galois(&self, a: i64) -> Self {
        let n = self.n as i64;
        let a = a.rem_euclid(n.max(1)) as usize;
        let mut v = vec![BigInt::zero(); self.n as usize];
        for (k, c) in self.num.iter().enumerate() {
            if !c.is_zero() {
                v[(k * a) % self.n as usize] += c;
            }
        }
        Self::reduce(self.n, v, self.den.clone()).simplified()
    }

    /// Complex conjugation `zeta_N -> zeta_N^{-1}`.
    pub fn conj(&self) -> Self {
        self.galois(-1)
    }

    pub fn inv(&self) -> Result<Self, CycloError> {
        if self.is_zero() {
            return Err(CycloError::DivisionByZero);
        }
        if let Some(r) = self.as_rational() {
            return Ok(Self::from_rational(r.recip()));
        }
        let c = self.conj();
        let nrm = self.mul(&c);
        if let Some(r) = nrm.as_rational() {
            return Ok(c.mul(&Self::from_rational(r.recip())));
        }
        let mut prod = Self::one();
        for a in 2..self.n as i64 {
            if a.gcd(&(self.n as i64)) == 1 {
                prod = prod.mul(&self.galois(a));
            }
        }
        let total = prod.mul(self);
        let r = total
            .as_rational()
            .expect("the field norm of a nonzero element is a nonzero rational");
        Ok(prod.mul(&Self::from_rational(r.recip())))
    }

    pub fn div(&self, other: &Self) -> Result<Self, CycloError> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<Self, CycloError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut result = Self::one();
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b);
            }
        }
        Ok(result)
    }

    /// `q^e` for an integer base and possibly negative exponent.
    pub fn int_pow(q: u64, e: i64) -> Self {
        let v = num_traits::pow(BigInt::from(q), e.unsigned_abs() as usize);
        if e >= 0 {
            Self::from_bigint(v)
        } else {
            Self::from_rational(BigRational::new(BigInt::one(), v))
        }
    }

    /// Returns `(sign, m)` when `self = sign * q^m` exactly.
    pub fn is_signed_q_power(&self, q: u64) -> Result<Option<(i8, i64)>, CycloError> {
        if self.is_zero() {
            return Err(CycloError::ZeroInput);
        }
        let r = match self.as_rational() {
            Some(r) => r,
            None => return Ok(None),
        };
        let sign: i8 = if r.is_negative() { -1 } else { 1 };
        let r = r.abs();
        let qb = BigInt::from(q);
        let strip = |mut v: BigInt| -> Option<i64> {
            let mut k = 0i64;
            while !v.is_one() {
                let (quo, rem) = v.div_rem(&qb);
                if !rem.is_zero() {
                    return None;
                }
                v = quo;
                k += 1;
            }
            Some(k)
        };
        if q <= 1 {
            return Ok(r.is_one().then_some((sign, 0)));
        }
        match (strip(r.numer().clone()), strip(r.denom().clone())) {
            (Some(a), Some(b)) if a == 0 || b == 0 => Ok(Some((sign, a - b))),
            _ => Ok(None),
        }
    }

    /// Diagnostic complex value; never used to decide equality.
    pub fn approx(&self) -> (f64, f64) {
        let den = self.den.to_f64().unwrap_or(f64::NAN);
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = c.to_f64().unwrap_or(f64::NAN) / den;
            let ang = 2.0 * std::f64::consts::PI * k as f64 / self.n as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        (re, im)
    }

    /// Absolute value of the diagnostic embedding.
    pub fn approx_abs(&self) -> f64 {
        let (re, im) = self.approx();
        re.hypot(im)
    }

    /// Nonzero terms `(exponent, numerator, denominator)` in lowest terms.
    pub fn terms(&self) -> Vec<(u64, BigInt, BigInt)> {
        self.num
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| {
                let r = BigRational::new(c.clone(), self.den.clone());
                (k as u64, r.numer().clone(), r.denom().clone())
            })
            .collect()
    }

    /// Inverse of [`CycloNum::terms`].
    pub fn from_terms(n: u64, terms: &[(u64, BigInt, BigInt)]) -> Result<Self, CycloError> {
        if n == 0 {
            return Err(CycloError::Malformed("conductor 0".into()));
        }
        let phi = euler_phi(n);
        let mut den = BigInt::one();
        for (k, _, b) in terms {
            if *k >= phi {
                return Err(CycloError::Malformed(format!("exponent {k} not below phi({n}) = {phi}")));
            }
            if b.is_zero() {
                return Err(CycloError::Malformed("zero denominator".into()));
            }
            den = den.lcm(b);
        }
        let mut num = vec![BigInt::zero(); phi as usize];
        for (k, a, b) in terms {
            num[*k as usize] += a * (&den / b);
        }
        Ok(Self::from_poly(n, num, den))
    }
}

impl PartialEq for CycloNum {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = Self::common(self, other);
        a.den == b.den && a.num == b.num
    }
}

impl Eq for CycloNum {}

impl fmt::Debug for CycloNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CycloNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, a, b) in terms {
            let neg = a.is_negative();
            let a = a.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let coef = if b.is_one() { format!("{a}") } else { format!("{a}/{b}") };
            match k {
                0 => write!(f, "{coef}")?,
                _ => {
                    let z = if k == 1 { format!("z{}", self.n) } else { format!("z{}^{}", self.n, k) };
                    if a.is_one() && b.is_one() {
                        write!(f, "{z}")?
                    } else {
                        write!(f, "{coef}*{z}")?
                    }
                }
            }
        }
        Ok(())
    }
}

/// JSON form `{"N": n, "terms": [[exponent, "numerator", "denominator"], ...]}`.
#[derive(Serialize, Deserialize)]
struct CycloJson {
    #[serde(rename = "N")]
    n: u64,
    terms: Vec<(u64, String, String)>,
}

impl Serialize for CycloNum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CycloJson {
            n: self.n,
            terms: self
                .terms()
                .into_iter()
                .map(|(k, a, b)| (k, a.to_string(), b.to_string()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CycloNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = CycloJson::deserialize(d)?;
        let mut terms = Vec::with_capacity(j.terms.len());
        for (k, a, b) in j.terms {
            let a: BigInt = a.parse().map_err(|_| D::Error::custom(format!("bad numerator {a}")))?;
            let b: BigInt = b.parse().map_err(|_| D::Error::custom(format!("bad denominator {b}")))?;
            terms.push((k, a, b));
        }
        CycloNum::from_terms(j.n, &terms).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclotomic_polynomials() {
        assert_eq!(*cyclotomic_poly(1), vec![-1, 1]);
        assert_eq!(*cyclotomic_poly(4), vec![1, 0, 1]);
        assert_eq!(*cyclotomic_poly(6), vec![1, -1, 1]);
        for n in 1..200u64 {
            let c = cyclotomic_poly(n);
            assert_eq!(c.len() as u64 - 1, euler_phi(n));
            let at_one: i64 = c.iter().sum();
            let pf = crate::field::prime_factors(n);
            let expected = if n == 1 {
                0
            } else if pf.len() == 1 {
                pf[0] as i64
            } else {
                1
            };
            assert_eq!(at_one, expected, "Phi_{n}(1)");
        }
    }

    #[test]
    fn roots_of_unity() {
        assert_eq!(CycloNum::root_of_unity(1, 0), CycloNum::one());
        let i = CycloNum::root_of_unity(4, 1);
        assert_eq!(i.mul(&i), CycloNum::from_int(-1));
        let s = CycloNum::root_of_unity(3, 1).add(&CycloNum::root_of_unity(3, 2));
        assert_eq!(s, CycloNum::from_int(-1));
        assert_eq!(
            CycloNum::root_of_unity(3, 1).mul(&CycloNum::root_of_unity(3, 2)),
            CycloNum::one()
        );
        assert_eq!(CycloNum::root_of_unity(5, 1).conj(), CycloNum::root_of_unity(5, 4));
    }

    #[test]
    fn inverse_of_one_plus_i() {
        let x = CycloNum::one().add(&CycloNum::root_of_unity(4, 1));
        let expected = CycloNum::one()
            .sub(&CycloNum::root_of_unity(4, 1))
            .mul(&CycloNum::frac(1, 2));
        assert_eq!(x.inv().unwrap(), expected);
        assert_eq!(CycloNum::zero().inv().unwrap_err(), CycloError::DivisionByZero);
    }

    #[test]
    fn inverse_general_element() {
        let z = CycloNum::root_of_unity(7, 1);
        let x = CycloNum::from_int(2).add(&z).add(&z.mul(&z).mul_int(3));
        assert_eq!(x.mul(&x.inv().unwrap()), CycloNum::one());
    }

    #[test]
    fn signed_q_powers() {
        assert_eq!(CycloNum::from_int(-9).is_signed_q_power(3).unwrap(), Some((-1, 2)));
        let z3 = CycloNum::root_of_unity(3, 1).mul_int(3);
        assert_eq!(z3.is_signed_q_power(3).unwrap(), None);
        assert_eq!(CycloNum::frac(1, 5).is_signed_q_power(5).unwrap(), Some((1, -1)));
        assert_eq!(CycloNum::frac(2, 5).is_signed_q_power(5).unwrap(), None);
        assert_eq!(CycloNum::zero().is_signed_q_power(5).unwrap_err(), CycloError::ZeroInput);
    }

    #[test]
    fn json_round_trip() {
        let x = CycloNum::root_of_unity(12, 5).add(&CycloNum::frac(-3, 7));
        let s = serde_json::to_string(&x).unwrap();
        let y: CycloNum = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
        assert_eq!(serde_json::to_string(&y).unwrap(), s);
    }
}
