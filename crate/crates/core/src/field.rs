// SPDX-License-Identifier: Apache-2.0

//! Finite fields `F_{q^l}` with `q = p^m`, their characters, and discrete-log tables.
//!
//! Every field is stored absolutely over `F_p` in a polynomial basis. An element
//! is encoded as the integer `sum c_i p^i` of its coordinates, so codes of the
//! prime subfield are `0..p`.
//!
//! The base field `F_q` uses the lexicographically least irreducible modulus
//! and its least primitive element. An extension `F_{q^n}` uses the least
//! primitive polynomial whose root `z` has norm to every intermediate field
//! `F_{q^d}` (with `d | n`, `d < n`) equal to that field's generator. With this
//! choice the pullback of a character of `F_{q^d}` along the norm has exponent
//! `e * (q^n - 1) / (q^d - 1)`, and `chi(N(x))` is read off the discrete log of
//! `x` directly.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclo::CycloNum;

/// Default bound on the cardinality of any field that gets a full log table.
pub const DEFAULT_SIZE_LIMIT: u64 = 1 << 20;

/// Errors raised by field construction and evaluation.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("extension degree must be positive")]
    ZeroDegree,
    #[error("field of size {size} exceeds the configured limit {limit}")]
    SizeLimitExceeded { size: u128, limit: u64 },
    #[error("degree mismatch: expected an element of degree {expected}, found degree {found}")]
    DegreeMismatch { expected: u32, found: u32 },
    #[error("element code {code} is out of range for a field of size {size}")]
    InvalidElement { code: u64, size: u64 },
    #[error("no compatible primitive polynomial of degree {0} found")]
    NoCompatiblePolynomial(u32),
}

/// Trial-division primality test (desk-scale inputs only).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Distinct prime factors of `n`, ascending.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Dense polynomial arithmetic over `F_p`, coefficients low degree first.
mod fp_poly {
    pub fn trim(a: &mut Vec<u32>) {
        while a.len() > 1 && *a.last().unwrap() == 0 {
            a.pop();
        }
    }

    pub fn is_zero(a: &[u32]) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn inv_mod_p(a: u32, p: u32) -> u32 {
        let mut r = 1u64;
        let mut b = a as u64 % p as u64;
        let mut e = p as u64 - 2;
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p as u64;
            }
            b = b * b % p as u64;
            e >>= 1;
        }
        r as u32
    }

    /// Remainder of `a` modulo the nonzero polynomial `m`.
    pub fn rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        let mut r = a.to_vec();
        trim(&mut r);
        let mut m = m.to_vec();
        trim(&mut m);
        let dm = m.len() - 1;
        let lead_inv = inv_mod_p(m[dm], p) as u64;
        while r.len() > dm && !is_zero(&r) {
            let dr = r.len() - 1;
            let f = r[dr] as u64 * lead_inv % p as u64;
            if f != 0 {
                for i in 0..=dm {
                    let idx = dr - dm + i;
                    r[idx] = ((r[idx] as u64 + (p as u64 - f) * m[i] as u64) % p as u64) as u32;
                }
            }
            r.pop();
            trim(&mut r);
        }
        if r.is_empty() {
            r.push(0);
        }
        r
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        let mut v: Vec<u32> = out.into_iter().map(|c| c as u32).collect();
        trim(&mut v);
        v
    }

    pub fn mulmod(a: &[u32], b: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        rem(&mul(a, b, p), m, p)
    }

    pub fn powmod(base: &[u32], mut e: u128, m: &[u32], p: u32) -> Vec<u32> {
        let mut r = vec![1u32];
        let mut b = rem(base, m, p);
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(&r, &b, m, p);
            }
            b = mulmod(&b, &b, m, p);
            e >>= 1;
        }
        r
    }

    pub fn sub(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let n = a.len().max(b.len());
        let mut v: Vec<u32> = (0..n)
            .map(|i| {
                let x = *a.get(i).unwrap_or(&0);
                let y = *b.get(i).unwrap_or(&0);
                (x + p - y) % p
            })
            .collect();
        trim(&mut v);
        v
    }

    pub fn gcd(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        trim(&mut x);
        trim(&mut y);
        while !is_zero(&y) {
            let r = rem(&x, &y, p);
            x = y;
            y = r;
        }
        x
    }

    /// Rabin's test: `m` (monic, degree n) is irreducible over `F_p`.
    pub fn is_irreducible(m: &[u32], p: u32) -> bool {
        let n = m.len() - 1;
        if n == 0 {
            return false;
        }
        if n == 1 {
            return true;
        }
        let x = vec![0u32, 1];
        let pn = (p as u128).pow(n as u32);
        let xq = powmod(&x, pn, m, p);
        if !is_zero(&sub(&xq, &x, p)) {
            return false;
        }
        for r in super::prime_factors(n as u64) {
            let e = (p as u128).pow((n as u64 / r) as u32);
            let h = sub(&powmod(&x, e, m, p), &x, p);
            let g = gcd(m, &h, p);
            if g.len() > 1 {
                return false;
            }
        }
        true
    }

    /// Monic polynomial of degree `n` whose lower coefficients are the base-p digits of `code`.
    pub fn monic_from_code(code: u64, n: usize, p: u32) -> Vec<u32> {
        let mut v = Vec::with_capacity(n + 1);
        let mut c = code;
        for _ in 0..n {
            v.push((c % p as u64) as u32);
            c /= p as u64;
        }
        v.push(1);
        v
    }
}

/// The absolute field `F_{p^n}` with full exp/log tables.
#[derive(Debug)]
pub struct GfTables {
    p: u32,
    n: u32,
    size: u32,
    modulus: Vec<u32>,
    generator: u32,
    pw: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
    trace_basis: Vec<u32>,
}

const NO_LOG: u32 = u32::MAX;

impl GfTables {
    fn build(p: u32, n: u32, modulus: Vec<u32>, generator: u32) -> Self {
        let size = p.pow(n);
        let pw: Vec<u32> = (0..n).map(|i| p.pow(i)).collect();
        let order = (size - 1) as usize;
        let gvec = Self::digits_of(generator, p, n);
        let mut exp = Vec::with_capacity(order);
        let mut log = vec![NO_LOG; size as usize];
        let mut cur = vec![1u32];
        for i in 0..order {
            let code = Self::code_of(&cur, &pw);
            debug_assert_eq!(log[code as usize], NO_LOG, "generator is not primitive");
            log[code as usize] = i as u32;
            exp.push(code);
            cur = fp_poly::mulmod(&cur, &gvec, &modulus, p);
        }
        let mut t = GfTables {
            p,
            n,
            size,
            modulus,
            generator,
            pw,
            exp,
            log,
            trace_basis: Vec::new(),
        };
        t.trace_basis = (0..n).map(|i| t.slow_trace(t.pw[i as usize])).collect();
        t
    }

    fn digits_of(code: u32, p: u32, n: u32) -> Vec<u32> {
        let mut v = Vec::with_capacity(n as usize);
        let mut c = code;
        for _ in 0..n {
            v.push(c % p);
            c /= p;
        }
        fp_poly::trim(&mut v);
        v
    }

    fn code_of(v: &[u32], pw: &[u32]) -> u32 {
        v.iter().zip(pw.iter()).map(|(c, w)| c * w).sum()
    }

    fn slow_trace(&self, x: u32) -> u32 {
        let mut acc = 0u32;
        let mut y = x;
        for _ in 0..self.n {
            acc = self.add(acc, y);
            y = self.pow(y, self.p as u64);
        }
        debug_assert!(acc < self.p, "trace must lie in the prime field");
        acc
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }
    /// Absolute degree over `F_p`.
    pub fn abs_degree(&self) -> u32 {
        self.n
    }
    pub fn size(&self) -> u32 {
        self.size
    }
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }
    pub fn generator(&self) -> u32 {
        self.generator
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        let (mut a, mut b, p) = (a, b, self.p);
        let mut r = 0;
        let mut w = 1;
        while a > 0 || b > 0 {
            let s = (a % p + b % p) % p;
            r += s * w;
            a /= p;
            b /= p;
            w *= p;
        }
        r
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if self.p == 2 {
            return a;
        }
        let (mut a, p) = (a, self.p);
        let mut r = 0;
        let mut w = 1;
        while a > 0 {
            r += ((p - a % p) % p) * w;
            a /= p;
            w *= p;
        }
        r
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        let (mut a, mut b, p) = (a, b, self.p);
        let mut r = 0;
        let mut w = 1;
        while a > 0 || b > 0 {
            let s = (a % p + p - b % p) % p;
            r += s * w;
            a /= p;
            b /= p;
            w *= p;
        }
        r
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let o = self.size - 1;
        let s = self.log[a as usize] as u64 + self.log[b as usize] as u64;
        self.exp[(s % o as u64) as usize]
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let o = self.size - 1;
        Some(self.exp[((o - self.log[a as usize]) % o) as usize])
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let o = (self.size - 1) as u64;
        self.exp[((self.log[a as usize] as u64 % o) * (e % o) % o) as usize]
    }

    /// Discrete log with respect to the generator; `None` for zero.
    #[inline]
    pub fn log(&self, a: u32) -> Option<u32> {
        let l = self.log[a as usize];
        (l != NO_LOG).then_some(l)
    }

    #[inline]
    pub fn exp(&self, e: u64) -> u32 {
        self.exp[(e % (self.size as u64 - 1)) as usize]
    }

    /// Absolute trace to `F_p`.
    #[inline]
    pub fn trace(&self, a: u32) -> u32 {
        let p = self.p;
        let mut acc = 0u32;
        let mut a = a;
        let mut i = 0;
        while a > 0 {
            acc = (acc + (a % p) * self.trace_basis[i]) % p;
            a /= p;
            i += 1;
        }
        acc
    }

    /// Element `c * 1` of the prime subfield.
    pub fn from_prime(&self, c: u64) -> u32 {
        (c % self.p as u64) as u32
    }
}

/// A multiplicative character of `F_{q^l}^x`: `chi(generator_l) = zeta_{q^l-1}^e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MulChar {
    pub l: u32,
    pub e: u64,
}

impl MulChar {
    pub fn trivial(l: u32) -> Self {
        MulChar { l, e: 0 }
    }
    pub fn is_trivial(&self) -> bool {
        self.e == 0
    }
}

/// An element of `F_{q^l}` stored as ZERO or a power of the level generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElem {
    pub l: u32,
    pub exp: Option<u64>,
}

/// The base field `F_q` together with its lazily built extensions.
#[derive(Debug)]
pub struct FieldSpec {
    p: u32,
    m: u32,
    q: u64,
    limit: u64,
    base: Arc<GfTables>,
    base_gen_minpoly: Vec<u32>,
    levels: Mutex<BTreeMap<u32, Arc<GfTables>>>,
    sum_cache: Mutex<HashMap<(u8, MulChar, MulChar), CycloNum>>,
}

/// Serializable description `{p, m, modulus, generator}` of a base field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub p: u32,
    pub m: u32,
    pub modulus: Vec<u32>,
    pub generator: u32,
}

/// Build the base field `F_{p^m}` with the default size limit.
pub fn make_field(p: u64, m: u32) -> Result<Arc<FieldSpec>, FieldError> {
    FieldSpec::new(p, m, DEFAULT_SIZE_LIMIT)
}

impl FieldSpec {
    pub fn new(p: u64, m: u32, limit: u64) -> Result<Arc<Self>, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if m == 0 {
            return Err(FieldError::ZeroDegree);
        }
        let size = (p as u128).pow(m);
        if size > limit as u128 {
            return Err(FieldError::SizeLimitExceeded { size, limit });
        }
        let p32 = p as u32;
        let modulus = (0..(size as u64))
            .map(|c| fp_poly::monic_from_code(c, m as usize, p32))
            .find(|f| fp_poly::is_irreducible(f, p32))
            .expect("an irreducible polynomial of every degree exists");
        let order = size as u64 - 1;
        let factors = prime_factors(order);
        let generator = (1..size as u32)
            .find(|&g| {
                let gv = GfTables::digits_of(g, p32, m);
                factors.iter().all(|r| {
                    let t = fp_poly::powmod(&gv, (order / r) as u128, &modulus, p32);
                    t != vec![1]
                }) && fp_poly::powmod(&gv, order as u128, &modulus, p32) == vec![1]
            })
            .expect("F_q^x is cyclic");
        let base = Arc::new(GfTables::build(p32, m, modulus, generator));
        let base_gen_minpoly = minimal_polynomial(&base, generator);
        Ok(Arc::new(FieldSpec {
            p: p32,
            m,
            q: size as u64,
            limit,
            base,
            base_gen_minpoly,
            levels: Mutex::new(BTreeMap::new()),
            sum_cache: Mutex::new(HashMap::new()),
        }))
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn q(&self) -> u64 {
        self.q
    }
    pub fn size_limit(&self) -> u64 {
        self.limit
    }
    pub fn base(&self) -> &Arc<GfTables> {
        &self.base
    }
    /// `q^l` as an integer.
    pub fn q_pow(&self, l: u32) -> u64 {
        self.q.pow(l)
    }

    pub fn descriptor(&self) -> FieldDescriptor {
        FieldDescriptor {
            p: self.p,
            m: self.m,
            modulus: self.base.modulus.clone(),
            generator: self.base.generator,
        }
    }

    /// Memoized character sum keyed by a kind tag and two characters.
    pub(crate) fn cached_sum(
        &self,
        key: (u8, MulChar, MulChar),
        compute: impl FnOnce() -> Result<CycloNum, FieldError>,
    ) -> Result<CycloNum, FieldError> {
        if let Some(v) = self.sum_cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = compute()?;
        self.sum_cache.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// Tables for `F_{q^l}`; `l = 1` is the base field.
    pub fn level(&self, l: u32) -> Result<Arc<GfTables>, FieldError> {
        if l == 0 {
            return Err(FieldError::ZeroDegree);
        }
        if l == 1 {
            return Ok(self.base.clone());
        }
        let size = (self.q as u128).pow(l);
        if size > self.limit as u128 {
            return Err(FieldError::SizeLimitExceeded { size, limit: self.limit });
        }
        if let Some(t) = self.levels.lock().unwrap().get(&l) {
            return Ok(t.clone());
        }
        let mut divisors: Vec<u32> = (1..l).filter(|d| l % d == 0).collect();
        divisors.sort();
        let sub: Vec<(u32, Arc<GfTables>)> = divisors
            .iter()
            .map(|&d| self.level(d).map(|t| (d, t)))
            .collect::<Result<_, _>>()?;
        let built = Arc::new(self.build_extension(l, &sub)?);
        let mut guard = self.levels.lock().unwrap();
        Ok(guard.entry(l).or_insert(built).clone())
    }

    fn build_extension(&self, l: u32, sub: &[(u32, Arc<GfTables>)]) -> Result<GfTables, FieldError> {
        let p = self.p;
        let n = self.m * l;
        let size = (p as u64).pow(n);
        let order = size - 1;
        let factors = prime_factors(order);
        let x = vec![0u32, 1];
        for code in 0..(p as u64).pow(n) {
            let f = fp_poly::monic_from_code(code, n as usize, p);
            if f[0] == 0 {
                continue;
            }
            if fp_poly::powmod(&x, order as u128, &f, p) != vec![1] {
                continue;
            }
            if factors
                .iter()
                .any(|r| fp_poly::powmod(&x, (order / r) as u128, &f, p) == vec![1])
            {
                continue;
            }
            let compatible = sub.iter().all(|(d, t)| {
                let qd = self.q.pow(*d);
                let e = (order / (qd - 1)) as u128;
                let w = fp_poly::powmod(&x, e, &f, p);
                let minpoly = if *d == 1 {
                    self.base_gen_minpoly.clone()
                } else {
                    t.modulus.clone()
                };
                let mut acc = vec![0u32];
                for &c in minpoly.iter().rev() {
                    acc = fp_poly::mulmod(&acc, &w, &f, p);
                    acc = fp_poly::rem(&add_const(&acc, c, p), &f, p);
                }
                fp_poly::is_zero(&acc)
            });
            if compatible {
                return Ok(GfTables::build(p, n, f, p));
            }
        }
        Err(FieldError::NoCompatiblePolynomial(n))
    }

    /// Embed an element of `F_{q^d}` into `F_{q^n}` (`d | n`).
    pub fn embed(&self, x: u32, d: u32, n: u32) -> Result<u32, FieldError> {
        if n % d != 0 {
            return Err(FieldError::DegreeMismatch { expected: n, found: d });
        }
        if d == n {
            return Ok(x);
        }
        let td = self.level(d)?;
        let tn = self.level(n)?;
        Ok(match td.log(x) {
            None => 0,
            Some(lg) => {
                let scale = (self.q_pow(n) - 1) / (self.q_pow(d) - 1);
                tn.exp(lg as u64 * scale)
            }
        })
    }

    /// Norm `N_{F_{q^n}/F_{q^d}}` of an element of `F_{q^n}`.
    pub fn norm(&self, x: u32, n: u32, d: u32) -> Result<u32, FieldError> {
        if n % d != 0 {
            return Err(FieldError::DegreeMismatch { expected: n, found: d });
        }
        let tn = self.level(n)?;
        let td = self.level(d)?;
        Ok(match tn.log(x) {
            None => 0,
            Some(lg) => td.exp(lg as u64 % (self.q_pow(d) - 1)),
        })
    }

    /// Pull a character of `F_{q^d}` back to `F_{q^n}` along the norm.
    pub fn pullback(&self, chi: MulChar, n: u32) -> Result<MulChar, FieldError> {
        if n % chi.l != 0 {
            return Err(FieldError::DegreeMismatch { expected: n, found: chi.l });
        }
        let scale = (self.q_pow(n) - 1) / (self.q_pow(chi.l) - 1);
        let modulus = self.q_pow(n) - 1;
        Ok(MulChar {
            l: n,
            e: ((chi.e as u128 * scale as u128) % modulus as u128) as u64,
        })
    }

    /// Normalize a character exponent into `Z/(q^l - 1)`.
    pub fn mul_char(&self, l: u32, e: i64) -> MulChar {
        let m = (self.q_pow(l) - 1) as i64;
        MulChar { l, e: e.rem_euclid(m) as u64 }
    }

    /// The quadratic character of `F_{q^l}` (odd `q` only).
    pub fn quadratic(&self, l: u32) -> Option<MulChar> {
        (self.p != 2).then(|| MulChar { l, e: (self.q_pow(l) - 1) / 2 })
    }

    pub fn char_order(&self, chi: MulChar) -> u64 {
        let m = self.q_pow(chi.l) - 1;
        m / num_integer::gcd(chi.e, m)
    }

    pub fn char_inv(&self, chi: MulChar) -> MulChar {
        let m = self.q_pow(chi.l) - 1;
        MulChar { l: chi.l, e: (m - chi.e % m) % m }
    }

    pub fn char_mul(&self, a: MulChar, b: MulChar) -> Result<MulChar, FieldError> {
        if a.l != b.l {
            return Err(FieldError::DegreeMismatch { expected: a.l, found: b.l });
        }
        let m = self.q_pow(a.l) - 1;
        Ok(MulChar { l: a.l, e: (a.e + b.e) % m })
    }

    pub fn char_pow(&self, a: MulChar, k: i64) -> MulChar {
        let m = (self.q_pow(a.l) - 1) as i128;
        MulChar {
            l: a.l,
            e: ((a.e as i128 * k as i128).rem_euclid(m)) as u64,
        }
    }

    /// Whether `chi` is the quadratic character.
    pub fn is_quadratic(&self, chi: MulChar) -> bool {
        self.q % 2 == 1 && chi.e == (self.q_pow(chi.l) - 1) / 2
    }

    /// Value of `chi` at a nonzero element code as a root-of-unity exponent
    /// `(order, k)` meaning `zeta_order^k`; `None` at zero.
    pub fn char_exp_code(&self, chi: MulChar, x: u32) -> Result<Option<(u64, u64)>, FieldError> {
        let t = self.level(chi.l)?;
        if x >= t.size() {
            return Err(FieldError::InvalidElement { code: x as u64, size: t.size() as u64 });
        }
        let modulus = self.q_pow(chi.l) - 1;
        let g = num_integer::gcd(chi.e, modulus);
        let ord = modulus / g;
        Ok(t.log(x).map(|lg| (ord, ((chi.e / g) as u128 * lg as u128 % ord as u128) as u64)))
    }

    /// `chi(x)` for an element code of `F_{q^l}`; zero maps to 0 for every character.
    pub fn char_eval_code(&self, chi: MulChar, x: u32) -> Result<CycloNum, FieldError> {
        Ok(match self.char_exp_code(chi, x)? {
            None => CycloNum::zero(),
            Some((ord, k)) => CycloNum::root_of_unity(ord, k as i64),
        })
    }

    /// `chi(x)` with the exponent representation of `x`.
    pub fn char_eval(&self, chi: MulChar, x: FieldElem) -> Result<CycloNum, FieldError> {
        if x.l != chi.l {
            return Err(FieldError::DegreeMismatch { expected: chi.l, found: x.l });
        }
        let modulus = self.q_pow(chi.l) - 1;
        Ok(match x.exp {
            None => CycloNum::zero(),
            Some(k) => {
                let g = num_integer::gcd(chi.e, modulus);
                let ord = modulus / g;
                CycloNum::root_of_unity(ord, ((chi.e / g) as u128 * (k % modulus) as u128 % ord as u128) as i64)
            }
        })
    }

    /// `psi(x) = zeta_p^{Tr(x)}` for `x` in `F_{q^l}`.
    pub fn add_char_eval(&self, x: FieldElem) -> Result<CycloNum, FieldError> {
        let code = self.code_of(x)?;
        let t = self.level(x.l)?;
        Ok(CycloNum::root_of_unity(self.p as u64, t.trace(code) as i64))
    }

    /// `chi(N_{F_{q^d}/F_q}(x))` for a base character `chi` and `x` in `F_{q^d}`.
    pub fn norm_and_char(&self, chi: MulChar, x: FieldElem) -> Result<CycloNum, FieldError> {
        let n = self.norm(self.code_of(x)?, x.l, chi.l)?;
        self.char_eval_code(chi, n)
    }

    pub fn code_of(&self, x: FieldElem) -> Result<u32, FieldError> {
        let t = self.level(x.l)?;
        Ok(match x.exp {
            None => 0,
            Some(k) => t.exp(k),
        })
    }

    pub fn elem_of(&self, code: u32, l: u32) -> Result<FieldElem, FieldError> {
        let t = self.level(l)?;
        if code >= t.size() {
            return Err(FieldError::InvalidElement { code: code as u64, size: t.size() as u64 });
        }
        Ok(FieldElem { l, exp: t.log(code).map(|v| v as u64) })
    }

    /// Generator of `F_{q^l}` as a [`FieldElem`].
    pub fn generator_elem(&self, l: u32) -> FieldElem {
        FieldElem { l, exp: Some(1) }
    }

    /// Evaluate a polynomial with base-field coefficients (low degree first) at `x` in `F_{q^n}`.
    pub fn eval_poly(&self, coeffs: &[u32], x: u32, n: u32) -> Result<u32, FieldError> {
        let t = self.level(n)?;
        let mut acc = 0u32;
        for &c in coeffs.iter().rev() {
            acc = t.add(t.mul(acc, x), self.embed(c, 1, n)?);
        }
        Ok(acc)
    }

    /// Roots in `F_{q^n}` of a polynomial over `F_q`, ascending by code.
    pub fn roots_in(&self, coeffs: &[u32], n: u32) -> Result<Vec<u32>, FieldError> {
        let t = self.level(n)?;
        let emb: Vec<u32> = coeffs
            .iter()
            .map(|&c| self.embed(c, 1, n))
            .collect::<Result<_, _>>()?;
        Ok((0..t.size())
            .filter(|&x| {
                let mut acc = 0u32;
                for &c in emb.iter().rev() {
                    acc = t.add(t.mul(acc, x), c);
                }
                acc == 0
            })
            .collect())
    }

    /// Irreducibility of a monic polynomial over `F_q`: no root in any `F_{q^j}` with `j <= deg/2`.
    pub fn is_irreducible_over_base(&self, coeffs: &[u32]) -> Result<bool, FieldError> {
        let d = coeffs.len().saturating_sub(1) as u32;
        if d == 0 {
            return Ok(false);
        }
        for j in 1..=d / 2 {
            if !self.roots_in(coeffs, j)?.is_empty() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn add_const(a: &[u32], c: u32, p: u32) -> Vec<u32> {
    let mut v = a.to_vec();
    if v.is_empty() {
        v.push(0);
    }
    v[0] = (v[0] + c) % p;
    v
}

/// Minimal polynomial over `F_p` of an element of the given field (low degree first).
fn minimal_polynomial(t: &GfTables, x: u32) -> Vec<u32> {
    let mut conj = vec![x];
    let mut y = t.pow(x, t.p as u64);
    while y != x {
        conj.push(y);
        y = t.pow(y, t.p as u64);
    }
    let mut poly = vec![1u32];
    for c in conj {
        let mut next = vec![0u32; poly.len() + 1];
        for (i, &a) in poly.iter().enumerate() {
            next[i + 1] = t.add(next[i + 1], a);
            next[i] = t.add(next[i], t.neg(t.mul(a, c)));
        }
        poly = next;
    }
    debug_assert!(poly.iter().all(|&c| c < t.p), "minimal polynomial has prime-field coefficients");
    poly
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_generators() {
        assert_eq!(make_field(3, 1).unwrap().base().generator(), 2);
        assert_eq!(make_field(5, 1).unwrap().base().generator(), 2);
        assert_eq!(make_field(7, 1).unwrap().base().generator(), 3);
        let f4 = make_field(2, 2).unwrap();
        assert_eq!(f4.base().modulus(), &[1, 1, 1]);
        let f9 = make_field(3, 2).unwrap();
        assert_eq!(f9.base().modulus(), &[1, 0, 1]);
        assert_eq!(f9.base().generator(), 4);
    }

    #[test]
    fn not_prime_and_limit() {
        assert_eq!(make_field(4, 1).unwrap_err(), FieldError::NotPrime(4));
        assert!(matches!(make_field(2, 21), Err(FieldError::SizeLimitExceeded { .. })));
    }

    #[test]
    fn extension_norm_compatibility() {
        let f = make_field(3, 2).unwrap();
        for n in [2u32, 3, 4] {
            let t = f.level(n).unwrap();
            let g = t.exp(1);
            assert_eq!(f.norm(g, n, 1).unwrap(), f.base().generator());
            for d in (2..n).filter(|d| n % d == 0) {
                let gd = f.level(d).unwrap().exp(1);
                assert_eq!(f.norm(g, n, d).unwrap(), gd);
            }
        }
    }

    #[test]
    fn embedding_is_a_ring_map() {
        let f = make_field(5, 1).unwrap();
        let b = f.base();
        let t = f.level(2).unwrap();
        for x in 0..5u32 {
            for y in 0..5u32 {
                let ex = f.embed(x, 1, 2).unwrap();
                let ey = f.embed(y, 1, 2).unwrap();
                assert_eq!(f.embed(b.add(x, y), 1, 2).unwrap(), t.add(ex, ey));
                assert_eq!(f.embed(b.mul(x, y), 1, 2).unwrap(), t.mul(ex, ey));
            }
        }
    }
}
